"""Numerical core: operators, Fourier transforms, generators, discriminants and circuits."""
