"""Test suite for tinysh-content-factory."""
