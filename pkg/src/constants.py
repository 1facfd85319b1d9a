"""Application-wide numerical constants.

Centralizes tolerances and size limits so every module agrees on them.
"""

# Eigen-tolerances
HERMITIAN_TOL = 1e-10  # Accepted symmetry residual for eigendecompositions
HERMITIAN_FLAG_TOL = 1e-12  # Residual for operators flagged Hermitian
DEGENERACY_TOL = 1e-8  # Relative grouping tolerance for energies/Bohr frequencies
NULL_SPACE_TOL = 1e-9  # Relative magnitude counted as a zero eigenvalue
EIGENVALUE_FLOOR = 1e-14  # Smallest eigenvalue allowed under negative powers
RESIDUAL_TOL = 1e-10  # Generic identity residual
REAL_FLAG_TOL = 1e-14  # Imaginary part allowed on real-flagged filters

# Size limits (qubits)
MAX_QUBITS_OPERATOR = 5
MAX_QUBITS_SUPEROPERATOR = 4
MAX_QUBITS_REGISTER = 13

# Physics limits
BETA_CAP_FACTOR = 50.0  # beta <= BETA_CAP_FACTOR / ||H||
ADB_CONSTANT = 132.0  # Prefactor of the secular detailed-balance bound
MIXING_THRESHOLD = 0.5  # Contraction ratio defining the mixing time

# Circuit checks
UNITARY_TOL = 1e-10
BLOCK_TOL = 1e-9

# File management
LOG_ROTATION_BYTES = 10 * 1024 * 1024  # Rotate logs at 10MB
LOG_BACKUP_COUNT = 5

__all__ = [
    # Eigen-tolerances
    "HERMITIAN_TOL",
    "HERMITIAN_FLAG_TOL",
    "DEGENERACY_TOL",
    "NULL_SPACE_TOL",
    "EIGENVALUE_FLOOR",
    "RESIDUAL_TOL",
    "REAL_FLAG_TOL",
    # Size limits
    "MAX_QUBITS_OPERATOR",
    "MAX_QUBITS_SUPEROPERATOR",
    "MAX_QUBITS_REGISTER",
    # Physics
    "BETA_CAP_FACTOR",
    "ADB_CONSTANT",
    "MIXING_THRESHOLD",
    # Circuits
    "UNITARY_TOL",
    "BLOCK_TOL",
    # Files
    "LOG_ROTATION_BYTES",
    "LOG_BACKUP_COUNT",
]
