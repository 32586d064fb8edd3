"""Surface-code initialization and lattice surgery with non-Pauli stabilizers."""

__version__ = "0.1.0"
