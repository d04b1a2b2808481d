"""Root patterns of the antiperiodic XXZ chain: exact diagonalization, functional relations
and thermodynamic-limit formulas."""

__version__ = "0.1.0"
