"""Procmetric - distance measures and error bounds for quantum processes"""

__version__ = "0.1.0"
