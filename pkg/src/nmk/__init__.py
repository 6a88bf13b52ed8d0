"""Identification of non-Markovian dephasing from process-capability robustness."""
__version__ = "0.1.0"
