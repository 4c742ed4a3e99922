"""Second-order correlations of two-photon interference at a balanced beam splitter."""

__version__ = "0.1.0"
