"""Incremental data-uploading circuits: simulation, training and analysis."""
__version__ = "0.1.0"
