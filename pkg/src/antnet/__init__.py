"""Deterministic discrete-event simulator for ant-colony adaptive routing."""

__version__ = "0.1.0"
