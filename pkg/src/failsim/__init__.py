"""Reliability and inspection planning for repairable multi-component systems
under gamma-process degradation and degradation-dependent random shocks."""

__version__ = "0.1.0"
