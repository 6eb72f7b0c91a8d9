"""Scheduling reductions in systems of affine recurrence equations on exclusive-write machines."""

__version__ = "0.1.0"
