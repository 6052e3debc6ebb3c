"""Permissioned, layered ledger simulator for tracking spent-fuel shipments."""

__version__ = "0.1.0"
