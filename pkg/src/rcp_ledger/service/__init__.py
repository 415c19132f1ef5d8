"""HTTP service wrapping the ledger engine."""

from .app import create_app

__all__ = ["create_app"]
