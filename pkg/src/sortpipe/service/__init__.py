"""HTTP service over the core library (FastAPI)."""

from .app import app, create_app

__all__ = ["app", "create_app"]
