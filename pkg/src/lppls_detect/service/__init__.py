"""HTTP service wrapping the detection pipelines."""

from .app import create_app

__all__ = ["create_app"]
