"""HTTP service wrapping the pipeline stages."""

from chainforge.service.app import create_app

__all__ = ["create_app"]
