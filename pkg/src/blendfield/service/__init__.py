from .app import ModelSnapshot, create_app, serve

__all__ = ["ModelSnapshot", "create_app", "serve"]
