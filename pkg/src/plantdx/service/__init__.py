from .app import ModelRegistry, create_app, load_registry

__all__ = ["ModelRegistry", "create_app", "load_registry"]
