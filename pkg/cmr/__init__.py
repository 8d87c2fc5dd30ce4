from .app import entry_point as cli  # noqa: F401
