"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A model, taming spec or run configuration is internally inconsistent."""


class InputError(ValueError):
    """A caller passed values outside an operation's domain (wrong shape, non-finite, ...)."""
