class InputError(ValueError):
    """Malformed model, instance or file contents."""


class ResourceLimitError(RuntimeError):
    """An internal work limit (e.g. simplex iterations) was exhausted."""
