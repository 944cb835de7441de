class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class RetryExhaustedError(RuntimeError):
    """Rejection sampling gave up before producing a sample."""

    def __init__(self, attempts, message=None):
        self.attempts = attempts
        super().__init__(message or f"rejection budget exhausted after {attempts} attempts")


class ConfigError(ValueError):
    """A run configuration failed validation.

    ``errors`` holds one ``(key, message)`` pair per problem found.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "; ".join(f"{k}: {m}" for k, m in self.errors)
        super().__init__(f"invalid configuration: {lines}")
