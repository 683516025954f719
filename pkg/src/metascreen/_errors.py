class DomainError(ValueError):
    """Raised when an argument lies outside the domain an operation accepts."""
