class NonPhysicalError(ValueError):
    """Input data cannot come from any physical state or channel."""


class TruncationError(ValueError):
    """Fock truncation discards more weight than allowed."""
