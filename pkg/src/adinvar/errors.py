"""Exception hierarchy shared by all adinvar modules."""


class AdinvarError(Exception):
    """Base class for every error raised by this package."""


class ParseError(AdinvarError):
    """Malformed SAC text. Carries 1-based ``line`` and ``column``."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)
        self.message = message


class DomainError(AdinvarError, ValueError):
    """An elemental was evaluated outside its domain."""

    def __init__(self, message, elemental=None, step=None):
        self.message = message
        self.elemental = elemental
        self.step = step
        super().__init__(self._render())

    def _render(self):
        parts = []
        if self.step is not None:
            parts.append(f"step {self.step}")
        if self.elemental is not None:
            parts.append(self.elemental)
        prefix = " ".join(parts)
        return f"{prefix}: {self.message}" if prefix else self.message

    def at_step(self, step, elemental):
        """Return a copy of this error located at ``step``."""
        return type(self)(self.message, elemental=elemental, step=step)


class NonDifferentiableError(DomainError):
    """An elemental partial was requested at a point where it does not exist."""


class SeedShapeError(AdinvarError, ValueError):
    pass


class OrderCapError(AdinvarError, ValueError):
    pass


class SizeGuardError(AdinvarError, ValueError):
    pass


class FaultSpecError(AdinvarError, ValueError):
    pass
