# ------------------ Error Types ------------------


class FhnIdentError(ValueError):
    """Base class for every domain error raised by this package."""


class ValidationError(FhnIdentError):
    """A value violates a documented invariant; the message names the invariant."""


class ParseError(FhnIdentError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class NonRecoverable(FhnIdentError):
    """Theta cannot be mapped back to (a, b, c, eps)."""


class NonFiniteState(FhnIdentError):
    def __init__(self, t):
        self.t = t
        super().__init__(f"integration produced a non-finite state at t = {t:.6g}")


class WindowOutOfRange(FhnIdentError):
    pass


class NotSymmetric(FhnIdentError):
    pass


class NonUniformSampling(FhnIdentError):
    pass


class ChannelCountMismatch(FhnIdentError):
    pass


class ExportError(FhnIdentError):
    """A run artifact could not be written; the message carries the path."""


class NonPhysicalWarning(UserWarning):
    """Recovered eps <= 0 or b <= 0: the estimate has no physiological reading."""
