"""Exception types raised by the solver and its drivers."""


class NonpositiveRadicand(ValueError):
    """``2 F_B(Q) + A0 <= 0`` somewhere: the quadratization shift is too small."""

    def __init__(self, message, index=None, value=None, suggested_A0=None):
        super().__init__(message)
        self.index = index
        self.value = value
        self.suggested_A0 = suggested_A0


class GridMismatch(ValueError):
    """A field's array shape does not match the grid it is used with."""


class NotConverged(RuntimeError):
    """The linear solver hit ``max_iter`` before reaching its tolerance."""

    def __init__(self, report):
        super().__init__(
            f"CG did not converge: {report.iterations} iterations, "
            f"relative residual {report.residual:.3e}"
        )
        self.report = report


class RPositivityLost(RuntimeError):
    """The auxiliary variable became nonpositive at some node."""

    def __init__(self, step, r_min):
        super().__init__(f"auxiliary variable lost positivity at step {step}: min r = {r_min!r}")
        self.step = step
        self.r_min = r_min


class RPositivityWarning(RuntimeWarning):
    pass


class ReferenceUnconverged(RuntimeError):
    """Fine reference failed its dt-halving self-consistency gate."""


class OutOfRange(ValueError):
    pass


class StrideTooCoarse(ValueError):
    pass


class ConfigParseError(ValueError):
    def __init__(self, message, line=None, field=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.line = line
        self.field = field


class ConfigValidationError(ValueError):
    """Aggregates every violated config invariant, not just the first."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid config:\n" + "\n".join(f"  - {f}: {m}" for f, m in self.violations))

    @property
    def fields(self):
        return [f for f, _ in self.violations]
