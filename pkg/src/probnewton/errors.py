"""Exception types shared across the analysis pipeline."""


class UnknownAction(ValueError):
    """A domain was asked to interpret a data action it does not support."""

    def __init__(self, action: str, domain: str = ""):
        self.action = action
        suffix = f" in domain {domain}" if domain else ""
        super().__init__(f"unsupported data action {action!r}{suffix}")


class UnknownCondition(ValueError):
    """A domain was asked to interpret a condition it does not support."""

    def __init__(self, cond: str, domain: str = ""):
        self.cond = cond
        suffix = f" in domain {domain}" if domain else ""
        super().__init__(f"unsupported condition {cond!r}{suffix}")


class SubtractUndefined(ArithmeticError):
    """a ⊖ b requested with b not below a; signals a non-monotone state."""


class SolveFailure(RuntimeError):
    """A linear-recursion-solving strategy could not produce a least solution."""

    def __init__(self, message: str, status: str = "", detail: str = ""):
        self.status = status
        self.detail = detail
        super().__init__(message)


class NonMonotoneRound(RuntimeError):
    """A Newton round broke the monotone sandwich beyond tolerance."""


class NdetUnsupported(ValueError):
    """The Monte-Carlo oracle refuses programs with nondeterministic choice."""


class InputError(ValueError):
    """Bad program text, bad JSON input, or malformed option files."""
