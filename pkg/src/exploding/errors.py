"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a structural invariant.

    ``problems`` is a list of ``{"code", "message", "index"}`` dicts so that a
    single call can report every violated invariant at once.
    """

    def __init__(self, problems):
        if isinstance(problems, dict):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(p["message"] for p in self.problems))

    @property
    def code(self):
        return self.problems[0]["code"]

    @classmethod
    def single(cls, code, message, index=None):
        return cls([{"code": code, "message": message, "index": index}])


class UnsupportedModeError(ValueError):
    """Operation is not available for the operator's backend."""


class DepthBudgetError(RuntimeError):
    """A cylinder table would exceed the configured depth budget."""

    def __init__(self, depth, budget, step=None):
        self.depth = depth
        self.budget = budget
        self.step = step
        where = f" at iteration {step}" if step is not None else ""
        super().__init__(f"table depth {depth} exceeds budget {budget}{where}")
