class AdmissionsError(Exception):
    """Base class for every error raised by the admissions toolkit."""


class InvalidInputError(AdmissionsError, ValueError):
    """An instance, matching or configuration does not satisfy its invariants."""


class EnumerationBudgetExceeded(AdmissionsError):
    """Exact enumeration would visit more profiles than the configured budget allows."""

    def __init__(self, required, budget):
        self.required = required
        self.budget = budget
        super().__init__(
            f"Exact enumeration needs {required} preference profiles, budget is {budget}"
        )


class PropositionViolation(AdmissionsError, AssertionError):
    """An enumerated distribution broke one of the ex-ante comparison clauses."""

    def __init__(self, position, rank, detail):
        self.position = position
        self.rank = rank
        self.detail = detail
        super().__init__(f"position {position}, rank {rank}: {detail}")


class LinkageTruthMismatch(InvalidInputError):
    """Ground-truth ids do not line up with the linked snapshot rows."""


class AcceptanceCheckFailed(AdmissionsError):
    """One or more reproduction checks failed; carries the names of the failing checks."""

    def __init__(self, failed):
        self.failed = tuple(failed)
        super().__init__(f"Failed checks: {', '.join(self.failed)}")
