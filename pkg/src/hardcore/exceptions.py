"""Exception types raised by the samplers and estimators."""


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class BudgetExceeded(RuntimeError):
    """Rejection sampling ran out of proposals.

    The empirical acceptance rate is attached so callers can tell how far
    the requested regime is from being feasible.
    """

    def __init__(self, message, acceptance_rate, proposals):
        super().__init__(f"{message} (acceptance rate {acceptance_rate:.3g} over {proposals} proposals)")
        self.acceptance_rate = acceptance_rate
        self.proposals = proposals


class TruncationInsufficient(RuntimeError):
    """A truncated partition series cannot bound its dropped tail."""

    def __init__(self, message, tail_bound):
        super().__init__(message)
        self.tail_bound = tail_bound
