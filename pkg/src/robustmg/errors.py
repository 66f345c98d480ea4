"""Exception types raised across the package.

Everything derives from :class:`RMGError`. Input problems additionally derive
from :class:`ValueError` so callers that only know about builtin exceptions
still catch them.
"""


class RMGError(Exception):
    """Base class for all package errors."""


class ValidationError(RMGError, ValueError):
    """An input violates a documented invariant."""


class NonStochasticRow(ValidationError):
    def __init__(self, h: int, s: int, a: int, rowsum: float, detail: str = ""):
        self.h, self.s, self.a, self.rowsum = h, s, a, rowsum
        msg = f"kernel row (h={h}, s={s}, a={a}) is not a distribution: sum={rowsum!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class RewardOutOfRange(ValidationError):
    pass


class SigmaOutOfRange(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class NotProductDistribution(ValidationError):
    pass


class ParameterRegimeViolation(ValidationError):
    pass


class GameFormatError(ValidationError):
    """A game, policy or dataset file could not be parsed."""


class NashIntractable(RMGError):
    """Mixed Nash requested for a stage game outside the supported cases."""


class NumericalFailure(RMGError):
    pass


class NonUniqueEquilibrium(RMGError):
    pass


class ConstructionFailed(RMGError):
    pass
