"""Exception types."""


class GeoboundError(Exception):
    pass


class NonFiniteMetric(GeoboundError):
    pass


class StepTooSmall(GeoboundError):
    pass


class SingularMetric(GeoboundError):
    pass


class NonUnitDirection(GeoboundError):
    pass


class NegativeTime(GeoboundError):
    pass


class DegenerateFlat(GeoboundError):
    pass


class NegativeKappa(GeoboundError):
    pass


class BadWeights(GeoboundError):
    pass


class CausticEncountered(GeoboundError):
    """Integration halted at a focal point; ``t`` is the halt time."""

    def __init__(self, t: float, msg: str = ""):
        self.t = t
        super().__init__(msg or f"caustic encountered at t={t:.6g}")


class SeriesTooShort(GeoboundError):
    pass


class WindowTooShort(GeoboundError):
    pass


class UnknownMetric(GeoboundError):
    pass


class BadParams(GeoboundError):
    pass


class UnknownQuantity(GeoboundError):
    pass
