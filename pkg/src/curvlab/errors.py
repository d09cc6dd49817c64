"""Exception types and report sentinels shared across curvlab."""

from __future__ import annotations


class CurvlabError(Exception):
    """Base class for all curvlab errors."""


class DomainError(CurvlabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PreconditionError(CurvlabError, ValueError):
    """A lemma hypothesis or operation precondition is not satisfied."""


class DegenerateDenominatorError(PreconditionError):
    """kappa_1 - kappa_i is too close to zero for a quotient to be evaluated."""


class SamplerStarvation(CurvlabError, RuntimeError):
    """Rejection sampling accepted too few draws to make progress."""

    def __init__(self, message: str, drawn: int, accepted: int):
        super().__init__(f"{message} (drawn={drawn}, accepted={accepted})")
        self.drawn = drawn
        self.accepted = accepted


class DiscretizationError(CurvlabError, ArithmeticError):
    """The discrete geometry broke down at a node (e.g. non-SPD metric)."""

    def __init__(self, message: str, node: int | None = None):
        super().__init__(message)
        self.node = node


class GeometryError(DiscretizationError):
    """A geometric quantity (support function, radius) left its valid range."""


class AdmissibilityError(CurvlabError, ValueError):
    """A graph has principal curvatures outside the required Garding cone."""

    def __init__(self, message: str, node: int | None = None):
        super().__init__(message)
        self.node = node


class StallError(CurvlabError, RuntimeError):
    """Newton line search exhausted its halvings without an acceptable step."""


class ConfigError(CurvlabError, ValueError):
    """A JSON config or input file is malformed."""


class _PositiveInfinity:
    """Tagged stand-in for +infinity in margins and reports.

    Float infinities are not valid JSON, so reports carry this sentinel
    instead; it serializes as ``{"sentinel": "+inf"}``.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "POS_INF"

    def __reduce__(self):
        return (_PositiveInfinity, ())

    def __gt__(self, other) -> bool:
        return other is not self

    def __ge__(self, other) -> bool:
        return True

    def __lt__(self, other) -> bool:
        return False

    def __le__(self, other) -> bool:
        return other is self

    def to_json(self) -> dict:
        return {"sentinel": "+inf"}


POS_INF = _PositiveInfinity()
