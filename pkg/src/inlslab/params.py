"""Problem parameters (N, sigma, b), critical indices and regime labels.

Everything here is exact: parameters are :class:`fractions.Fraction` and all
comparisons are done on rationals, so regime boundaries are sharp.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

__all__ = [
    "ProblemParams",
    "CriticalIndices",
    "Regime",
    "HypothesisReport",
    "THEOREMS",
    "as_fraction",
    "derive_indices",
    "classify_regime",
    "check_hypotheses",
]

Rational = Union[Fraction, int, str]

REGIMES = (
    "mass-subcritical",
    "mass-critical",
    "intercritical",
    "energy-critical",
    "energy-supercritical",
)


def as_fraction(x) -> Fraction:
    """Exact rational from an int, Fraction or ``"num/den"`` string.

    Floats are refused, since a binary float is rarely the rational the
    caller had in mind.
    """
    if isinstance(x, float):
        raise TypeError(f"refusing float {x!r}; pass an int, Fraction or 'num/den' string")
    if isinstance(x, bool):
        raise TypeError("booleans are not parameters")
    return Fraction(x)


@dataclass(frozen=True)
class ProblemParams:
    """Dimension ``N``, power ``sigma`` and weight exponent ``b``.

    ``b = 0`` (the classical equation) is accepted alongside ``0 < b < 2``.
    """

    N: int
    sigma: Fraction
    b: Fraction

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N:
            raise ValueError(f"N must be an integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "sigma", as_fraction(self.sigma))
        object.__setattr__(self, "b", as_fraction(self.b))
        if self.N < 1:
            raise ValueError(f"invalid parameter: N = {self.N} < 1")
        if self.sigma <= 0:
            raise ValueError(f"invalid parameter: sigma = {self.sigma} must be positive")
        if not 0 <= self.b < 2:
            raise ValueError(f"invalid parameter: b = {self.b} outside [0, 2)")

    @classmethod
    def of(cls, N, sigma, b) -> "ProblemParams":
        return cls(N, as_fraction(sigma), as_fraction(b))

    @property
    def mass_critical_sigma(self) -> Fraction:
        return (2 - self.b) / self.N

    @property
    def energy_critical_sigma(self) -> Fraction | None:
        return (2 - self.b) / (self.N - 2) if self.N >= 3 else None

    def floats(self) -> tuple[int, float, float]:
        return self.N, float(self.sigma), float(self.b)


@dataclass(frozen=True)
class CriticalIndices:
    s_c: Fraction
    sigma_c: Fraction

    def floats(self) -> tuple[float, float]:
        return float(self.s_c), float(self.sigma_c)


@dataclass(frozen=True)
class Regime:
    label: str

    def __post_init__(self):
        if self.label not in REGIMES:
            raise ValueError(f"unknown regime {self.label!r}")

    def __str__(self) -> str:
        return self.label


def derive_indices(params: ProblemParams) -> CriticalIndices:
    """``s_c = N/2 - (2-b)/(2 sigma)`` and ``sigma_c = 2 N sigma/(2-b)``."""
    N, sigma, b = params.N, params.sigma, params.b
    s_c = Fraction(N, 2) - (2 - b) / (2 * sigma)
    sigma_c = 2 * N * sigma / (2 - b)
    return CriticalIndices(s_c, sigma_c)


def classify_regime(params: ProblemParams) -> Regime:
    """Regime from comparing sigma with (2-b)/N and, for N >= 3, (2-b)/(N-2)."""
    sigma = params.sigma
    lower = params.mass_critical_sigma
    if sigma < lower:
        return Regime("mass-subcritical")
    if sigma == lower:
        return Regime("mass-critical")
    upper = params.energy_critical_sigma
    if upper is None or sigma < upper:
        return Regime("intercritical")
    if sigma == upper:
        return Regime("energy-critical")
    return Regime("energy-supercritical")


@dataclass(frozen=True)
class HypothesisReport:
    """Per-hypothesis verdicts for one theorem.

    ``status`` is ``"proven"`` when every hypothesis holds and
    ``"outside proven theory"`` otherwise; the parameters themselves are
    still valid in that case.
    """

    theorem_id: str
    checks: tuple[tuple[str, bool], ...]

    @property
    def passed(self) -> bool:
        return all(ok for _, ok in self.checks)

    @property
    def status(self) -> str:
        return "proven" if self.passed else "outside proven theory"

    @property
    def failures(self) -> list[str]:
        return [text for text, ok in self.checks if not ok]

    def as_dict(self) -> dict:
        return {
            "theorem_id": self.theorem_id,
            "checks": [{"hypothesis": t, "pass": ok} for t, ok in self.checks],
            "pass": self.passed,
            "status": self.status,
        }


def _intercritical_checks(p: ProblemParams) -> list[tuple[str, bool]]:
    out = [("sigma > (2-b)/N", p.sigma > p.mass_critical_sigma)]
    if p.N >= 3:
        out.append(("sigma < (2-b)/(N-2)", p.sigma < p.energy_critical_sigma))
    return out


def _gwp_2d(p):
    return [
        ("N = 2", p.N == 2),
        ("0 < b < 1", 0 < p.b < 1),
        ("sigma > (2-b)/2", p.sigma > (2 - p.b) / 2),
    ]


def _lwp_hsc(p):
    return [
        ("N >= 3", p.N >= 3),
        ("0 < b < min{N/2, 2}", 0 < p.b < min(Fraction(p.N, 2), Fraction(2))),
        ("sigma > (2-b)/N", p.sigma > p.mass_critical_sigma),
        ("sigma < (2-b)/(N-2)", p.N >= 3 and p.sigma < p.energy_critical_sigma),
    ]


def _gn_sharp(p):
    return [("N >= 1", p.N >= 1), ("0 < b < 2", 0 < p.b < 2)] + _intercritical_checks(p)


THEOREMS = {
    "GWP-2D": _gwp_2d,
    "LWP-Hsc": _lwp_hsc,
    "GN-sharp": _gn_sharp,
    "concentration": _lwp_hsc,
}


def check_hypotheses(params: ProblemParams, theorem_id: str) -> HypothesisReport:
    """Evaluate the hypotheses of a theorem exactly.

    Raises
    ------
    KeyError
        For an unknown theorem id.
    """
    try:
        rule = THEOREMS[theorem_id]
    except KeyError:
        raise KeyError(f"unknown theorem id {theorem_id!r}; choose from {sorted(THEOREMS)}") from None
    return HypothesisReport(theorem_id, tuple(rule(params)))
