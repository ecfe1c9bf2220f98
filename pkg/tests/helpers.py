"""Samplers shared by the test modules.

Each sampler draws exact rational triples from the hypothesis set of one
family of lemmas.  Interior points are drawn on a grid of step at most
1/40 of the admissible interval.  The sigma interval is also kept at
least 1/20 wide, so every point sits at least 1/800 from the endpoints and
eps = theta = 1/1000 counts as small (the closed-form pairs have
denominators like sigma N - 2 + b - eps).
"""

import random
from fractions import Fraction as F

from inlslab.params import ProblemParams


def _inside(rng, lo, hi, den=40):
    return lo + (hi - lo) * F(rng.randint(1, den - 1), den)


MIN_WIDTH = F(1, 20)


def _wide(N, b):
    return (2 - b) * (F(1, N - 2) - F(1, N)) >= MIN_WIDTH


def sample_lwp(rng: random.Random, extra=None):
    """N >= 3, 0 < b < min(N/2, 2), intercritical sigma."""
    while True:
        N = rng.randint(3, 8)
        b = _inside(rng, F(0), min(F(N, 2), F(2)))
        if not _wide(N, b) or (extra is not None and not extra(N, b)):
            continue
        sigma = _inside(rng, (2 - b) / N, (2 - b) / (N - 2))
        return ProblemParams(N, sigma, b)


def sample_lg1(rng: random.Random):
    """N = 2, 0 < b < 1, sigma > (2-b)/2."""
    b = _inside(rng, F(0), F(1))
    lo = (2 - b) / 2
    return ProblemParams(2, _inside(rng, lo, lo + 6), b)


def sample_b3(rng: random.Random):
    """N = 3, 1 <= b < 3/2, intercritical sigma."""
    b = F(1) if rng.random() < 0.1 else _inside(rng, F(1), F(3, 2))
    return ProblemParams(3, _inside(rng, (2 - b) / 3, 2 - b), b)


def sample_contraction(rng: random.Random):
    """N >= 3, 0 < b < 2, intercritical sigma."""
    while True:
        N = rng.randint(3, 8)
        b = _inside(rng, F(0), F(2))
        if _wide(N, b):
            break
    return ProblemParams(N, _inside(rng, (2 - b) / N, (2 - b) / (N - 2)), b)


SAMPLERS = {
    "PA1": sample_lwp,
    "PA2": sample_lwp,
    "PPM-plus": sample_lwp,
    "PPM-minus": sample_lwp,
    "LGWP-hat": sample_lg1,
    "LGWP-tilde": sample_lg1,
    "LGWP-bar": sample_lg1,
    "LGWP-star": sample_lg1,
    "B3-eps": sample_b3,
    "ADM-ball": sample_contraction,
    "ADM-exterior": sample_contraction,
    "GWP3": sample_lg1,
    "GWP4": sample_lg1,
    "L1C12": sample_lwp,
    "L1": lambda rng: sample_lwp(rng, extra=lambda N, b: b < N - 2),
    "sistema": sample_lwp,
    "B1a": sample_lwp,
    "condH1sl2": sample_b3,
    "E1-ADMREL": sample_contraction,
}
