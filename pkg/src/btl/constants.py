"""Closed-form dimensional constants shared by every other module.

All quantities are plain evaluations of Gamma-function formulas:

    alpha_n        = (n (n-2))^((n-2)/4)          bubble normalization
    |S^(n-1)|      = 2 pi^(n/2) / Gamma(n/2)
    |B_n|          = pi^(n/2) / Gamma(n/2 + 1)
    gamma_n        = 1 / ((n-2) |S^(n-1)|)        Green normalization
    bubble_mass    = int_{R^n} (1+|y|^2)^(-n) dy = pi^(n/2) Gamma(n/2) / Gamma(n)
    c1 = c2        = (1/n) (n (n-2))^(n/2) * bubble_mass
    c4 = 2 c3      = (n (n-2))^(n/2) * |B_n|

The c-identities are stored, not recomputed: c2 is the same float object as
c1 and c3 is exactly c4/2, so ``c1 == c2`` and ``2*c3 == c4`` hold bit-exactly.
"""

import math
from dataclasses import asdict, dataclass
from functools import lru_cache


def log_gamma(x: float) -> float:
    """Natural log of Gamma(x) for x > 0."""
    if not x > 0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


@dataclass(frozen=True)
class DimConstants:
    n: int
    alpha_n: float
    sphere_measure: float
    ball_volume: float
    gamma_n: float
    bubble_mass: float
    c1: float
    c2: float
    c3: float
    c4: float

    def as_dict(self):
        return asdict(self)


@lru_cache(maxsize=None)
def dim_constants(n: int) -> DimConstants:
    """All dimension-n constants in one immutable record (n >= 3)."""
    if int(n) != n or n < 3:
        raise ValueError(f"dimension must be an integer >= 3, got {n}")
    n = int(n)
    alpha_n = (n * (n - 2.0)) ** ((n - 2.0) / 4.0)
    sphere_measure = 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
    ball_volume = sphere_measure / n
    gamma_n = 1.0 / ((n - 2.0) * sphere_measure)
    bubble_mass = math.exp((n / 2.0) * math.log(math.pi)
                           + log_gamma(n / 2.0) - log_gamma(float(n)))
    nn = (n * (n - 2.0)) ** (n / 2.0)
    c1 = nn * bubble_mass / n
    c4 = nn * ball_volume
    return DimConstants(n=n, alpha_n=alpha_n, sphere_measure=sphere_measure,
                        ball_volume=ball_volume, gamma_n=gamma_n,
                        bubble_mass=bubble_mass, c1=c1, c2=c1, c3=c4 / 2.0,
                        c4=c4)
