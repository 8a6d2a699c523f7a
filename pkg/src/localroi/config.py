from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by every module.

    Passed explicitly to the functions that need them; there is no global
    mutable configuration.
    """

    herm_tol: float = 1e-10
    psd_tol: float = 1e-9
    eq_tol: float = 1e-6
    solver_tol: float = 1e-8
    gap_tol: float = 1e-6
    zero_weight_tol: float = 1e-12
    string_cap: int = 10**6

    def __post_init__(self) -> None:
        for name in ("herm_tol", "psd_tol", "eq_tol", "solver_tol", "gap_tol", "zero_weight_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name} must be positive")
        if self.string_cap < 1:
            raise ValueError("string_cap must be positive")

    def with_overrides(self, **kwargs: float) -> "Tolerances":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


DEFAULT_TOL = Tolerances()


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """Philox (counter-based) generator keyed by ``seed``.

    Every random draw in the package goes through here so that results are
    reproducible across platforms for a given seed.
    """
    return np.random.Generator(np.random.Philox(seed))
