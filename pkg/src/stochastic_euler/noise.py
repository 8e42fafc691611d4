"""Radial multiplicative noise with superlinear growth.

The diffusion coefficient is sigma(u) = f(u) u with

    f(u) = amplitude * (1 + ref(u)^2)^(exponent / 2),

where ``ref`` is the same sup-norm functional that drives the drift
growth (so f and g are linked through ``growth_const``).  The derived
constants make the domination inequality f^2 >= 2 g - slack hold on the
strong-noise region {g > threshold} and the linear bound
||sigma(u)|| <= linear_bound * ||u|| on {g <= threshold}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseConfig:
    amplitude: float
    exponent: float
    growth_const: float | None = None
    threshold: float | None = None   # G
    slack: float = 0.0               # K
    linear_bound: float | None = None  # L

    def __post_init__(self):
        if self.amplitude <= 0:
            raise ValueError("amplitude must be positive")
        if self.exponent < 0:
            raise ValueError("exponent must be non-negative")

    @classmethod
    def derive(cls, amplitude: float, exponent: float,
               growth_const: float) -> "NoiseConfig":
        """Derive (threshold, slack, linear_bound) for a given growth constant.

        Requires exponent >= 1/2; at the borderline exponent 1/2 the
        amplitude must satisfy amplitude^2 > 2 * growth_const.
        """
        if exponent < 0.5:
            raise ValueError(
                f"exponent {exponent} < 1/2 is outside the supported regime")
        if growth_const <= 0:
            raise ValueError("growth_const must be positive")
        if exponent == 0.5:
            if amplitude ** 2 <= 2.0 * growth_const:
                raise ValueError(
                    "borderline exponent 1/2 needs amplitude^2 > 2 * growth_const "
                    f"(got {amplitude ** 2:.6g} <= {2 * growth_const:.6g})")
            threshold = 1.0
        else:
            threshold = (2.0 * growth_const ** (2 * exponent)
                         / amplitude ** 2) ** (1.0 / (2 * exponent - 1))
        linear_bound = amplitude * (
            1.0 + threshold ** 2 / growth_const ** 2) ** (exponent / 2)
        return cls(amplitude, exponent, growth_const,
                   threshold, 0.0, linear_bound)

    @property
    def derived(self) -> bool:
        return self.threshold is not None


def noise_factor(cfg: NoiseConfig, ref) -> np.ndarray:
    """f = amplitude * (1 + ref^2)^(exponent/2); >= amplitude always."""
    ref = np.asarray(ref, dtype=np.float64)
    return cfg.amplitude * (1.0 + ref ** 2) ** (cfg.exponent / 2.0)


def check_domination(cfg: NoiseConfig, g_values, f_values) -> dict:
    """Check f^2 >= 2 g - slack wherever g exceeds the threshold.

    Samples with g <= threshold are skipped (the inequality is only
    required on the strong-noise region).  Violations are reported, not
    raised.
    """
    if not cfg.derived:
        raise ValueError("constants not derived for this configuration")
    g = np.asarray(g_values, dtype=np.float64)
    f = np.asarray(f_values, dtype=np.float64)
    active = g > cfg.threshold
    margin = f ** 2 - (2.0 * g - cfg.slack)
    violations = active & (margin < 0)
    return {
        "checked": int(np.count_nonzero(active)),
        "skipped": int(g.size - np.count_nonzero(active)),
        "violations": int(np.count_nonzero(violations)),
        "min_margin": float(np.min(margin[active])) if active.any() else None,
    }
