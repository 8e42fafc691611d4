"""Model bundles: drift, diffusion and norms behind one interface.

The integrator, the Lyapunov calculus and the experiment harness only see
this interface:

    drift(x), diffusion(x), noise_factor(x), sup_ref(x), growth(x),
    norm(x, level), inner(x, y, level), sanitize(x), random_direction(rng)

``sup_ref`` is the scalar functional feeding both the drift growth bound
(g = growth_const * sup_ref) and the noise amplitude factor.  For the
spectral Euler model it is the oversampled-grid W^{1,inf} norm; for the
flat toy models it is the plain Euclidean norm.

All methods are batched: leading axes of the state array are batch axes.
"""

from __future__ import annotations

import numpy as np

from . import euler
from .noise import NoiseConfig, noise_factor
from .spaces import Space


def _bc(scalars, rank: int):
    scalars = np.asarray(scalars)
    return scalars.reshape(scalars.shape + (1,) * rank)


class EulerModel:
    """Galerkin-truncated spectral Euler drift with radial noise."""

    state_rank = 2

    def __init__(self, space: Space, drift_cfg: euler.DriftConfig,
                 noise_cfg: NoiseConfig | None = None):
        self.space = space
        self.drift_cfg = drift_cfg
        self.noise = noise_cfg
        self.growth_const = drift_cfg.growth_const

    # -- dynamics -----------------------------------------------------

    def drift(self, x):
        method = self.drift_cfg.convolution
        if method == "pairs" and x.ndim > 2:
            return np.stack([self.drift(row) for row in x])
        return euler.nonlinearity(self.space, x, method)

    def sup_ref(self, x):
        return euler.winf_norm(self.space, x, self.drift_cfg.oversample)

    def growth(self, x):
        return self.growth_const * self.sup_ref(x)

    def noise_factor(self, x):
        if self.noise is None:
            return None
        return noise_factor(self.noise, self.sup_ref(x))

    def diffusion(self, x):
        f = self.noise_factor(x)
        if f is None:
            return np.zeros_like(x)
        return _bc(f, self.state_rank) * x

    # -- geometry -----------------------------------------------------

    def norm(self, x, level):
        return self.space.norm(x, level)

    def inner(self, x, y, level):
        return self.space.inner(x, y, level)

    def sanitize(self, x):
        """Defensive re-projection onto real divergence-free fields."""
        return euler.leray_project(
            self.space, self.space.hermitian_symmetrize(x))

    def project(self, x, m):
        return self.space.project(x, m)

    def zero_state(self, batch=()):
        return self.space.zero_coeffs(batch)

    _DIRECTION_DECAY = {"generic": 2.0, "smooth": 8.0, "rough": 0.0}

    def random_direction(self, rng, kind: str = "generic"):
        decay = self._DIRECTION_DECAY[kind]
        return euler.random_velocity(self.space, rng, decay=decay,
                                     level_norm=1.0)


class FlatModel:
    """Finite-dimensional testbed with identical norms at every level.

    ``drift_kind`` is one of:
      * ``"zero"``: no drift;
      * ``"radial_quadratic"``: b(x) = ||x|| x, whose blow-up time from a
        radius-r0 start is 1/r0 in the noiseless case.
    """

    state_rank = 1

    def __init__(self, dim: int, drift_kind: str = "zero",
                 noise_cfg: NoiseConfig | None = None):
        if drift_kind not in ("zero", "radial_quadratic"):
            raise ValueError(f"unknown drift kind {drift_kind!r}")
        self.dim = dim
        self.drift_kind = drift_kind
        self.noise = noise_cfg
        self.growth_const = 1.0 if drift_kind == "radial_quadratic" else 0.0

    def drift(self, x):
        if self.drift_kind == "zero":
            return np.zeros_like(x)
        return _bc(np.linalg.norm(x, axis=-1), 1) * x

    def sup_ref(self, x):
        return np.linalg.norm(x, axis=-1)

    def growth(self, x):
        return self.growth_const * self.sup_ref(x)

    def noise_factor(self, x):
        if self.noise is None:
            return None
        return noise_factor(self.noise, self.sup_ref(x))

    def diffusion(self, x):
        f = self.noise_factor(x)
        if f is None:
            return np.zeros_like(x)
        return _bc(f, 1) * x

    def norm(self, x, level):
        return np.linalg.norm(x, axis=-1)

    def inner(self, x, y, level):
        return np.sum(np.asarray(x) * np.asarray(y), axis=-1)

    def sanitize(self, x):
        return x

    def zero_state(self, batch=()):
        return np.zeros(batch + (self.dim,), dtype=np.float64)

    def random_direction(self, rng, kind: str = "generic"):
        v = rng.standard_normal(self.dim)
        return v / np.linalg.norm(v)


def toy_model(amplitude: float = 2.0, exponent: float = 1.0,
              noise_on: bool = True) -> FlatModel:
    """Three-dimensional radial-quadratic toy with the derived noise."""
    cfg = NoiseConfig.derive(amplitude, exponent, 1.0) if noise_on else None
    return FlatModel(3, "radial_quadratic", cfg)
