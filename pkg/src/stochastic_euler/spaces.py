"""Weighted Fourier sequence spaces and Galerkin projections.

States are complex Fourier coefficient vectors over a truncated set of
integer wavevectors on the d-torus (zero mode excluded, mean velocity
fixed to zero).  Three nested norms are realized through the weights
``(1 + |k|^2)**(s + level)`` for ``level in {-1, 0, +1}``, so that the
mid-level norm interpolates exactly between its neighbours:

    ||v||_0^2 <= ||v||_{+1} * ||v||_{-1}

with constant 1 and exponent 1/2 (Cauchy-Schwarz on the weights, since
``w_s = sqrt(w_{s-1} * w_{s+1})`` holds pointwise).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

LEVELS = (-1, 0, 1)

#: relative tolerance for the divergence-free tag
DIVFREE_RTOL = 1e-12


class SpaceMismatchError(ValueError):
    """Raised when states from incompatible mode sets are combined."""


def _mode_list(dimension: int, truncation: int) -> np.ndarray:
    """All integer wavevectors with 0 < |k|_inf <= truncation, in
    lexicographic order."""
    rng = range(-truncation, truncation + 1)
    kvecs = [k for k in itertools.product(rng, repeat=dimension) if any(k)]
    kvecs.sort()
    return np.array(kvecs, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Cube-truncated wavevector set, closed under negation.

    The canonical (lexicographic) ordering makes serialized states and
    precomputed index tables reproducible.
    """

    dimension: int
    truncation: int
    kvecs: np.ndarray = field(repr=False)

    @classmethod
    def cube(cls, dimension: int, truncation: int) -> "ModeSet":
        if dimension not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {dimension}")
        if truncation < 1:
            raise ValueError(f"truncation must be >= 1, got {truncation}")
        return cls(dimension, truncation, _mode_list(dimension, truncation))

    @property
    def size(self) -> int:
        return self.kvecs.shape[0]

    @property
    def index_of(self) -> dict:
        """Map tuple(k) -> row index."""
        try:
            return self.__dict__["_index_of"]
        except KeyError:
            table = {tuple(k): i for i, k in enumerate(self.kvecs.tolist())}
            self.__dict__["_index_of"] = table
            return table

    @property
    def negation_index(self) -> np.ndarray:
        """Row index of -k for each mode k."""
        try:
            return self.__dict__["_neg"]
        except KeyError:
            idx = self.index_of
            neg = np.array([idx[tuple(-k)] for k in self.kvecs.tolist()],
                           dtype=np.int64)
            self.__dict__["_neg"] = neg
            return neg

    @property
    def ksq(self) -> np.ndarray:
        return np.sum(self.kvecs.astype(np.float64) ** 2, axis=1)


@lru_cache(maxsize=None)
def mode_set(dimension: int, truncation: int) -> ModeSet:
    """Shared, cached cube mode set."""
    return ModeSet.cube(dimension, truncation)


@dataclass(frozen=True, eq=False)
class Space:
    """A mode set together with the Sobolev-type weight family.

    ``order`` is the mid-level regularity index s; it must satisfy
    s > d/2 + 2 so the sup-norm of the gradient is controlled by the
    top-level norm uniformly in the truncation.
    """

    modes: ModeSet
    order: int = 4
    interp_theta: float = 0.5
    interp_const: float = 1.0

    def __post_init__(self):
        d = self.modes.dimension
        if self.order <= d / 2 + 2:
            raise ValueError(
                f"order s={self.order} must exceed d/2 + 2 = {d / 2 + 2}")

    @classmethod
    def make(cls, dimension: int = 2, truncation: int = 8, order: int = 4) -> "Space":
        return cls(mode_set(dimension, truncation), order)

    # -- weights ------------------------------------------------------

    def weights(self, level: int) -> np.ndarray:
        if level not in LEVELS:
            raise ValueError(f"level must be one of {LEVELS}, got {level}")
        key = f"_w{level}"
        try:
            return self.__dict__[key]
        except KeyError:
            w = (1.0 + self.modes.ksq) ** (self.order + level)
            w.setflags(write=False)
            self.__dict__[key] = w
            return w

    def _check(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs)
        if coeffs.shape[-2:] != (self.modes.size, self.modes.dimension):
            raise SpaceMismatchError(
                f"coefficient array of shape {coeffs.shape} does not match "
                f"mode set ({self.modes.size} modes, d={self.modes.dimension})")
        return coeffs

    # -- norms and pairings -------------------------------------------

    def norm(self, coeffs: np.ndarray, level: int) -> np.ndarray:
        """Weighted l2 norm; leading axes are treated as batch axes."""
        coeffs = self._check(coeffs)
        w = self.weights(level)
        sq = np.sum(w[:, None] * (coeffs.real ** 2 + coeffs.imag ** 2),
                    axis=(-2, -1))
        return np.sqrt(sq)

    def inner(self, a: np.ndarray, b: np.ndarray, level: int) -> np.ndarray:
        """Real part of the weighted Hermitian pairing."""
        a = self._check(a)
        b = self._check(b)
        w = self.weights(level)
        return np.sum(w[:, None] * (a * b.conj()).real, axis=(-2, -1))

    def flat_inner(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Unweighted (L2 energy) pairing."""
        a = self._check(a)
        b = self._check(b)
        return np.sum((a * b.conj()).real, axis=(-2, -1))

    # -- projections and symmetries -----------------------------------

    def project(self, coeffs: np.ndarray, m: int) -> np.ndarray:
        """Galerkin projection: zero all coefficients with |k|_inf > m."""
        if m < 1:
            raise ValueError(f"projection cutoff must be >= 1, got {m}")
        coeffs = self._check(coeffs)
        keep = np.max(np.abs(self.modes.kvecs), axis=1) <= m
        out = np.where(keep[:, None], coeffs, 0.0)
        return out

    def hermitian_symmetrize(self, coeffs: np.ndarray) -> np.ndarray:
        """Nearest coefficient array with u_hat(-k) = conj(u_hat(k))."""
        coeffs = self._check(coeffs)
        neg = self.modes.negation_index
        return 0.5 * (coeffs + coeffs[..., neg, :].conj())

    def hermitian_defect(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = self._check(coeffs)
        neg = self.modes.negation_index
        defect = np.max(np.abs(coeffs - coeffs[..., neg, :].conj()),
                        axis=(-2, -1))
        return defect

    def divergence_defect(self, coeffs: np.ndarray) -> np.ndarray:
        """max_k |k . u_hat(k)| / (|k| |u_hat(k)|), guarded at zero."""
        coeffs = self._check(coeffs)
        k = self.modes.kvecs.astype(np.float64)
        dots = np.abs(np.einsum("kd,...kd->...k", k, coeffs))
        scale = np.sqrt(self.modes.ksq) * np.sqrt(
            np.sum(np.abs(coeffs) ** 2, axis=-1))
        return np.max(dots / np.maximum(scale, 1e-300), axis=-1)

    # -- sampling ------------------------------------------------------

    def random_coeffs(self, rng: np.random.Generator, decay: float = 0.0,
                      hermitian: bool = True) -> np.ndarray:
        """Gaussian coefficients with per-mode scale (1+|k|^2)^(-decay/2)."""
        m, d = self.modes.size, self.modes.dimension
        z = rng.standard_normal((m, d)) + 1j * rng.standard_normal((m, d))
        z *= ((1.0 + self.modes.ksq) ** (-decay / 2.0))[:, None]
        if hermitian:
            z = self.hermitian_symmetrize(z)
        return z

    def zero_coeffs(self, batch: tuple = ()) -> np.ndarray:
        return np.zeros(batch + (self.modes.size, self.modes.dimension),
                        dtype=np.complex128)


@dataclass
class SpectralState:
    """A single coefficient vector bound to its space.

    Thin convenience wrapper; the numerical kernels operate on the raw
    coefficient arrays.
    """

    space: Space
    coeffs: np.ndarray
    divergence_free: bool = False

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        self.space._check(self.coeffs)
        if self.divergence_free:
            defect = float(self.space.divergence_defect(self.coeffs))
            if defect > DIVFREE_RTOL:
                raise ValueError(
                    f"state tagged divergence-free has defect {defect:.3e}")

    def norm(self, level: int) -> float:
        return float(self.space.norm(self.coeffs, level))

    def inner(self, other: "SpectralState", level: int) -> float:
        if other.space.modes is not self.space.modes:
            if (other.space.modes.dimension != self.space.modes.dimension
                    or other.space.modes.truncation != self.space.modes.truncation):
                raise SpaceMismatchError("states live on different mode sets")
        return float(self.space.inner(self.coeffs, other.coeffs, level))

    def project(self, m: int) -> "SpectralState":
        return SpectralState(self.space, self.space.project(self.coeffs, m),
                             divergence_free=self.divergence_free)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return float(self.space.hermitian_defect(self.coeffs)) <= tol

    # -- serialization -------------------------------------------------

    def to_json(self) -> str:
        m = self.space.modes
        flat = self.coeffs.reshape(-1)
        payload = {
            "d": m.dimension,
            "n": m.truncation,
            "s": self.space.order,
            "modes": m.kvecs.tolist(),
            "coeffs": [[float(z.real), float(z.imag)] for z in flat],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "SpectralState":
        payload = json.loads(text)
        space = Space.make(payload["d"], payload["n"], payload["s"])
        modes = payload["modes"]
        if modes != space.modes.kvecs.tolist():
            raise SpaceMismatchError("serialized mode list is not canonical")
        flat = np.array([complex(re, im) for re, im in payload["coeffs"]])
        coeffs = flat.reshape(space.modes.size, space.modes.dimension)
        return cls(space, coeffs)


def embed_coeffs(src: Space, coeffs: np.ndarray, dst: Space) -> np.ndarray:
    """Zero-pad coefficients from a smaller cube truncation into a larger one."""
    if src.modes.dimension != dst.modes.dimension:
        raise SpaceMismatchError("dimension mismatch")
    if src.modes.truncation > dst.modes.truncation:
        raise SpaceMismatchError("source truncation exceeds destination")
    src._check(coeffs)
    rows = np.array([dst.modes.index_of[tuple(k)]
                     for k in src.modes.kvecs.tolist()], dtype=np.int64)
    out = np.zeros(coeffs.shape[:-2] + (dst.modes.size, dst.modes.dimension),
                   dtype=np.complex128)
    out[..., rows, :] = coeffs
    return out
