"""Brownian paths with refinement, and taming/adaptive SDE stepping.

The default scheme is drift-and-diffusion tamed Euler-Maruyama: the drift
increment is divided by (1 + h * ||b||) and the diffusion increment by
(1 + h * ||sigma||^2), which keeps single steps bounded under the
superlinear coefficients.  Plain Euler-Maruyama is kept for linear test
systems and for blow-up detection (taming caps per-step growth and would
mask genuine finite-time escape).  The adaptive cross-check sub-divides
each macro step, with the sub-step size set by the local growth rates and
the Brownian increment split by bridge sampling.

Everything is a pure function of (inputs, seed): replaying a
configuration reproduces trajectories bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lyapunov import LyapunovProfile
from .noise import noise_factor as _noise_factor

SCHEMES = ("tamed", "euler", "adaptive")


# ---------------------------------------------------------------------------
# Brownian driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BrownianPath:
    """Scalar Brownian increments on a uniform grid of [0, horizon]."""

    seed: int
    horizon: float
    increments: np.ndarray
    level: int = 0

    @property
    def n_steps(self) -> int:
        return self.increments.shape[0]

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def values(self) -> np.ndarray:
        """Path values at the grid nodes, starting from 0."""
        out = np.zeros(self.n_steps + 1)
        np.cumsum(self.increments, out=out[1:])
        return out


def sample_path(seed: int, horizon: float, n_steps: int) -> BrownianPath:
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0)))
    inc = rng.standard_normal(n_steps) * math.sqrt(horizon / n_steps)
    return BrownianPath(int(seed), float(horizon), inc, level=0)


def refine(path: BrownianPath) -> BrownianPath:
    """Halve the step by Brownian-bridge midpoint insertion.

    Values at the original grid nodes are preserved exactly; midpoints are
    drawn from a stream derived from (seed, level), so repeated refinement
    is reproducible.
    """
    rng = np.random.default_rng(np.random.SeedSequence(
        (int(path.seed), int(path.level) + 1, 0xB41D6E)))
    n = path.n_steps
    h = path.horizon / n
    xi = rng.standard_normal(n) * math.sqrt(h / 4.0)
    fine = np.empty(2 * n)
    fine[0::2] = 0.5 * path.increments + xi
    fine[1::2] = 0.5 * path.increments - xi
    return BrownianPath(path.seed, path.horizon, fine, level=path.level + 1)


def coarsen(path: BrownianPath, factor: int = 2) -> BrownianPath:
    """Merge consecutive increments; node values on the coarse grid are
    unchanged."""
    if path.n_steps % factor:
        raise ValueError(f"{path.n_steps} steps not divisible by {factor}")
    inc = path.increments.reshape(-1, factor).sum(axis=1)
    return BrownianPath(path.seed, path.horizon, inc,
                        level=path.level - int(round(math.log2(factor))))


def ensemble_increments(master_seed: int, indices, n_steps: int,
                        horizon: float) -> np.ndarray:
    """Per-trajectory increment rows; row i depends only on
    (master_seed, indices[i]), never on how work is batched."""
    rows = np.empty((len(indices), n_steps))
    scale = math.sqrt(horizon / n_steps)
    for r, idx in enumerate(indices):
        rng = np.random.default_rng(
            np.random.SeedSequence((int(master_seed), int(idx))))
        rows[r] = rng.standard_normal(n_steps) * scale
    return rows


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegratorParams:
    scheme: str = "tamed"
    stop_threshold: float = 1e6
    max_retained: int = 129
    profile: LyapunovProfile | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.max_retained < 2:
            raise ValueError("max_retained must be >= 2")


_DIAG_NAMES = ("e_m1", "e0", "e1", "v", "g", "f", "gen_v")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    diagnostics: dict
    stopped: bool
    stop_time: float | None
    stop_reason: str | None
    scheme: str

    def records(self):
        """Rows for the JSON-lines output, one per retained step."""
        d = self.diagnostics
        for j, t in enumerate(self.times):
            yield {
                "t": float(t),
                "e_m1": float(d["e_m1"][j]),
                "e0": float(d["e0"][j]),
                "e1": float(d["e1"][j]),
                "V": float(d["v"][j]),
                "g": float(d["g"][j]),
                "f": float(d["f"][j]),
                "genV": float(d["gen_v"][j]),
            }


@dataclass
class BatchTrajectories:
    times: np.ndarray            # (K,)
    states: np.ndarray           # (K, B, *state)
    diagnostics: dict            # name -> (K, B)
    stopped: np.ndarray          # (B,) bool
    stop_times: np.ndarray       # (B,) float, nan if never stopped
    stop_reasons: list
    scheme: str

    @property
    def n_paths(self) -> int:
        return self.states.shape[1]

    def single(self, i: int) -> Trajectory:
        st = self.stop_times[i]
        return Trajectory(
            times=self.times,
            states=self.states[:, i],
            diagnostics={k: v[:, i] for k, v in self.diagnostics.items()},
            stopped=bool(self.stopped[i]),
            stop_time=None if np.isnan(st) else float(st),
            stop_reason=self.stop_reasons[i],
            scheme=self.scheme,
        )


def _retain_indices(n_steps: int, max_retained: int) -> np.ndarray:
    stride = max(1, int(math.ceil(n_steps / (max_retained - 1))))
    idx = list(range(0, n_steps, stride))
    if idx[-1] != n_steps:
        idx.append(n_steps)
    return np.array(idx, dtype=np.int64)


def _bc(scalars, rank: int):
    scalars = np.asarray(scalars)
    return scalars.reshape(scalars.shape + (1,) * rank)


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def step(model, x, h: float, dW: float, scheme: str = "tamed",
         rng: np.random.Generator | None = None):
    """One update of the state; batched for the tamed and plain schemes."""
    x = np.asarray(x)
    if scheme == "adaptive":
        out, _ = _adaptive_macro_step(model, x, h, float(dW), rng,
                                      stop_threshold=math.inf)
        return out
    if scheme not in ("tamed", "euler"):
        raise ValueError(f"unknown scheme {scheme!r}")
    b = model.drift(x)
    if scheme == "tamed":
        nb = model.norm(b, +1)
        inc = h * b / _bc(1.0 + h * nb, model.state_rank)
    else:
        inc = h * b
    f = model.noise_factor(x)
    if f is not None:
        diff = _bc(f, model.state_rank) * x * dW
        if scheme == "tamed":
            sig_sq = (f * model.norm(x, +1)) ** 2
            diff = diff / _bc(1.0 + h * sig_sq, model.state_rank)
        inc = inc + diff
    return model.sanitize(x + inc)


def _adaptive_macro_step(model, x, h: float, dW: float,
                         rng: np.random.Generator | None,
                         stop_threshold: float,
                         max_substeps: int = 2_000_000):
    """Plain Euler-Maruyama sub-steps across one macro step.

    The sub-step is h / (1 + drift rate + squared diffusion rate), with
    rates measured relative to the current state magnitude so the relative
    increment per sub-step stays O(h); the Brownian increment is split by
    bridge sampling.  Returns (state, crossing offset or None).
    """
    rem_t = h
    rem_w = dW
    noise_on = model.noise is not None
    crossing = None
    used = 0
    while rem_t > 1e-15 * h:
        b = model.drift(x)
        n1 = float(model.norm(x, +1))
        rate = float(model.norm(b, +1)) / (1.0 + n1)
        if noise_on:
            f = float(model.noise_factor(x))
            rate += (f * n1) ** 2 / (1.0 + n1) ** 2
        delta = min(h / (1.0 + rate), rem_t)
        if noise_on:
            if delta < rem_t:
                if rng is None:
                    raise ValueError("adaptive sub-stepping with noise "
                                     "needs an rng for bridge splitting")
                mean = rem_w * delta / rem_t
                var = delta * (rem_t - delta) / rem_t
                dw = mean + math.sqrt(var) * float(rng.standard_normal())
            else:
                dw = rem_w
            x = model.sanitize(x + delta * b + f * x * dw)
            rem_w -= dw
        else:
            x = model.sanitize(x + delta * b)
        rem_t -= delta
        used += 1
        if used >= max_substeps:
            raise RuntimeError("adaptive sub-stepping exceeded its budget")
        n1 = float(model.norm(x, +1))
        if not math.isfinite(n1) or n1 >= stop_threshold:
            crossing = h - rem_t
            break
    return x, crossing


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def integrate_batch(model, x0, increments, dt: float,
                    params: IntegratorParams) -> BatchTrajectories:
    """Advance a batch of trajectories on a shared time grid.

    Row i of ``increments`` drives row i of the batch.  Stopped rows are
    frozen bit-exactly, so results do not depend on batch composition.
    """
    if params.scheme == "adaptive":
        raise ValueError("the adaptive scheme integrates single paths; "
                         "use integrate()")
    x = np.array(x0, copy=True)
    if x.ndim != model.state_rank + 1:
        raise ValueError("integrate_batch expects one leading batch axis")
    B = x.shape[0]
    increments = np.asarray(increments)
    N = increments.shape[-1]
    noise_on = model.noise is not None
    profile = params.profile

    retain = _retain_indices(N, params.max_retained)
    K = retain.shape[0]
    states = np.zeros((K,) + x.shape, dtype=x.dtype)
    diag = {name: np.full((K, B), np.nan) for name in _DIAG_NAMES}
    active = np.ones(B, dtype=bool)
    stop_times = np.full(B, np.nan)
    stop_reasons = [None] * B
    flat_axes = tuple(range(-model.state_rank, 0))

    ri = 0
    for k in range(N + 1):
        t = k * dt
        n1 = model.norm(x, +1)
        crossed = active & (n1 >= params.stop_threshold)
        if crossed.any():
            stop_times[crossed] = t
            for i in np.nonzero(crossed)[0]:
                stop_reasons[i] = "threshold"
            active &= ~crossed

        b = model.drift(x)
        if noise_on:
            ref = model.sup_ref(x)
            f = _noise_factor(model.noise, ref)
        else:
            ref = None
            f = None

        if ri < K and k == retain[ri]:
            if ref is None:
                ref = (model.sup_ref(x) if model.growth_const
                       else np.zeros(B))
            diag["e_m1"][ri] = model.norm(x, -1)
            diag["e0"][ri] = model.norm(x, 0)
            diag["e1"][ri] = n1
            diag["g"][ri] = model.growth_const * ref
            diag["f"][ri] = f if noise_on else 0.0
            if profile is not None:
                diag["v"][ri] = profile.value(n1)
                diag["gen_v"][ri] = _generator_from_parts(
                    profile, model, x, b, n1, f)
            states[ri] = x
            ri += 1

        if k == N:
            break

        dW = increments[:, k]
        if params.scheme == "tamed":
            nb = model.norm(b, +1)
            inc = dt * b / _bc(1.0 + dt * nb, model.state_rank)
            if noise_on:
                sig_sq = (f * n1) ** 2
                inc = inc + (_bc(f * dW, model.state_rank) * x
                             / _bc(1.0 + dt * sig_sq, model.state_rank))
        else:   # plain Euler-Maruyama
            inc = dt * b
            if noise_on:
                inc = inc + _bc(f * dW, model.state_rank) * x

        xn = model.sanitize(x + inc)
        bad = active & ~np.all(np.isfinite(xn), axis=flat_axes)
        if bad.any():
            stop_times[bad] = t
            for i in np.nonzero(bad)[0]:
                stop_reasons[i] = "numerical"
            active &= ~bad
        x = np.where(_bc(active, model.state_rank), xn, x)

    times = retain.astype(np.float64) * dt
    return BatchTrajectories(times, states, diag, ~np.isnan(stop_times),
                             stop_times, stop_reasons, params.scheme)


def _generator_from_parts(profile, model, x, b, n1, f):
    """Generator of V using quantities already computed for the step;
    valid for radial diffusion (the quadratic form collapses to
    curvature * f^2 r^2)."""
    xb = model.inner(x, b, +1)
    safe = np.maximum(n1, 1e-300)
    gen = np.where(n1 > 0, profile.slope(n1) * xb / safe, 0.0)
    if f is not None:
        gen = gen + 0.5 * profile.curvature(n1) * (f * n1) ** 2
    return gen


def integrate(model, x0, path: BrownianPath,
              params: IntegratorParams | None = None) -> Trajectory:
    """Single trajectory on the path's grid."""
    params = params or IntegratorParams()
    x0 = np.asarray(x0)
    if params.scheme == "adaptive":
        return _integrate_adaptive(model, x0, path, params)
    batch = integrate_batch(model, x0[None], path.increments[None],
                            path.dt, params)
    return batch.single(0)


def _integrate_adaptive(model, x0, path: BrownianPath,
                        params: IntegratorParams) -> Trajectory:
    rng = np.random.default_rng(np.random.SeedSequence(
        (int(path.seed), int(path.level), 0xADA9)))
    N = path.n_steps
    dt = path.dt
    retain = _retain_indices(N, params.max_retained)
    K = retain.shape[0]
    profile = params.profile
    noise_on = model.noise is not None

    x = np.array(x0, copy=True)
    states = np.zeros((K,) + x.shape, dtype=x.dtype)
    diag = {name: np.full(K, np.nan) for name in _DIAG_NAMES}
    stopped = False
    stop_time = None
    stop_reason = None
    ri = 0

    for k in range(N + 1):
        t = k * dt
        n1 = float(model.norm(x, +1))
        if not stopped and n1 >= params.stop_threshold:
            stopped, stop_time, stop_reason = True, t, "threshold"
        if not stopped and not np.all(np.isfinite(x)):
            stopped, stop_time, stop_reason = True, t, "numerical"

        if ri < K and k == retain[ri]:
            b = model.drift(x)
            f = float(model.noise_factor(x)) if noise_on else None
            ref = float(model.sup_ref(x)) if model.growth_const or noise_on else 0.0
            diag["e_m1"][ri] = float(model.norm(x, -1))
            diag["e0"][ri] = float(model.norm(x, 0))
            diag["e1"][ri] = n1
            diag["g"][ri] = model.growth_const * ref
            diag["f"][ri] = f if noise_on else 0.0
            if profile is not None:
                diag["v"][ri] = float(profile.value(n1))
                diag["gen_v"][ri] = float(_generator_from_parts(
                    profile, model, x, b, np.float64(n1),
                    np.float64(f) if f is not None else None))
            states[ri] = x
            ri += 1

        if k == N:
            break
        if stopped:
            continue    # frozen: remaining retained records repeat the state

        x, crossing = _adaptive_macro_step(
            model, x, dt, float(path.increments[k]), rng,
            params.stop_threshold)
        if crossing is not None:
            n1 = float(model.norm(x, +1))
            reason = "threshold" if math.isfinite(n1) else "numerical"
            stopped, stop_time, stop_reason = True, t + crossing, reason

    times = retain.astype(np.float64) * dt
    return Trajectory(times, states, diag, stopped, stop_time, stop_reason,
                      "adaptive")


# ---------------------------------------------------------------------------
# path statistics
# ---------------------------------------------------------------------------

def holder_seminorm(model, traj, alpha: float):
    """Discrete Hoelder seminorm: sup over retained grid pairs s < t of
    ||X_t - X_s||_{-1} / (t - s)^alpha."""
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    if isinstance(traj, BatchTrajectories):
        times, states = traj.times, traj.states
        batched = True
    else:
        times, states = traj.times, traj.states[:, None]
        batched = False
    K = times.shape[0]
    best = np.zeros(states.shape[1])
    for lag in range(1, K):
        diffs = states[lag:] - states[:-lag]
        nrm = model.norm(diffs, -1)
        gaps = (times[lag:] - times[:-lag])[:, None] ** alpha
        best = np.maximum(best, np.max(nrm / gaps, axis=0))
    return best if batched else float(best[0])


def uniqueness_check(model, x0, horizon: float, seed: int,
                     dt_levels: int = 3, base_steps: int = 128,
                     params: IntegratorParams | None = None) -> dict:
    """Refinement study on a common driver plus a bit-replay check.

    The same Brownian path drives integrations at dt, dt/2, ..., and the
    sup-in-time distance between consecutive resolutions (in the weakest
    norm) is reported; shrinking distances are the discrete shadow of
    pathwise uniqueness.
    """
    if dt_levels < 2:
        raise ValueError("need at least two dt levels")
    base = params or IntegratorParams()
    params = IntegratorParams(scheme=base.scheme,
                              stop_threshold=base.stop_threshold,
                              max_retained=base_steps + 1,
                              profile=base.profile)
    finest = sample_path(seed, horizon, base_steps * 2 ** (dt_levels - 1))
    paths = [finest]
    for _ in range(dt_levels - 1):
        paths.append(coarsen(paths[-1], 2))
    paths = paths[::-1]    # coarse -> fine

    runs = [integrate(model, x0, p, params) for p in paths]
    distances = []
    for a, b in zip(runs[:-1], runs[1:]):
        if a.times.shape != b.times.shape or not np.allclose(a.times, b.times):
            raise RuntimeError("retained grids failed to align")
        d = model.norm(b.states - a.states, -1)
        distances.append(float(np.max(d)))

    twin = integrate(model, x0, paths[0], params)
    replay_identical = bool(np.array_equal(runs[0].states, twin.states))
    return {
        "dt_values": [p.dt for p in paths],
        "consecutive_distances": distances,
        "decreasing": all(b < a for a, b in zip(distances[:-1], distances[1:])),
        "replay_identical": replay_identical,
    }


def gbm_strong_order(seed: int, dt_levels: int = 5, base_steps: int = 16,
                     horizon: float = 1.0, n_paths: int = 64,
                     x0: float = 1.0) -> dict:
    """Strong-error slope of plain Euler-Maruyama on dx = x dW.

    The exact solution x0 * exp(W_T - T/2) is the oracle; the RMS error at
    the final time is fitted against dt on a log-log scale.
    """
    from .models import FlatModel
    from .noise import NoiseConfig

    model = FlatModel(1, "zero", NoiseConfig(amplitude=1.0, exponent=0.0))
    params = IntegratorParams(scheme="euler", stop_threshold=1e12,
                              max_retained=2)
    n_finest = base_steps * 2 ** (dt_levels - 1)
    sq_errors = np.zeros(dt_levels)
    dts = np.array([horizon / (base_steps * 2 ** l) for l in range(dt_levels)])
    for i in range(n_paths):
        finest = sample_path(seed * 100003 + i, horizon, n_finest)
        w_final = float(np.sum(finest.increments))
        exact = x0 * math.exp(w_final - horizon / 2.0)
        stack = [finest]
        while stack[-1].n_steps > base_steps:
            stack.append(coarsen(stack[-1], 2))
        stack = stack[::-1]   # coarse -> fine
        for l, path in enumerate(stack):
            traj = integrate(model, np.array([x0]), path, params)
            sq_errors[l] += (float(traj.states[-1][0]) - exact) ** 2
    rms = np.sqrt(sq_errors / n_paths)
    slope = float(np.polyfit(np.log(dts), np.log(rms), 1)[0])
    return {"dt_values": dts.tolist(), "rms_errors": rms.tolist(),
            "slope": slope}
