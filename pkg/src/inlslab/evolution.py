"""Time integration of the focusing inhomogeneous NLS on radial grids.

The equation ``i u_t + Delta u + |x|^{-b}|u|^{2 sigma} u = 0`` is split into
the linear flow, applied exactly in the eigenbasis of the discrete radial
Laplacian, and the nonlinear flow, which keeps ``|u|`` fixed pointwise and is
therefore an exact phase rotation.  Strang composition gives second order in
``dt``.

Diagnostics cover conservation, the virial identity, the scaling symmetry,
blow-up rate fits and concentration windows.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .groundstate import GroundStateResult, operator_for
from .numerics import (
    RadialField,
    RadialGrid,
    SpectralLaplacian,
    read_checkpoint,
)
from .params import CriticalIndices, ProblemParams, as_fraction, derive_indices

__all__ = [
    "EvolutionConfig",
    "EvolutionState",
    "InvariantRecord",
    "Snapshot",
    "Trajectory",
    "BlowupDiagnostics",
    "ResolutionExhausted",
    "ResamplingRequired",
    "CSV_COLUMNS",
    "init_state",
    "strang_step",
    "adapt_dt",
    "invariants",
    "evolve",
    "relative_drift",
    "virial_rhs",
    "virial_residual",
    "scaling_symmetry_check",
    "fit_blowup",
    "estimate_blowup",
    "window_mass",
    "concentration_series",
    "rescaled_profile",
    "global_criterion_monitor",
]

CSV_COLUMNS = ("t", "mass", "energy", "grad_norm", "hsc_norm", "potential", "variance", "sup_norm", "dt")


class ResolutionExhausted(RuntimeError):
    """The run can no longer be resolved in time or space."""


class ResamplingRequired(ValueError):
    """Stored times are not uniformly spaced."""


@dataclass(frozen=True)
class EvolutionConfig:
    """Time-stepping and recording options.

    ``fixed_dt`` switches adaptivity off.  With adaptive steps
    ``dt = min(dt_max, c_cfl / (1 + max r^-b |u|^{2 sigma}))`` clamped to
    ``dt_min``; ``c_cfl`` defaults to ``phase_cap`` so the nonlinear phase
    increment per step stays below the cap.
    """

    T_end: float = 1.0
    dt_max: float = 1e-2
    dt_min: float = 1e-12
    phase_cap: float = math.pi / 16
    c_cfl: float | None = None
    fixed_dt: float | None = None
    record_every: int = 1
    snapshot_factor: float = 2.0 ** 0.25
    min_core_nodes: int = 8
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not self.dt_min > 0 or not self.dt_max >= self.dt_min:
            raise ValueError(f"need 0 < dt_min <= dt_max, got {self.dt_min}, {self.dt_max}")
        if self.fixed_dt is not None and not self.fixed_dt > 0:
            raise ValueError(f"fixed_dt must be positive, got {self.fixed_dt}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if not self.T_end >= 0:
            raise ValueError("T_end must be nonnegative")

    @property
    def cfl(self) -> float:
        return self.phase_cap if self.c_cfl is None else self.c_cfl


@dataclass(frozen=True)
class EvolutionState:
    t: float
    dt: float
    field: RadialField
    step_index: int = 0
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(self.field.values)):
            raise OverflowError("nonfinite field values")


@dataclass(frozen=True)
class InvariantRecord:
    t: float
    mass: float
    energy: float
    grad_norm: float
    hsc_norm: float
    potential: float
    variance: float
    sup_norm: float
    dt: float = 0.0

    def row(self) -> list[str]:
        return [repr(float(getattr(self, c))) for c in CSV_COLUMNS]


@dataclass(frozen=True)
class Snapshot:
    t: float
    field: RadialField
    grad_norm: float
    step_index: int


@dataclass
class Trajectory:
    """Invariant records (strictly increasing ``t``) plus field snapshots.

    ``status`` is ``"completed"``, ``"resolution-exhausted"`` or
    ``"overflow"``.
    """

    records: list[InvariantRecord]
    snapshots: list[Snapshot]
    params: ProblemParams
    config: EvolutionConfig
    status: str = "completed"
    message: str = ""
    policy: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self, path=None) -> str:
        """CSV text (and file, when ``path`` is given) of the records."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow(r.row())
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


@dataclass
class BlowupDiagnostics:
    verdict: str
    growth: float
    T_star_estimate: float | None = None
    gamma_fit: float | None = None
    fit_window: tuple[float, float] | None = None
    fit_residual: float | None = None
    concentration_series: list[tuple[float, float, float, float]] = field(default_factory=list)
    threshold: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_json(self, path=None) -> str:
        text = json.dumps(asdict(self), indent=2, sort_keys=True, ensure_ascii=False)
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


# --- initial data ------------------------------------------------------------

def init_state(profile: str, grid: RadialGrid, params: ProblemParams, *, A: float = 1.0, w: float = 1.0,
               c: float = 1.0, ground_state: GroundStateResult | RadialField | None = None, path=None,
               dt: float = 1e-3) -> EvolutionState:
    """State at ``t = 0``.

    Parameters
    ----------
    profile : {"gaussian", "ground_state_scaled", "file"}
        ``A exp(-(r/w)^2)``, ``c`` times a ground state, or a checkpoint.

    The initial invariants are stored in ``state.info`` together with the
    flag ``negative_energy``.

    Raises
    ------
    ValueError
        Unknown profile, a width below 16 nodes, a grid mismatch, or a
        corrupt checkpoint.
    FileNotFoundError
        Missing checkpoint.
    """
    if profile == "gaussian":
        if not w > 0:
            raise ValueError(f"width must be positive, got {w}")
        if w / grid.h < 16:
            raise ValueError(f"profile width {w} spans {w / grid.h:.1f} < 16 nodes")
        u = grid.sample(lambda r: A * np.exp(-((r / w) ** 2)))
    elif profile == "ground_state_scaled":
        if ground_state is None:
            raise ValueError("ground_state_scaled needs a ground state")
        g = ground_state.field if isinstance(ground_state, GroundStateResult) else ground_state
        if not g.grid.matches(grid):
            raise ValueError("ground state lives on a different grid")
        u = g * c
    elif profile == "file":
        if path is None:
            raise ValueError("file profile needs a path")
        if not Path(path).exists():
            raise FileNotFoundError(path)
        u, _ = read_checkpoint(path)
        if not u.grid.matches(grid):
            raise ValueError(f"{path}: checkpoint grid differs from the run grid")
    else:
        raise ValueError(f"unknown profile {profile!r}")
    state = EvolutionState(0.0, dt, u, 0)
    rec = invariants(state, params)
    state.info.update(asdict(rec))
    state.info["negative_energy"] = bool(rec.energy < 0)
    return state


# --- stepping ------------------------------------------------------------------

def _potential(params: ProblemParams, grid: RadialGrid, values: np.ndarray) -> np.ndarray:
    _, sigma, b = params.floats()
    return grid.nodes ** (-b) * np.abs(values) ** (2 * sigma)


def strang_step(state: EvolutionState, params: ProblemParams, op: SpectralLaplacian,
                reverse: bool = False) -> EvolutionState:
    """One Strang step of size ``state.dt`` (backwards in time if ``reverse``).

    Raises
    ------
    OverflowError
        If the step produces nonfinite values.
    """
    dt = -state.dt if reverse else state.dt
    half = np.exp(-0.5j * dt * np.clip(op.eigenvalues, 0.0, None))
    c = half * op.forward(state.field.values)
    u = op.inverse(c)
    u = u * np.exp(1j * dt * _potential(params, op.grid, u))
    u = op.inverse(half * op.forward(u))
    if not np.all(np.isfinite(u)):
        raise OverflowError(f"nonfinite values after step at t={state.t}")
    return EvolutionState(state.t + dt, state.dt, RadialField(op.grid, u), state.step_index + 1)


def adapt_dt(state: EvolutionState, cfg: EvolutionConfig, params: ProblemParams) -> float:
    """Step size from the nonlinear phase speed.

    Raises
    ------
    ResolutionExhausted
        If ``dt_min`` is reached while the phase increment exceeds the cap.
    """
    peak = float(np.max(_potential(params, state.field.grid, state.field.values), initial=0.0))
    dt = min(cfg.dt_max, cfg.cfl / (1.0 + peak))
    if dt < cfg.dt_min:
        dt = cfg.dt_min
        if dt * peak > cfg.phase_cap:
            raise ResolutionExhausted(f"dt_min={cfg.dt_min} reached at phase increment {dt * peak:.3g}")
    return dt


def invariants(state: EvolutionState, params: ProblemParams,
               indices: CriticalIndices | None = None) -> InvariantRecord:
    """All conserved and monitored quantities of one state."""
    u = state.field
    indices = indices or derive_indices(params)
    op = operator_for(u.grid)
    _, sigma, b = params.floats()
    return _record(state.t, u.values, op, sigma, b, float(indices.s_c), state.dt)


def _record(t, values, op, sigma, b, s_c, dt, coeffs=None) -> InvariantRecord:
    g = op.grid
    a2 = np.abs(values) ** 2
    mass = float(np.dot(g.weights, a2))
    G = max(op.quadratic_form(values), 0.0)
    if coeffs is None:
        coeffs = op.forward(values)
    lam = np.clip(op.eigenvalues, 0.0, None)
    hsc = math.sqrt(float(np.dot(lam**s_c, np.abs(coeffs) ** 2)))
    pot = float(np.dot(g.weights * g.nodes ** (-b), a2 ** (sigma + 1)))
    var = float(np.dot(g.weights * g.nodes**2, a2))
    sup = float(np.sqrt(a2.max(initial=0.0)))
    energy = 0.5 * G - pot / (2 * sigma + 2)
    return InvariantRecord(float(t), mass, energy, math.sqrt(G), hsc, pot, var, sup, float(dt))


def _core_nodes(values: np.ndarray) -> int:
    """Nodes inside the half-maximum radius of ``|u|``."""
    a = np.abs(values)
    peak = a.max(initial=0.0)
    if peak == 0:
        return values.size
    below = np.nonzero(a < 0.5 * peak)[0]
    k = int(np.argmax(a))
    outside = below[below > k]
    return int(outside[0]) if outside.size else values.size


def evolve(state: EvolutionState, params: ProblemParams, cfg: EvolutionConfig | None = None) -> Trajectory:
    """Integrate from ``state`` to ``cfg.T_end``.

    Invariants are recorded every ``record_every`` steps and at the end;
    snapshots whenever ``|grad u|`` grows by ``snapshot_factor`` (plus the
    first and last frames).  The run stops early with status
    ``"resolution-exhausted"`` when the time step hits ``dt_min`` with the
    phase cap exceeded or when the half-maximum core spans fewer than
    ``min_core_nodes`` nodes, and with ``"overflow"`` on nonfinite values.
    """
    cfg = cfg or EvolutionConfig()
    op = operator_for(state.field.grid)
    grid = op.grid
    _, sigma, b = params.floats()
    s_c = float(derive_indices(params).s_c)
    rb = grid.nodes ** (-b)
    lam = np.clip(op.eigenvalues, 0.0, None)
    if cfg.fixed_dt is not None and cfg.fixed_dt * lam[-1] > 2 * np.pi:
        # past this step the split flow resonates with the stiffest modes and
        # the energy drifts secularly instead of oscillating at O(dt^2)
        warnings.warn(f"fixed_dt * max eigenvalue = {cfg.fixed_dt * lam[-1]:.3g} exceeds 2 pi; "
                      "expect resonant energy drift", RuntimeWarning, stacklevel=2)

    t = float(state.t)
    n = state.step_index
    u = state.field.values.astype(complex)
    c = op.forward(u)
    dt = cfg.fixed_dt if cfg.fixed_dt is not None else adapt_dt(state, cfg, params)
    rec = _record(t, u, op, sigma, b, s_c, dt, coeffs=c)
    records = [rec]
    snaps = [Snapshot(t, RadialField(grid, u.copy()), rec.grad_norm, n)]
    next_snap = rec.grad_norm * cfg.snapshot_factor
    status, message = "completed", ""
    half_cache: dict[float, np.ndarray] = {}
    steps = 0
    tol_t = 1e-12 * max(1.0, cfg.T_end)

    while cfg.T_end - t > tol_t and steps < cfg.max_steps:
        if cfg.fixed_dt is None:
            # |u| after the last nonlinear substep; cheap and one step behind
            peak = float(np.max(rb * np.abs(u) ** (2 * sigma), initial=0.0))
            dt = min(cfg.dt_max, cfg.cfl / (1.0 + peak))
            if dt < cfg.dt_min:
                dt = cfg.dt_min
                if dt * peak > cfg.phase_cap:
                    status, message = "resolution-exhausted", f"dt_min reached at t={t:.17g}"
                    break
        step = min(dt, cfg.T_end - t)
        if t + step == t:
            status, message = "resolution-exhausted", f"time step below the resolution of t={t:.17g}"
            break
        half = half_cache.get(step)
        if half is None:
            half = np.exp(-0.5j * step * lam)
            if len(half_cache) < 8:
                half_cache[step] = half
        c = half * c
        u = op.inverse(c)
        u = u * np.exp(1j * step * rb * np.abs(u) ** (2 * sigma))
        c = half * op.forward(u)
        t += step
        n += 1
        steps += 1
        if not np.all(np.isfinite(c)):
            status, message = "overflow", f"nonfinite values at t={t:.17g}"
            break
        done = cfg.T_end - t <= tol_t
        if steps % cfg.record_every == 0 or done:
            u = op.inverse(c)
            rec = _record(t, u, op, sigma, b, s_c, step, coeffs=c)
            records.append(rec)
            if 0 < next_snap <= rec.grad_norm:
                snaps.append(Snapshot(t, RadialField(grid, u.copy()), rec.grad_norm, n))
                while next_snap <= rec.grad_norm:
                    next_snap *= cfg.snapshot_factor
            if _core_nodes(u) < cfg.min_core_nodes:
                status, message = "resolution-exhausted", f"core narrower than {cfg.min_core_nodes} nodes at t={t:.17g}"
                break

    u = op.inverse(c)
    if records[-1].t != t and np.all(np.isfinite(u)):
        records.append(_record(t, u, op, sigma, b, s_c, dt, coeffs=c))
    if np.all(np.isfinite(u)) and snaps[-1].t != t:
        snaps.append(Snapshot(t, RadialField(grid, u.copy()), records[-1].grad_norm, n))
    policy = {"snapshots": f"geometric in grad norm, factor {cfg.snapshot_factor:.6g}",
              "record_every": cfg.record_every, "steps": steps}
    return Trajectory(records, snaps, params, cfg, status, message, policy)


def relative_drift(traj: Trajectory, name: str = "mass") -> float:
    """``max_t |X(t) - X(0)| / |X(0)|`` per unit time (0 for a zero field)."""
    x = traj.column(name)
    span = traj.records[-1].t - traj.records[0].t
    dev = float(np.max(np.abs(x - x[0]), initial=0.0))
    if dev == 0.0:
        return 0.0
    if x[0] == 0 or span <= 0:
        return math.inf
    return dev / abs(x[0]) / span


# --- virial identity ------------------------------------------------------------

def virial_rhs(rec: InvariantRecord, params: ProblemParams, indices: CriticalIndices | None = None) -> float:
    """``8(2 sigma s_c + 2) E - 8 sigma s_c |grad u|^2``."""
    indices = indices or derive_indices(params)
    s = float(params.sigma) * float(indices.s_c)
    return 8 * (2 * s + 2) * rec.energy - 8 * s * rec.grad_norm**2


def virial_residual(traj: Trajectory, params: ProblemParams,
                    indices: CriticalIndices | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Residual of the virial identity at interior stored times.

    The second derivative of the variance is a central difference over the
    stored times, which must be uniformly spaced.

    Returns
    -------
    (t, residual) : arrays

    Raises
    ------
    ResamplingRequired
        Fewer than three records or nonuniform stamps.
    """
    ts = traj.times
    if ts.size < 3:
        raise ResamplingRequired("virial residual needs at least three stored times")
    steps = np.diff(ts)
    tau = float(steps.mean())
    if np.max(np.abs(steps - tau)) > 1e-9 * max(tau, 1e-300):
        raise ResamplingRequired("stored times are not uniformly spaced")
    var = traj.column("variance")
    d2 = (var[2:] - 2 * var[1:-1] + var[:-2]) / tau**2
    rhs = np.array([virial_rhs(r, params, indices) for r in traj.records[1:-1]])
    return ts[1:-1], np.abs(d2 - rhs)


# --- scaling symmetry ---------------------------------------------------------------

def scaling_symmetry_check(u0: RadialField, rho, T_end: float, params: ProblemParams,
                           dt: float = 1e-3) -> float:
    """Sup-norm mismatch between ``u`` and the rescaled evolution of ``u_rho``.

    ``u_rho(x, 0) = rho^{(2-b)/(2 sigma)} u0(rho x)`` is placed on the base
    grid scaled by ``1/rho``, which is exact, and run for the same number of
    steps with ``dt / rho^2``.
    """
    rho = as_fraction(rho)
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    r = float(rho)
    _, sigma, b = params.floats()
    amp = r ** ((2 - b) / (2 * sigma))
    nsteps = max(1, int(round(T_end / dt)))
    cfg = EvolutionConfig(T_end=nsteps * dt, fixed_dt=dt, record_every=nsteps)
    base = evolve(EvolutionState(0.0, dt, u0), params, cfg)
    if rho == 1:
        other = evolve(EvolutionState(0.0, dt, u0), params, cfg)
        return float(np.max(np.abs(base.snapshots[-1].field.values - other.snapshots[-1].field.values)))
    op = operator_for(u0.grid)
    from .groundstate import _register

    _register(op.rescaled(1.0 / r))
    g = u0.grid.scaled(1.0 / r)
    dt_r = dt / r**2
    cfg_r = EvolutionConfig(T_end=nsteps * dt_r, fixed_dt=dt_r, record_every=nsteps)
    run = evolve(EvolutionState(0.0, dt_r, RadialField(g, amp * u0.values)), params, cfg_r)
    for tr in (base, run):
        if tr.status != "completed":
            raise ResolutionExhausted(f"scaling run ended early: {tr.message}")
    back = run.snapshots[-1].field.values / amp
    return float(np.max(np.abs(back - base.snapshots[-1].field.values)))


# --- blow-up diagnostics ----------------------------------------------------------

def fit_blowup(t: Sequence[float], grad: Sequence[float], decades: float = 1.0):
    """Fit ``log|grad u| = -gamma log(T* - t) + const`` over the last decades.

    ``T*`` is optimised on a log scale beyond the last time; ``gamma`` and the
    constant are the linear least-squares solution for each trial ``T*``.

    Returns
    -------
    (T_star, gamma, window, residual)
    """
    t = np.asarray(t, dtype=float)
    g = np.asarray(grad, dtype=float)
    if t.size < 4:
        raise ValueError("need at least four samples to fit a blow-up rate")
    start = g[-1] / 10**decades
    mask = np.zeros(t.size, dtype=bool)
    first = int(np.nonzero(g >= start)[0][0]) if np.any(g >= start) else 0
    mask[first:] = True
    tw, lg = t[mask], np.log(g[mask])
    if tw.size < 4:
        tw, lg = t[-4:], np.log(g[-4:])
    span = tw[-1] - tw[0]
    t_last = tw[-1]

    def solve(log_gap):
        T = t_last + math.exp(log_gap)
        X = np.column_stack([-np.log(T - tw), np.ones_like(tw)])
        coef, *_ = np.linalg.lstsq(X, lg, rcond=None)
        res = lg - X @ coef
        return float(np.dot(res, res)), coef, T

    # T* - t must stay resolvable next to t itself
    floor = max(span * 1e-12, 64 * np.finfo(float).eps * max(abs(t_last), 1.0))
    lo = math.log(floor)
    hi = math.log(max(span, floor)) + 10.0
    grid = np.linspace(lo, hi, 201)
    vals = [solve(x)[0] for x in grid]
    k = int(np.argmin(vals))
    a, bnd = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    best = minimize_scalar(lambda x: solve(x)[0], bounds=(a, bnd), method="bounded",
                           options={"xatol": 1e-12})
    ss, coef, T = solve(best.x)
    rms = math.sqrt(ss / tw.size)
    return T, float(coef[0]), (float(tw[0]), float(tw[-1])), rms


def estimate_blowup(traj: Trajectory, min_growth: float = 1e3, decades: float = 1.0) -> BlowupDiagnostics:
    """Blow-up time and rate from a trajectory ending in resolution exhaustion.

    Runs that did not end that way, or whose gradient grew by less than
    ``min_growth``, get the verdict ``"no blow-up"`` and no fit.
    """
    g = traj.column("grad_norm")
    growth = float(g[-1] / g[0]) if g[0] > 0 else (math.inf if g[-1] > 0 else 1.0)
    growth = max(growth, float(g.max() / g[0])) if g[0] > 0 else growth
    meta = {"status": traj.status, "min_growth": min_growth, "decades": decades}
    if traj.status not in ("resolution-exhausted", "overflow") or not growth >= min_growth:
        return BlowupDiagnostics("no blow-up", growth, meta=meta)
    T, gamma, window, res = fit_blowup(traj.times, g, decades)
    return BlowupDiagnostics("blow-up", growth, T, gamma, window, res, meta=meta)


def _cutoff(r: np.ndarray, lam: float) -> np.ndarray:
    """C^2 bump: 1 on ``r <= 3 lam/4``, 0 beyond ``lam``, quintic in between."""
    x = np.clip((lam - r) / (0.25 * lam), 0.0, 1.0)
    return x**3 * (10 - 15 * x + 6 * x * x)


def window_mass(u: RadialField, lam: float, params: ProblemParams, kind: str = "Lsigma_c") -> float:
    """Local critical mass inside ``|x| <= lam``.

    ``"Lsigma_c"`` integrates ``|u|^{sigma_c}`` over the ball, counting the
    straddling cell by its covered fraction; ``"HsDot"`` is the squared
    ``Hdot^{s_c}`` norm of ``u`` times a smooth cutoff.
    """
    indices = derive_indices(params)
    grid = u.grid
    if kind == "Lsigma_c":
        lower = grid.nodes - 0.5 * grid.h
        frac = np.clip((lam - lower) / grid.h, 0.0, 1.0)
        return float(np.dot(grid.weights * frac, u.abs ** float(indices.sigma_c)))
    if kind == "HsDot":
        op = operator_for(grid)
        v = u.values * _cutoff(grid.nodes, lam)
        lamk = np.clip(op.eigenvalues, 0.0, None)
        return float(np.dot(lamk ** float(indices.s_c), np.abs(op.forward(v)) ** 2))
    raise ValueError(f"unknown window kind {kind!r}")


def concentration_series(traj: Trajectory, diag: BlowupDiagnostics, alpha: float = 0.25,
                         kind: str = "Lsigma_c", V: GroundStateResult | None = None,
                         W: GroundStateResult | None = None) -> BlowupDiagnostics:
    """Append ``(t, lam(t), local L^{sigma_c} mass, local Hdot^{s_c} mass)`` frames.

    ``lam(t) = (T* - t)^alpha`` from the fitted ``T*``.  Thresholds
    ``|V|_{sigma_c}^{sigma_c}`` and ``|W|_{Hdot^{s_c}}^2`` are attached when
    the ground states are given.

    Raises
    ------
    ValueError
        Without a ``T*`` estimate or for ``alpha`` outside ``(0, 1/2)``.
    """
    if diag.T_star_estimate is None:
        raise ValueError("no blow-up time estimate; concentration windows are undefined")
    if not 0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2), got {alpha}")
    if kind not in ("Lsigma_c", "HsDot"):
        raise ValueError(f"unknown window kind {kind!r}")
    T = diag.T_star_estimate
    series = []
    for s in traj.snapshots:
        if s.t >= T:
            continue
        lam = (T - s.t) ** alpha
        m_l = window_mass(s.field, lam, traj.params, "Lsigma_c")
        m_h = window_mass(s.field, lam, traj.params, "HsDot") if kind == "HsDot" else math.nan
        series.append((s.t, lam, m_l, m_h))
    out = replace(diag, concentration_series=series)
    out.meta = dict(diag.meta, alpha=alpha, kind=kind,
                    cutoff="C2 quintic bump, transition width lam/4")
    thr = dict(diag.threshold)
    if V is not None:
        thr["V_Lsigma_c_power"] = V.norms["L_sigma_c"] ** float(derive_indices(traj.params).sigma_c)
    if W is not None:
        thr["W_Hsc_squared"] = W.norms["Hdot_s_c"] ** 2
    out.threshold = thr
    return out


def rescaled_profile(state: EvolutionState | Snapshot, params: ProblemParams,
                     indices: CriticalIndices | None = None, method: str = "relabel") -> RadialField:
    """``v(x) = rho^{(2-b)/(2 sigma)} u(rho x)`` with ``rho = |grad u|^{-1/(1-s_c)}``.

    ``"relabel"`` rescales the grid, which is exact; ``"interpolate"`` samples
    on the original grid.

    Raises
    ------
    ValueError
        For a zero gradient.
    """
    indices = indices or derive_indices(params)
    u = state.field
    G = math.sqrt(max(operator_for(u.grid).quadratic_form(u.values), 0.0))
    if G == 0:
        raise ValueError("zero gradient: no rescaling defined")
    _, sigma, b = params.floats()
    rho = G ** (-1.0 / (1.0 - float(indices.s_c)))
    amp = rho ** ((2 - b) / (2 * sigma))
    if method == "relabel":
        from .groundstate import _register

        _register(operator_for(u.grid).rescaled(1.0 / rho))
        return RadialField(u.grid.scaled(1.0 / rho), amp * u.values)
    if method == "interpolate":
        from .numerics import dilate

        return dilate(u, rho, amp)
    raise ValueError(f"unknown method {method!r}")


def global_criterion_monitor(traj: Trajectory, V: GroundStateResult | float) -> dict:
    """Flag frames with ``|u(t)|_{Hdot^{s_c}} < |V|_{L^{sigma_c}}``."""
    bound = V.norms["L_sigma_c"] if isinstance(V, GroundStateResult) else float(V)
    flags = [(r.t, r.hsc_norm < bound) for r in traj.records]
    crossed = next((t for t, ok in flags if not ok), None)
    verdict = "threshold respected" if crossed is None else f"threshold crossed at t = {crossed:.6g}"
    return {"bound": bound, "flags": flags, "respected": crossed is None, "verdict": verdict}
