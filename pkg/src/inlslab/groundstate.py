"""Weinstein functionals, ground states Q, V, W and sharp constants.

Three scale-invariant ratios are handled::

    J(f)    = |grad f|^2 |f|_{sigma_c}^{2 sigma}   / P(f)
    J_sc(f) = |grad f|^2 |f|_{Hdot^{s_c}}^{2 sigma} / P(f)
    J_L2(f) = |grad f|^{2 sigma s_c + 2} |f|_2^{2 sigma (1 - s_c)} / P(f)

with ``P(f) = int |x|^{-b} |f|^{2 sigma + 2}``.  Minimisers, after the
explicit rescalings below, solve

    V:  Delta V + |x|^{-b} |V|^{2 sigma} V = |V|^{sigma_c - 2} V
    W:  Delta W + |x|^{-b} |W|^{2 sigma} W = (-Delta)^{s_c} W
    Q:  Delta Q + |x|^{-b} |Q|^{2 sigma} Q = Q

Discrete dilation is done by relabelling the grid spacing whenever possible:
the discrete operator, weights and every functional above scale exactly
under ``h -> h * factor``, so no interpolation error enters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .numerics import (
    RadialField,
    RadialGrid,
    SpectralLaplacian,
    build_grid,
    dilate,
    write_checkpoint,
)
from .params import CriticalIndices, ProblemParams, classify_regime, derive_indices

__all__ = [
    "WeinsteinValue",
    "GroundStateResult",
    "SolverOptions",
    "SharpConstants",
    "GNCheck",
    "NonConvergenceError",
    "DivergenceError",
    "FUNCTIONALS",
    "weinstein_J",
    "weinstein_J_sc",
    "weinstein_J_L2",
    "weinstein_value",
    "normalize_pair",
    "minimize_J",
    "petviashvili_fixed_point",
    "rescale_factors",
    "rescale_minimizer",
    "pohozaev_residuals",
    "sharp_constants",
    "gn_inequality_check",
    "solve_ground_state",
    "multistart_minimize",
    "export_ground_state",
    "random_smooth_field",
    "operator_for",
]


class NonConvergenceError(RuntimeError):
    """Descent failed; ``best`` holds the best iterate found."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


class DivergenceError(RuntimeError):
    """Fixed-point iteration left the stable range."""


@dataclass(frozen=True)
class WeinsteinValue:
    J: float

    def __post_init__(self):
        if not (self.J > 0 and math.isfinite(self.J)):
            raise ValueError(f"Weinstein value must be positive and finite, got {self.J}")

    def __float__(self):
        return float(self.J)


@dataclass
class SolverOptions:
    """Tolerances and limits shared by the solvers.

    ``tol`` is the Petviashvili successive-iterate tolerance (sup norm,
    relative to the sup of the iterate).
    """

    tol_J: float = 1e-10
    max_iter: int = 20000
    max_backtracks: int = 60
    elliptic_tol: float = 1e-6
    tol: float = 1e-10
    precond_shift: float | None = None
    stall_iters: int = 3
    record_history: bool = True


@dataclass
class GroundStateResult:
    """A ground state with diagnostics.

    ``elliptic_residual`` is the relative residual of the target equation.
    For results of :func:`minimize_J` it is taken modulo the Lagrange
    multiplier of the scale constraint, and the unprojected value is kept in
    ``raw_elliptic_residual``.
    """

    field: RadialField
    J_min: WeinsteinValue
    norms: dict
    pohozaev_residuals: tuple
    elliptic_residual: float
    iterations: int
    converged: bool
    target: str = ""
    params: ProblemParams | None = None
    raw_elliptic_residual: float = float("nan")
    history: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "target": self.target,
            "J_min": float(self.J_min),
            "norms": {k: float(v) for k, v in self.norms.items()},
            "pohozaev_residuals": [float(x) for x in self.pohozaev_residuals],
            "elliptic_residual": float(self.elliptic_residual),
            "raw_elliptic_residual": float(self.raw_elliptic_residual),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "grid": {"N": self.field.grid.N, "M": self.field.grid.M, "R_max": self.field.grid.R_max},
            "meta": self.meta,
        }


# --- operators and functionals ---------------------------------------------

_OPS: dict = {}


def operator_for(grid: RadialGrid) -> SpectralLaplacian:
    """Cached operator for a grid (keyed on N, M, h)."""
    key = (grid.N, grid.M, grid.h)
    op = _OPS.get(key)
    if op is None:
        if len(_OPS) > 16:
            _OPS.clear()
        op = _OPS[key] = SpectralLaplacian(grid)
    return op


def _register(op: SpectralLaplacian):
    g = op.grid
    _OPS.setdefault((g.N, g.M, g.h), op)
    return op


FUNCTIONALS = ("J", "J_sc", "J_L2")
_NORM_OF = {"J": "Lsigma_c", "J_sc": "HsDot", "J_L2": "L2"}
_FUNC_OF = {v: k for k, v in _NORM_OF.items()}


class _Functional:
    """``J = G^a X^(2c) / P`` and its gradient in the weighted inner product."""

    def __init__(self, kind: str, params: ProblemParams, op: SpectralLaplacian):
        if kind not in FUNCTIONALS:
            raise ValueError(f"unknown functional {kind!r}; choose from {FUNCTIONALS}")
        self.kind = kind
        self.op = op
        self.N, self.sigma, self.b = params.floats()
        ix = derive_indices(params)
        self.sc, self.sgc = ix.floats()
        if kind == "J_L2":
            self.a = self.sigma * self.sc + 1.0
            self.c = self.sigma * (1.0 - self.sc)
        else:
            self.a, self.c = 1.0, self.sigma
        grid = op.grid
        self.w = grid.weights
        self.wr = grid.nodes ** (-self.b)

    def ip(self, u, v) -> float:
        return float(np.dot(self.w * u, v))

    def _x2(self, f):
        """Squared X norm and ``grad log X``."""
        if self.kind == "J":
            af = np.abs(f)
            lam = float(np.dot(self.w, af**self.sgc))
            return lam ** (2.0 / self.sgc), af ** (self.sgc - 2) * f / lam
        if self.kind == "J_sc":
            hf = self.op.power(f, self.sc).real
            H = self.ip(hf, f)
            return H, hf / H
        m = self.ip(f, f)
        return m, f / m

    def parts(self, f):
        G = self.op.quadratic_form(f)
        X2, dlogX = self._x2(f)
        pw = self.wr * np.abs(f) ** (2 * self.sigma)
        P = float(np.dot(self.w, pw * f * f))
        return G, X2, P, dlogX, pw

    def value(self, f) -> float:
        G, X2, P, _, _ = self.parts(f)
        if P <= 0 or G <= 0:
            raise ValueError("zero field")
        return G**self.a * X2**self.c / P

    def grad(self, f):
        G, X2, P, dlogX, pw = self.parts(f)
        J = G**self.a * X2**self.c / P
        Af = self.op.matvec(f)
        g = J * (2 * self.a * Af / G + 2 * self.c * dlogX - (2 * self.sigma + 2) * pw * f / P)
        return J, g, (G, X2, P, dlogX, Af, pw)

    def constraint(self, f, parts=None):
        """``C = log X - log |grad f|`` and its gradient."""
        if parts is None:
            G, X2, P, dlogX, pw = self.parts(f)
            Af = self.op.matvec(f)
        else:
            G, X2, P, dlogX, Af, pw = parts
        return 0.5 * math.log(X2) - 0.5 * math.log(G), dlogX - Af / G

    def preconditioner(self, f, parts, floor: float):
        """Inverse of ``-Delta + floor`` plus the frozen zeroth-order term."""
        G, X2, P, dlogX, Af, pw = parts
        k = (self.c / self.a) * G / X2
        op = self.op
        if self.kind == "J_sc":
            lam = np.clip(op.eigenvalues, 0.0, None)
            sym = 1.0 / (lam + floor + k * lam**self.sc)
            return lambda v: op.inverse(sym * op.forward(v))
        if self.kind == "J":
            shift = floor + k * np.abs(f) ** (self.sgc - 2) * X2 ** (1 - self.sgc / 2)
        else:
            shift = floor + k
        return lambda v: op.solve_shifted(v, shift)

    def el_terms(self, f, parts, J):
        """Euler-Lagrange residual and its zeroth-order reference term."""
        G, X2, P, dlogX, Af, pw = parts
        zeroth = (self.c / self.a) * G * dlogX
        res = Af + zeroth - ((self.sigma + 1) / self.a) * (G / P) * pw * f
        return res, zeroth


def _real(f) -> np.ndarray:
    v = f.values if isinstance(f, RadialField) else np.asarray(f)
    if np.iscomplexobj(v):
        if np.max(np.abs(v.imag), initial=0.0) > 1e-12 * max(np.max(np.abs(v.real), initial=0.0), 1e-300):
            # a constant phase is harmless; rotate it away
            k = int(np.argmax(np.abs(v)))
            v = v * np.exp(-1j * np.angle(v[k]))
        v = v.real
    return np.array(v, dtype=float)


def weinstein_value(f: RadialField, params: ProblemParams, indices: CriticalIndices | None = None,
                    functional: str = "J") -> WeinsteinValue:
    """Evaluate one of the Weinstein ratios on the field's own grid.

    Raises
    ------
    ValueError
        For the zero field.
    """
    if f.is_zero():
        raise ValueError("Weinstein functional of the zero field")
    fn = _Functional(functional, params, operator_for(f.grid))
    return WeinsteinValue(fn.value(_real(f)) if not np.iscomplexobj(f.values) or _is_real_up_to_phase(f)
                          else _complex_J(fn, f.values))


def _is_real_up_to_phase(f: RadialField) -> bool:
    v = f.values
    k = int(np.argmax(np.abs(v)))
    rot = v * np.exp(-1j * np.angle(v[k]))
    return bool(np.max(np.abs(rot.imag)) <= 1e-12 * np.max(np.abs(v)))


def _complex_J(fn: _Functional, v: np.ndarray) -> float:
    G = fn.op.quadratic_form(v)
    av = np.abs(v)
    if fn.kind == "J":
        X2 = float(np.dot(fn.w, av**fn.sgc)) ** (2.0 / fn.sgc)
    elif fn.kind == "J_sc":
        X2 = float(np.real(np.dot(fn.w * np.conj(v), fn.op.power(v, fn.sc))))
    else:
        X2 = float(np.dot(fn.w, av**2))
    P = float(np.dot(fn.w, fn.wr * av ** (2 * fn.sigma + 2)))
    return G**fn.a * X2**fn.c / P


def weinstein_J(f, params, indices=None) -> WeinsteinValue:
    """``|grad f|^2 |f|_{sigma_c}^{2 sigma} / int |x|^{-b} |f|^{2 sigma + 2}``."""
    return weinstein_value(f, params, indices, "J")


def weinstein_J_sc(f, params, indices=None) -> WeinsteinValue:
    """As :func:`weinstein_J` with the spectral ``Hdot^{s_c}`` norm."""
    return weinstein_value(f, params, indices, "J_sc")


def weinstein_J_L2(f, params, indices=None) -> WeinsteinValue:
    """Ratio whose minimum is ``1 / C_GN`` for the L^2-based inequality."""
    return weinstein_value(f, params, indices, "J_L2")


# --- normalisation -----------------------------------------------------------

def _kappa(target: str, params: ProblemParams) -> float:
    """X-norm of ``mu f(theta x)`` equals ``mu theta^{-kappa} |f|_X``."""
    N = params.N
    if target == "L2":
        return N / 2
    return N / 2 - float(derive_indices(params).s_c)


def _target_norm(f: RadialField, target: str, params: ProblemParams) -> float:
    op = operator_for(f.grid)
    v = f.values
    if target == "Lsigma_c":
        sgc = float(derive_indices(params).sigma_c)
        return float(np.dot(f.grid.weights, np.abs(v) ** sgc)) ** (1 / sgc)
    if target == "HsDot":
        sc = float(derive_indices(params).s_c)
        return math.sqrt(max(float(np.real(np.dot(f.grid.weights * np.conj(v), op.power(v, sc)))), 0.0))
    if target == "L2":
        return math.sqrt(float(np.dot(f.grid.weights, np.abs(v) ** 2)))
    raise ValueError(f"unknown normalisation target {target!r}")


def _scaling_mu_theta(X: float, D: float, kappa: float, N: int):
    """Amplitude and dilation making both norms 1."""
    theta = (X / D) ** (1.0 / (1.0 - N / 2 + kappa))
    mu = theta**kappa / X
    return mu, theta


def normalize_pair(f: RadialField, target: str, params: ProblemParams, *, method: str = "interpolate",
                   tol: float = 1e-12, max_polish: int = 20) -> RadialField:
    """Return ``g = mu f(theta x)`` with ``|g|_target = |grad g|_2 = 1``.

    Parameters
    ----------
    target : {"Lsigma_c", "HsDot", "L2"}
    method : {"interpolate", "relabel"}
        ``"interpolate"`` keeps the grid and samples the dilated field with a
        cubic spline, then polishes ``(mu, theta)`` so the discrete norms are
        1.  ``"relabel"`` keeps the nodal values up to the amplitude and
        rescales the grid spacing by ``1/theta``, which is exact.

    Raises
    ------
    ValueError
        For the zero field, or a critical-norm target when ``s_c = 1``
        (both norms then scale alike and no dilation separates them).
        Also when interpolation cannot reach unit norms to 1e-6, typically
        because the dilated profile leaves the grid.
    """
    if f.is_zero():
        raise ValueError("cannot normalise the zero field")
    if target not in _FUNC_OF:
        raise ValueError(f"unknown normalisation target {target!r}")
    if target != "L2" and derive_indices(params).s_c == 1:
        raise ValueError("s_c = 1: the critical norm and |grad f| cannot be normalised independently")
    N = params.N
    kappa = _kappa(target, params)

    def norms(u):
        return _target_norm(u, target, params), math.sqrt(operator_for(u.grid).quadratic_form(u.values))

    X, D = norms(f)
    mu, theta = _scaling_mu_theta(X, D, kappa, N)
    if method == "relabel":
        grid = f.grid.scaled(1.0 / theta)
        _register(operator_for(f.grid).rescaled(1.0 / theta))
        return RadialField(grid, mu * f.values)
    if method != "interpolate":
        raise ValueError(f"unknown method {method!r}")
    if abs(theta - 1) < 1e-14 and abs(mu - 1) < 1e-14:
        return f
    g = dilate(f, theta, mu)
    for _ in range(max_polish):
        X, D = norms(g)
        if abs(X - 1) < tol and abs(D - 1) < tol:
            break
        dmu, dth = _scaling_mu_theta(X, D, kappa, N)
        mu, theta = mu * dmu, theta * dth
        g = dilate(f, theta, mu)
    X, D = norms(g)
    if abs(X - 1) > 1e-6 or abs(D - 1) > 1e-6:
        # the normalised profile does not fit on (or is not resolved by) the grid
        raise ValueError(f"interpolated normalisation failed (theta = {theta:.3g}); "
                         "use method='relabel' or a grid matched to the normalised scale")
    return g


# --- minimisation -------------------------------------------------------------

def _rayleigh_shift(op: SpectralLaplacian, f: np.ndarray) -> float:
    return op.quadratic_form(f) / float(np.dot(op.grid.weights * f, f))


def minimize_J(init: RadialField, functional: str, params: ProblemParams,
               opts: SolverOptions | None = None) -> GroundStateResult:
    """Minimise a Weinstein ratio on the normalised manifold.

    Preconditioned Polak-Ribiere conjugate gradients on
    ``{|grad f| = |f|_X = 1}`` with an Armijo line search, falling back on
    the approximate Wolfe conditions once J differences reach round-off.  Each trial point
    is retracted onto the manifold by a Newton correction of the scale
    constraint followed by an exact amplitude rescaling.  Accepted steps
    never increase J.

    Returns the normalised minimiser ``g*``; its ``elliptic_residual`` is
    the Euler-Lagrange residual modulo the scale multiplier.

    Raises
    ------
    ValueError
        Zero initial field, or parameters outside the intercritical regime.
    NonConvergenceError
        When ``max_backtracks`` halvings fail twice in a row away from a
        stationary point; ``best`` carries the best iterate.
    """
    opts = opts or SolverOptions()
    if init.is_zero():
        raise ValueError("initial field is zero")
    if str(classify_regime(params)) != "intercritical":
        raise ValueError(f"minimize_J needs intercritical parameters, got {classify_regime(params)}")
    op = operator_for(init.grid)
    fn = _Functional(functional, params, op)
    f = np.abs(_real(init))
    floor = opts.precond_shift if opts.precond_shift is not None else _rayleigh_shift(op, f)

    def retract(x, K_inv):
        for _ in range(30):
            C, dC = fn.constraint(x)
            if abs(C) < 1e-14:
                break
            u = K_inv(dC)
            x = x - (C / fn.ip(dC, u)) * u
        return x / math.sqrt(op.quadratic_form(x))

    def project(v, normals, us, gram):
        rhs = np.array([fn.ip(n, v) for n in normals])
        y = np.linalg.solve(gram, rhs)
        return v - y[0] * us[0] - y[1] * us[1]

    f = retract(f, lambda v: op.solve_shifted(v, floor))
    J, g, parts = fn.grad(f)
    history = [J] if opts.record_history else []
    d = None
    z_old = g_old = None
    alpha_prev = 1.0
    stall = 0
    kkt_mark, mark_it = math.inf, 0
    fails = 0
    it = 0
    reason = "max_iter"
    for it in range(1, opts.max_iter + 1):
        # preconditioner: -Delta plus the zeroth-order coefficient of the
        # Euler-Lagrange operator, frozen at the current iterate
        K_inv = fn.preconditioner(f, parts, floor)
        _, dC = fn.constraint(f, parts)
        normals = (parts[4], dC)
        us = (K_inv(normals[0]), K_inv(normals[1]))
        gram = np.array([[fn.ip(n, u) for u in us] for n in normals])
        z = project(K_inv(g), normals, us, gram)
        if d is not None and z_old is not None:
            beta = max(0.0, fn.ip(g, z - z_old) / fn.ip(g_old, z_old))
            d = -z + beta * project(d, normals, us, gram)
        else:
            d = -z
        slope = fn.ip(g, d)
        if slope >= 0:
            d, slope = -z, -fn.ip(g, z)
        if slope == 0:
            reason = "stationary"
            break
        a = min(2.0 * alpha_prev, 1e6)
        accepted = False
        for _ in range(opts.max_backtracks):
            trial = retract(f + a * d, K_inv)
            Jt = fn.value(trial)
            if Jt <= J + 1e-4 * a * slope:
                accepted = True
                break
            if Jt <= J and J - Jt <= 1e-13 * J:
                # J differences are at round-off: fall back on the gradient
                # (approximate Wolfe conditions)
                slope_t = fn.ip(fn.grad(trial)[1], d)
                if 0.9 * slope <= slope_t <= (2e-4 - 1.0) * slope:
                    accepted = True
                    break
            a *= 0.5
        if not accepted:
            fails += 1
            z_old = None
            d = None
            if fails >= 2:
                kkt = _kkt(fn, f, parts, J)
                if kkt <= opts.elliptic_tol or stall > 0:
                    # J no longer resolvable in floating point
                    reason = "round-off floor"
                    break
                raise NonConvergenceError(f"line search failed twice at iteration {it} (kkt {kkt:.2e})",
                                          best=RadialField(init.grid, f))
            continue
        fails = 0
        alpha_prev = a
        dec = (J - Jt) / J
        f = trial
        z_old, g_old = z, g
        J, g, parts = fn.grad(f)
        if opts.record_history:
            history.append(J)
        stall = stall + 1 if dec < opts.tol_J else 0
        if stall == 0:
            continue
        kkt = _kkt(fn, f, parts, J)
        if stall >= opts.stall_iters and kkt <= opts.elliptic_tol:
            reason = "tol_J"
            break
        # J is flat; keep going only while the stationarity residual improves
        if kkt < 0.5 * kkt_mark:
            kkt_mark, mark_it = kkt, it
        if stall >= 20 * opts.stall_iters and it - mark_it >= 100 * opts.stall_iters:
            reason = "stalled"
            break
    kkt = _kkt(fn, f, parts, J)
    res, zeroth = fn.el_terms(f, parts, J)
    raw = math.sqrt(fn.ip(res, res) / fn.ip(zeroth, zeroth))
    field_ = RadialField(init.grid, f)
    return GroundStateResult(
        field=field_,
        J_min=WeinsteinValue(J),
        norms=_norms(field_, params),
        pohozaev_residuals=(float("nan"), float("nan")),
        elliptic_residual=kkt,
        raw_elliptic_residual=raw,
        iterations=it,
        converged=kkt <= opts.elliptic_tol,
        target=f"g*[{functional}]",
        params=params,
        history=history,
        meta={"functional": functional, "stop": reason, "precond_floor": floor},
    )


def _kkt(fn: _Functional, f, parts, J) -> float:
    """EL residual after removing the scale-constraint multiplier."""
    res, zeroth = fn.el_terms(f, parts, J)
    _, dC = fn.constraint(f, parts)
    lam = fn.ip(res, dC) / fn.ip(dC, dC)
    proj = res - lam * dC
    return math.sqrt(fn.ip(proj, proj) / fn.ip(zeroth, zeroth))


# --- rescaling --------------------------------------------------------------

_TARGET_FUNCTIONAL = {"V": "J", "W": "J_sc", "Q": "J_L2"}


def rescale_factors(J: float, target: str, params: ProblemParams) -> tuple[float, float]:
    """``(alpha, beta)`` with ``g*(x) = alpha * target(beta x)``.

    Raises
    ------
    ValueError
        If ``J <= 0``.
    """
    J = float(J)
    if not J > 0:
        raise ValueError(f"J must be positive, got {J}")
    N, s, b = params.floats()
    sc, sgc = derive_indices(params).floats()
    K = (s + 1) * J
    if target == "V":
        D = (N - 2) * s - 2 + b
        base = K / s ** ((2 - b) / 2)
        alpha = base ** (1.0 / D)
        beta = math.sqrt(s) * base ** ((sgc - 2) / (2 * D))
    elif target == "W":
        beta = s ** (1.0 / (2 * (1 - sc)))
        alpha = (s ** ((2 - b) / (2 * (1 - sc))) / K) ** (1.0 / (2 * s))
    elif target == "Q":
        a, c = s * sc + 1, s * (1 - sc)
        beta = math.sqrt(c / a)
        alpha = (a * beta ** (2 - b) / K) ** (1.0 / (2 * s))
    else:
        raise ValueError(f"unknown target {target!r}")
    return alpha, beta


def rescale_minimizer(g_star: RadialField, J, target: str, params: ProblemParams,
                      indices: CriticalIndices | None = None, grid: RadialGrid | None = None) -> RadialField:
    """Undo ``g*(x) = alpha * target(beta x)``.

    By default the result lives on ``g_star.grid`` scaled by ``beta`` with
    values ``g*/alpha``, which is exact at the discrete level.  With ``grid``
    given the field is interpolated onto it instead.
    """
    alpha, beta = rescale_factors(float(J), target, params)
    if grid is None:
        _register(operator_for(g_star.grid).rescaled(beta))
        return RadialField(g_star.grid.scaled(beta), g_star.values / alpha)
    return dilate(g_star, 1.0 / beta, 1.0 / alpha, grid=grid)


# --- identities and diagnostics -----------------------------------------------

def _norms(u: RadialField, params: ProblemParams) -> dict:
    N, s, b = params.floats()
    sc, sgc = derive_indices(params).floats()
    op = operator_for(u.grid)
    w = u.grid.weights
    av = np.abs(u.values)
    out = {
        "L_sigma_c": float(np.dot(w, av**sgc)) ** (1 / sgc),
        "grad_L2": math.sqrt(op.quadratic_form(u.values)),
        "weighted_L_2sigma+2": float(np.dot(w, u.grid.nodes ** (-b) * av ** (2 * s + 2))) ** (1 / (2 * s + 2)),
        "L2": math.sqrt(float(np.dot(w, av**2))),
    }
    if u.grid.M <= 8192:
        out["Hdot_s_c"] = _target_norm(u, "HsDot", params)
    return out


def _boundary_term(phi: RadialField) -> float:
    """Wall flux ``(1/2) R |S^{N-1}| R^{N-1} phi'(R)^2`` of the Dirichlet ball."""
    g = phi.grid
    N, h, R = g.N, g.h, g.R_max
    ratio = (g.nodes[-1] / (R + h / 2)) ** ((N - 1) / 2)
    v = phi.values[-1]
    dphi = abs((-ratio * v - v) / h)
    area = 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)
    return 0.5 * R * area * R ** (N - 1) * dphi**2


def pohozaev_residuals(phi: RadialField, params: ProblemParams, indices: CriticalIndices | None = None,
                       *, target: str = "V", boundary: bool = False) -> tuple[float, float]:
    """Relative residuals of the two integral identities.

    For ``V``: ``r1 = | |grad phi|^2 - L/sigma | / |grad phi|^2`` and
    ``r2 = | P - (sigma+1) L/sigma | / P`` with ``L = |phi|_{sigma_c}^{sigma_c}``.
    For ``W`` the same with ``L`` replaced by ``|phi|_{Hdot^{s_c}}^2``; for
    ``Q`` the identities ``|grad Q|^2 = m (N sigma + b)/(2 - b - (N-2) sigma)``
    and ``P = m (2 sigma + 2)/(2 - b - (N-2) sigma)`` with ``m = |Q|_2^2``.

    ``boundary=True`` (V only) adds the Dirichlet wall flux term of the
    truncated ball to the prediction; it is a diagnostic of the truncation
    error, not part of the identities.

    Raises
    ------
    ValueError
        For the zero field.
    """
    if phi.is_zero():
        raise ValueError("Pohozaev residuals of the zero field")
    N, s, b = params.floats()
    sc, sgc = derive_indices(params).floats()
    op = operator_for(phi.grid)
    w = phi.grid.weights
    av = np.abs(phi.values)
    G = op.quadratic_form(phi.values)
    P = float(np.dot(w, phi.grid.nodes ** (-b) * av ** (2 * s + 2)))
    if target == "V":
        L = float(np.dot(w, av**sgc))
        if boundary:
            B = _boundary_term(phi)
            A1 = (N - 2) / 2 - (N - b) / (2 * s + 2)
            A2 = (N - 2) / 2 - (2 - b) / (2 * s)
            P_pred = (L * A2 - B) / A1
            G_pred = P_pred - L
        else:
            G_pred, P_pred = L / s, (s + 1) / s * L
    elif target == "W":
        H = _target_norm(phi, "HsDot", params) ** 2
        G_pred, P_pred = H / s, (s + 1) / s * H
    elif target == "Q":
        m = float(np.dot(w, av**2))
        den = 2 - b - (N - 2) * s
        G_pred, P_pred = m * (N * s + b) / den, m * (2 * s + 2) / den
    else:
        raise ValueError(f"unknown target {target!r}")
    return abs(G - G_pred) / G, abs(P - P_pred) / P


def _elliptic_residual(u: RadialField, target: str, params: ProblemParams) -> float:
    N, s, b = params.floats()
    sc, sgc = derive_indices(params).floats()
    op = operator_for(u.grid)
    v = _real(u)
    nl = u.grid.nodes ** (-b) * np.abs(v) ** (2 * s) * v
    if target == "V":
        zeroth = np.abs(v) ** (sgc - 2) * v
    elif target == "W":
        zeroth = op.power(v, sc).real
    else:
        zeroth = v
    res = -op.matvec(v) + nl - zeroth
    w = u.grid.weights
    return math.sqrt(float(np.dot(w, res**2)) / float(np.dot(w, zeroth**2)))


def _result_for_target(u: RadialField, target: str, params: ProblemParams, *, iterations: int,
                       converged: bool, elliptic: float, raw: float, history=None, meta=None) -> GroundStateResult:
    J = weinstein_value(u, params, functional=_TARGET_FUNCTIONAL[target])
    return GroundStateResult(
        field=u,
        J_min=J,
        norms=_norms(u, params),
        pohozaev_residuals=pohozaev_residuals(u, params, target=target),
        elliptic_residual=elliptic,
        raw_elliptic_residual=raw,
        iterations=iterations,
        converged=converged,
        target=target,
        params=params,
        history=history or [],
        meta=dict(meta or {}, radial_class_only=True),
    )


# --- Petviashvili --------------------------------------------------------------

def _default_init(grid: RadialGrid, target: str) -> np.ndarray:
    r = grid.nodes
    return 2.0 * np.exp(-r**2 / 2)


def petviashvili_fixed_point(target: str, params: ProblemParams, grid: RadialGrid | None = None,
                             opts: SolverOptions | None = None, init: RadialField | None = None) -> GroundStateResult:
    """Stabilised fixed-point iteration for Q, V or W.

    ``u <- S^gamma L_u^{-1} [|x|^{-b} |u|^{2 sigma} u]`` with
    ``L = -Delta + 1`` (Q), ``-Delta + |u|^{sigma_c - 2}`` frozen at the
    previous iterate (V) or ``-Delta + (-Delta)^{s_c}`` applied spectrally
    (W); ``S = <L u, u> / <|x|^{-b}|u|^{2 sigma} u, u>`` and
    ``gamma = (2 sigma + 1)/(2 sigma)``.

    Raises
    ------
    ValueError
        Non-intercritical parameters, or ``s_c`` outside (0, 1) for W.
    DivergenceError
        If ``S`` leaves ``[1e-3, 1e3]``.
    """
    opts = opts or SolverOptions()
    if target not in ("Q", "V", "W"):
        raise ValueError(f"unknown target {target!r}")
    if str(classify_regime(params)) != "intercritical":
        raise ValueError(f"Petviashvili iteration needs intercritical parameters, got {classify_regime(params)}")
    if grid is None:
        grid = init.grid if init is not None else build_grid(params.N, 4096, 32.0)
    N, s, b = params.floats()
    sc, sgc = derive_indices(params).floats()
    if target == "W" and not 0 < sc < 1:
        raise ValueError("W needs 0 < s_c < 1")
    op = operator_for(grid)
    w = grid.weights
    wr = grid.nodes ** (-b)
    u = _real(init) if init is not None else _default_init(grid, target)
    gamma = (2 * s + 1) / (2 * s)
    if target == "W":
        lam = np.clip(op.eigenvalues, 0.0, None)
        symbol = lam + lam**sc
    S = 1.0
    it = 0
    for it in range(1, opts.max_iter + 1):
        nl = wr * np.abs(u) ** (2 * s) * u
        den = float(np.dot(w, nl * u))
        if target == "Q":
            Lu = op.matvec(u) + u
            U = op.solve_shifted(nl, 1.0)
        elif target == "V":
            pot = np.abs(u) ** (sgc - 2)
            Lu = op.matvec(u) + pot * u
            U = op.solve_shifted(nl, pot)
        else:
            cu = op.forward(u)
            Lu = op.inverse(symbol * cu).real
            U = op.inverse(op.forward(nl) / symbol).real
        S = float(np.dot(w, Lu * u)) / den
        if not (1e-3 <= S <= 1e3) or not np.isfinite(S):
            raise DivergenceError(f"stabilising factor {S:.3g} left [1e-3, 1e3] at iteration {it}")
        un = S**gamma * U
        diff = float(np.max(np.abs(un - u))) / float(np.max(np.abs(un)))
        u = un
        if diff < opts.tol:
            break
    field_ = RadialField(grid, u)
    res = _elliptic_residual(field_, target, params)
    return _result_for_target(field_, target, params, iterations=it, converged=res <= opts.elliptic_tol,
                              elliptic=res, raw=res, meta={"route": "petviashvili", "stabilizer": S})


# --- driver --------------------------------------------------------------------

def _init_profile(grid: RadialGrid, kind: str) -> np.ndarray:
    r = grid.nodes
    ell = grid.R_max / 16
    if kind == "gaussian":
        return np.exp(-(r / ell) ** 2)
    if kind == "supergaussian":
        return np.exp(-(r / ell) ** 4)
    if kind == "sech":
        return 1.0 / np.cosh(r / ell)
    raise ValueError(f"unknown initial profile {kind!r}")


def multistart_minimize(grid: RadialGrid, functional: str, params: ProblemParams,
                        inits=("gaussian", "supergaussian", "sech"), opts: SolverOptions | None = None):
    """Minimise from several profiles; return the best result and all J values."""
    results = []
    for kind in inits:
        res = minimize_J(RadialField(grid, _init_profile(grid, kind)), functional, params, opts)
        res.meta["init"] = kind
        results.append(res)
    best = min(results, key=lambda r: float(r.J_min))
    best.meta["basins"] = {r.meta["init"]: float(r.J_min) for r in results}
    return best, results


def solve_ground_state(target: str, params: ProblemParams, M: int = 4096, R_max: float = 32.0,
                       route: str = "minimize", opts: SolverOptions | None = None,
                       passes: int = 3, multistart: bool = False) -> GroundStateResult:
    """Ground state on a grid of ``M`` nodes reaching about ``R_max``.

    ``route="minimize"`` minimises the matching Weinstein ratio on a grid
    chosen so that the rescaled state lands on ``[0, R_max]`` and rescales
    exactly.  For V the dilation depends on J, so a few coarse passes fix
    the grid first and the final ``R_max`` agrees to the accuracy of the
    coarse estimate (recorded in ``meta``).  ``route="petviashvili"`` runs
    the fixed-point iteration on ``build_grid(N, M, R_max)``.
    """
    opts = opts or SolverOptions()
    regime = str(classify_regime(params))
    if regime != "intercritical":
        raise ValueError(f"ground states need intercritical parameters, got {regime}")
    if route == "petviashvili":
        return petviashvili_fixed_point(target, params, build_grid(params.N, M, R_max), opts)
    if route != "minimize":
        raise ValueError(f"unknown route {route!r}")
    functional = _TARGET_FUNCTIONAL[target]
    J_est = None
    if target == "V":
        M0 = max(64, min(M, 1024))
        J_est = _coarse_J_estimate(params, M0, R_max, passes, opts)
        _, beta = rescale_factors(J_est, target, params)
    else:
        _, beta = rescale_factors(1.0, target, params)
    grid = build_grid(params.N, M, R_max / beta)
    if multistart:
        g, _ = multistart_minimize(grid, functional, params, opts=opts)
    else:
        g = minimize_J(RadialField(grid, _init_profile(grid, "gaussian")), functional, params, opts)
    u = rescale_minimizer(g.field, g.J_min, target, params)
    res = _result_for_target(u, target, params, iterations=g.iterations, converged=g.converged,
                             elliptic=g.elliptic_residual, raw=_elliptic_residual(u, target, params),
                             history=g.history, meta={"route": "minimize", "J_estimate": J_est,
                                                      "g_star_R_max": grid.R_max, "stop": g.meta.get("stop")})
    res.meta["J_minimizer"] = float(g.J_min)
    if "basins" in g.meta:
        res.meta["basins"] = g.meta["basins"]
    return res


def _coarse_J_estimate(params, M0, R_max, passes, opts) -> float:
    # The first pass runs on the grid of the normalised Gaussian, which sits
    # at the natural scale of g* whatever beta is.  Later passes use the grid
    # implied by the current J; beta can depend on J through a large power,
    # so a pass that fails keeps the previous estimate.
    grid = build_grid(params.N, M0, R_max)
    start = normalize_pair(RadialField(grid, _init_profile(grid, "gaussian")), "Lsigma_c", params,
                           method="relabel")
    coarse = replace(opts, tol_J=max(opts.tol_J, 1e-9), record_history=False)
    J = float(minimize_J(start, "J", params, coarse).J_min)
    for _ in range(passes - 1):
        _, beta = rescale_factors(J, "V", params)
        grid = build_grid(params.N, M0, R_max / beta)
        try:
            g = minimize_J(RadialField(grid, _init_profile(grid, "gaussian")), "J", params, coarse)
        except NonConvergenceError:
            break
        J = float(g.J_min)
    return J


# --- constants and the inequality check ---------------------------------------

@dataclass(frozen=True)
class SharpConstants:
    K_GN_V: float | None = None
    C_GN_Q: float | None = None
    K_GN_W: float | None = None

    def as_dict(self) -> dict:
        return {"K_GN_V": self.K_GN_V, "C_GN_Q": self.C_GN_Q, "K_GN_W": self.K_GN_W}


def sharp_constants(*results: GroundStateResult, params: ProblemParams | None = None) -> SharpConstants:
    """Sharp constants from converged Q, V and/or W results.

    ``K_GN_V = (sigma+1)/|V|_{sigma_c}^{2 sigma}``,
    ``K_GN_W = (sigma+1)/|W|_{Hdot^{s_c}}^{2 sigma}`` and
    ``C_GN_Q = [2 sigma (1-s_c)/(2 sigma s_c + 2)]^{sigma s_c}
    (2 sigma + 2) / ((2 sigma s_c + 2) |Q|_2^{2 sigma})``.

    Raises
    ------
    ValueError
        If a result is not converged or has an unknown target.
    """
    vals = {}
    for res in results:
        if not res.converged:
            raise ValueError(f"refusing constants from a non-converged {res.target} result")
        p = params or res.params
        N, s, b = p.floats()
        sc, sgc = derive_indices(p).floats()
        if res.target == "V":
            vals["K_GN_V"] = (s + 1) / res.norms["L_sigma_c"] ** (2 * s)
        elif res.target == "W":
            vals["K_GN_W"] = (s + 1) / _target_norm(res.field, "HsDot", p) ** (2 * s)
        elif res.target == "Q":
            q2 = res.norms["L2"]
            vals["C_GN_Q"] = ((2 * s * (1 - sc)) / (2 * s * sc + 2)) ** (s * sc) * (2 * s + 2) / (
                (2 * s * sc + 2) * q2 ** (2 * s))
        else:
            raise ValueError(f"no sharp constant for target {res.target!r}")
    return SharpConstants(**vals)


def random_smooth_field(grid: RadialGrid, rng: np.random.Generator, bumps: int = 3) -> RadialField:
    """Sum of radial Gaussian shells with random signs, centres and widths.

    Widths span at least 16 nodes and at most a quarter of the domain, so
    the field is resolved and negligible at ``R_max``.
    """
    r = grid.nodes
    R = grid.R_max
    out = np.zeros_like(r)
    for _ in range(bumps):
        width = rng.uniform(max(16 * grid.h, R / 64), R / 16)
        centre = rng.uniform(0.0, R / 4)
        out += rng.uniform(-1.0, 1.0) * np.exp(-(((r - centre) / width) ** 2))
    if not np.any(out):
        out = np.exp(-((r / (R / 16)) ** 2))
    return RadialField(grid, out)


@dataclass(frozen=True)
class GNCheck:
    passed: bool
    margin: float
    lhs: float
    rhs: float


def gn_inequality_check(f: RadialField, V_result: GroundStateResult, slack: float = 1e-3) -> GNCheck:
    """Test ``P(f) <= K_GN_V |grad f|^2 |f|_{sigma_c}^{2 sigma} (1 + slack)``.

    ``margin`` is ``J(f) / J_min``; sharpness means it is never below 1
    beyond discretisation error.

    Raises
    ------
    ValueError
        Zero ``f`` or a non-converged ``V_result``.
    """
    if f.is_zero():
        raise ValueError("zero field")
    if not V_result.converged:
        raise ValueError("V result is not converged")
    p = V_result.params
    N, s, b = p.floats()
    sc, sgc = derive_indices(p).floats()
    K = sharp_constants(V_result).K_GN_V
    w = f.grid.weights
    av = np.abs(f.values)
    lhs = float(np.dot(w, f.grid.nodes ** (-b) * av ** (2 * s + 2)))
    Lsc = float(np.dot(w, av**sgc)) ** (1 / sgc)
    rhs = K * operator_for(f.grid).quadratic_form(f.values) * Lsc ** (2 * s)
    margin = float(weinstein_J(f, p)) / float(V_result.J_min)
    return GNCheck(bool(lhs <= rhs * (1 + slack)), margin, lhs, float(rhs))


# --- export --------------------------------------------------------------------

def export_ground_state(result: GroundStateResult, prefix, constants: SharpConstants | None = None) -> tuple[Path, Path]:
    """Write ``<prefix>.bin`` (checkpoint) and ``<prefix>.json`` (sidecar)."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    bin_path = write_checkpoint(prefix.with_suffix(".bin"), result.field, 0.0)
    data = result.summary()
    if result.params is not None:
        p = result.params
        data["params"] = {"N": p.N, "sigma": str(p.sigma), "b": str(p.b)}
    if constants is not None:
        data["constants"] = constants.as_dict()
    json_path = prefix.with_suffix(".json")
    json_path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return bin_path, json_path
