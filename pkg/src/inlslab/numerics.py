"""Radial discretisation of radial functions on R^N.

Functions are sampled at cell centres ``r_j = (j + 1/2) h`` of the interval
``[0, R_max]`` and integrated with the midpoint weights
``w_j = omega_{N-1} r_j^{N-1} h``.  The discrete radial Laplacian is a
tridiagonal matrix that is symmetric in the weighted inner product; after the
similarity transform ``w = r^{(N-1)/2} u`` it becomes a symmetric tridiagonal
matrix whose eigendecomposition gives the spectral calculus used for
fractional powers and for the exact linear Schrodinger flow.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh, solveh_banded

__all__ = [
    "RadialGrid",
    "RadialField",
    "SpectralLaplacian",
    "TailWarning",
    "build_grid",
    "sphere_area",
    "apply_laplacian",
    "apply_fractional_laplacian",
    "weighted_integral",
    "norm",
    "inner",
    "dilate",
    "mixed_space_time_norm",
    "write_checkpoint",
    "read_checkpoint",
]


class TailWarning(UserWarning):
    """Field is not negligible at the outer boundary."""


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere in R^N (2 for N = 1)."""
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Cell-centred radial grid.

    Attributes
    ----------
    N : int
        Spatial dimension.
    M : int
        Number of nodes.
    h : float
        Spacing; ``R_max = M h``.
    nodes, weights : ndarray
        ``r_j = (j + 1/2) h`` and ``omega_{N-1} r_j^{N-1} h``.
    """

    N: int
    M: int
    h: float
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.N}")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"node count must be a positive integer, got {self.M}")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"spacing must be positive, got {self.h}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "h", float(self.h))
        r = (np.arange(self.M) + 0.5) * self.h
        w = sphere_area(self.N) * r ** (self.N - 1) * self.h
        r.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "nodes", r)
        object.__setattr__(self, "weights", w)

    @property
    def N_dim(self) -> int:
        return self.N

    @property
    def R_max(self) -> float:
        return self.M * self.h

    def scaled(self, factor: float) -> "RadialGrid":
        """Same node count, spacing multiplied by ``factor``."""
        return RadialGrid(self.N, self.M, self.h * factor)

    def matches(self, other: "RadialGrid") -> bool:
        return self.N == other.N and self.M == other.M and self.h == other.h

    def zeros(self) -> "RadialField":
        return RadialField(self, np.zeros(self.M, dtype=complex))

    def sample(self, fn) -> "RadialField":
        """Field with values ``fn(r)`` at the nodes."""
        return RadialField(self, np.asarray(fn(self.nodes), dtype=complex))


def build_grid(N_dim: int, M: int, R_max: float) -> RadialGrid:
    """Cell-centred grid with ``M`` nodes on ``[0, R_max]``.

    Production runs want ``M >= 16``; smaller grids are accepted so that
    hand-checkable examples stay cheap.

    Raises
    ------
    ValueError
        If ``M`` or ``R_max`` is not positive.
    """
    if M < 1:
        raise ValueError(f"need a positive node count, got M={M}")
    if not R_max > 0:
        raise ValueError(f"R_max must be positive, got {R_max}")
    return RadialGrid(N_dim, M, float(R_max) / M)


@dataclass(frozen=True, eq=False)
class RadialField:
    """Complex samples of a radial function on a grid."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.grid.M,):
            raise ValueError(f"expected {self.grid.M} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite samples")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def with_values(self, values) -> "RadialField":
        return RadialField(self.grid, values)

    def __mul__(self, c) -> "RadialField":
        return RadialField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __add__(self, other: "RadialField") -> "RadialField":
        _check_grid(self.grid, other.grid)
        return RadialField(self.grid, self.values + other.values)

    def __sub__(self, other: "RadialField") -> "RadialField":
        _check_grid(self.grid, other.grid)
        return RadialField(self.grid, self.values - other.values)

    @property
    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def is_zero(self) -> bool:
        return not np.any(self.values)


def _check_grid(a: RadialGrid, b: RadialGrid):
    if not a.matches(b):
        raise ValueError("field and operator live on different grids")


def _flux_coefficients(grid: RadialGrid) -> np.ndarray:
    """Face coefficients a_{j+1/2}, j = 0..M-1.

    They are fixed by asking the scheme to differentiate r^2 exactly,
    ``a_{j+1/2} r_{j+1/2} = N h sum_{i<=j} r_i^{N-1}``.  The result is
    consistent with the continuum flux r^{N-1} and reduces to the plain
    three-point stencil on ``w = r u`` when N = 3.
    """
    N, h = grid.N, grid.h
    faces = (np.arange(grid.M) + 1.0) * h
    partial = np.cumsum(grid.nodes ** (N - 1))
    return N * h * partial / faces


class SpectralLaplacian:
    """Discrete radial ``-Delta`` with Dirichlet wall at ``R_max``.

    The matrix ``A`` (approximating ``-Delta``) satisfies
    ``w_j A_jk = w_k A_kj``.  Internally everything is stored in symmetric
    form ``T = W^{1/2} A W^{-1/2}`` with ``W = diag(weights)``, i.e. in the
    variable ``r^{(N-1)/2} u``.  The eigendecomposition of ``T`` is computed
    lazily, since tridiagonal solves and products do not need it.
    """

    def __init__(self, grid: RadialGrid):
        self.grid = grid
        N, M, h = grid.N, grid.M, grid.h
        r = grid.nodes
        a = _flux_coefficients(grid)
        vol = r ** (N - 1)
        diag = np.empty(M)
        diag[0] = a[0] / vol[0]
        diag[1:] = (a[1:] + a[:-1]) / vol[1:]
        # ghost value from odd reflection of r^{(N-1)/2} u across the wall
        r_ghost = (M + 0.5) * h
        ratio = (r[-1] / r_ghost) ** ((N - 1) / 2)
        diag[-1] += a[-1] * ratio / vol[-1]
        off = -a[:-1] / np.sqrt(vol[:-1] * vol[1:])
        self.diag = diag / h**2
        self.offdiag = off / h**2
        self.sqrt_w = np.sqrt(grid.weights)
        # <A u, u> as a sum of squares: faces between nodes, then the wall
        c = sphere_area(N) / h
        self._face_q = c * a[:-1]
        self._wall_q = c * a[-1] * (1.0 + ratio)
        self._eig = None
        self._parent = None

    # --- tridiagonal work -------------------------------------------------
    def matvec(self, values: np.ndarray) -> np.ndarray:
        """``A u`` (that is ``-Delta u``) for nodal values ``u``."""
        y = self.sqrt_w * values
        out = self.diag * y
        out[:-1] += self.offdiag * y[1:]
        out[1:] += self.offdiag * y[:-1]
        return out / self.sqrt_w

    def quadratic_form(self, values: np.ndarray) -> float:
        """``<A u, u>`` in the weighted inner product.

        Evaluated as a positive sum of squared differences, which avoids the
        cancellation of the ``O(h^-2)`` diagonal against the off-diagonal.
        """
        d = np.abs(np.diff(values)) ** 2
        return float(np.dot(self._face_q, d)) + self._wall_q * float(abs(values[-1]) ** 2)

    def solve_shifted(self, rhs: np.ndarray, shift) -> np.ndarray:
        """Solve ``(A + diag(shift)) x = rhs`` with ``shift >= 0``."""
        M = self.grid.M
        ab = np.zeros((2, M))
        ab[0, 1:] = self.offdiag
        ab[1] = self.diag + np.broadcast_to(shift, (M,))
        y = solveh_banded(ab, self.sqrt_w * rhs, check_finite=False)
        return y / self.sqrt_w

    # --- spectral calculus ------------------------------------------------
    @property
    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        if self._eig is None:
            if self._parent is not None:
                parent, factor = self._parent
                lam, vec = parent.eig
                self._eig = (lam / factor**2, vec)
            else:
                # divide and conquer on the dense matrix: eigenvectors
                # orthogonal to ~1e-15, which the unitary flow relies on
                T = np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)
                lam, vec = eigh(T, driver="evd", overwrite_a=True, check_finite=False)
                self._eig = (lam, np.asfortranarray(vec))
        return self._eig

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eig[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        """Orthonormal eigenvectors of the symmetric form (columns)."""
        return self.eig[1]

    def eigenfunction(self, k: int) -> RadialField:
        """k-th eigenfunction, normalised in the weighted inner product."""
        return RadialField(self.grid, self.eigenvectors[:, k] / self.sqrt_w)

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Coefficients ``<u, e_k>`` in the weighted inner product."""
        return _real_matmul(self.eigenvectors.T, self.sqrt_w * values)

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        return _real_matmul(self.eigenvectors, coeffs) / self.sqrt_w

    def power(self, values: np.ndarray, s: float) -> np.ndarray:
        """``(-Delta)^s u`` through the eigenbasis.

        For ``s <= 1`` this is evaluated as ``A^{s-1} (A u)`` with the
        tridiagonal product taken first.  Rounding noise in the high
        coefficients is then damped by ``lam^{s-1}`` instead of amplified by
        ``lam^s``, which at M = 4096 is the difference between 1e-14 and
        5e-10 relative error at ``s = 1``.
        """
        lam = self.eigenvalues
        if s <= 1 and lam[0] > 0:
            return self.inverse(lam ** (s - 1) * self.forward(self.matvec(values)))
        return self.inverse(np.clip(lam, 0.0, None) ** s * self.forward(values))

    def rescaled(self, factor: float) -> "SpectralLaplacian":
        """Operator on ``grid.scaled(factor)``; shares the eigenvectors.

        The discrete operator scales exactly: ``A' = A / factor^2``.
        """
        new = SpectralLaplacian.__new__(SpectralLaplacian)
        new.grid = self.grid.scaled(factor)
        new.diag = self.diag / factor**2
        new.offdiag = self.offdiag / factor**2
        new.sqrt_w = np.sqrt(new.grid.weights)
        k = factor ** (self.grid.N - 2)
        new._face_q = self._face_q * k
        new._wall_q = self._wall_q * k
        new._eig = None
        new._parent = (self, factor)
        return new


def _real_matmul(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """``mat @ vec`` for real ``mat`` and real or complex ``vec``."""
    if np.iscomplexobj(vec):
        # two gemv calls beat one gemm on an (M, 2) view for either layout
        out = np.empty(mat.shape[0], dtype=complex)
        out.real = mat @ np.ascontiguousarray(vec.real)
        out.imag = mat @ np.ascontiguousarray(vec.imag)
        return out
    return mat @ vec


def apply_laplacian(op: SpectralLaplacian, u: RadialField) -> RadialField:
    """``Delta u`` (note the sign: the operator stores ``-Delta``)."""
    _check_grid(op.grid, u.grid)
    return RadialField(u.grid, -op.matvec(u.values))


def apply_fractional_laplacian(op: SpectralLaplacian, u: RadialField, s: float) -> RadialField:
    """``(-Delta)^s u`` for ``s`` in ``(0, 1]``."""
    if not 0 < s <= 1:
        raise ValueError(f"fractional power must lie in (0, 1], got {s}")
    _check_grid(op.grid, u.grid)
    return RadialField(u.grid, op.power(u.values, s))


def _tail_check(u: RadialField):
    a = u.abs
    peak = a.max(initial=0.0)
    if peak > 0 and a[-1] > 1e-8 * peak:
        warnings.warn(
            f"field at R_max is {a[-1] / peak:.2e} of its maximum; truncation may bias integrals",
            TailWarning,
            stacklevel=3,
        )


def weighted_integral(u: RadialField, b: float, p: float, *, warn: bool = True) -> float:
    """``sum_j w_j r_j^{-b} |u_j|^p``, the quadrature of ``int |x|^{-b}|u|^p``."""
    if b >= u.grid.N:
        raise ValueError(f"|x|^-b is not locally integrable for b={b} >= N={u.grid.N}")
    if warn:
        _tail_check(u)
    g = u.grid
    weight = g.weights if b == 0 else g.weights * g.nodes ** (-float(b))
    return float(np.dot(weight, u.abs ** float(p)))


def inner(u: RadialField, v: RadialField) -> complex:
    """Weighted inner product ``int u conj(v)``."""
    _check_grid(u.grid, v.grid)
    return complex(np.dot(u.grid.weights, u.values * np.conj(v.values)))


def norm(u: RadialField, kind: str = "L2", p: float | None = None, s: float | None = None,
         op: SpectralLaplacian | None = None) -> float:
    """Norms of a radial field.

    Parameters
    ----------
    kind : {"Lp", "L2", "gradL2", "HsDot"}
        ``Lp`` needs ``p >= 1`` (``p = inf`` gives the sup norm), ``HsDot``
        needs ``s`` and an operator; ``gradL2`` needs an operator.
    """
    if kind == "L2":
        kind, p = "Lp", 2.0
    if kind == "Lp":
        if p is None or p < 1:
            raise ValueError(f"Lp norm needs p >= 1, got {p}")
        if math.isinf(p):
            return float(u.abs.max(initial=0.0))
        return weighted_integral(u, 0, p, warn=False) ** (1.0 / p)
    if op is None:
        raise ValueError(f"{kind} norm needs a SpectralLaplacian")
    _check_grid(op.grid, u.grid)
    if kind == "gradL2":
        return math.sqrt(max(op.quadratic_form(u.values), 0.0))
    if kind == "HsDot":
        if s is None or not 0 <= s <= 1:
            raise ValueError(f"HsDot needs s in [0, 1], got {s}")
        c = op.forward(u.values)
        lam = np.clip(op.eigenvalues, 0.0, None)
        return math.sqrt(float(np.dot(lam**s, np.abs(c) ** 2)))
    raise ValueError(f"unknown norm kind {kind!r}")


def dilate(u: RadialField, theta: float, mu: float = 1.0, grid: RadialGrid | None = None) -> RadialField:
    """Sample ``mu * u(theta * r)`` on ``grid`` (default: the field's grid).

    A cubic spline through the even extension of ``u`` is used, with the
    Dirichlet value 0 at ``R_max``; points beyond ``R_max`` get 0.
    """
    src = u.grid
    grid = src if grid is None else grid
    r = src.nodes
    x = np.concatenate([-r[::-1], r, [src.R_max]])
    y = np.concatenate([u.values[::-1], u.values, [0.0]])
    spline = CubicSpline(x, y, bc_type="not-a-knot")
    t = theta * grid.nodes
    out = np.where(t < src.R_max, spline(np.minimum(t, src.R_max)), 0.0)
    return RadialField(grid, mu * out)


def mixed_space_time_norm(traj, q: float, p: float) -> float:
    """``(int ||u(t)||_{L^p}^q dt)^{1/q}`` by the trapezoid rule.

    ``traj`` is any object with a ``snapshots`` sequence of items having
    ``t`` and ``field`` (see :class:`inlslab.evolution.Trajectory`).
    ``q`` and ``p`` may be floats, ``math.inf`` or exact exponents with a
    ``to_float`` method.
    """
    q = _as_float(q)
    p = _as_float(p)
    frames = list(traj.snapshots)
    if not frames:
        raise ValueError("empty trajectory")
    vals = np.array([norm(f.field, "Lp", p=p) for f in frames])
    if math.isinf(q):
        return float(vals.max())
    ts = np.array([f.t for f in frames], dtype=float)
    if len(frames) == 1:
        return 0.0
    return float(np.trapezoid(vals**q, ts) ** (1.0 / q))


def _as_float(x) -> float:
    return x.to_float() if hasattr(x, "to_float") else float(x)


# --- checkpoint format -------------------------------------------------------

_MAGIC = b"INLS"
_VERSION = 1
_HEADER = struct.Struct("<4sHHIdd")


def write_checkpoint(path, u: RadialField, t: float = 0.0) -> Path:
    """Write a field in the little-endian checkpoint layout."""
    path = Path(path)
    g = u.grid
    header = _HEADER.pack(_MAGIC, _VERSION, g.N, g.M, g.h, float(t))
    payload = np.ascontiguousarray(u.values, dtype="<c16").tobytes()
    path.write_bytes(header + payload)
    return path


def read_checkpoint(path) -> tuple[RadialField, float]:
    """Inverse of :func:`write_checkpoint`; returns ``(field, t)``."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated checkpoint header")
    magic, version, N, M, h, t = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    body = data[_HEADER.size:]
    if len(body) != 16 * M:
        raise ValueError(f"{path}: expected {M} samples, found {len(body) / 16:g}")
    values = np.frombuffer(body, dtype="<c16").astype(complex)
    return RadialField(RadialGrid(N, M, h), values), t
