"""Configuration-driven experiment runner.

Configs are INI-style text (``key = value`` inside ``[section]`` headers);
rationals are written as ``num/den`` strings and floats with ``repr`` so
that ``parse(render(cfg)) == cfg``.

Subcommands: ``ground``, ``evolve``, ``blowup``, ``concentration``,
``pairs``, ``sweep`` and ``report``.  Each run writes its artifacts and a
``manifest.json`` into the output directory and exits nonzero iff one of
its checks fails.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import hashlib
import io
import itertools
import json
import math
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import evolution as ev
from . import groundstate as gs
from . import strichartz as st
from .numerics import build_grid, write_checkpoint
from .params import ProblemParams, as_fraction, check_hypotheses, classify_regime, derive_indices

__all__ = [
    "KINDS",
    "GridSpec",
    "ProfileSpec",
    "SolverSpec",
    "PairsSpec",
    "SweepSpec",
    "ExperimentConfig",
    "RunManifest",
    "parse_config",
    "render_config",
    "load_config",
    "run",
    "sweep",
    "export_report",
    "main",
]

KINDS = ("ground", "evolve", "blowup", "concentration", "pairs", "sweep")
SWEEP_COLUMNS = ("index", "N", "sigma", "b", "s_c", "regime", "status", "J_min", "K_GN_V", "gamma_fit",
                 "mass_drift", "energy_drift", "error")


# --- configuration -------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    M: int = 4096
    R_max: float = 32.0


@dataclass(frozen=True)
class ProfileSpec:
    kind: str = "gaussian"
    A: float = 1.0
    w: float = 1.0
    c: float = 1.0
    path: str = ""


@dataclass(frozen=True)
class SolverSpec:
    tol_J: float = 1e-10
    elliptic_tol: float = 1e-6
    T_end: float = 1.0
    dt_max: float = 1e-2
    dt_min: float = 1e-12
    phase_cap: float = math.pi / 16
    fixed_dt: float | None = None
    record_every: int = 1
    min_growth: float = 1e3
    alpha: float = 0.25
    n_random: int = 10


@dataclass(frozen=True)
class PairsSpec:
    eps: Fraction = Fraction(1, 1000)
    theta: Fraction = Fraction(1, 1000)
    families: tuple[str, ...] = ("PA1", "PA2", "PPM-plus", "PPM-minus")
    systems: tuple[str, ...] = ("sistema",)


@dataclass(frozen=True)
class SweepSpec:
    N: tuple[int, ...] = ()
    sigma: tuple[Fraction, ...] = ()
    b: tuple[Fraction, ...] = ()
    kind: str = "ground"


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "ground"
    params: ProblemParams = field(default_factory=lambda: ProblemParams.of(3, 1, "1/2"))
    grid: GridSpec = field(default_factory=GridSpec)
    profile: ProfileSpec = field(default_factory=ProfileSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    pairs: PairsSpec = field(default_factory=PairsSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    out: str = "runs"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if self.sweep.kind not in KINDS or self.sweep.kind == "sweep":
            raise ValueError(f"sweep kind must be a single-run kind, got {self.sweep.kind!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def render_config(cfg: ExperimentConfig) -> str:
    """Textual form; inverse of :func:`parse_config`."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["run"] = {"kind": cfg.kind, "out": cfg.out, "seed": str(cfg.seed), "workers": str(cfg.workers)}
    p = cfg.params
    cp["params"] = {"N": str(p.N), "sigma": str(p.sigma), "b": str(p.b)}
    for name in ("grid", "profile", "solver", "pairs", "sweep"):
        spec = getattr(cfg, name)
        cp[name] = {f.name: _fmt(getattr(spec, f.name)) for f in dataclasses.fields(spec)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _convert(text: str, typ):
    text = text.strip()
    if typ is int:
        return int(text)
    if typ is float:
        return float(text)
    if typ == "float|None":
        return None if text.lower() == "none" else float(text)
    if typ is Fraction:
        return as_fraction(text)
    if typ is str:
        return text
    raise TypeError(typ)


_FIELD_TYPES = {
    GridSpec: {"M": int, "R_max": float},
    ProfileSpec: {"kind": str, "A": float, "w": float, "c": float, "path": str},
    SolverSpec: {"tol_J": float, "elliptic_tol": float, "T_end": float, "dt_max": float, "dt_min": float,
                 "phase_cap": float, "fixed_dt": "float|None", "record_every": int, "min_growth": float,
                 "alpha": float, "n_random": int},
    PairsSpec: {"eps": Fraction, "theta": Fraction, "families": (str,), "systems": (str,)},
    SweepSpec: {"N": (int,), "sigma": (Fraction,), "b": (Fraction,), "kind": str},
}


def _section(cp, name, cls):
    if not cp.has_section(name):
        return cls()
    types = _FIELD_TYPES[cls]
    kwargs = {}
    for key, raw in cp[name].items():
        if key not in types:
            raise ValueError(f"unknown key {key!r} in [{name}]")
        typ = types[key]
        if isinstance(typ, tuple):
            items = [x for x in (s.strip() for s in raw.split(",")) if x]
            kwargs[key] = tuple(_convert(x, typ[0]) for x in items)
        else:
            kwargs[key] = _convert(raw, typ)
    return cls(**kwargs)


def parse_config(text: str) -> ExperimentConfig:
    """Parse the textual config.

    Raises
    ------
    ValueError
        For malformed text, unknown keys or invalid values.
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValueError(f"unparseable config: {exc}") from None
    known = {"run", "params", "grid", "profile", "solver", "pairs", "sweep"}
    extra = set(cp.sections()) - known
    if extra:
        raise ValueError(f"unknown config sections {sorted(extra)}")
    try:
        run_s = cp["run"] if cp.has_section("run") else {}
        base = ExperimentConfig()
        if cp.has_section("params"):
            ps = cp["params"]
            params = ProblemParams.of(int(ps.get("N", base.params.N)), ps.get("sigma", str(base.params.sigma)),
                                      ps.get("b", str(base.params.b)))
        else:
            params = base.params
        return ExperimentConfig(
            kind=run_s.get("kind", base.kind).strip(),
            params=params,
            grid=_section(cp, "grid", GridSpec),
            profile=_section(cp, "profile", ProfileSpec),
            solver=_section(cp, "solver", SolverSpec),
            pairs=_section(cp, "pairs", PairsSpec),
            sweep=_section(cp, "sweep", SweepSpec),
            out=run_s.get("out", base.out).strip(),
            seed=int(run_s.get("seed", base.seed)),
            workers=int(run_s.get("workers", base.workers)),
        )
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"invalid config: {exc}") from None


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(render_config(cfg).encode("utf-8")).hexdigest()


# --- manifests -------------------------------------------------------------------

@dataclass
class RunManifest:
    kind: str
    config_hash: str
    started: str
    finished: str = ""
    artifacts: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    banner: list = field(default_factory=list)
    status: str = "ok"
    error: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "ok" and all(self.checks.values())

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o).__name__)


def _write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False, default=_json_default) + "\n",
                    encoding="utf-8")
    return path


_THEOREM_FOR = {"ground": ("GN-sharp",), "evolve": ("LWP-Hsc",), "blowup": ("concentration",),
                "concentration": ("concentration",), "pairs": ()}


def _banner(cfg: ExperimentConfig, kind: str) -> list[str]:
    out = []
    theorems = _THEOREM_FOR.get(kind, ())
    if kind == "evolve" and cfg.params.N == 2:
        theorems = ("GWP-2D",)
    for tid in theorems:
        rep = check_hypotheses(cfg.params, tid)
        if not rep.passed:
            out.append(f"outside proven theory ({tid}): " + "; ".join(rep.failures))
    return out


# --- experiments -------------------------------------------------------------------

def _solver_options(cfg: ExperimentConfig) -> gs.SolverOptions:
    return gs.SolverOptions(tol_J=cfg.solver.tol_J, elliptic_tol=cfg.solver.elliptic_tol)


def _ground(cfg: ExperimentConfig, out: Path, man: RunManifest):
    p = cfg.params
    V = gs.solve_ground_state("V", p, cfg.grid.M, cfg.grid.R_max, opts=_solver_options(cfg))
    consts = gs.sharp_constants(V) if V.converged else gs.SharpConstants()
    bin_path, json_path = gs.export_ground_state(V, out / "V", consts)
    man.artifacts.update({"V_checkpoint": str(bin_path), "V_json": str(json_path)})
    J = float(V.J_min)
    sgc = float(derive_indices(p).sigma_c)
    N, sigma, b = p.floats()
    identity = abs(V.norms["L_sigma_c"] ** sgc / ((sigma + 1) * J) ** (N / (2 - b)) - 1)
    r1, r2 = V.pohozaev_residuals
    man.metrics.update({"J_min": J, "K_GN_V": consts.K_GN_V, "pohozaev_r1": r1, "pohozaev_r2": r2,
                        "elliptic_residual": V.elliptic_residual, "identity_Vc": identity,
                        "raw_elliptic_residual": V.raw_elliptic_residual, "iterations": V.iterations})
    man.checks["converged"] = bool(V.converged)
    man.checks["pohozaev"] = bool(max(r1, r2) <= 1e-4)
    man.checks["K_GN_V*J_min=1"] = bool(consts.K_GN_V is not None and abs(consts.K_GN_V * J - 1) <= 1e-6)
    man.checks["critical_norm_identity"] = bool(identity <= 1e-4)
    if V.converged and cfg.solver.n_random > 0:
        rng = np.random.default_rng(cfg.seed)
        margins = [gs.gn_inequality_check(gs.random_smooth_field(V.field.grid, rng), V).margin
                   for _ in range(cfg.solver.n_random)]
        man.metrics["sharpness_min_margin"] = min(margins)
        man.checks["sharpness"] = bool(min(margins) >= 1 - 1e-3)


def _initial_state(cfg: ExperimentConfig) -> ev.EvolutionState:
    grid = build_grid(cfg.params.N, cfg.grid.M, cfg.grid.R_max)
    pr = cfg.profile
    if pr.kind == "ground_state_scaled":
        V = gs.petviashvili_fixed_point("V", cfg.params, grid)
        return ev.init_state(pr.kind, grid, cfg.params, c=pr.c, ground_state=V)
    return ev.init_state(pr.kind, grid, cfg.params, A=pr.A, w=pr.w, path=pr.path or None)


def _evolve_config(cfg: ExperimentConfig, adaptive: bool = False) -> ev.EvolutionConfig:
    s = cfg.solver
    return ev.EvolutionConfig(T_end=s.T_end, dt_max=s.dt_max, dt_min=s.dt_min, phase_cap=s.phase_cap,
                              fixed_dt=None if adaptive else s.fixed_dt, record_every=s.record_every)


def _evolve(cfg: ExperimentConfig, out: Path, man: RunManifest):
    state = _initial_state(cfg)
    traj = ev.evolve(state, cfg.params, _evolve_config(cfg))
    csv_path = out / "trajectory.csv"
    traj.to_csv(csv_path)
    final = write_checkpoint(out / "final.bin", traj.snapshots[-1].field, traj.snapshots[-1].t)
    man.artifacts.update({"trajectory_csv": str(csv_path), "final_checkpoint": str(final)})
    md, ed = ev.relative_drift(traj, "mass"), ev.relative_drift(traj, "energy")
    man.metrics.update({"mass_drift": md, "energy_drift": ed, "status": traj.status, "steps": traj.policy["steps"],
                        "initial_energy": traj.records[0].energy, "t_final": traj.records[-1].t})
    man.checks["run_completed"] = traj.status == "completed"
    man.checks["mass_drift<=1e-10"] = bool(md <= 1e-10)
    man.checks["energy_drift<=1e-6"] = bool(ed <= 1e-6)


def _blowup_run(cfg: ExperimentConfig, out: Path, man: RunManifest):
    state = _initial_state(cfg)
    traj = ev.evolve(state, cfg.params, _evolve_config(cfg, adaptive=cfg.solver.fixed_dt is None))
    csv_path = out / "trajectory.csv"
    traj.to_csv(csv_path)
    man.artifacts["trajectory_csv"] = str(csv_path)
    for k, s in enumerate(traj.snapshots):
        man.artifacts[f"snapshot_{k:03d}"] = str(write_checkpoint(out / f"snapshot_{k:03d}.bin", s.field, s.t))
    diag = ev.estimate_blowup(traj, min_growth=cfg.solver.min_growth)
    s_c = float(derive_indices(cfg.params).s_c)
    man.metrics.update({"status": traj.status, "message": traj.message, "growth": diag.growth,
                        "gamma_fit": diag.gamma_fit, "T_star_estimate": diag.T_star_estimate,
                        "gamma_lower_bound": (1 - s_c) / 2, "initial_energy": traj.records[0].energy})
    man.checks["growth_reached"] = diag.verdict == "blow-up"
    man.checks["gamma_fit>=(1-s_c)/2-0.05"] = bool(diag.gamma_fit is not None
                                                   and diag.gamma_fit >= (1 - s_c) / 2 - 0.05)
    return traj, diag


def _blowup(cfg: ExperimentConfig, out: Path, man: RunManifest):
    _, diag = _blowup_run(cfg, out, man)
    man.artifacts["blowup_json"] = str(out / "blowup.json")
    diag.to_json(out / "blowup.json")


def _concentration(cfg: ExperimentConfig, out: Path, man: RunManifest):
    traj, diag = _blowup_run(cfg, out, man)
    V = gs.solve_ground_state("V", cfg.params, cfg.grid.M, cfg.grid.R_max, opts=_solver_options(cfg))
    if diag.T_star_estimate is not None:
        diag = ev.concentration_series(traj, diag, alpha=cfg.solver.alpha, V=V)
        g = traj.column("grad_norm")
        late = [s for s in diag.concentration_series
                if np.interp(s[0], traj.times, g) >= g[-1] / 10]
        masses = [m for _, _, m, _ in late]
        man.checks["window_mass_nondecreasing"] = bool(len(masses) >= 2 and np.all(np.diff(masses) >= 0))
    else:
        man.checks["window_mass_nondecreasing"] = False
        man.metrics["concentration"] = "no blow-up time estimate"
    frames = [s for s in traj.snapshots if s.grad_norm >= traj.snapshots[-1].grad_norm / 10]
    errs = [abs(math.sqrt(gs.operator_for(v.grid).quadratic_form(v.values)) - 1)
            for v in (ev.rescaled_profile(s, cfg.params) for s in frames)]
    man.metrics["rescaled_grad_max_error"] = max(errs) if errs else None
    man.checks["rescaled_profile_grad=1"] = bool(errs and max(errs) <= 1e-3)
    man.artifacts["blowup_json"] = str(out / "blowup.json")
    diag.to_json(out / "blowup.json")


def _pairs(cfg: ExperimentConfig, out: Path, man: RunManifest):
    p = cfg.params
    sm = st.SmallParams(eps=cfg.pairs.eps, theta=cfg.pairs.theta)
    data = {"families": {}, "systems": {}}
    for fam in cfg.pairs.families:
        hyp = st.family_hypotheses(fam, p, sm)
        entry = {"hypotheses": [{"hypothesis": t, "pass": ok} for t, ok in hyp]}
        if all(ok for _, ok in hyp):
            pairs = st.lemma_pairs(fam, p, sm)
            claims = st.family_claims(fam, p, sm)
            entry["pairs"] = {role: str(pr) for role, pr in pairs.items()}
            entry["claims"] = [{"claim": t, "pass": ok} for t, ok in claims]
            man.checks[f"{fam} claims"] = all(ok for _, ok in claims)
        else:
            man.banner.append(f"{fam}: outside the hypotheses of its construction")
        data["families"][fam] = entry
    for sid in cfg.pairs.systems:
        hyp = st.system_hypotheses(sid, p, sm)
        if all(ok for _, ok in hyp):
            rep = st.verify_relation_system(sid, p, sm)
            data["systems"][sid] = rep.as_dict()
            man.checks[f"{sid} relations"] = bool(rep.passed)
        else:
            data["systems"][sid] = {"hypotheses": [{"hypothesis": t, "pass": ok} for t, ok in hyp]}
            man.banner.append(f"{sid}: outside the hypotheses of its system")
    man.artifacts["pairs_json"] = str(_write_json(out / "pairs.json", data))


_RUNNERS = {"ground": _ground, "evolve": _evolve, "blowup": _blowup, "concentration": _concentration,
            "pairs": _pairs}


def run(cfg: ExperimentConfig) -> RunManifest:
    """Run one experiment and write ``manifest.json`` into ``cfg.out``.

    Solver errors are caught and recorded with module context in the
    manifest (``status = "error"``); the manifest is still written.

    Raises
    ------
    OSError
        If the output directory cannot be created or written.
    """
    if cfg.kind == "sweep":
        rows, manifests = sweep(cfg)
        out = Path(cfg.out)
        man = RunManifest("sweep", config_hash(cfg), _now())
        man.artifacts["aggregate_csv"] = str(out / "sweep.csv")
        man.metrics["points"] = len(rows)
        man.checks = {f"point {r['index']}": r["status"] != "error" for r in rows}
        man.finished = _now()
        _write_json(out / "manifest.json", man.as_dict())
        return man
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(render_config(cfg), encoding="utf-8")
    man = RunManifest(cfg.kind, config_hash(cfg), _now())
    man.artifacts["config"] = str(out / "config.ini")
    man.banner.extend(_banner(cfg, cfg.kind))
    man.metrics.update({"N": cfg.params.N, "sigma": str(cfg.params.sigma), "b": str(cfg.params.b),
                        "s_c": str(derive_indices(cfg.params).s_c), "regime": str(classify_regime(cfg.params))})
    try:
        _RUNNERS[cfg.kind](cfg, out, man)
    except Exception as exc:  # recorded, not raised: the manifest documents the failure
        frames = [f.filename for f in traceback.extract_tb(exc.__traceback__) if "inlslab" in f.filename]
        mod = Path(frames[-1]).stem if frames else type(exc).__module__
        man.status = "error"
        man.error = f"{cfg.kind} ({mod}): {type(exc).__name__}: {exc}"
        man.metrics["traceback"] = traceback.format_exc(limit=3)
    man.artifacts = {k: v for k, v in man.artifacts.items() if Path(v).exists()}
    man.finished = _now()
    _write_json(out / "manifest.json", man.as_dict())
    return man


def _sweep_points(cfg: ExperimentConfig) -> list[tuple[int, object, object]]:
    s = cfg.sweep
    Ns = s.N or (cfg.params.N,)
    sigmas = s.sigma or (cfg.params.sigma,)
    bs = s.b or (cfg.params.b,)
    if not (s.N or s.sigma or s.b):
        return []
    return list(itertools.product(Ns, sigmas, bs))


def _run_point(args) -> dict:
    index, text, N, sigma, b = args
    base = parse_config(text)
    row = {"index": index, "N": N, "sigma": str(sigma), "b": str(b), "s_c": "", "regime": "", "status": "",
           "J_min": "", "K_GN_V": "", "gamma_fit": "", "mass_drift": "", "energy_drift": "", "error": ""}
    try:
        params = ProblemParams.of(N, sigma, b)
    except ValueError as exc:
        row.update(status="error", error=str(exc))
        return row
    row["s_c"] = str(derive_indices(params).s_c)
    row["regime"] = str(classify_regime(params))
    cfg = replace(base, kind=base.sweep.kind, params=params, out=str(Path(base.out) / f"point_{index:03d}"),
                  workers=1)
    outside = bool(_banner(cfg, cfg.kind))
    man = run(cfg)
    m = man.metrics
    for key in ("J_min", "K_GN_V", "gamma_fit", "mass_drift", "energy_drift"):
        if m.get(key) is not None:
            row[key] = repr(float(m[key]))
    if man.status == "error":
        row["error"] = man.error
    row["status"] = "outside proven theory" if outside else ("error" if man.status == "error" else
                                                             ("pass" if man.passed else "fail"))
    return row


def sweep(cfg: ExperimentConfig) -> tuple[list[dict], list[RunManifest]]:
    """Run every grid point and write ``sweep.csv`` (one row per point, grid order)."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    text = render_config(cfg)
    jobs = [(i, text, N, sg, b) for i, (N, sg, b) in enumerate(_sweep_points(cfg))]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_run_point, jobs))
    else:
        rows = [_run_point(j) for j in jobs]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    (out / "sweep.csv").write_text(buf.getvalue(), encoding="utf-8")
    manifests = []
    for r in rows:
        mp = out / f"point_{r['index']:03d}" / "manifest.json"
        if mp.exists():
            manifests.append(RunManifest.from_dict(json.loads(mp.read_text(encoding="utf-8"))))
    return rows, manifests


# --- report ---------------------------------------------------------------------------

def _flag(ok) -> str:
    return "PASS" if ok else "FAIL"


def _num(x) -> str:
    return "n/a" if x is None else f"{x:.3g}" if isinstance(x, float) else str(x)


def export_report(manifests) -> str:
    """Plain-text summary of one or more manifests.

    Accepts :class:`RunManifest` objects, dicts or paths to manifest files;
    missing files and artifacts are marked as gaps.
    """
    lines = []
    for item in manifests:
        if isinstance(item, (str, Path)):
            path = Path(item)
            if not path.exists():
                lines.append(f"[missing manifest] {path}")
                continue
            item = json.loads(path.read_text(encoding="utf-8"))
        man = item if isinstance(item, RunManifest) else RunManifest.from_dict(item)
        m, c = man.metrics, man.checks
        lines.append(f"== {man.kind} run {man.config_hash[:12]} ({man.status}) ==")
        for b in man.banner:
            lines.append(f"  ! {b}")
        if man.error:
            lines.append(f"  error: {man.error}")
        if man.kind == "ground":
            lines.append(f"  Pohozaev identities: r1 = {_num(m.get('pohozaev_r1'))}, "
                         f"r2 = {_num(m.get('pohozaev_r2'))} {_flag(c.get('pohozaev'))}")
            lines.append(f"  Critical Sobolev index and exponent: s_c = {m.get('s_c')}")
            lines.append(f"  Weinstein minimum: J_min = {_num(m.get('J_min'))}, "
                         f"elliptic residual = {_num(m.get('elliptic_residual'))} {_flag(c.get('converged'))}")
            lines.append(f"  Sharp constant: K_GN_V = {_num(m.get('K_GN_V'))} {_flag(c.get('K_GN_V*J_min=1'))}")
            lines.append(f"  Ground-state norm identity: rel. error = {_num(m.get('identity_Vc'))} "
                         f"{_flag(c.get('critical_norm_identity'))}")
        elif man.kind in ("blowup", "concentration"):
            lines.append(f"  Blow-up rate: gamma_fit = {_num(m.get('gamma_fit'))} vs (1-s_c)/2 = "
                         f"{_num(m.get('gamma_lower_bound'))} {_flag(c.get('gamma_fit>=(1-s_c)/2-0.05'))}")
            lines.append(f"  Gradient growth: x{_num(m.get('growth'))} {_flag(c.get('growth_reached'))}")
        elif man.kind == "evolve":
            lines.append(f"  Mass drift: {_num(m.get('mass_drift'))} {_flag(c.get('mass_drift<=1e-10'))}")
            lines.append(f"  Energy drift: {_num(m.get('energy_drift'))} {_flag(c.get('energy_drift<=1e-6'))}")
        for name, ok in sorted(c.items()):
            lines.append(f"  check {name}: {_flag(ok)}")
        for name, p in sorted(man.artifacts.items()):
            if not Path(p).exists():
                lines.append(f"  [missing artifact] {name}: {p}")
    return "\n".join(lines) + ("\n" if lines else "")


# --- command line ----------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="inlslab", description="Inhomogeneous NLS numerical lab")
    ap.add_argument("command", choices=KINDS + ("report",))
    ap.add_argument("--config", help="config file (INI sections)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int, help="seed for randomised checks")
    ap.add_argument("--workers", type=int, help="concurrent sweep points")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "report":
        root = Path(args.out or ".")
        paths = sorted(root.rglob("manifest.json")) if root.is_dir() else [root]
        text = export_report(paths)
        sys.stdout.write(text)
        if root.is_dir():
            (root / "report.txt").write_text(text, encoding="utf-8")
        return 0
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        over = {"kind": args.command}
        if args.out:
            over["out"] = args.out
        if args.seed is not None:
            over["seed"] = args.seed
        if args.workers is not None:
            over["workers"] = args.workers
        cfg = replace(cfg, **over)
    except (OSError, ValueError) as exc:
        print(f"inlslab: {exc}", file=sys.stderr)
        return 2
    try:
        man = run(cfg)
    except OSError as exc:
        print(f"inlslab: cannot write output: {exc}", file=sys.stderr)
        return 2
    for b in man.banner:
        print(f"WARNING: {b}", file=sys.stderr)
    sys.stdout.write(export_report([man]))
    return 0 if man.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
