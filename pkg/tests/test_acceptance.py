"""Acceptance criteria 1 to 13.

Each test prints one ``criterion k: PASS/FAIL`` line (repeated in the
terminal summary) and then asserts the same verdict.  Reference setup:
(N, sigma, b) = (3, 1, 1/2), M = 4096, R_max = 32 unless a test says
otherwise.  Expensive objects are shared through module fixtures.
"""

import random
import time
from fractions import Fraction as F

import numpy as np
import pytest

from helpers import SAMPLERS
from inlslab.evolution import (
    EvolutionConfig,
    estimate_blowup,
    evolve,
    fit_blowup,
    global_criterion_monitor,
    init_state,
    relative_drift,
    rescaled_profile,
    scaling_symmetry_check,
    virial_residual,
    window_mass,
)
from inlslab.groundstate import (
    gn_inequality_check,
    operator_for,
    pohozaev_residuals,
    random_smooth_field,
    sharp_constants,
    solve_ground_state,
)
from inlslab.numerics import RadialField, apply_fractional_laplacian, apply_laplacian, build_grid, norm
from inlslab.params import ProblemParams, derive_indices
from inlslab.strichartz import (
    FAMILIES,
    SYSTEMS,
    SmallParams,
    dyadic_eps,
    family_claims,
    verify_relation_system,
)

pytestmark = pytest.mark.slow

REF = ProblemParams.of(3, 1, "1/2")
S_C, SIGMA_C = (float(x) for x in derive_indices(REF).floats())
M_REF, R_REF = 4096, 32.0
DT = 1e-4
M_EVOLVE = 2048  # dt * lambda_max stays below 2 pi at dt = 1e-4


# --- shared objects ------------------------------------------------------------------

@pytest.fixture(scope="module")
def V():
    return solve_ground_state("V", REF, M_REF, R_REF)


@pytest.fixture(scope="module")
def V_petviashvili():
    out = {}
    for M in (1024, 2048, 4096):
        t0 = time.perf_counter()
        res = solve_ground_state("V", REF, M, R_REF, route="petviashvili")
        out[M] = (res, time.perf_counter() - t0)
    return out


def _gaussian_amplitude(grid, V):
    """Amplitude A with |A exp(-r^2)|_{Hdot^{s_c}} = |V|_{sigma_c} / 2."""
    unit = grid.sample(lambda r: np.exp(-(r**2)))
    return 0.5 * V.norms["L_sigma_c"] / norm(unit, "HsDot", s=S_C, op=operator_for(grid))


@pytest.fixture(scope="module")
def conservation(V):
    grid = build_grid(3, M_EVOLVE, R_REF)
    A = _gaussian_amplitude(grid, V)
    state = init_state("gaussian", grid, REF, A=A, w=1.0)
    runs, seconds = {}, {}
    for dt in (DT, DT / 2):
        t0 = time.perf_counter()
        runs[dt] = evolve(state, REF, _conservation_config(dt))
        seconds[dt] = time.perf_counter() - t0
    return {"A": A, "state": state, "runs": runs, "seconds": seconds}


def _conservation_config(dt):
    # records every 1e-3 time units in both runs, so the stamps coincide
    return EvolutionConfig(T_end=1.0, fixed_dt=dt, record_every=round(1e-3 / dt))


@pytest.fixture(scope="module")
def blowup_run():
    # negative-energy data; R_max = 8 keeps more nodes in the collapsing core
    grid = build_grid(3, M_REF, 8.0)
    state = init_state("gaussian", grid, REF, A=4.0, w=1.0)
    assert state.info["negative_energy"]
    t0 = time.perf_counter()
    traj = evolve(state, REF, EvolutionConfig(T_end=1.0))
    return traj, time.perf_counter() - t0


# --- 1: exact exponent suite ----------------------------------------------------------

def test_criterion_01_exponent_suite(verdict):
    t0 = time.perf_counter()
    sm = SmallParams(eps=F(1, 1000), theta=F(1, 1000))
    problems, counts = [], {}
    for fam in sorted(FAMILIES):
        rng = random.Random(f"acceptance-{fam}")
        for _ in range(500):
            p = SAMPLERS[fam](rng)
            claims = family_claims(fam, p, sm)
            if fam == "B3-eps":
                # the printed first exponent is below 1 and must be flagged
                bar = [ok for text, ok in claims if text.startswith("bar")]
                rest = [ok for text, ok in claims if not text.startswith("bar")]
                if bar != [False] or not all(rest):
                    problems.append((fam, p, "printed bar pair not flagged"))
                claims = family_claims(fam, p, sm, variant="scaling")
            bad = [text for text, ok in claims if not ok]
            if bad:
                problems.append((fam, p, bad))
        counts[fam] = 500
    for sid in sorted(SYSTEMS):
        rng = random.Random(f"acceptance-{sid}")
        for _ in range(500):
            p = SAMPLERS[sid](rng)
            if sid == "condH1sl2":
                rep = verify_relation_system(sid, p, sm, variant="scaling")
                res = {text.split(" =")[0]: r for text, r, _ in rep.relations}
                flagged = {"3/gamma - b", "3/d - b - 1"}
                if any(res[k] != -2 * p.sigma for k in flagged) or any(
                        r != 0 for k, r in res.items() if k not in flagged):
                    problems.append((sid, p, "flag pattern differs from -2 sigma"))
                continue
            rep = verify_relation_system(sid, p, sm)
            if not rep.residuals_zero:
                problems.append((sid, p, rep.failures))
            if sid == "E1-ADMREL":
                eps, rep = dyadic_eps(sid, p, theta=sm.theta)
                if eps is None:
                    problems.append((sid, p, "no dyadic eps satisfies the side conditions"))
            elif not rep.passed:
                problems.append((sid, p, rep.failures))
        counts[sid] = 500
    seconds = time.perf_counter() - t0
    ok = not problems and seconds <= 10 and min(counts.values()) >= 500
    verdict(1, ok, f"{len(counts)} families/systems x 500 triples, {len(problems)} problems, "
                   f"B3 printed pair flagged, condH1sl2 residual -2 sigma flagged, {seconds:.1f} s")
    assert ok, problems[:5]


# --- 2 to 6: ground states -------------------------------------------------------------

def test_criterion_02_pohozaev(verdict, V_petviashvili):
    r = {M: res.pohozaev_residuals for M, (res, _) in V_petviashvili.items()}
    slow = max(s for _, s in V_petviashvili.values())
    ratios = [(r[M][0] / r[2 * M][0], r[M][1] / r[2 * M][1]) for M in (1024, 2048)]
    fine = r[4096]
    ok = (max(fine) <= 1e-4 and all(3 <= x <= 5 for pair in ratios for x in pair) and slow <= 60)
    wall = pohozaev_residuals(V_petviashvili[4096][0].field, REF, boundary=True)
    verdict(2, ok, f"M=4096 r1={fine[0]:.3g} r2={fine[1]:.3g} (need 1e-4); doubling ratios "
                   + ", ".join(f"({a:.2f}, {b:.2f})" for a, b in ratios)
                   + f"; with wall flux r1={wall[0]:.3g} r2={wall[1]:.3g}; slowest solve {slow:.1f} s")
    assert ok


def test_criterion_03_identity_chain(verdict, V):
    s = float(REF.sigma)
    J = float(V.J_min)
    K = sharp_constants(V).K_GN_V
    lhs = V.norms["L_sigma_c"] ** SIGMA_C
    rhs = ((s + 1) * J) ** (3 / (2 - 0.5))
    err_K, err_V = abs(K * J - 1), abs(lhs / rhs - 1)
    ok = V.converged and err_K <= 1e-6 and err_V <= 1e-4
    verdict(3, ok, f"|K J - 1| = {err_K:.2g}, critical-norm identity rel. error {err_V:.2g}")
    assert ok


def test_criterion_04_sharpness(verdict, V):
    rng = np.random.default_rng(0)
    checks = [gn_inequality_check(random_smooth_field(V.field.grid, rng), V) for _ in range(100)]
    at_V = gn_inequality_check(V.field, V).margin
    low = min(c.margin for c in checks)
    ok = all(c.passed for c in checks) and low >= 1 - 1e-3 and abs(at_V - 1) <= 1e-6
    verdict(4, ok, f"100 seeded fields, minimum margin {low:.4g}; margin at V - 1 = {at_V - 1:.2g}")
    assert ok


TRIPLES = [(3, "1", "1/2"), (3, "3/4", "1/4"), (2, "1", "1/2"), (1, "2", "1/2"), (3, "2/3", "1/2")]


def test_criterion_05_cross_solver(verdict, V, V_petviashvili):
    diffs = {}
    for trip in TRIPLES:
        p = ProblemParams.of(*trip)
        if p == REF:
            a, b = V, V_petviashvili[M_REF][0]
        else:
            a = solve_ground_state("V", p, M_REF, R_REF)
            b = solve_ground_state("V", p, M_REF, R_REF, route="petviashvili")
        diffs[trip] = abs(float(a.J_min) - float(b.J_min)) / float(a.J_min)
    worst = max(diffs.values())
    ok = worst <= 1e-3
    verdict(5, ok, "relative J differences " + ", ".join(f"{d:.2g}" for d in diffs.values()))
    assert ok


def test_criterion_06_fractional(verdict):
    W = solve_ground_state("W", REF, M_REF, R_REF)
    s = float(REF.sigma)
    J = float(W.J_min)
    err_W = abs(W.norms["Hdot_s_c"] / ((s + 1) * J) ** (1 / (2 * s)) - 1)
    op = operator_for(W.field.grid)
    rng = np.random.default_rng(6)
    u = W.field.grid.sample(lambda r: rng.normal() * np.exp(-0.3 * r**2) + 1j * rng.normal() * np.exp(-r**2))
    errs = []
    for half, full in ((0.5, 1.0), (S_C / 2, S_C)):
        twice = apply_fractional_laplacian(op, apply_fractional_laplacian(op, u, half), half).values
        once = apply_fractional_laplacian(op, u, full).values
        errs.append(np.abs(twice - once).max() / np.abs(once).max())
    lap = -apply_laplacian(op, u).values
    errs.append(np.abs(apply_fractional_laplacian(op, u, 1.0).values - lap).max() / np.abs(lap).max())
    ok = W.converged and err_W <= 1e-4 and max(errs) <= 1e-10
    verdict(6, ok, f"W norm identity rel. error {err_W:.2g}; semigroup/s=1 errors "
                   + ", ".join(f"{e:.2g}" for e in errs))
    assert ok


# --- 7 to 13: evolution ---------------------------------------------------------------

def test_criterion_07_conservation(verdict, conservation):
    runs = conservation["runs"]
    mass = [relative_drift(runs[dt], "mass") for dt in (DT, DT / 2)]
    energy = [relative_drift(runs[dt], "energy") for dt in (DT, DT / 2)]
    ratio = energy[0] / energy[1]
    done = all(tr.status == "completed" for tr in runs.values())
    sec = conservation["seconds"]
    ok = (done and max(mass) <= 1e-10 and energy[0] <= 1e-6 and 3.5 <= ratio <= 4.5 and sec[DT] <= 120)
    verdict(7, ok, f"M={M_EVOLVE}, A={conservation['A']:.6g}: mass drift {max(mass):.2g}, energy drift "
                   f"{energy[0]:.3g} / {energy[1]:.3g} (ratio {ratio:.2f}); run at dt=1e-4 {sec[DT]:.0f} s, "
                   f"order check at dt/2 {sec[DT / 2]:.0f} s")
    assert ok


def test_criterion_08_virial(verdict, conservation):
    res = [virial_residual(conservation["runs"][dt], REF)[1].max() for dt in (DT, DT / 2)]
    ratio = res[0] / res[1]
    ok = 3.5 <= ratio <= 4.5
    verdict(8, ok, f"max virial residual {res[0]:.3g} / {res[1]:.3g}, ratio {ratio:.2f} (need 3.5 to 4.5)")
    assert ok


def test_criterion_09_scaling(verdict, conservation):
    u0 = conservation["state"].field
    m2 = scaling_symmetry_check(u0, 2, 0.01, REF, dt=DT)
    m1 = scaling_symmetry_check(u0, 1, 0.01, REF, dt=DT)
    ok = m2 <= 1e-5 and m1 == 0
    verdict(9, ok, f"rho=2 mismatch {m2:.2g}, rho=1 mismatch {m1:.2g}")
    assert ok


def test_criterion_10_blowup_rate(verdict, blowup_run):
    traj, seconds = blowup_run
    diag = estimate_blowup(traj, min_growth=1e3)
    gamma_min = (1 - S_C) / 2 - 0.05
    synthetic = []
    for gamma in (0.5, 0.25, 0.125):
        t = np.linspace(0, 0.99, 400)
        synthetic.append(abs(fit_blowup(t, (1 - t) ** -gamma)[1] - gamma))
    trend = fit_blowup(traj.times, traj.column("grad_norm"))[1]
    ok = (diag.verdict == "blow-up" and diag.gamma_fit is not None and diag.gamma_fit >= gamma_min
          and max(synthetic) <= 1e-2 and seconds <= 600)
    verdict(10, ok, f"growth x{diag.growth:.3g} before {traj.status} (need x1e3); gamma fit "
                    f"{diag.gamma_fit} (trend over the whole run {trend:.3g}); synthetic errors "
                    f"{max(synthetic):.2g}; {seconds:.0f} s")
    assert ok


def test_criterion_11_concentration(verdict, blowup_run, V):
    traj, _ = blowup_run
    diag = estimate_blowup(traj, min_growth=1e3)
    g = traj.column("grad_norm")
    if diag.T_star_estimate is not None:
        from inlslab.evolution import concentration_series

        diag = concentration_series(traj, diag, alpha=0.25, V=V)
        late = [m for t, _, m, _ in diag.concentration_series if np.interp(t, traj.times, g) >= g[-1] / 10]
        window_ok = len(late) >= 2 and bool(np.all(np.diff(late) >= 0))
    else:
        window_ok = False
    frames = [s for s in traj.snapshots if s.grad_norm >= traj.snapshots[-1].grad_norm / 10]
    errs = [abs(norm(v, "gradL2", op=operator_for(v.grid)) - 1)
            for v in (rescaled_profile(s, REF) for s in frames)]
    profile_ok = bool(errs) and max(errs) <= 1e-3
    # V concentrated at scale rho; the window of radius 10 rho leaves part of the tail out
    rho = 1e-4
    amp = rho ** (-(2 - 0.5) / 2)
    u = RadialField(V.field.grid.scaled(rho), amp * V.field.values)
    target = V.norms["L_sigma_c"] ** SIGMA_C
    err_window = abs(window_mass(u, 10 * rho, REF) / target - 1)
    ok = window_ok and profile_ok and err_window <= 1e-3
    verdict(11, ok, f"final-decade window mass {'nondecreasing' if window_ok else 'not evaluable (no T*)'}; "
                    f"rescaled |grad v| - 1 <= {max(errs):.2g} on {len(frames)} frames; exact-window error "
                    f"{err_window:.2g}")
    assert ok


def test_criterion_12_global_threshold(verdict, V):
    grid = build_grid(3, M_REF, R_REF)
    A = _gaussian_amplitude(grid, V)
    state = init_state("gaussian", grid, REF, A=A, w=1.0)
    traj = evolve(state, REF, EvolutionConfig(T_end=1.0))
    mon = global_criterion_monitor(traj, V)
    diag = estimate_blowup(traj)
    ok = (traj.status == "completed" and traj.records[-1].t >= 1.0 - 1e-12 and diag.verdict == "no blow-up"
          and mon["respected"])
    hsc = max(r.hsc_norm for r in traj.records)
    verdict(12, ok, f"A={A:.10g}, {traj.status} at t={traj.records[-1].t:.6g}, {mon['verdict']} "
                    f"(max Hsc norm {hsc:.4g} < {mon['bound']:.4g})")
    assert ok


def test_criterion_13_determinism(verdict, conservation):
    first = conservation["runs"][DT].to_csv().encode("utf-8")
    again = evolve(conservation["state"], REF, _conservation_config(DT)).to_csv().encode("utf-8")
    ok = first == again
    verdict(13, ok, f"repeat of the criterion 7 run: {len(first)} CSV bytes, "
                    f"{'identical' if ok else 'different'}")
    assert ok
