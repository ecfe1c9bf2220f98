"""Config round-trip, manifests, sweeps and the report."""

import csv
import json
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inlslab.cli import (
    SWEEP_COLUMNS,
    ExperimentConfig,
    GridSpec,
    PairsSpec,
    ProfileSpec,
    RunManifest,
    SolverSpec,
    SweepSpec,
    export_report,
    load_config,
    main,
    parse_config,
    render_config,
    run,
    sweep,
)
from inlslab.numerics import read_checkpoint
from inlslab.params import ProblemParams

finite = st.floats(min_value=1e-12, max_value=1e6, allow_nan=False, allow_infinity=False)
fracs = st.fractions(min_value=Fraction(1, 1000), max_value=Fraction(5), max_denominator=1000)

configs = st.builds(
    ExperimentConfig,
    kind=st.sampled_from(["ground", "evolve", "blowup", "concentration", "pairs", "sweep"]),
    grid=st.builds(GridSpec, M=st.integers(16, 8192), R_max=finite),
    profile=st.builds(ProfileSpec, kind=st.sampled_from(["gaussian", "ground_state_scaled", "file"]),
                      A=finite, w=finite, c=finite, path=st.sampled_from(["", "u0.bin"])),
    solver=st.builds(SolverSpec, T_end=finite, dt_max=finite, fixed_dt=st.none() | finite,
                     record_every=st.integers(1, 100), alpha=finite, n_random=st.integers(0, 50)),
    pairs=st.builds(PairsSpec, eps=fracs, theta=fracs,
                    families=st.lists(st.sampled_from(["PA1", "PA2", "PPM-plus"]), min_size=1,
                                      max_size=3).map(tuple)),
    sweep=st.builds(SweepSpec, N=st.lists(st.integers(1, 6), max_size=3).map(tuple),
                    sigma=st.lists(fracs, max_size=3).map(tuple), b=st.lists(fracs, max_size=3).map(tuple),
                    kind=st.sampled_from(["ground", "evolve"])),
    seed=st.integers(0, 2**64 - 1),
    workers=st.integers(1, 8),
)


@settings(max_examples=60, deadline=None)
@given(configs)
def test_config_round_trip(cfg):
    assert parse_config(render_config(cfg)) == cfg


def test_defaults_are_the_reference_setup():
    cfg = parse_config("")
    assert cfg.params == ProblemParams.of(3, 1, "1/2")
    assert (cfg.grid.M, cfg.grid.R_max) == (4096, 32.0)


@pytest.mark.parametrize("text", [
    "[run]\nkind = nonsense\n",
    "[grid]\nM = many\n",
    "[grid]\nspacing = 2\n",
    "[extras]\nx = 1\n",
    "not an ini file",
    "[run]\nseed = -1\n",
    "[run]\nworkers = 0\n",
    "[sweep]\nkind = sweep\n",
    "[params]\nsigma = 1/0\n",
])
def test_malformed_configs_raise(text):
    with pytest.raises(ValueError):
        parse_config(text)


def _cfg(tmp_path, text, **kw):
    return replace(parse_config(text), out=str(tmp_path / "out"), **kw)


def test_ground_manifest_and_artifacts(tmp_path):
    cfg = _cfg(tmp_path, "[grid]\nM = 512\n[solver]\nn_random = 3\n", kind="ground")
    man = run(cfg)
    assert man.status == "ok", man.error
    V, _ = read_checkpoint(man.artifacts["V_checkpoint"])
    assert V.grid.M == 512
    data = json.loads(Path(man.artifacts["V_json"]).read_text())
    assert data["J_min"] == pytest.approx(man.metrics["J_min"], rel=1e-12)
    for key in ("J_min", "K_GN_V", "pohozaev_r1", "pohozaev_r2", "sharpness_min_margin"):
        assert key in man.metrics
    assert man.checks["K_GN_V*J_min=1"] and man.checks["converged"]
    on_disk = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert RunManifest.from_dict(on_disk).checks == man.checks
    assert parse_config((tmp_path / "out" / "config.ini").read_text()) == cfg


def test_evolve_zero_field(tmp_path):
    text = "[grid]\nM = 256\nR_max = 16\n[profile]\nA = 0\n[solver]\nT_end = 0.01\nfixed_dt = 0.001\n"
    man = run(_cfg(tmp_path, text, kind="evolve"))
    assert man.passed
    assert man.metrics["mass_drift"] == 0 and man.metrics["energy_drift"] == 0
    rows = list(csv.DictReader(open(man.artifacts["trajectory_csv"])))
    assert len(rows) == 11


def test_evolve_repeat_is_byte_identical(tmp_path):
    text = "[grid]\nM = 128\nR_max = 8\n[profile]\nA = 0.5\n[solver]\nT_end = 0.01\nfixed_dt = 0.001\n"
    a = run(replace(parse_config(text), kind="evolve", out=str(tmp_path / "a")))
    b = run(replace(parse_config(text), kind="evolve", out=str(tmp_path / "b")))
    assert Path(a.artifacts["trajectory_csv"]).read_bytes() == Path(b.artifacts["trajectory_csv"]).read_bytes()


def test_pairs_run(tmp_path):
    man = run(_cfg(tmp_path, "[pairs]\neps = 1/1000\n", kind="pairs"))
    data = json.loads(Path(man.artifacts["pairs_json"]).read_text())
    assert set(data["families"]) == {"PA1", "PA2", "PPM-plus", "PPM-minus"}
    assert man.passed, man.checks


def test_solver_error_is_recorded(tmp_path):
    # energy-critical triple: no ground state of the intercritical problem
    text = "[params]\nN = 3\nsigma = 3/2\nb = 1\n[grid]\nM = 256\n"
    man = run(_cfg(tmp_path, text, kind="ground"))
    assert man.status == "error" and "groundstate" in man.error
    assert not man.passed
    assert (tmp_path / "out" / "manifest.json").exists()


def test_sweep_rows_and_invalid_point(tmp_path):
    text = "[grid]\nM = 256\n[solver]\nn_random = 2\n[sweep]\nN = 3\nsigma = 1, 3/2\nb = 1/2, 1\nkind = ground\n"
    rows, manifests = sweep(_cfg(tmp_path, text, kind="sweep"))
    assert [r["index"] for r in rows] == [0, 1, 2, 3]
    body = list(csv.DictReader(open(tmp_path / "out" / "sweep.csv")))
    assert tuple(body[0]) == SWEEP_COLUMNS and len(body) == 4
    bad = [r for r in rows if r["sigma"] == "3/2" and r["b"] == "1"][0]
    assert bad["status"] == "outside proven theory" and bad["error"]
    good = rows[0]
    assert good["status"] in ("pass", "fail") and float(good["J_min"]) > 0
    assert len(manifests) == 4


def test_empty_sweep(tmp_path):
    rows, manifests = sweep(_cfg(tmp_path, "", kind="sweep"))
    assert rows == [] and manifests == []
    assert (tmp_path / "out" / "sweep.csv").read_text().strip() == ",".join(SWEEP_COLUMNS)


def test_report(tmp_path):
    man = run(_cfg(tmp_path, "[grid]\nM = 256\nR_max = 8\n[profile]\nA = 0\n[solver]\nT_end = 0.002\nfixed_dt = 0.001\n",
                   kind="evolve"))
    text = export_report([man, tmp_path / "nowhere" / "manifest.json"])
    assert "Mass drift" in text and "[missing manifest]" in text
    Path(man.artifacts["final_checkpoint"]).unlink()
    assert "[missing artifact] final_checkpoint" in export_report([man.as_dict()])
    assert export_report([]) == ""


def test_main_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "ev.ini"
    cfg.write_text("[grid]\nM = 128\nR_max = 8\n[profile]\nA = 0\n[solver]\nT_end = 0.002\nfixed_dt = 0.001\n")
    assert main(["evolve", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
    assert main(["report", "--out", str(tmp_path / "r")]) == 0
    assert (tmp_path / "r" / "report.txt").exists()
    assert "Energy drift" in capsys.readouterr().out
    bad = tmp_path / "bad.ini"
    bad.write_text("[grid]\nM = x\n")
    assert main(["ground", "--config", str(bad)]) == 2
    assert load_config(cfg).solver.fixed_dt == 0.001


def test_banner_outside_theory(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[params]\nN = 3\nsigma = 3/2\nb = 1\n[grid]\nM = 128\nR_max = 8\n[profile]\nA = 0\n"
                   "[solver]\nT_end = 0.002\nfixed_dt = 0.001\n")
    main(["evolve", "--config", str(cfg), "--out", str(tmp_path / "r")])
    assert "outside proven theory" in capsys.readouterr().err
