import numpy as np
import pytest

from linalm.harness import (ExperimentConfig, build_problem, fit_loglog_slope,
                            long_run_reference, rate_fit, run)
from linalm.instances import BpdnSpec, gen_bpdn, tiny_reference
from linalm.lalm import SolverConfig
from linalm.trace import (CSV_COLUMNS, TraceRecord, read_trace_csv,
                          record_epochs, write_trace_csv)


def fake_clock():
    return 0.0


def tiny_config(method="lalm", problem="tiny:scalar-qcqp", epochs=300,
                out=None, **solver_kwargs):
    solver_kwargs.setdefault("beta", 1.0)
    solver_kwargs.setdefault("rho_y", 1.0)
    solver_kwargs.setdefault("rho_z", 1.0)
    solver_kwargs.setdefault("record_every", 10)
    return ExperimentConfig(method=method, problem=problem,
                            solver=SolverConfig(**solver_kwargs),
                            epochs=epochs, out=out,
                            blocks=1 if method == "blalm" else None)


# ---------------------------------------------------------------------------
# trace records and CSV


def synthetic_trace(values, epochs=None):
    epochs = range(1, len(values) + 1) if epochs is None else epochs
    return [TraceRecord(method="t", epoch=int(e), obj=0.0, obj_gap=None,
                        feas=0.0, kkt_stat=0.0, erg_obj_gap=float(v),
                        erg_feas=None, eta_max=None, time_ms=0.0)
            for e, v in zip(epochs, values)]


def test_record_epochs_interval_and_default():
    assert record_epochs(100, 10) == set(range(0, 101, 10))
    assert record_epochs(50) == set(range(51))
    sched = record_epochs(100_000)
    assert 0 in sched and 100_000 in sched
    assert len(sched) < 600


def test_csv_roundtrip(tmp_path):
    recs = synthetic_trace([1.0, 0.5, 0.25])
    path = tmp_path / "t.csv"
    write_trace_csv(recs, path)
    header = path.read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)
    back = read_trace_csv(path)
    assert [r.epoch for r in back] == [1, 2, 3]
    assert back[0].obj_gap is None and back[0].erg_obj_gap == 1.0


def test_csv_row_count_invariant(tmp_path):
    cfg = tiny_config(epochs=95, out=str(tmp_path / "r.csv"))
    cfg.solver.record_every = 10
    res = run(cfg, clock=fake_clock)
    rows = res.path.read_text().strip().splitlines()
    assert len(rows) - 1 == 95 // 10 + 1  # data rows, incl. epoch 0


# ---------------------------------------------------------------------------
# rate fitting


def test_rate_fit_inverse_k_slope():
    vals = [5.0 / k for k in range(1, 2001)]
    slope = rate_fit(synthetic_trace(vals), "erg_obj_gap", (10, 2000))
    assert slope == pytest.approx(-1.0, abs=1e-6)


def test_rate_fit_constant_slope_zero():
    slope = rate_fit(synthetic_trace([3.0] * 500), "erg_obj_gap", (10, 500))
    assert slope == pytest.approx(0.0, abs=1e-12)


def test_rate_fit_geometric_is_superlinear_and_worsens():
    vals = [3.0 * 0.9 ** k for k in range(1, 400)]
    trace = synthetic_trace(vals)
    early = rate_fit(trace, "erg_obj_gap", (10, 100))
    late = rate_fit(trace, "erg_obj_gap", (100, 300))
    # oracle: direct least-squares on the synthetic sequence
    ks = np.arange(10, 101)
    direct = np.polyfit(np.log(ks), np.log(3.0 * 0.9 ** ks), 1)[0]
    assert early == pytest.approx(direct, rel=1e-9)
    assert early < -1.0
    assert late < early


def test_rate_fit_drops_nonpositive_and_requires_samples():
    vals = [1.0 / k for k in range(1, 30)]
    trace = synthetic_trace(vals)
    for rec in trace[::2]:
        rec.erg_obj_gap = 0.0
    slope = rate_fit(trace, "erg_obj_gap", (1, 29))
    assert slope == pytest.approx(-1.0, abs=1e-6)
    with pytest.raises(ValueError, match="10 positive"):
        rate_fit(synthetic_trace([0.0] * 50), "erg_obj_gap", (1, 50))


def test_fit_loglog_slope_matches_polyfit(rng):
    e = np.arange(5, 200)
    v = 2.0 / e ** 1.5
    assert fit_loglog_slope(e, v) == pytest.approx(-1.5, abs=1e-9)


# ---------------------------------------------------------------------------
# experiment runs


def test_run_lalm_on_tiny_reaches_reference(tmp_path):
    cfg = tiny_config(epochs=1000, out=str(tmp_path / "a.csv"))
    res = run(cfg, clock=fake_clock)
    assert res.reference.provenance == "hand"
    assert res.result.trace[-1].obj_gap <= 1e-6
    assert res.path.exists()


def test_run_blalm_deterministic_byte_identical(tmp_path):
    out1, out2 = tmp_path / "b1.csv", tmp_path / "b2.csv"
    for out in (out1, out2):
        cfg = tiny_config(method="blalm", epochs=200, out=str(out))
        cfg.seed = 7
        run(cfg, clock=fake_clock)
    assert out1.read_bytes() == out2.read_bytes()


def test_run_pdyn_rejects_equality_instances(tmp_path):
    cfg = tiny_config(method="pdyn", problem="tiny:equality-qp",
                      out=str(tmp_path / "p.csv"))
    with pytest.raises(ValueError, match="equality"):
        run(cfg, clock=fake_clock)


def test_run_without_reference_leaves_gap_columns_empty(tmp_path):
    cfg = tiny_config(epochs=50, out=str(tmp_path / "n.csv"))
    cfg.reference = "none"
    res = run(cfg, clock=fake_clock)
    for rec in read_trace_csv(res.path):
        assert rec.obj_gap is None and rec.erg_obj_gap is None
        assert rec.feas >= 0.0


def test_run_feasibility_nonnegative(tmp_path):
    cfg = tiny_config(method="blalm", epochs=100, out=str(tmp_path / "f.csv"))
    res = run(cfg, clock=fake_clock)
    assert all(rec.feas >= 0 for rec in read_trace_csv(res.path))


def test_run_minimax_uses_brute_force_reference(tmp_path):
    cfg = ExperimentConfig(method="lalm", problem="minimax",
                           solver=SolverConfig(beta=1.0, record_every=100),
                           epochs=2000, out=str(tmp_path / "m.csv"))
    res = run(cfg, clock=fake_clock)
    assert res.reference.provenance == "brute-force"
    assert res.result.trace[-1].obj_gap <= 1e-3


def test_run_ergodic_flag_blanks_columns(tmp_path):
    cfg = tiny_config(epochs=50, out=str(tmp_path / "e.csv"))
    cfg.ergodic = False
    res = run(cfg, clock=fake_clock)
    assert all(r.erg_obj_gap is None and r.erg_feas is None
               for r in read_trace_csv(res.path))


def test_build_problem_variants(tmp_path):
    from linalm.instances import save_instance
    assert build_problem(tiny_config(problem="tiny:equality-qp")).dim == 2
    cfg = ExperimentConfig(method="lalm", problem="bpdn",
                           problem_opts={"rows": 5, "cols": 8, "sparsity": 2})
    assert build_problem(cfg).dim == 8
    path = tmp_path / "inst.json"
    save_instance(gen_bpdn(BpdnSpec(rows=4, cols=6, sparsity=1, seed=0)), path)
    cfg = ExperimentConfig(method="lalm", problem=str(path))
    assert build_problem(cfg).dim == 6
    with pytest.raises(ValueError, match="unknown problem"):
        build_problem(ExperimentConfig(method="lalm", problem="sudoku"))


def test_experiment_config_validation():
    with pytest.raises(ValueError, match="method"):
        ExperimentConfig(method="sgd", problem="bpdn")
    with pytest.raises(ValueError, match="epochs"):
        ExperimentConfig(method="lalm", problem="bpdn", epochs=0)


# ---------------------------------------------------------------------------
# long-run references


def test_long_run_requires_budget():
    prob, _ = tiny_reference("scalar-qcqp")
    with pytest.raises(ValueError, match="budget"):
        long_run_reference(prob, budget=1000)


def test_long_run_matches_hand_references(tmp_path):
    for kind in ("scalar-qcqp", "scalar-bpdn"):
        prob, ref = tiny_reference(kind)
        got = long_run_reference(prob.with_f0_star(None), budget=1_000_000,
                                 cache=None, clock=fake_clock)
        assert got.f0 == pytest.approx(ref.f0, abs=1e-8)
        assert np.linalg.norm(got.x - ref.x) <= 1e-7
        assert got.provenance == "long-run"


def test_long_run_cache_hit_identical(tmp_path):
    prob, _ = tiny_reference("scalar-qcqp")
    first = long_run_reference(prob, budget=1_000_000, cache=tmp_path,
                               clock=fake_clock)
    files = list(tmp_path.glob("*.json"))
    assert len(files) == 1
    stamp = files[0].stat().st_mtime_ns
    second = long_run_reference(prob, budget=1_000_000, cache=tmp_path,
                                clock=fake_clock)
    assert files[0].stat().st_mtime_ns == stamp  # no recompute
    np.testing.assert_array_equal(first.x, second.x)
    assert first.f0 == second.f0


@pytest.mark.slow
def test_long_run_bpdn_self_consistency():
    # two independent long runs with different step seeds agree on the value
    prob = gen_bpdn(BpdnSpec(seed=0))
    a = long_run_reference(prob, budget=2_000_000, cache=None, eta0=None)
    b = long_run_reference(prob, budget=2_000_000, cache=None, eta0=2.0)
    assert a.f0 == pytest.approx(b.f0, abs=1e-7)
    assert a.residual <= 1e-10 and b.residual <= 1e-10


def test_cache_dir_env_override(monkeypatch, tmp_path):
    from linalm.harness import cache_dir, CACHE_ENV_VAR
    monkeypatch.setenv(CACHE_ENV_VAR, str(tmp_path / "c"))
    assert cache_dir() == tmp_path / "c"
    monkeypatch.delenv(CACHE_ENV_VAR)
    assert str(cache_dir()) == ".linalm_cache"
