import json

import pytest

from stokesdd.experiments import (
    CaseConfig,
    CaseReport,
    PhaseError,
    format_cases,
    format_table,
    reference_table,
    run_case,
    run_table,
    table_configs,
)


@pytest.mark.parametrize(
    "kwargs",
    [dict(nsub=0, ratio=8), dict(nsub=2, ratio=5), dict(nsub=2, ratio=2), dict(nsub=2, ratio=8, pressure="p2"),
     dict(nsub=2, ratio=8, tol=1.5), dict(nsub=2, ratio=8, maxit=0), dict(nsub=2, ratio=8, coarse="faces")],
)
def test_invalid_configs_rejected(kwargs):
    with pytest.raises(ValueError):
        CaseConfig(**kwargs)


def test_config_normalizes_coarse_and_counts_cells():
    c = CaseConfig(nsub=4, ratio=8, coarse="corners-edges")
    assert c.coarse == CaseConfig(nsub=4, ratio=8, coarse="corners+edges").coarse
    assert c.pressure_cells == 16


@pytest.fixture(scope="module")
def small_report():
    return run_case(CaseConfig(nsub=2, ratio=8))


def test_run_case_report(small_report):
    r = small_report
    assert r.converged and r.relative_residual <= 1e-6
    assert 0 < r.lambda_min < 1 < r.lambda_max
    assert r.sizes["primal"] == 2 and r.sizes["pressure_dofs"] == 81
    assert r.errors["velocity_l2"] < 1e-2
    assert {"mesh", "assembly", "partition", "factorization", "cg"} <= set(r.timings)


def test_report_json_round_trip(small_report):
    back = CaseReport.from_json(small_report.to_json())
    assert back == small_report
    assert json.loads(small_report.to_json())["config"]["nsub"] == 2


def test_phase_errors_name_the_phase(monkeypatch):
    import stokesdd.experiments as ex

    def boom(*a, **k):
        raise RuntimeError("singular")

    monkeypatch.setattr(ex, "build_reduced_operator", boom)
    with pytest.raises(PhaseError, match="factorization") as info:
        run_case(CaseConfig(nsub=2, ratio=4))
    assert info.value.phase == "factorization"


def test_reference_tables_shape():
    for t in (1, 2, 3, 4):
        rows = reference_table(t)
        assert len(rows) == 10
        assert rows[1] == rows[6]
        assert len(set(table_configs(t))) == 9
    with pytest.raises(ValueError):
        reference_table(5)


def _fake_runner(scale=1.0, fail_ratio=None, calls=None, table=1):
    def run(cfg, compute_errors=True):
        if calls is not None:
            calls.append(cfg)
        if cfg.ratio == fail_ratio:
            raise RuntimeError("boom")
        ref = {(r.nsub, r.ratio): r for r in reference_table(table)}[(cfg.nsub, cfg.ratio)]
        return CaseReport(cfg, ref.lambda_min * scale, ref.lambda_max * scale, ref.iterations, True, 1e-7)

    return run


def test_run_table_with_exact_runner_passes_once_per_config():
    calls = []
    res = run_table(1, runner=_fake_runner(calls=calls))
    assert res.passed and res.exit_code == 0
    assert len(calls) == 9


def test_run_table_tolerance_edges():
    assert run_table(1, runner=_fake_runner(1.09)).passed
    res = run_table(1, runner=_fake_runner(1.11))
    assert not res.passed and res.exit_code == 1
    assert all(not r.ok_max for r in res.rows)


def test_run_table_records_failures():
    res = run_table(1, runner=_fake_runner(fail_ratio=32))
    bad = [r for r in res.rows if r.report is None]
    assert len(bad) == 1 and "boom" in bad[0].error
    assert not res.passed
    assert "error" in format_table(res, "md")
    assert json.loads(format_table(res, "json"))["rows"][-1]["error"] == "boom"


@pytest.mark.parametrize("fmt", ["md", "csv", "json"])
def test_table_formats(fmt):
    out = format_table(run_table(2, runner=_fake_runner(table=2)), fmt)
    if fmt == "json":
        assert json.loads(out)["passed"] is True
    elif fmt == "csv":
        lines = out.strip().splitlines()
        assert lines[0].startswith("nsub,H_over_h") and len(lines) == 11
    else:
        assert out.startswith("Table 2") and out.count("| yes |") == 10


def test_case_formats(small_report):
    assert "velocity_l2" in format_cases([small_report], "csv").splitlines()[0]
    assert json.loads(format_cases([small_report], "json"))[0]["iterations"] == small_report.iterations
    assert format_cases([small_report], "md").count("\n") == 3
    with pytest.raises(ValueError):
        format_cases([small_report], "xml")
    with pytest.raises(ValueError):
        format_table(run_table(1, runner=_fake_runner()), "xml")
