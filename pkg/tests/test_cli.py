from __future__ import annotations

import json
import subprocess
import sys
from collections import Counter
from pathlib import Path

import pytest

from deadline_ils.bundled import fixture_path
from deadline_ils.cli import EXIT_DATA, EXIT_REFERENCE, EXIT_USAGE, main
from deadline_ils.report import read_table

FFIC = fixture_path("ffic")
POP = fixture_path("population")


def run(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def ffic_dirs(tmp_path_factory) -> dict[str, Path]:
    base = tmp_path_factory.mktemp("ffic")
    dirs = {k: base / k for k in ("classify", "recover", "filter")}
    assert run("classify", FFIC / "markets.csv", "-o", dirs["classify"]) == 0
    classified = dirs["classify"] / "markets_classified.csv"
    assert run("recover", classified, "--provider-fixture", FFIC / "providers.json", "-o", dirs["recover"]) == 0
    assert run("filter", classified, dirs["recover"] / "recoveries.jsonl", FFIC / "prices.jsonl", "-o", dirs["filter"]) == 0
    return dirs


def test_ffic_breakdown_csv(ffic_dirs):
    rows = read_table(ffic_dirs["filter"] / "ffic_classification_breakdown.csv")
    counts = {r["disposition"]: int(r["count"]) for r in rows}
    assert counts == {
        "unclassifiable": 20,
        "deadline_no": 6,
        "edge_effect": 2,
        "low_confidence": 1,
        "compute_error": 1,
        "category_other": 1,
        "in_scope": 1,
    }
    assert rows[-1]["disposition"] == "in_scope"


def test_ffic_dispositions_match_fixture(ffic_dirs):
    expected = json.loads((FFIC / "expected.json").read_text())
    rows = read_table(ffic_dirs["filter"] / "dispositions.csv")
    assert {r["market_id"]: r["disposition"] for r in rows} == expected


def test_every_csv_carries_provenance(ffic_dirs):
    for d in ffic_dirs.values():
        for csv_path in d.glob("*.csv"):
            first = csv_path.read_text().splitlines()[0]
            assert first.startswith("# produced by: deadline-ils ")
            assert "| seed: 20260430" in first
            assert str(d) not in first and "-o OUT" in first


def test_manifest_lists_outputs_once(ffic_dirs):
    for d in ffic_dirs.values():
        manifest = json.loads((d / "manifest.json").read_text())
        assert manifest["status"] == "complete"
        assert len(manifest["outputs"]) == len(set(manifest["outputs"]))
        on_disk = {p.name for p in d.iterdir()} - {"manifest.json"}
        assert set(manifest["outputs"]) == on_disk


def test_score_fit_adjust_chain(ffic_dirs, tmp_path):
    f = ffic_dirs["filter"]
    rec = ffic_dirs["recover"] / "recoveries.jsonl"
    assert run("score", f / "survivors.csv", rec, FFIC / "prices.jsonl", "-o", tmp_path / "score") == 0
    scores = read_table(tmp_path / "score" / "scores.csv")
    assert [r["market_id"] for r in scores] == ["fficd-005-a"]
    assert abs(float(scores[0]["ils_dl"]) - 0.012) < 5e-4
    # a single lead time is reported as a skipped group rather than fitted
    assert run("fit-hazard", tmp_path / "score" / "scores.csv", "-o", tmp_path / "fit") == 0
    fits = json.loads((tmp_path / "fit" / "hazard_fits.json").read_text())
    assert len(fits) == 1 and fits[0]["skipped"]
    assert run("adjust", tmp_path / "score" / "scores.csv", tmp_path / "fit" / "hazard_fits.json", "-o", tmp_path / "adj") == 0
    adjusted = read_table(tmp_path / "adj" / "scores_adjusted.csv")
    assert adjusted[0]["ils_dl"] == scores[0]["ils_dl"]


def test_population_report(tmp_path):
    out = tmp_path / "rep"
    recov = tmp_path / "recov"
    assert run("recover", POP / "markets.csv", "--provider-fixture", POP / "providers.json", "-o", recov) == 0
    code = run("report", POP / "markets.csv", recov / "recoveries.jsonl", POP / "prices.jsonl", "-o", out, "--b-ks", "199")
    assert code == 0
    names = {p.name for p in out.iterdir()}
    for required in (
        "scores.csv",
        "distribution_summary.csv",
        "detection_thresholds.csv",
        "median_bootstrap_cis.csv",
        "anchor_sensitivity_summary.csv",
        "ffic_classification_breakdown.csv",
        "filter_chain_attrition.csv",
        "functional_form_comparison.csv",
        "hazard_fits.json",
        "filter_chain_attrition.png",
        "score_distributions.png",
        "raw_vs_adjusted.png",
    ):
        assert required in names
    for png in out.glob("*.png"):
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    attrition = read_table(out / "filter_chain_attrition.csv")
    assert [int(r["n"]) for r in attrition if r["stage"] != "0"] == [35, 29, 24, 19, 17, 14, 10]


def test_report_is_reproducible(tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1767225600")
    recov = tmp_path / "recov"
    assert run("recover", POP / "markets.csv", "--provider-fixture", POP / "providers.json", "-o", recov) == 0
    outs = [tmp_path / "a", tmp_path / "b"]
    for o in outs:
        assert run("report", POP / "markets.csv", recov / "recoveries.jsonl", POP / "prices.jsonl", "-o", o, "--b-ks", "199") == 0
    a, b = outs
    assert sorted(p.name for p in a.iterdir()) == sorted(p.name for p in b.iterdir())
    for p in a.iterdir():
        if p.name != "manifest.json":
            assert p.read_bytes() == (b / p.name).read_bytes(), p.name
    ma, mb = (json.loads((o / "manifest.json").read_text()) for o in outs)
    assert {k for k in ma if ma[k] != mb[k]} == {"output_dir"}


def test_simulate_then_report_with_true_hazard(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"family": "exponential", "params": {"rate": 0.05}, "noise_sd": 0.01}))
    sim = tmp_path / "sim"
    assert run("simulate", cfg, "-n", 300, "-o", sim) == 0
    rep = tmp_path / "rep"
    code = run(
        "report", sim / "markets.csv", sim / "recoveries.jsonl", sim / "prices.jsonl",
        "--fits", sim / "true_hazard.json", "-o", rep,
    )
    assert code == 0
    scores = [r for r in read_table(rep / "scores.csv") if r["in_scope"] == "true"]
    adj = [float(r["ils_dl_adj"]) for r in scores]
    raw = [float(r["ils_dl"]) for r in scores]
    assert len(adj) > 200
    assert abs(sum(adj) / len(adj)) < 0.05
    assert sum(raw) / len(raw) < 0
    truth = read_table(sim / "ground_truth.csv")
    assert Counter(r["outcome"] for r in truth)["YES"] == len(scores)


def test_validate_tevent(tmp_path):
    assert run("validate-tevent", fixture_path("validation_pairs.jsonl"), "-o", tmp_path / "v") == 0
    rows = {r["bucket"]: r for r in read_table(tmp_path / "v" / "tevent_validation.csv")}
    assert rows["overall"]["comparable_n"] == "45"
    triage = Counter(r["triage"] for r in read_table(tmp_path / "v" / "tevent_disagreements.csv"))
    assert triage["no_timestamp"] == 5


def test_fixtures_subcommand(tmp_path):
    assert run("fixtures", "-o", tmp_path / "fx") == 0
    assert (tmp_path / "fx" / "ffic" / "markets.csv").exists()
    assert (tmp_path / "fx" / "population" / "markets.csv").exists()


def test_non_empty_output_is_refused(tmp_path):
    out = tmp_path / "busy"
    out.mkdir()
    (out / "keep.txt").write_text("mine")
    assert run("classify", FFIC / "markets.csv", "-o", out) == EXIT_USAGE
    assert [p.name for p in out.iterdir()] == ["keep.txt"]


def test_malformed_input_leaves_nothing(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("market_id,question,T_open,T_resolve,volume_usdc,outcome\nx,Q?,2025-02-01T00:00:00Z,2025-01-01T00:00:00Z,1,YES\n")
    out = tmp_path / "out"
    assert run("classify", bad, "-o", out) == EXIT_DATA
    assert not out.exists()


def test_failure_in_existing_empty_directory_cleans_files(tmp_path):
    out = tmp_path / "empty"
    out.mkdir()
    assert run("fit-hazard", tmp_path / "missing.csv", "-o", out) == EXIT_DATA
    assert list(out.iterdir()) == []


def test_reference_mismatch_aborts(tmp_path):
    ref = json.loads(fixture_path("iran_apr30.json").read_text())
    ref["expected_date"] = "2026-04-04"
    wrong = tmp_path / "ref.json"
    wrong.write_text(json.dumps(ref))
    out = tmp_path / "out"
    code = run("recover", FFIC / "markets.csv", "--provider-fixture", FFIC / "providers.json", "--reference", wrong, "-o", out)
    assert code == EXIT_REFERENCE
    assert not out.exists()
    code = run("recover", FFIC / "markets.csv", "--provider-fixture", FFIC / "providers.json", "--reference", tmp_path / "nope.json", "-o", out)
    assert code == EXIT_REFERENCE


def test_module_entry_point_and_version():
    done = subprocess.run([sys.executable, "-m", "deadline_ils", "--version"], capture_output=True, text=True)
    assert done.returncode == 0 and done.stdout.startswith("deadline-ils ")
    done = subprocess.run([sys.executable, "-m", "deadline_ils", "score"], capture_output=True, text=True)
    assert done.returncode == 2
