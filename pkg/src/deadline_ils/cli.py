"""``deadline-ils``: command-line driver for classification, recovery, scoring and reporting.

Each subcommand writes into a fresh (or empty) output directory and finishes
with a ``manifest.json`` listing what it produced. On failure the files it
wrote are removed and the exit status is nonzero.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import time
from collections.abc import Callable, Sequence
from datetime import datetime, timedelta
from pathlib import Path

from deadline_ils import __version__
from deadline_ils.bundled import fixture_path, load_reference
from deadline_ils.decay import DegenerateWindow, adjust_record
from deadline_ils.hazard import (
    FitFailure,
    GroupFit,
    ModelSelection,
    fit_group,
    group_from_mapping,
    group_to_mapping,
)
from deadline_ils.market_model import (
    PERIOD_BOUNDARY,
    IngestError,
    MarketRecord,
    emit_markets,
    format_timestamp,
    ingest_markets,
    load_price_index,
    parse_timestamp,
    period_for,
    with_period,
)
from deadline_ils.population import (
    PERIODS,
    anchor_sensitivity_summary,
    disposition_of,
    ffic_disposition,
    run_filter_chain,
)
from deadline_ils.report import (
    ANCHOR_COLUMNS,
    ATTRITION_COLUMNS,
    DISAGREEMENT_COLUMNS,
    DISPOSITION_COLUMNS,
    DISTRIBUTION_COLUMNS,
    FUNCTIONAL_FORM_COLUMNS,
    HAZARD_RATE_COLUMNS,
    MARKET_DISPOSITION_COLUMNS,
    MEDIAN_CI_COLUMNS,
    RECOVERY_COLUMNS,
    TAIL_COLUMNS,
    THRESHOLD_COLUMNS,
    VALIDATION_COLUMNS,
    Provenance,
    RunManifest,
    anchor_rows,
    attrition_rows,
    disagreement_rows,
    disposition_rows,
    distribution_rows,
    functional_form_rows,
    hazard_rate_rows,
    market_disposition_rows,
    median_ci_rows,
    read_scores,
    recovery_rows,
    stamp,
    tail_rows,
    threshold_rows,
    validation_rows,
    write_scores,
    write_table,
)
from deadline_ils.scoring import (
    CONFIDENCE_MIN,
    DEFAULT_SEED,
    EDGE,
    EPSILON,
    ScopeConfig,
    ScoreRecord,
    ScoringConfig,
    TrivialMove,
)
from deadline_ils.tevent_recovery import (
    TIERS,
    CheckpointWriteError,
    ConfigurationError,
    FileProvider,
    ReferenceMismatch,
    hard_assert_reference,
    load_recoveries,
    load_validation_pairs,
    recover_all,
    recover_cascade,
    validate_second_pass,
)
from deadline_ils.typology import classify_record

EXIT_DATA = 1
EXIT_USAGE = 2
EXIT_REFERENCE = 3


class UsageError(RuntimeError):
    """Bad invocation detected after argument parsing."""


class Workspace:
    """An output directory that must start empty; undone on failure."""

    def __init__(self, path: str | Path, manifest: RunManifest):
        self.path = Path(path)
        self.manifest = manifest
        self._created = False

    def __enter__(self) -> Workspace:
        if self.path.exists():
            if not self.path.is_dir():
                raise UsageError(f"{self.path} exists and is not a directory")
            if any(self.path.iterdir()):
                raise UsageError(f"output directory {self.path} is not empty; refusing to overwrite")
        else:
            self.path.mkdir(parents=True)
            self._created = True
        return self

    def file(self, name: str) -> Path:
        self.manifest.add(name)
        return self.path / name

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is None:
            self.manifest.write(self.path / "manifest.json")
            return False
        if self._created:
            shutil.rmtree(self.path, ignore_errors=True)
        else:
            for name in self.manifest.outputs:
                (self.path / name).unlink(missing_ok=True)
        return False


# -- shared helpers ---------------------------------------------------------------


def _command_line(args: argparse.Namespace) -> str:
    """The invocation with the output directory masked, so reruns elsewhere stamp identical headers."""
    shown, mask = [], False
    for tok in args.argv:
        if mask:
            shown.append("OUT")
            mask = False
        elif tok in ("-o", "--out"):
            shown.append(tok)
            mask = True
        elif tok.startswith("--out="):
            shown.append("--out=OUT")
        else:
            shown.append(tok)
    return " ".join(["deadline-ils", *shown])


def _provenance(args: argparse.Namespace) -> Provenance:
    return Provenance(_command_line(args), args.seed)


def _manifest(args: argparse.Namespace, inputs: dict[str, str]) -> RunManifest:
    return RunManifest(
        command=_command_line(args),
        inputs={k: str(v) for k, v in inputs.items() if v is not None},
        seed=args.seed,
        b_values={"trade": args.b_trade, "median": args.b_median, "ks": args.b_ks},
        period_boundary=format_timestamp(args.period_boundary),
        output_dir=str(args.out),
    )


def _scoring_config(args: argparse.Namespace) -> ScoringConfig:
    scope = ScopeConfig(epsilon=args.epsilon, edge=args.edge, confidence_min=args.confidence_min)
    return ScoringConfig(scope, args.b_trade, args.seed)


def _load_markets(path: str, boundary: datetime, classify: bool = True) -> list[MarketRecord]:
    """Ingest markets, classifying rows that arrive without typology, and stamp periods."""
    result = ingest_markets(path)
    if result.rejections:
        first = "; ".join(f"row {r.row}: {r.reason}" for r in result.rejections[:3])
        raise IngestError(f"{path}: {len(result.rejections)} row(s) rejected ({first})")
    out = []
    for r in result.records:
        if classify and (r.category is None or r.resolution_type is None):
            r = classify_record(r)
        out.append(with_period(r, boundary))
    return out


def _write_markets(records: Sequence[MarketRecord], path: Path, prov: Provenance) -> None:
    emit_markets(records, path)
    stamp(path, prov)


def _taus_by_group(records: Sequence[ScoreRecord], by: str) -> dict[str, list[float]]:
    groups: dict[str, list[float]] = {}
    for r in records:
        if not r.in_scope or r.tau_days is None or r.tau_days <= 0 or r.period is None:
            continue
        key = r.period if by == "period" else f"{r.bucket}/{r.period}"
        groups.setdefault(key, []).append(r.tau_days)
    return groups


def _fit_groups(records: Sequence[ScoreRecord], by: str, B: int, seed: int) -> tuple[list[GroupFit], dict[str, list[float]]]:
    taus = _taus_by_group(records, by)
    order = sorted(taus, key=lambda k: (k.split("/")[-1] != PERIODS[0], k))
    fits = []
    for key in order:
        period = key.split("/")[-1]
        bucket = key.split("/")[0] if "/" in key else None
        fits.append(fit_group(taus[key], key, period, bucket, B, seed))
    return fits, taus


def _adjust_all(records: Sequence[ScoreRecord], groups: Sequence[GroupFit], epsilon: float) -> tuple[list[ScoreRecord], list[str]]:
    """Adjust each deadline record with its cell's adopted model, falling back to its period's."""
    models = {g.group: g.selection.adopted_fit for g in groups if g.selection and g.selection.adopted_fit}
    out, notes = [], []
    for r in records:
        model = models.get(f"{r.bucket}/{r.period}") or models.get(r.period or "")
        if model is None or not r.in_scope or r.resolution_type != "deadline_resolved":
            if r.in_scope and r.resolution_type == "deadline_resolved":
                notes.append(f"{r.market_id}: no adopted hazard model for {r.period}")
            out.append(r)
            continue
        try:
            out.append(adjust_record(r, model, epsilon))
        except (DegenerateWindow, TrivialMove) as exc:
            notes.append(f"{r.market_id}: {exc}")
            out.append(r)
    return out, notes


def _print_notes(notes: Sequence[str], limit: int = 5) -> None:
    for n in notes[:limit]:
        print(f"note: {n}", file=sys.stderr)
    if len(notes) > limit:
        print(f"note: ... and {len(notes) - limit} more records left unadjusted", file=sys.stderr)


def _write_fits(groups: Sequence[GroupFit], taus: dict[str, list[float]], ws: Workspace, prov: Provenance) -> None:
    from deadline_ils.plotting import plot_hazard_fits

    path = ws.file("hazard_fits.json")
    path.write_text(json.dumps([group_to_mapping(g) for g in groups], indent=2) + "\n", encoding="utf-8")
    write_table(ws.file("functional_form_comparison.csv"), FUNCTIONAL_FORM_COLUMNS, functional_form_rows(groups), prov)
    write_table(ws.file("hazard_rates.csv"), HAZARD_RATE_COLUMNS, hazard_rate_rows(groups), prov)
    plot_hazard_fits(groups, taus, ws.file("hazard_survival.png"))


def _load_fits(path: str) -> list[GroupFit]:
    return [group_from_mapping(g) for g in json.loads(Path(path).read_text(encoding="utf-8"))]


# -- subcommands -------------------------------------------------------------------


def cmd_classify(args: argparse.Namespace, ws: Workspace) -> None:
    result = ingest_markets(args.markets)
    if result.rejections:
        first = "; ".join(f"row {r.row}: {r.reason}" for r in result.rejections[:3])
        raise IngestError(f"{args.markets}: {len(result.rejections)} row(s) rejected ({first})")
    records = [with_period(classify_record(r), args.period_boundary) for r in result.records]
    _write_markets(records, ws.file("markets_classified.csv"), _provenance(args))


def _reference_gate(args: argparse.Namespace, providers: dict[str, dict]) -> None:
    """Recover the reference market before any batch work; stop the run on a mismatch."""
    if args.skip_reference:
        return
    ref_path = args.reference or fixture_path("iran_apr30.json")
    if not Path(ref_path).exists():
        raise ConfigurationError(f"reference fixture {ref_path} is missing")
    ref = load_reference(ref_path)
    merged = {t: {**ref.providers.get(t, {}), **providers.get(t, {})} for t in TIERS}
    tiers = [FileProvider(t, merged[t]) for t in TIERS]
    hard_assert_reference(recover_cascade(ref.record, *tiers), ref.case)


def cmd_recover(args: argparse.Namespace, ws: Workspace) -> None:
    providers = json.loads(Path(args.provider_fixture).read_text(encoding="utf-8"))
    _reference_gate(args, providers)
    markets = _load_markets(args.markets, args.period_boundary)
    files = {t: FileProvider(t, providers.get(t, {})) for t in TIERS}
    results = recover_all(markets, files, ws.file("recoveries.jsonl"), jobs=args.jobs)
    write_table(ws.file("tevent_recovery_summary.csv"), RECOVERY_COLUMNS, recovery_rows(results), _provenance(args))


def _filter(args: argparse.Namespace, markets_path: str) -> tuple:
    markets = _load_markets(markets_path, args.period_boundary)
    recoveries = load_recoveries(args.recoveries)
    prices = load_price_index(args.prices)
    table, records = run_filter_chain(markets, recoveries, prices, _scoring_config(args))
    return markets, table, records


def cmd_filter(args: argparse.Namespace, ws: Workspace) -> None:
    from deadline_ils.plotting import plot_attrition

    prov = _provenance(args)
    markets, table, records = _filter(args, args.markets)
    write_table(ws.file("filter_chain_attrition.csv"), ATTRITION_COLUMNS, attrition_rows(table), prov, digits=1)
    write_table(ws.file("dispositions.csv"), MARKET_DISPOSITION_COLUMNS, market_disposition_rows(records), prov)
    by_id = {r.market_id: r for r in records}
    write_table(ws.file("ffic_classification_breakdown.csv"), DISPOSITION_COLUMNS, disposition_rows(ffic_disposition(markets, by_id)), prov, digits=1)
    survivors = [m for m in markets if disposition_of(by_id[m.market_id]) == "in_scope"]
    _write_markets(survivors, ws.file("survivors.csv"), prov)
    plot_attrition(table, ws.file("filter_chain_attrition.png"))


def cmd_score(args: argparse.Namespace, ws: Workspace) -> None:
    prov = _provenance(args)
    _, _, records = _filter(args, args.survivors)
    write_scores(records, ws.file("scores.csv"), prov)
    write_table(ws.file("tails.csv"), TAIL_COLUMNS, tail_rows(records), prov)


def cmd_fit_hazard(args: argparse.Namespace, ws: Workspace) -> None:
    records = read_scores(args.scored)
    groups, taus = _fit_groups(records, args.by, args.b_ks, args.seed)
    if not groups:
        raise FitFailure("no in-scope records with positive lead time to fit")
    _write_fits(groups, taus, ws, _provenance(args))


def cmd_adjust(args: argparse.Namespace, ws: Workspace) -> None:
    from deadline_ils.plotting import plot_raw_vs_adjusted

    records = read_scores(args.scored)
    adjusted, notes = _adjust_all(records, _load_fits(args.fits), args.epsilon)
    write_scores(adjusted, ws.file("scores_adjusted.csv"), _provenance(args))
    plot_raw_vs_adjusted(adjusted, ws.file("raw_vs_adjusted.png"))
    _print_notes(notes)


def cmd_report(args: argparse.Namespace, ws: Workspace) -> None:
    """Filter, score, fit, adjust and write every companion table and figure."""
    from deadline_ils import plotting

    prov = _provenance(args)
    markets, table, records = _filter(args, args.markets)
    if args.fits:
        groups, taus = _load_fits(args.fits), _taus_by_group(records, args.by)
    else:
        groups, taus = _fit_groups(records, args.by, args.b_ks, args.seed)
    records, notes = _adjust_all(records, groups, args.epsilon)
    by_id = {r.market_id: r for r in records}

    write_scores(records, ws.file("scores.csv"), prov)
    write_table(ws.file("distribution_summary.csv"), DISTRIBUTION_COLUMNS, distribution_rows(records), prov)
    write_table(ws.file("detection_thresholds.csv"), THRESHOLD_COLUMNS, threshold_rows(records, args.b_trade, args.seed), prov)
    write_table(ws.file("median_bootstrap_cis.csv"), MEDIAN_CI_COLUMNS, median_ci_rows(records, args.b_median, args.seed), prov)
    write_table(ws.file("anchor_sensitivity_summary.csv"), ANCHOR_COLUMNS, anchor_rows(anchor_sensitivity_summary(records)), prov)
    write_table(ws.file("ffic_classification_breakdown.csv"), DISPOSITION_COLUMNS, disposition_rows(ffic_disposition(markets, by_id)), prov, digits=1)
    write_table(ws.file("filter_chain_attrition.csv"), ATTRITION_COLUMNS, attrition_rows(table), prov, digits=1)
    write_table(ws.file("dispositions.csv"), MARKET_DISPOSITION_COLUMNS, market_disposition_rows(records), prov)
    write_table(ws.file("tails.csv"), TAIL_COLUMNS, tail_rows(records), prov)
    if groups:
        _write_fits(groups, taus, ws, prov)
    plotting.plot_attrition(table, ws.file("filter_chain_attrition.png"))
    plotting.plot_score_distributions(records, ws.file("score_distributions.png"))
    plotting.plot_anchor_sensitivity(records, ws.file("anchor_sensitivity.png"))
    plotting.plot_raw_vs_adjusted(records, ws.file("raw_vs_adjusted.png"))
    _print_notes(notes)


def cmd_simulate(args: argparse.Namespace, ws: Workspace) -> None:
    from deadline_ils.synth import SynthConfig, generate_cohort

    obj = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if args.seed_given or "seed" not in obj:
        obj["seed"] = args.seed
    cfg = SynthConfig.from_mapping(obj)
    # generate into a staging area, then register each file with the workspace
    stage = ws.path / ".stage"
    try:
        paths = generate_cohort(cfg, args.n, stage)
        for p in paths.values():
            p.replace(ws.file(p.name))
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    stamp(ws.path / "markets.csv", _provenance(args))
    stamp(ws.path / "ground_truth.csv", _provenance(args))
    # the generating model in fit-file form, so `report --fits` can adjust with the truth
    period = period_for(cfg.start + timedelta(days=cfg.window_days), args.period_boundary).value
    truth = GroupFit(period, period, None, ModelSelection((cfg.model,), cfg.family, "generating model"), args.n)
    ws.file("true_hazard.json").write_text(json.dumps([group_to_mapping(truth)], indent=2) + "\n", encoding="utf-8")


def cmd_validate_tevent(args: argparse.Namespace, ws: Workspace) -> None:
    prov = _provenance(args)
    report = validate_second_pass(load_validation_pairs(args.pairs))
    write_table(ws.file("tevent_validation.csv"), VALIDATION_COLUMNS, validation_rows(report), prov)
    write_table(ws.file("tevent_disagreements.csv"), DISAGREEMENT_COLUMNS, disagreement_rows(report), prov, digits=2)


def cmd_fixtures(args: argparse.Namespace, ws: Workspace) -> None:
    src = fixture_path()
    for item in sorted(src.rglob("*")):
        if item.is_file():
            rel = item.relative_to(src)
            ws.manifest.add(str(rel))
            target = ws.path / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(item, target)


# -- parser --------------------------------------------------------------------------


def _timestamp(text: str) -> datetime:
    try:
        return parse_timestamp(text)
    except (ValueError, IngestError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


class _SeedAction(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        namespace.seed_given = True


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("pipeline options")
    g.add_argument("-o", "--out", required=True, help="output directory (created, or must be empty)")
    g.add_argument("--seed", type=int, default=DEFAULT_SEED, action=_SeedAction)
    g.add_argument("--b-trade", type=_positive, default=500, help="trade-bootstrap and threshold replications")
    g.add_argument("--b-median", type=_positive, default=1000, help="median and fraction-positive replications")
    g.add_argument("--b-ks", type=_positive, default=999, help="parametric-bootstrap KS replications")
    g.add_argument("--epsilon", type=float, default=EPSILON)
    g.add_argument("--edge", type=float, default=EDGE)
    g.add_argument("--confidence-min", type=float, default=CONFIDENCE_MIN)
    g.add_argument("--period-boundary", type=_timestamp, default=PERIOD_BOUNDARY)
    g.add_argument("--jobs", type=_positive, default=5, help="concurrent recovery requests")

    parser = argparse.ArgumentParser(prog="deadline-ils", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, fn: Callable, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help, description=help)
        p.set_defaults(func=fn)
        return p

    p = add("classify", cmd_classify, "attach resolution type, category and deadline to raw markets")
    p.add_argument("markets")
    p = add("recover", cmd_recover, "recover event timestamps through the provider cascade")
    p.add_argument("markets")
    p.add_argument("--provider-fixture", required=True, help="JSON with tier1/tier2/tier3 provider entries")
    p.add_argument("--reference", help="reference-market fixture (defaults to the bundled one)")
    p.add_argument("--skip-reference", action="store_true", help=argparse.SUPPRESS)
    p = add("filter", cmd_filter, "apply the scope gates and tabulate attrition")
    p.add_argument("markets")
    p.add_argument("recoveries")
    p.add_argument("prices")
    p = add("score", cmd_score, "score in-scope markets with anchor variants and trade CIs")
    p.add_argument("survivors")
    p.add_argument("recoveries")
    p.add_argument("prices")
    p = add("fit-hazard", cmd_fit_hazard, "fit lead-time hazard families and select a model")
    p.add_argument("scored")
    p.add_argument("--by", choices=("period", "cell"), default="period")
    p = add("adjust", cmd_adjust, "attach decay baselines and adjusted scores")
    p.add_argument("scored")
    p.add_argument("fits")
    p = add("report", cmd_report, "run filter through adjustment and write every companion table")
    p.add_argument("markets")
    p.add_argument("recoveries")
    p.add_argument("prices")
    p.add_argument("--fits", help="reuse hazard fits instead of refitting")
    p.add_argument("--by", choices=("period", "cell"), default="period")
    p = add("simulate", cmd_simulate, "generate a synthetic cohort with ground truth")
    p.add_argument("config")
    p.add_argument("-n", type=_positive, default=1000)
    p = add("validate-tevent", cmd_validate_tevent, "agreement between first and second recovery passes")
    p.add_argument("pairs")
    add("fixtures", cmd_fixtures, "copy the bundled fixtures into a directory")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    if not hasattr(args, "seed_given"):
        args.seed_given = False
    inputs = {k: getattr(args, k, None) for k in ("markets", "recoveries", "prices", "survivors", "scored", "fits", "config", "pairs", "provider_fixture", "reference")}
    t0 = time.perf_counter()
    try:
        with Workspace(args.out, _manifest(args, inputs)) as ws:
            args.func(args, ws)
    except UsageError as exc:
        print(f"deadline-ils: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ReferenceMismatch, ConfigurationError) as exc:
        print(f"deadline-ils: reference gate failed: {exc}", file=sys.stderr)
        return EXIT_REFERENCE
    except (IngestError, FitFailure, CheckpointWriteError, ValueError, KeyError, OSError) as exc:
        print(f"deadline-ils: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(f"{args.command}: wrote {args.out} in {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    return 0

