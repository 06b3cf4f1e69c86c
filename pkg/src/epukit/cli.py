"""epukit command line: reproducible batch workflows over the library.

Every subcommand resolves its configuration (flags merged over an
optional --config YAML, then defaults), writes its artifacts atomically
into --out, and drops a manifest.json recording the resolved config and
the sha256 of every input and output. `epukit replay --manifest M`
re-runs the recorded command; with --verify it asserts the artifacts
came out byte-identical.

Exit codes: 0 success, 1 validation/usage error, 2 I/O or protocol
error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import os
import sys
from pathlib import Path

import yaml

from . import __version__
from . import bow as bow_mod
from . import evaluation as eval_mod
from . import index as index_mod
from . import manifest as manifest_mod
from . import plots
from . import scores as scores_mod
from . import simlab
from . import thresholds as thr_mod
from .corpus import (
    Corpus,
    SplitAssignment,
    deduplicate,
    ingest,
    split_random,
    split_stratified_multilabel,
    split_temporal,
)
from .errors import ProtocolError, ValidationError
from .ioutil import atomic_write_text, canonical_json, write_csv, write_json

_REQUIRED = object()

SCORER_URL_ENV = "EPUKIT_SCORER_URL"


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors, per the CLI contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


# ---------------------------------------------------------------------------
# config resolution

def _parse_date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError as exc:
        raise ValidationError(f"bad date {text!r}, expected YYYY-MM-DD") from exc


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"bad number list {text!r}") from exc


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in str(text).split(",") if x.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"bad integer list {text!r}") from exc


def _now_iso() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def _resolve_config(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge CLI flags over the --config file over hard defaults."""
    file_cfg = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ValidationError("--config file must be a YAML mapping")
        file_cfg = raw
    unknown = set(file_cfg) - set(defaults)
    if unknown:
        sys.stderr.write(f"warning: ignoring config keys not used by this subcommand: {sorted(unknown)}\n")

    cfg = {}
    for key, default in defaults.items():
        value = getattr(args, key, None)
        if value is None:
            value = file_cfg.get(key, default)
        if value is _REQUIRED:
            raise ValidationError(f"missing required option --{key.replace('_', '-')}")
        cfg[key] = value
    return cfg


# ---------------------------------------------------------------------------
# shared loading helpers

def _load_corpus_strict(path: str) -> Corpus:
    corpus, report = ingest(path)
    if report.rejects:
        first = report.rejects[0]
        raise ValidationError(
            f"corpus {path} has {len(report.rejects)} invalid records; "
            f"first at line {first.line_no}: {first.reason}"
        )
    if len(corpus) == 0:
        raise ValidationError(f"corpus {path} is empty")
    return corpus


def _resolve_dictionary(spec: str) -> bow_mod.Dictionary:
    if Path(spec).exists():
        return bow_mod.load_dictionary(spec)
    return bow_mod.load_builtin_dictionary(spec)


def _gold_labels(corpus: Corpus, ids=None) -> dict[str, int]:
    pool = corpus.by_id if ids is None else {i: corpus.by_id[i] for i in ids}
    gold = {i: d.gold_epu for i, d in pool.items() if d.gold_epu is not None}
    if not gold:
        raise ValidationError("no documents carry gold_epu labels in the requested set")
    return gold


def _load_split(path: str) -> SplitAssignment:
    with open(path, "r", encoding="utf-8") as fh:
        return SplitAssignment.from_json(json.load(fh))


def _split_subset(corpus: Corpus, split_file: str | None, part: str | None) -> Corpus:
    if split_file is None and part is None:
        return corpus
    if split_file is None or part is None:
        raise ValidationError("split file and split name must be given together")
    assignment = _load_split(split_file)
    ids = [i for i in assignment.ids(part) if i in corpus.by_id]
    if not ids:
        raise ValidationError(f"split {part!r} contains no documents of this corpus")
    return corpus.subset(ids)


def _write_scoreset(out_dir: Path, name: str, scoreset: scores_mod.ScoreSet) -> Path:
    path = out_dir / name
    write_csv(path, scores_mod.ScoreSet.CSV_HEADER, scoreset.csv_rows())
    return path


def _t0_months(cfg: dict) -> list[str]:
    if not cfg.get("t0_start") or not cfg.get("t0_end"):
        raise ValidationError("normalization window required: set --t0-start and --t0-end")
    return index_mod.month_range(cfg["t0_start"], cfg["t0_end"])


def _write_index(out_dir: Path, stem: str, series: index_mod.IndexSeries) -> list[Path]:
    csv_path = out_dir / f"{stem}.csv"
    atomic_write_text(csv_path, series.to_csv_text())
    meta_path = out_dir / f"{stem}_meta.json"
    write_json(meta_path, series.meta)
    return [csv_path, meta_path]


# ---------------------------------------------------------------------------
# subcommands; each returns (input paths, output paths)

def cmd_ingest(cfg: dict, out_dir: Path):
    date_min = _parse_date(cfg["date_min"]) if cfg["date_min"] else None
    date_max = _parse_date(cfg["date_max"]) if cfg["date_max"] else None
    corpus, report = ingest(cfg["corpus"], date_min=date_min, date_max=date_max)
    corpus_path = out_dir / "corpus.jsonl"
    atomic_write_text(corpus_path, corpus.to_jsonl())
    report_path = out_dir / "ingest_report.json"
    write_json(report_path, report.to_json())
    return [cfg["corpus"]], [corpus_path, report_path]


def cmd_dedup(cfg: dict, out_dir: Path):
    corpus = _load_corpus_strict(cfg["corpus"])
    deduped, report = deduplicate(corpus)
    corpus_path = out_dir / "corpus.jsonl"
    atomic_write_text(corpus_path, deduped.to_jsonl())
    report_path = out_dir / "dedup_report.json"
    write_json(report_path, report.to_json())
    return [cfg["corpus"]], [corpus_path, report_path]


def cmd_split(cfg: dict, out_dir: Path):
    corpus = _load_corpus_strict(cfg["corpus"])
    method = cfg["method"]
    if method == "random":
        assignment = split_random(corpus, tuple(_parse_float_list(cfg["fractions"])), cfg["seed"])
    elif method == "temporal":
        if not cfg["cutoff"]:
            raise ValidationError("temporal split requires --cutoff")
        assignment = split_temporal(
            corpus, _parse_date(cfg["cutoff"]), cfg["val_fraction"], cfg["seed"]
        )
    elif method == "stratified":
        assignment = split_stratified_multilabel(
            corpus, tuple(_parse_float_list(cfg["fractions"])), cfg["seed"]
        )
    else:
        raise ValidationError(f"unknown split method {method!r}")
    for warning in assignment.warnings:
        sys.stderr.write(f"warning: {warning}\n")
    path = out_dir / "splits.json"
    write_json(path, assignment.to_json())
    return [cfg["corpus"]], [path]


def cmd_bow(cfg: dict, out_dir: Path):
    corpus = _load_corpus_strict(cfg["corpus"])
    dictionary = _resolve_dictionary(cfg["dict"])
    matcher = bow_mod.Matcher(dictionary)
    labels = bow_mod.classify_corpus(corpus, matcher)
    scoreset = scores_mod.ScoreSet(
        task=cfg["task"],
        model_id=f"bow:{dictionary.name}",
        entries={i: float(v) for i, v in labels.items()},
    )
    scores_path = _write_scoreset(out_dir, "bow_scores.csv", scoreset)
    summary_path = out_dir / "bow_summary.json"
    write_json(
        summary_path,
        {
            "task": cfg["task"],
            "dictionary": dictionary.to_json(),
            "patterns": matcher.pattern_count,
            "positives": int(sum(labels.values())),
            "total": len(labels),
            "positive_rate": sum(labels.values()) / len(labels),
        },
    )
    inputs = [cfg["corpus"]] + ([cfg["dict"]] if Path(cfg["dict"]).exists() else [])
    return inputs, [scores_path, summary_path]


def cmd_sweep(cfg: dict, out_dir: Path):
    corpus = _load_corpus_strict(cfg["corpus"])
    base = _resolve_dictionary(cfg["dict"])
    variants = bow_mod.load_variants(cfg["variants"])
    result = bow_mod.sensitivity_sweep(corpus, base, variants, monthly=bool(cfg["monthly"]))
    sweep_path = out_dir / "sweep.csv"
    write_csv(sweep_path, bow_mod.SweepResult.HEADER, result.csv_rows())
    outputs = [sweep_path]
    if result.monthly is not None:
        monthly_rows = [
            (variant, month, repr(rate))
            for variant in result.monthly
            for month, rate in result.monthly[variant].items()
        ]
        monthly_path = out_dir / "sweep_monthly.csv"
        write_csv(monthly_path, ("variant", "month", "positive_rate"), monthly_rows)
        outputs.append(monthly_path)
    if cfg["plot"]:
        png = out_dir / "sweep.png"
        plots.plot_sweep(result.rows, png)
        outputs.append(png)
    inputs = [cfg["corpus"], cfg["variants"]] + (
        [cfg["dict"]] if Path(cfg["dict"]).exists() else []
    )
    return inputs, outputs


def cmd_score_fetch(cfg: dict, out_dir: Path):
    corpus = _load_corpus_strict(cfg["corpus"])
    base_url = cfg["endpoint"] or os.environ.get(SCORER_URL_ENV)
    if not base_url:
        raise ValidationError(
            f"no scorer endpoint: pass --endpoint or set {SCORER_URL_ENV}"
        )
    endpoint = scores_mod.ScoringEndpoint(
        base_url=base_url,
        batch_size=cfg["batch_size"],
        max_in_flight=cfg["max_in_flight"],
        timeout=cfg["timeout"],
        retries=cfg["retries"],
    )
    scoreset = scores_mod.fetch_scores(endpoint, corpus, cfg["task"])
    scores_path = _write_scoreset(out_dir, "scores.csv", scoreset)
    return [cfg["corpus"]], [scores_path]


def cmd_score_load(cfg: dict, out_dir: Path):
    corpus = _load_corpus_strict(cfg["corpus"])
    scoreset = scores_mod.load_scores(cfg["scores"], corpus)
    scores_path = _write_scoreset(out_dir, "scores.csv", scoreset)
    report_path = out_dir / "score_report.json"
    write_json(
        report_path,
        {"task": scoreset.task, "model_id": scoreset.model_id, "n": len(scoreset)},
    )
    return [cfg["corpus"], cfg["scores"]], [scores_path, report_path]


def cmd_optimize_threshold(cfg: dict, out_dir: Path):
    corpus = _load_corpus_strict(cfg["corpus"])
    scoreset = scores_mod.load_scores(cfg["scores"], corpus)
    fit_corpus = _split_subset(corpus, cfg["split_file"], cfg["fit_split"])
    gold = _gold_labels(fit_corpus)
    sub_scores = {i: scoreset.entries[i] for i in gold}
    rule = thr_mod.ThresholdRule.parse(cfg["rule"])
    split_tag = cfg["fit_split"] or "all"

    outputs = []
    report_path = out_dir / "threshold.json"
    if cfg["group_key"]:
        if cfg["group_key"] not in ("language", "outlet"):
            raise ValidationError("--group-key must be language or outlet")
        groups = {i: getattr(corpus.by_id[i], cfg["group_key"]) for i in gold}
        per_group = thr_mod.optimize_per_group(
            sub_scores, gold, groups, rule,
            split=split_tag, min_group_size=cfg["min_group_size"],
        )
        write_json(report_path, per_group.to_json(scoreset.task, scoreset.model_id))
    else:
        result = thr_mod.optimize(sub_scores, gold, rule, split=split_tag)
        write_json(report_path, result.to_report(scoreset.task, scoreset.model_id))
        curve = thr_mod.roc(sub_scores, gold)
        roc_path = out_dir / "roc.csv"
        write_csv(roc_path, thr_mod.RocCurve.CSV_HEADER, curve.csv_rows())
        outputs.append(roc_path)
        if cfg["plot"]:
            png = out_dir / "roc.png"
            plots.plot_roc(curve.points, png, title=f"ROC ({scoreset.model_id})")
            outputs.append(png)
    outputs.insert(0, report_path)
    return [cfg["corpus"], cfg["scores"]], outputs


def cmd_evaluate(cfg: dict, out_dir: Path):
    corpus = _load_corpus_strict(cfg["corpus"])
    scoreset = scores_mod.load_scores(cfg["scores"], corpus)
    eval_corpus = _split_subset(corpus, cfg["split_file"], cfg["eval_split"])
    gold = _gold_labels(eval_corpus)
    sub_entries = {i: scoreset.entries[i] for i in gold}

    if cfg["tau"] is None:
        bad = sorted(i for i, p in sub_entries.items() if p not in (0.0, 1.0))
        if bad:
            raise ValidationError(
                f"score file is not binary; pass --tau to threshold (first ids: {bad[:5]})"
            )
        pred = {i: int(p) for i, p in sub_entries.items()}
    else:
        pred = scores_mod.binarize(sub_entries, cfg["tau"])

    counts = eval_mod.confusion(pred, gold)
    report = eval_mod.metrics_from_counts(counts)
    payload = {
        "task": scoreset.task,
        "model_id": scoreset.model_id,
        "tau": cfg["tau"],
        "split": cfg["eval_split"] or "all",
        "n": counts.total,
        "counts": counts.to_json(),
        "metrics": report.to_json(),
    }
    if cfg["bootstrap"] > 0:
        payload["bootstrap"] = {
            stat: eval_mod.bootstrap(
                pred, gold, statistic=stat, b=cfg["bootstrap"], seed=cfg["seed"]
            ).to_json()
            for stat in ("accuracy", "precision", "recall", "f1")
        }
    metrics_path = out_dir / "metrics.json"
    write_json(metrics_path, payload)
    outputs = [metrics_path]

    certainty = {
        i: eval_corpus.by_id[i].certainty
        for i in gold
        if eval_corpus.by_id[i].certainty is not None
    }
    if cfg["by_certainty"]:
        rows = eval_mod.misclassification_by_certainty(
            pred, gold, certainty, min_bin_size=cfg["min_bin_size"]
        )
        path = out_dir / "misclass_by_certainty.csv"
        write_csv(path, eval_mod.CERTAINTY_ERR_HEADER, eval_mod.certainty_error_csv_rows(rows))
        outputs.append(path)
        if cfg["plot"]:
            png = out_dir / "misclass_by_certainty.png"
            plots.plot_certainty_errors(rows, png)
            outputs.append(png)
    if cfg["score_dist"]:
        rows = eval_mod.score_distribution_by_certainty(sub_entries, certainty, bins=cfg["bins"])
        path = out_dir / "score_dist_by_certainty.csv"
        write_csv(path, eval_mod.SCORE_HIST_HEADER, eval_mod.score_hist_csv_rows(rows))
        outputs.append(path)
        if cfg["plot"]:
            png = out_dir / "score_dist_by_certainty.png"
            plots.plot_score_histograms(rows, png)
            outputs.append(png)
    if cfg["length_bins"]:
        edges = _parse_int_list(cfg["length_bins"])
        lengths = {i: eval_corpus.by_id[i].token_length() for i in gold}
        rows = eval_mod.f1_by_length(pred, gold, lengths, edges)
        path = out_dir / "f1_by_length.csv"
        write_csv(path, eval_mod.F1_LENGTH_HEADER, eval_mod.f1_length_csv_rows(rows))
        outputs.append(path)
        if cfg["plot"]:
            png = out_dir / "f1_by_length.png"
            plots.plot_f1_by_length(rows, png)
            outputs.append(png)
    return [cfg["corpus"], cfg["scores"]], outputs


def cmd_build_index(cfg: dict, out_dir: Path):
    corpus = _load_corpus_strict(cfg["corpus"])
    t0 = _t0_months(cfg)
    inputs = [cfg["corpus"]]

    if cfg["from_gold"]:
        gold = _gold_labels(corpus)
        if len(gold) != len(corpus):
            missing = sorted(set(corpus.by_id) - set(gold))
            raise ValidationError(
                f"--from-gold needs gold_epu on every document; missing for {missing[:10]}"
            )
        output: dict[str, float] | scores_mod.ScoreSet = {i: float(v) for i, v in gold.items()}
        mode = "binary"
        tau = None
        task, model_id = cfg["task"], "gold"
    else:
        if not cfg["scores"]:
            raise ValidationError("build-index needs --scores or --from-gold")
        inputs.append(cfg["scores"])
        output = scores_mod.load_scores(cfg["scores"], corpus)
        mode = cfg["mode"]
        tau = cfg["tau"]
        task, model_id = output.task, output.model_id
        if mode == "binary" and tau is None:
            bad = sorted(i for i, p in output.entries.items() if p not in (0.0, 1.0))
            if bad:
                raise ValidationError(
                    "binary mode on non-binary scores requires --tau "
                    f"(first non-binary ids: {bad[:5]})"
                )

    series = index_mod.build_index(
        corpus,
        output,
        mode=mode,
        t0=t0,
        tau=tau,
        rule=cfg["rule"],
        sd_ddof=cfg["sd_ddof"],
        workers=cfg["workers"],
        task=task,
        model_id=model_id,
        created_at=cfg["created_at"],
    )
    outputs = _write_index(out_dir, "index", series)
    for outlet, reason in series.meta.get("dropped_outlets", {}).items():
        sys.stderr.write(f"warning: dropped outlet {outlet}: {reason}\n")
    if cfg["plot"]:
        png = out_dir / "index.png"
        plots.plot_index_series(
            {model_id or "index": series.values}, png,
            title=f"EPU index ({mode})", t0=(cfg["t0_start"], cfg["t0_end"]),
        )
        outputs.append(png)
    return inputs, outputs


def cmd_combine(cfg: dict, out_dir: Path):
    if not cfg["series"]:
        raise ValidationError("combine needs --series files")
    t0 = _t0_months(cfg)
    series: dict[str, index_mod.IndexSeries] = {}
    for path in cfg["series"]:
        stem = Path(path).stem
        if stem in series:
            raise ValidationError(f"duplicate series id {stem!r}")
        series[stem] = index_mod.IndexSeries.from_csv(path)

    weights: dict[str, float] = {}
    if cfg["weights"]:
        import csv as _csv

        with open(cfg["weights"], "r", encoding="utf-8", newline="") as fh:
            reader = _csv.DictReader(fh)
            if reader.fieldnames is None or set(reader.fieldnames) != {"series_id", "weight"}:
                raise ValidationError("weights CSV must have header series_id,weight")
            for rec in reader:
                weights[rec["series_id"]] = float(rec["weight"])
    else:
        weights = {k: 1.0 for k in series}

    combined = index_mod.weighted_combine(series, weights, t0)
    if cfg["created_at"]:
        combined.meta["created_at"] = cfg["created_at"]
    outputs = _write_index(out_dir, "index", combined)
    if cfg["plot"]:
        png = out_dir / "index.png"
        overlay = {k: s.values for k, s in series.items()}
        overlay["combined"] = combined.values
        plots.plot_index_series(overlay, png, title="weighted combination",
                                t0=(cfg["t0_start"], cfg["t0_end"]))
        outputs.append(png)
    inputs = list(cfg["series"]) + ([cfg["weights"]] if cfg["weights"] else [])
    return inputs, outputs


def cmd_correlate(cfg: dict, out_dir: Path):
    a = index_mod.IndexSeries.from_csv(cfg["series_a"])
    b = index_mod.IndexSeries.from_csv(cfg["series_b"])
    result = index_mod.correlate(a, b, min_overlap=cfg["min_overlap"])
    path = out_dir / "correlation.json"
    payload = result.to_json()
    payload["series_a"] = str(cfg["series_a"])
    payload["series_b"] = str(cfg["series_b"])
    write_json(path, payload)
    return [cfg["series_a"], cfg["series_b"]], [path]


def cmd_simulate(cfg: dict, out_dir: Path):
    sim_keys = set(simlab.SimConfig.__dataclass_fields__)
    config = simlab.SimConfig.from_config({k: cfg[k] for k in sim_keys})
    months = config.month_list()
    t0 = (
        index_mod.month_range(cfg["t0_start"], cfg["t0_end"])
        if cfg["t0_start"] and cfg["t0_end"]
        else months
    )
    run = simlab.run_simulation(config, t0=t0)

    corpus_path = out_dir / "sim_corpus.jsonl"
    atomic_write_text(corpus_path, run.sim.corpus.to_jsonl())
    latent_path = out_dir / "latent.csv"
    write_csv(
        latent_path,
        ("month", "latent_share", "latent_u"),
        [(m, repr(run.sim.latent_share[m]), repr(run.sim.latent_u[m])) for m in months],
    )
    gold_scores = scores_mod.ScoreSet(
        task="sim", model_id="gold", entries={i: float(v) for i, v in run.sim.gold.items()}
    )
    pred_scores = scores_mod.ScoreSet(
        task="sim",
        model_id=run.pred_index.meta.get("model_id") or "noisy",
        entries={i: float(v) for i, v in run.predicted.items()},
    )
    gold_scores_path = _write_scoreset(out_dir, "gold_scores.csv", gold_scores)
    pred_scores_path = _write_scoreset(out_dir, "pred_scores.csv", pred_scores)
    outputs = [corpus_path, latent_path, gold_scores_path, pred_scores_path]
    outputs += _write_index(out_dir, "gold_index", run.gold_index)
    outputs += _write_index(out_dir, "pred_index", run.pred_index)
    decomp_path = out_dir / "decomposition.json"
    write_json(decomp_path, run.decomposition.to_json())
    outputs.append(decomp_path)
    if cfg["plot"]:
        png = out_dir / "sim.png"
        plots.plot_decomposition(
            run.pred_index.values, run.gold_index.values, run.decomposition.errors, png
        )
        outputs.append(png)
    return [], outputs


COMMANDS = {
    "ingest": cmd_ingest,
    "dedup": cmd_dedup,
    "split": cmd_split,
    "bow": cmd_bow,
    "sweep": cmd_sweep,
    "score-fetch": cmd_score_fetch,
    "score-load": cmd_score_load,
    "optimize-threshold": cmd_optimize_threshold,
    "evaluate": cmd_evaluate,
    "build-index": cmd_build_index,
    "combine": cmd_combine,
    "correlate": cmd_correlate,
    "simulate": cmd_simulate,
}

DEFAULTS: dict[str, dict] = {
    "ingest": {"corpus": _REQUIRED, "out": _REQUIRED, "date_min": None, "date_max": None},
    "dedup": {"corpus": _REQUIRED, "out": _REQUIRED},
    "split": {
        "corpus": _REQUIRED, "out": _REQUIRED, "method": "random",
        "fractions": "0.7,0.2,0.1", "seed": 0, "cutoff": None, "val_fraction": 0.2,
    },
    "bow": {"corpus": _REQUIRED, "dict": "bbd-base", "task": "epu", "out": _REQUIRED},
    "sweep": {
        "corpus": _REQUIRED, "dict": "bbd-base", "variants": _REQUIRED, "out": _REQUIRED,
        "monthly": False, "plot": False,
    },
    "score-fetch": {
        "corpus": _REQUIRED, "task": "epu", "endpoint": None, "batch_size": 32,
        "max_in_flight": 4, "timeout": 30.0, "retries": 2, "out": _REQUIRED,
    },
    "score-load": {"corpus": _REQUIRED, "scores": _REQUIRED, "out": _REQUIRED},
    "optimize-threshold": {
        "corpus": _REQUIRED, "scores": _REQUIRED, "rule": "youden",
        "split_file": None, "fit_split": None, "group_key": None,
        "min_group_size": 20, "plot": False, "out": _REQUIRED,
    },
    "evaluate": {
        "corpus": _REQUIRED, "scores": _REQUIRED, "tau": None,
        "split_file": None, "eval_split": None, "bootstrap": 0, "seed": 0,
        "by_certainty": False, "score_dist": False, "bins": 20,
        "length_bins": None, "min_bin_size": 20, "plot": False, "out": _REQUIRED,
    },
    "build-index": {
        "corpus": _REQUIRED, "scores": None, "from_gold": False, "mode": "binary",
        "tau": None, "rule": None, "t0_start": None, "t0_end": None, "sd_ddof": 1,
        "workers": 1, "task": "epu", "created_at": None, "plot": False, "out": _REQUIRED,
    },
    "combine": {
        "series": _REQUIRED, "weights": None, "t0_start": None, "t0_end": None,
        "created_at": None, "plot": False, "out": _REQUIRED,
    },
    "correlate": {"series_a": _REQUIRED, "series_b": _REQUIRED, "min_overlap": 3, "out": _REQUIRED},
    "simulate": {
        "months": 24, "outlets": 3, "articles_mean": 50.0, "articles_dispersion": 0.0,
        "persistence": 0.5, "innovation_scale": 0.02, "baseline_share": 0.1,
        "start_month": "2000-01", "seed": 0, "fpr": 0.0, "fnr": 0.0,
        "score_mode": False, "score_noise": 0.0,
        "t0_start": None, "t0_end": None, "plot": False, "out": _REQUIRED,
    },
}


def build_parser() -> _Parser:
    parser = _Parser(prog="epukit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"epukit {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML config file merged under the flags")
        p.add_argument("--manifest-only", action="store_true", default=None,
                       help="print the resolved manifest without running")
        return p

    p = add("ingest", "validate a JSONL corpus")
    p.add_argument("--corpus")
    p.add_argument("--out")
    p.add_argument("--date-min", dest="date_min")
    p.add_argument("--date-max", dest="date_max")

    p = add("dedup", "drop empty bodies and exact duplicates")
    p.add_argument("--corpus")
    p.add_argument("--out")

    p = add("split", "partition a corpus into train/validation/test")
    p.add_argument("--corpus")
    p.add_argument("--out")
    p.add_argument("--method", choices=["random", "temporal", "stratified"])
    p.add_argument("--fractions")
    p.add_argument("--seed", type=int)
    p.add_argument("--cutoff")
    p.add_argument("--val-fraction", dest="val_fraction", type=float)

    p = add("bow", "classify with a keyword dictionary")
    p.add_argument("--corpus")
    p.add_argument("--dict", help="dictionary YAML path or builtin name")
    p.add_argument("--task")
    p.add_argument("--out")

    p = add("sweep", "dictionary sensitivity sweep")
    p.add_argument("--corpus")
    p.add_argument("--dict")
    p.add_argument("--variants")
    p.add_argument("--monthly", action="store_true", default=None)
    p.add_argument("--plot", action="store_true", default=None)
    p.add_argument("--out")

    p = add("score-fetch", "score a corpus over the wire protocol")
    p.add_argument("--corpus")
    p.add_argument("--task")
    p.add_argument("--endpoint", help=f"scorer base URL (or {SCORER_URL_ENV})")
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--max-in-flight", dest="max_in_flight", type=int)
    p.add_argument("--timeout", type=float)
    p.add_argument("--retries", type=int)
    p.add_argument("--out")

    p = add("score-load", "validate a score file against a corpus")
    p.add_argument("--corpus")
    p.add_argument("--scores")
    p.add_argument("--out")

    p = add("optimize-threshold", "fit a decision threshold on labeled scores")
    p.add_argument("--corpus")
    p.add_argument("--scores")
    p.add_argument("--rule", help="youden | f1max | recall@0.85 | precision@0.85 | fixed@T")
    p.add_argument("--split-file", dest="split_file")
    p.add_argument("--fit-split", dest="fit_split")
    p.add_argument("--group-key", dest="group_key", help="language or outlet")
    p.add_argument("--min-group-size", dest="min_group_size", type=int)
    p.add_argument("--plot", action="store_true", default=None)
    p.add_argument("--out")

    p = add("evaluate", "metrics, bootstrap, and diagnostic breakdowns")
    p.add_argument("--corpus")
    p.add_argument("--scores")
    p.add_argument("--tau", type=float)
    p.add_argument("--split-file", dest="split_file")
    p.add_argument("--eval-split", dest="eval_split")
    p.add_argument("--bootstrap", type=int, help="number of resamples (0 = off)")
    p.add_argument("--seed", type=int)
    p.add_argument("--by-certainty", dest="by_certainty", action="store_true", default=None)
    p.add_argument("--score-dist", dest="score_dist", action="store_true", default=None)
    p.add_argument("--bins", type=int)
    p.add_argument("--length-bins", dest="length_bins", help="comma-separated token edges")
    p.add_argument("--min-bin-size", dest="min_bin_size", type=int)
    p.add_argument("--plot", action="store_true", default=None)
    p.add_argument("--out")

    p = add("build-index", "aggregate labels or probabilities into an index")
    p.add_argument("--corpus")
    p.add_argument("--scores")
    p.add_argument("--from-gold", dest="from_gold", action="store_true", default=None)
    p.add_argument("--mode", choices=["binary", "probabilistic"])
    p.add_argument("--tau", type=float)
    p.add_argument("--rule", help="recorded in metadata as the threshold provenance")
    p.add_argument("--t0-start", dest="t0_start")
    p.add_argument("--t0-end", dest="t0_end")
    p.add_argument("--sd-ddof", dest="sd_ddof", type=int, choices=[0, 1])
    p.add_argument("--workers", type=int)
    p.add_argument("--task")
    p.add_argument("--created-at", dest="created_at")
    p.add_argument("--plot", action="store_true", default=None)
    p.add_argument("--out")

    p = add("combine", "weighted multi-series combination")
    p.add_argument("--series", nargs="+")
    p.add_argument("--weights", help="CSV series_id,weight")
    p.add_argument("--t0-start", dest="t0_start")
    p.add_argument("--t0-end", dest="t0_end")
    p.add_argument("--created-at", dest="created_at")
    p.add_argument("--plot", action="store_true", default=None)
    p.add_argument("--out")

    p = add("correlate", "Pearson correlation of two index CSVs")
    p.add_argument("--series-a", dest="series_a")
    p.add_argument("--series-b", dest="series_b")
    p.add_argument("--min-overlap", dest="min_overlap", type=int)
    p.add_argument("--out")

    p = add("simulate", "measurement-error laboratory run")
    for key, default in DEFAULTS["simulate"].items():
        if key in ("out", "plot", "score_mode"):
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(default, bool):
            p.add_argument(flag, dest=key, action="store_true", default=None)
        elif isinstance(default, int):
            p.add_argument(flag, dest=key, type=int)
        elif isinstance(default, float):
            p.add_argument(flag, dest=key, type=float)
        else:
            p.add_argument(flag, dest=key)
    p.add_argument("--score-mode", dest="score_mode", action="store_true", default=None)
    p.add_argument("--plot", action="store_true", default=None)
    p.add_argument("--out")

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--verify", action="store_true",
                   help="fail unless artifacts match the recorded checksums")
    return parser


def _execute(subcommand: str, cfg: dict, manifest_only: bool = False) -> int:
    out_dir = Path(cfg["out"])
    command = COMMANDS[subcommand]
    if manifest_only:
        # resolve inputs without writing anything
        probe_inputs = _probe_inputs(subcommand, cfg)
        manifest = {
            "tool": "epukit",
            "version": __version__,
            "subcommand": subcommand,
            "config": cfg,
            "inputs": [manifest_mod.file_entry(p) for p in sorted(str(p) for p in probe_inputs)],
            "outputs": [],
        }
        sys.stdout.write(canonical_json(manifest))
        return 0
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs, outputs = command(cfg, out_dir)
    manifest = manifest_mod.build_manifest(subcommand, cfg, inputs, outputs)
    manifest_mod.write_manifest(out_dir, manifest)
    return 0


def _probe_inputs(subcommand: str, cfg: dict) -> list[str]:
    keys_by_cmd = {
        "ingest": ["corpus"], "dedup": ["corpus"], "split": ["corpus"],
        "bow": ["corpus", "dict"], "sweep": ["corpus", "dict", "variants"],
        "score-fetch": ["corpus"], "score-load": ["corpus", "scores"],
        "optimize-threshold": ["corpus", "scores", "split_file"],
        "evaluate": ["corpus", "scores", "split_file"],
        "build-index": ["corpus", "scores"],
        "combine": ["weights"], "correlate": ["series_a", "series_b"], "simulate": [],
    }
    paths = []
    for key in keys_by_cmd.get(subcommand, []):
        value = cfg.get(key)
        if value and Path(str(value)).exists():
            paths.append(str(value))
    for path in cfg.get("series") or []:
        paths.append(str(path))
    return paths


def cmd_replay(manifest_path: str, verify: bool) -> int:
    manifest = manifest_mod.load_manifest(manifest_path)
    subcommand = manifest["subcommand"]
    if subcommand not in COMMANDS:
        raise ValidationError(f"manifest names unknown subcommand {subcommand!r}")
    manifest_mod.verify_inputs(manifest)
    _execute(subcommand, manifest["config"])
    if verify:
        problems = manifest_mod.verify_outputs(manifest)
        if problems:
            for problem in problems:
                sys.stderr.write(f"replay mismatch: {problem}\n")
            return 1
        sys.stderr.write(f"replay verified: {len(manifest.get('outputs', []))} artifacts identical\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand is None:
        parser.print_help(sys.stderr)
        return 1
    try:
        if args.subcommand == "replay":
            return cmd_replay(args.manifest, args.verify)
        defaults = DEFAULTS[args.subcommand]
        cfg = _resolve_config(args, defaults)
        # pin timestamps in the resolved config so replay is byte-identical
        if "created_at" in cfg and cfg["created_at"] is None:
            cfg["created_at"] = _now_iso()
        return _execute(args.subcommand, cfg, manifest_only=bool(args.manifest_only))
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except ProtocolError as exc:
        sys.stderr.write(f"protocol/I-O error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"I/O error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
