"""Acceptance suite: one test per release criterion, with a printed
PASS/FAIL line each (run with `pytest tests/test_acceptance.py -v -s`).

Every expected value here comes from an independent route: naive
per-document scans, dense threshold grids, exact hand algebra, or
seeded ensembles, never from the code paths under test.
"""

import itertools
import json
import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from epukit.bow import Dictionary, MatchOptions, Matcher, VariantSpec, load_builtin_dictionary
from epukit.cli import main
from epukit.corpus import Corpus, split_random
from epukit.evaluation import confusion, metrics_from_counts
from epukit.index import build_index
from epukit.scores import binarize
from epukit.simlab import SimConfig, run_simulation
from epukit.thresholds import ThresholdRule, optimize, optimize_per_group, roc

from conftest import make_doc
from test_bow import _random_texts, oracle_hits
from test_index import FIXTURE, T0, corpus_and_values


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE FAIL: {name}")
        raise
    print(f"ACCEPTANCE PASS: {name}")


def naive_metric_scan(pred: dict, gold: dict) -> tuple:
    tp = fp = tn = fn = 0
    for i in gold:
        if pred[i] == 1 and gold[i] == 1:
            tp += 1
        elif pred[i] == 1:
            fp += 1
        elif gold[i] == 1:
            fn += 1
        else:
            tn += 1
    total = tp + fp + tn + fn
    return (
        (tp + tn) / total,
        tp / (tp + fp) if tp + fp else None,
        tp / (tp + fn) if tp + fn else None,
        2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else None,
    )


def test_metric_oracle_1000_instances():
    """metrics . confusion == brute force on 1,000 seeded instances, < 5 s."""
    with criterion("metric oracle (1,000 instances, exact, <5s)"):
        rng = np.random.default_rng(1001)
        start = time.time()
        for _ in range(1000):
            n = int(rng.integers(1, 201))
            ids = [f"d{i}" for i in range(n)]
            gold = {i: int(rng.random() < 0.5) for i in ids}
            pred = {i: int(rng.random() < 0.5) for i in ids}
            report = metrics_from_counts(confusion(pred, gold))
            acc, prec, rec, f1 = naive_metric_scan(pred, gold)
            assert report.accuracy == acc
            assert report.precision == prec
            assert report.recall == rec
            assert report.f1 == f1
        elapsed = time.time() - start
        assert elapsed < 5.0, f"took {elapsed:.2f}s"


def _grid_objective(scores: np.ndarray, gold: np.ndarray, grid: np.ndarray, kind: str):
    pos = np.sort(scores[gold == 1])
    neg = np.sort(scores[gold == 0])
    p, n = len(pos), len(neg)
    tp = p - np.searchsorted(pos, grid, side="left")
    fp = n - np.searchsorted(neg, grid, side="left")
    if kind == "youden":
        values = tp / p - fp / n
    else:
        fn = p - tp
        values = 2 * tp / (2 * tp + fp + fn)
    k = int(np.argmax(values))  # first index = lowest tau among optima
    return float(grid[k]), float(values[k])


def test_threshold_oracle_1000_instances():
    """Youden and F1Max equal a 1e-4-grid exhaustive scan, < 10 s."""
    with criterion("threshold oracle (1,000 instances vs 1e-4 grid, <10s)"):
        rng = np.random.default_rng(2002)
        grid = np.arange(0.0, 1.0 + 1e-4, 1e-4)
        start = time.time()
        for _ in range(1000):
            n = int(rng.integers(4, 51))
            # scores on a 1e-3 lattice so the 1e-4 grid isolates every candidate
            scores_arr = rng.integers(0, 1001, size=n) / 1000.0
            gold_arr = (rng.random(n) < 0.5).astype(int)
            if gold_arr.sum() in (0, n):
                gold_arr[0] = 1 - gold_arr[0]
            ids = [f"d{i}" for i in range(n)]
            scores = {i: float(s) for i, s in zip(ids, scores_arr)}
            gold = {i: int(g) for i, g in zip(ids, gold_arr)}
            for kind, rule in (("youden", ThresholdRule.youden()), ("f1", ThresholdRule.f1max())):
                result = optimize(scores, gold, rule, split="validation")
                tau_grid, value_grid = _grid_objective(scores_arr, gold_arr, grid, kind)
                assert result.objective == value_grid, (kind, result.objective, value_grid)
                # candidate-equivalence: identical binarization
                assert np.array_equal(scores_arr >= result.tau, scores_arr >= tau_grid)
        elapsed = time.time() - start
        assert elapsed < 10.0, f"took {elapsed:.2f}s"


def test_target_metric_closest_to_085():
    """|metric(tau*) - 0.85| minimal among all candidates, 200 instances."""
    with criterion("target-metric rule (200 instances, exhaustive check)"):
        rng = np.random.default_rng(3003)
        for _ in range(200):
            n = int(rng.integers(6, 80))
            ids = [f"d{i}" for i in range(n)]
            scores = {i: float(rng.integers(0, 101)) / 100 for i in ids}
            gold = {i: int(rng.random() < 0.45) for i in ids}
            positives = sum(gold.values())
            if positives in (0, n):
                gold[ids[0]] = 1 - gold[ids[0]]
            metric = ("recall", "precision")[int(rng.integers(0, 2))]
            result = optimize(
                scores, gold, ThresholdRule.target_metric(metric, 0.85), split="validation"
            )
            curve = roc(scores, gold)
            achieved = abs(result.metrics[metric] - 0.85)
            for pt in curve.points:
                if metric == "recall":
                    value = pt.tp / curve.p
                else:
                    if pt.tp + pt.fp == 0:
                        continue
                    value = pt.tp / (pt.tp + pt.fp)
                assert achieved <= abs(value - 0.85) + 1e-15


def test_index_hand_oracle():
    """Published 2x3 fixture: X, sigma, EPU to 1e-9; mean-100 every mode."""
    with criterion("index hand-oracle (1e-9 relative)"):
        for mode in ("binary", "probabilistic"):
            part = FIXTURE[mode]
            corpus, values = corpus_and_values(part["articles"])
            series = build_index(corpus, values, mode=mode, t0=T0)
            for outlet, sigma in part["expected_sigma"].items():
                assert series.meta["sigma"][outlet] == pytest.approx(sigma, rel=1e-9)
            for month, expected in part["expected_epu"].items():
                assert series.values[month] == pytest.approx(expected, rel=1e-9)
            assert series.mean_over(T0) == pytest.approx(100.0, rel=1e-9)
        # closed forms for the binary fixture: sigma_A=1/4, sigma_B=sqrt(3)/6,
        # EPU = (150 - 50*sqrt(3), 50*sqrt(3), 150)
        corpus, values = corpus_and_values(FIXTURE["binary"]["articles"])
        series = build_index(corpus, values, mode="binary", t0=T0)
        s3 = math.sqrt(3.0)
        assert series.values["2020-01"] == pytest.approx(150 - 50 * s3, rel=1e-9)
        assert series.values["2020-02"] == pytest.approx(50 * s3, rel=1e-9)
        assert series.values["2020-03"] == pytest.approx(150.0, rel=1e-9)


def _panel(seed: int, outlets: int = 4, months: int = 12, per_cell: int = 10):
    rng = np.random.default_rng(seed)
    articles = {
        f"o{i}": {f"2021-{m:02d}": list(rng.random(per_cell)) for m in range(1, months + 1)}
        for i in range(outlets)
    }
    t0 = [f"2021-{m:02d}" for m in range(1, months + 1)]
    corpus, values = corpus_and_values(articles)
    return corpus, values, t0


def test_invariance_suite():
    """Scale invariance, mode agreement on {0,1}, thread-count determinism."""
    with criterion("invariance suite (scale, mode agreement, 5-run determinism)"):
        # (a) per-outlet scaling leaves the index unchanged
        corpus, values, t0 = _panel(41)
        scaled = {i: (v * 0.2 if i.startswith("o2-") else v) for i, v in values.items()}
        base = build_index(corpus, values, mode="probabilistic", t0=t0)
        after = build_index(corpus, scaled, mode="probabilistic", t0=t0)
        for month in base.values:
            assert after.values[month] == pytest.approx(base.values[month], rel=1e-9)

        # (b) binary and probabilistic constructions coincide on 0/1 scores
        corpus01, values01, t001 = _panel(43)
        values01 = {i: float(v < 0.3) for i, v in values01.items()}
        binary = build_index(corpus01, values01, mode="binary", t0=t001)
        prob = build_index(corpus01, values01, mode="probabilistic", t0=t001)
        assert binary.values == prob.values

        # (c) byte-identical CSV across 5 runs with different worker counts
        texts = set()
        for workers in (1, 2, 3, 4, 8):
            series = build_index(corpus, values, mode="probabilistic", t0=t0, workers=workers)
            texts.add(series.to_csv_text())
        assert len(texts) == 1


def test_bow_correctness():
    """Automaton vs naive oracle on all option combos; monotonicity; BBD fixtures."""
    with criterion("BOW correctness (oracle equality, monotonicity, BBD fixtures)"):
        rng = np.random.default_rng(5005)
        texts = _random_texts(rng, 200)
        groups = (
            ("economic", ("economy", "economic")),
            ("policy", ("Congress", "White House", "Federal Reserve", "deficit")),
            ("uncertainty", ("uncertain", "uncertainty")),
        )
        for case_fold, partial, strip in itertools.product([False, True], repeat=3):
            options = MatchOptions(case_fold=case_fold, partial_match=partial, strip_punct=strip)
            d = Dictionary(name="combo", groups=groups, options=options)
            matcher = Matcher(d)
            for text in texts:
                assert matcher.group_hits(text) == oracle_hits(text, d)

        bbd = load_builtin_dictionary("bbd-base")
        base_labels = [Matcher(bbd).classify_text(t) for t in texts]
        extras = ["market", "rain", "house", "deficits", "reserve", "senate"]
        for k in range(100):
            group = bbd.group_names[k % 3]
            term = extras[k % len(extras)]
            variant = VariantSpec(name=f"v{k}", add={group: [term]}).apply(bbd)
            labels = [Matcher(variant).classify_text(t) for t in texts]
            assert all(after or not before for before, after in zip(base_labels, labels))

        # the three canonical BBD fixtures
        matcher = Matcher(bbd)
        assert matcher.classify_text("The economy worries Congress amid uncertainty.")
        assert not matcher.classify_text("The economy is uncertain.")  # no policy term
        partial_bbd = Matcher(
            Dictionary(name="bbd-partial", groups=bbd.groups,
                       options=MatchOptions(partial_match=True))
        )
        assert "uncertainty" not in matcher.group_hits("economic uncertainties in Congress")
        assert "uncertainty" in partial_bbd.group_hits("economic uncertainties in Congress")


def test_split_counts_published():
    """Random split of 10,393 docs at (0.7,0.2,0.1) -> {7275, 2078, 1040}."""
    with criterion("split counts {7275, 2078, 1040}"):
        corpus = Corpus(make_doc(f"d{i:05d}", body=f"b{i}") for i in range(10393))
        for seed in (0, 7, 123):
            split = split_random(corpus, (0.7, 0.2, 0.1), seed=seed)
            assert split.counts() == {"train": 7275, "validation": 2078, "test": 1040}


def test_simlab_pattern():
    """Desk-scale error propagation: corr strictly decreasing in FNR, < 60 s."""
    with criterion("simlab pattern (FNR grid, 20 seeds, strict decrease, <60s)"):
        start = time.time()

        def config(fnr: float, seed: int, fpr: float = 0.05) -> SimConfig:
            return SimConfig(months=60, outlets=5, articles_mean=200.0,
                             persistence=0.7, innovation_scale=0.03,
                             baseline_share=0.12, seed=seed, fpr=fpr, fnr=fnr)

        means = []
        for fnr in (0.0, 0.2, 0.4):
            cs = [
                run_simulation(config(fnr, seed)).decomposition.corr_pred_gold
                for seed in range(20)
            ]
            means.append(float(np.mean(cs)))
        assert means[0] > means[1] > means[2], means

        zero = run_simulation(config(0.0, 0, fpr=0.0))
        assert all(e == 0.0 for e in zero.decomposition.errors.values())
        assert zero.decomposition.corr_pred_gold == pytest.approx(1.0, abs=1e-12)
        elapsed = time.time() - start
        assert elapsed < 60.0, f"took {elapsed:.1f}s"


def test_per_group_thresholds_transform():
    """Monotone score transform across groups -> identical binarized labels."""
    with criterion("per-group thresholds (monotone-transform label equality)"):
        rng = np.random.default_rng(7007)
        for trial in range(20):
            n = 60
            base_scores = {f"d{i}": float(rng.integers(0, 1001)) / 1000 for i in range(n)}
            gold_a = {i: int(rng.random() < 0.5) for i in base_scores}
            if sum(gold_a.values()) in (0, n):
                gold_a["d0"] = 1 - gold_a["d0"]
            # group B: strictly monotone transform (halved scores), same labels
            scores = dict(base_scores)
            gold = dict(gold_a)
            groups = {i: "A" for i in base_scores}
            for i, s in base_scores.items():
                scores[f"B{i}"] = s / 2
                gold[f"B{i}"] = gold_a[i]
                groups[f"B{i}"] = "B"
            per_group = optimize_per_group(
                scores, gold, groups, ThresholdRule.f1max(), split="validation"
            )
            labels_a = binarize(base_scores, per_group.results["A"].tau)
            labels_b = binarize(
                {i: scores[f"B{i}"] for i in base_scores}, per_group.results["B"].tau
            )
            assert labels_a == labels_b


def test_manifest_replay_byte_identical(tmp_path):
    """Replaying a pipeline from its manifest reproduces artifacts exactly."""
    with criterion("manifest replay (byte-identical artifacts)"):
        rng = np.random.default_rng(8008)
        docs, entries = [], {}
        for o in range(3):
            for m in range(1, 13):
                for k in range(5):
                    doc_id = f"r{o}{m:02d}{k}"
                    docs.append(make_doc(doc_id, outlet=f"o{o}", date=f"2022-{m:02d}-05",
                                         gold=int(rng.random() < 0.3), body=f"text {doc_id}"))
                    entries[doc_id] = float(rng.random())
        corpus_path = tmp_path / "corpus.jsonl"
        corpus_path.write_text(Corpus(docs).to_jsonl(), encoding="utf-8")
        scores_path = tmp_path / "scores.csv"
        from epukit.ioutil import write_csv
        from epukit.scores import ScoreSet

        write_csv(scores_path, ScoreSet.CSV_HEADER,
                  [(i, "epu", "m", repr(p)) for i, p in sorted(entries.items())])

        pipelines = [
            ["build-index", "--corpus", str(corpus_path), "--scores", str(scores_path),
             "--mode", "probabilistic", "--t0-start", "2022-01", "--t0-end", "2022-12",
             "--plot", "--out", str(tmp_path / "idx")],
            ["evaluate", "--corpus", str(corpus_path), "--scores", str(scores_path),
             "--tau", "0.5", "--bootstrap", "100", "--seed", "1",
             "--out", str(tmp_path / "ev")],
            ["simulate", "--months", "12", "--outlets", "2", "--articles-mean", "30",
             "--innovation-scale", "0.02", "--fnr", "0.1", "--seed", "3",
             "--out", str(tmp_path / "sim")],
        ]
        for args in pipelines:
            out_dir = Path(args[args.index("--out") + 1])
            assert main(args) == 0
            manifest_path = out_dir / "manifest.json"
            recorded = json.loads(manifest_path.read_text())
            snapshots = {
                e["path"]: Path(e["path"]).read_bytes() for e in recorded["outputs"]
            }
            for path in snapshots:
                Path(path).unlink()
            assert main(["replay", "--manifest", str(manifest_path), "--verify"]) == 0
            for path, before in snapshots.items():
                assert Path(path).read_bytes() == before, path
