import numpy as np
import pytest

from epukit.errors import ValidationError
from epukit.scores import binarize
from epukit.thresholds import ThresholdRule, optimize, optimize_per_group, roc


def brute_counts(scores: dict, gold: dict, tau: float) -> tuple[int, int]:
    tp = sum(1 for i in scores if scores[i] >= tau and gold[i] == 1)
    fp = sum(1 for i in scores if scores[i] >= tau and gold[i] == 0)
    return tp, fp


def random_instance(rng, n: int, lattice: int = 1000) -> tuple[dict, dict]:
    """Scores on a 1/lattice grid with both gold classes present."""
    while True:
        ids = [f"d{i}" for i in range(n)]
        scores = {i: int(rng.integers(0, lattice + 1)) / lattice for i in ids}
        gold = {i: int(rng.random() < 0.5) for i in ids}
        pos = sum(gold.values())
        if 0 < pos < n:
            return scores, gold


class TestRoc:
    def test_perfect_separation_has_ideal_point(self):
        scores = {"a": 0.9, "b": 0.8, "c": 0.2, "d": 0.1}
        gold = {"a": 1, "b": 1, "c": 0, "d": 0}
        curve = roc(scores, gold)
        assert any(pt.tpr == 1.0 and pt.fpr == 0.0 for pt in curve.points)

    def test_constant_scores_two_endpoints(self):
        scores = {"a": 0.5, "b": 0.5, "c": 0.5}
        gold = {"a": 1, "b": 0, "c": 1}
        curve = roc(scores, gold)
        assert len(curve.points) == 2
        assert (curve.points[0].tpr, curve.points[0].fpr) == (1.0, 1.0)
        assert (curve.points[-1].tpr, curve.points[-1].fpr) == (0.0, 0.0)

    def test_endpoints_and_monotonicity(self):
        rng = np.random.default_rng(3)
        scores, gold = random_instance(rng, 40)
        curve = roc(scores, gold)
        assert curve.points[0].tpr == 1.0 and curve.points[0].fpr == 1.0
        assert curve.points[-1].tpr == 0.0 and curve.points[-1].fpr == 0.0
        for earlier, later in zip(curve.points, curve.points[1:]):
            assert earlier.tau < later.tau
            assert later.tpr <= earlier.tpr and later.fpr <= earlier.fpr

    def test_counts_match_bruteforce_on_random_pairs(self):
        rng = np.random.default_rng(17)
        scores, gold = random_instance(rng, 50)
        curve = roc(scores, gold)
        for pt in curve.points:
            tp, fp = brute_counts(scores, gold, pt.tau)
            assert (pt.tp, pt.fp) == (tp, fp)
            assert pt.tpr == tp / curve.p and pt.fpr == fp / curve.n

    def test_single_class_rejected(self):
        with pytest.raises(ValidationError):
            roc({"a": 0.1, "b": 0.9}, {"a": 1, "b": 1})

    def test_candidate_sufficiency(self):
        # every tau on a dense grid yields counts equal to some candidate's
        rng = np.random.default_rng(23)
        scores, gold = random_instance(rng, 30)
        curve = roc(scores, gold)
        candidate_counts = {(pt.tp, pt.fp) for pt in curve.points}
        for tau in np.linspace(0.0, 1.0, 997):
            assert brute_counts(scores, gold, float(tau)) in candidate_counts


class TestOptimize:
    def test_four_score_fixture_youden(self):
        scores = {"n1": 0.1, "n2": 0.4, "p1": 0.6, "p2": 0.9}
        gold = {"n1": 0, "n2": 0, "p1": 1, "p2": 1}
        result = optimize(scores, gold, ThresholdRule.youden(), split="validation")
        assert result.tau == 0.6
        assert result.objective == 1.0
        assert result.metrics["f1"] == 1.0

    def test_perfect_separation_at_one(self):
        scores = {"p1": 1.0, "p2": 1.0, "n1": 0.0, "n2": 0.0}
        gold = {"p1": 1, "p2": 1, "n1": 0, "n2": 0}
        result = optimize(scores, gold, ThresholdRule.youden(), split="validation")
        assert result.tau == 1.0
        assert result.objective == 1.0
        assert result.metrics["f1"] == 1.0

    def test_lowest_tau_among_ties(self):
        # two candidates reach J = 1 is impossible; craft an F1 tie instead:
        # any tau in {0.3, 0.6} keeps the same confusion? no - use equal scores
        # at distinct values where removing one negative doesn't change F1.
        scores = {"p1": 0.9, "p2": 0.8, "n1": 0.1, "n2": 0.05}
        gold = {"p1": 1, "p2": 1, "n1": 0, "n2": 0}
        # candidates 0.05,0.1,0.8,0.9: J is 0,?,1,0.5 -> optimum only at 0.8
        # for the tie case, make two candidates share the optimum exactly:
        scores2 = {"p1": 0.9, "n1": 0.5, "p2": 0.4, "n2": 0.1}
        gold2 = {"p1": 1, "n1": 0, "p2": 1, "n2": 0}
        # J at 0.1: 0; at 0.4: 1 - 0.5 = 0.5; at 0.5: 0.5 - 0.5 = 0.0; at 0.9: 0.5
        result = optimize(scores2, gold2, ThresholdRule.youden(), split="validation")
        assert result.tau == 0.4  # 0.9 ties at J=0.5; lower tau wins
        result_f1 = optimize(scores, gold, ThresholdRule.f1max(), split="validation")
        assert result_f1.tau == 0.8

    def test_f1max_matches_exhaustive_scan(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            scores, gold = random_instance(rng, 30)
            result = optimize(scores, gold, ThresholdRule.f1max(), split="validation")
            curve = roc(scores, gold)
            best = -1.0
            for pt in curve.points:
                fn = curve.p - pt.tp
                denominator = 2 * pt.tp + pt.fp + fn
                if denominator:
                    best = max(best, 2 * pt.tp / denominator)
            assert result.objective == best

    def test_target_recall_is_closest(self):
        rng = np.random.default_rng(29)
        scores, gold = random_instance(rng, 60)
        result = optimize(
            scores, gold, ThresholdRule.target_metric("recall", 0.85), split="validation"
        )
        curve = roc(scores, gold)
        achieved = abs(result.metrics["recall"] - 0.85)
        for pt in curve.points:
            assert achieved <= abs(pt.tp / curve.p - 0.85) + 1e-15

    def test_target_tie_breaks_on_complement_then_tau(self):
        # recall hits 1.0 at several taus; precision (complement) must decide
        scores = {"p1": 0.9, "p2": 0.7, "n1": 0.5, "n2": 0.2}
        gold = {"p1": 1, "p2": 1, "n1": 0, "n2": 0}
        result = optimize(
            scores, gold, ThresholdRule.target_metric("recall", 1.0), split="validation"
        )
        # taus 0.2, 0.5, 0.7 all give recall 1; precision is 1/2, 2/3, 1
        assert result.tau == 0.7
        assert result.metrics["precision"] == 1.0

    def test_fixed_rule_reports_metrics(self):
        scores = {"a": 0.9, "b": 0.4, "c": 0.2, "d": 0.8}
        gold = {"a": 1, "b": 1, "c": 0, "d": 0}
        result = optimize(scores, gold, ThresholdRule.fixed(0.5), split="test")
        assert result.tau == 0.5
        assert result.counts.tp == 1 and result.counts.fp == 1

    def test_monotone_transform_preserves_labeling(self):
        rng = np.random.default_rng(31)
        for rule in (ThresholdRule.youden(), ThresholdRule.f1max()):
            scores, gold = random_instance(rng, 40)
            transformed = {i: s / 2 + 0.1 for i, s in scores.items()}  # strictly increasing
            base = optimize(scores, gold, rule, split="validation")
            other = optimize(transformed, gold, rule, split="validation")
            assert binarize(scores, base.tau) == binarize(transformed, other.tau)

    def test_youden_nonnegative_at_optimum(self):
        rng = np.random.default_rng(37)
        for _ in range(20):
            scores, gold = random_instance(rng, 25)
            result = optimize(scores, gold, ThresholdRule.youden(), split="validation")
            assert result.objective >= 0.0

    def test_report_schema(self):
        scores = {"a": 0.9, "b": 0.1}
        gold = {"a": 1, "b": 0}
        report = optimize(scores, gold, ThresholdRule.youden(), split="validation").to_report(
            "epu", "model-x"
        )
        assert set(report) == {"task", "model_id", "rule", "split", "tau", "metrics"}
        assert set(report["metrics"]) == {"accuracy", "precision", "recall", "f1", "tpr", "fpr"}

    def test_rule_parsing(self):
        assert ThresholdRule.parse("youden").kind == "youden"
        assert ThresholdRule.parse("recall@0.85").target == 0.85
        assert ThresholdRule.parse("fixed@0.4").tau == 0.4
        with pytest.raises(ValidationError):
            ThresholdRule.parse("argmax")


class TestPerGroup:
    def test_single_group_reduces_to_optimize(self):
        rng = np.random.default_rng(41)
        scores, gold = random_instance(rng, 30)
        groups = {i: "only" for i in scores}
        per_group = optimize_per_group(
            scores, gold, groups, ThresholdRule.youden(), split="validation"
        )
        single = optimize(scores, gold, ThresholdRule.youden(), split="validation")
        assert per_group.results["only"].tau == single.tau
        assert per_group.results["only"].metrics == single.metrics

    def test_shifted_scores_identical_labels(self):
        rng = np.random.default_rng(43)
        scores_a, gold_a = random_instance(rng, 50)
        scores_b = {f"B{i}": s / 2 for i, s in scores_a.items()}
        gold_b = {f"B{i}": y for i, y in gold_a.items()}
        scores = {**scores_a, **scores_b}
        gold = {**gold_a, **gold_b}
        groups = {i: ("B" if i.startswith("B") else "A") for i in scores}
        per_group = optimize_per_group(
            scores, gold, groups, ThresholdRule.f1max(), split="validation"
        )
        labels_a = binarize(scores_a, per_group.results["A"].tau)
        labels_b = binarize(scores_b, per_group.results["B"].tau)
        assert all(labels_b[f"B{i}"] == labels_a[i] for i in scores_a)

    def test_29_language_groups(self):
        rng = np.random.default_rng(47)
        scores: dict = {}
        gold: dict = {}
        groups: dict = {}
        for lang in range(29):
            sub_scores, sub_gold = random_instance(rng, 30)
            for i in sub_scores:
                key = f"L{lang:02d}-{i}"
                scores[key] = sub_scores[i]
                gold[key] = sub_gold[i]
                groups[key] = f"lang{lang:02d}"
        per_group = optimize_per_group(
            scores, gold, groups, ThresholdRule.f1max(), split="validation"
        )
        assert len(per_group.results) == 29
        # each group's threshold is F1-optimal within its own group
        for lang, result in per_group.results.items():
            ids = [i for i, g in groups.items() if g == lang]
            curve = roc({i: scores[i] for i in ids}, {i: gold[i] for i in ids})
            best = max(
                2 * pt.tp / (2 * pt.tp + pt.fp + curve.p - pt.tp)
                for pt in curve.points
                if 2 * pt.tp + pt.fp + curve.p - pt.tp > 0
            )
            assert result.metrics["f1"] == best

    def test_single_class_group_fails_alone(self):
        scores = {"a": 0.9, "b": 0.2, "c": 0.8, "d": 0.3}
        gold = {"a": 1, "b": 0, "c": 1, "d": 1}
        groups = {"a": "g1", "b": "g1", "c": "g2", "d": "g2"}
        per_group = optimize_per_group(
            scores, gold, groups, ThresholdRule.youden(), split="validation", min_group_size=1
        )
        assert "g1" in per_group.results
        assert "g2" in per_group.failed

    def test_small_groups_flagged(self):
        scores = {"a": 0.9, "b": 0.2}
        gold = {"a": 1, "b": 0}
        per_group = optimize_per_group(
            scores, gold, {"a": "g", "b": "g"}, ThresholdRule.youden(),
            split="validation", min_group_size=20,
        )
        assert per_group.small_groups == ["g"]
