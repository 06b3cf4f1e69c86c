"""Synthetic corpus laboratory for measurement-error propagation.

A latent monthly uncertainty path drives article labels; classification
noise is injected at chosen false-positive/false-negative rates; both
the noisy and the true labels then flow through the real index pipeline
so the gap between the two indices is exactly the measurement error a
real classifier would induce.

The latent share is s_t = clip(baseline + U_t, 0.001, 0.999) with U_t a
zero-mean AR(1). That is a declared modeling choice: it keeps the index
error additive in spirit while making the process generative.

Randomness is keyed, not sequential: each (outlet, month) cell and the
error pass get their own generator derived from (seed, stream, keys), so
results never depend on evaluation order.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .corpus import Corpus, Document
from .errors import ValidationError
from .index import IndexSeries, build_index, correlate, month_range


@dataclass(frozen=True)
class SimConfig:
    months: int
    outlets: int
    articles_mean: float
    articles_dispersion: float = 0.0  # 0 -> Poisson counts; >0 -> negative binomial
    persistence: float = 0.0  # AR(1) coefficient of the latent path
    innovation_scale: float = 0.0
    baseline_share: float = 0.1
    start_month: str = "2000-01"
    seed: int = 0
    fpr: float = 0.0
    fnr: float = 0.0
    score_mode: bool = False  # emit noisy probabilities instead of flipped labels
    score_noise: float = 0.0

    def __post_init__(self):
        if self.months < 2:
            raise ValidationError("need at least 2 months")
        if self.outlets < 1:
            raise ValidationError("need at least 1 outlet")
        if self.articles_mean < 1:
            raise ValidationError("articles_mean must be >= 1")
        if self.articles_dispersion < 0:
            raise ValidationError("articles_dispersion must be >= 0")
        if not 0.0 <= self.persistence < 1.0:
            raise ValidationError("persistence must be in [0, 1)")
        if self.innovation_scale < 0:
            raise ValidationError("innovation_scale must be >= 0")
        if not 0.0 < self.baseline_share < 1.0:
            raise ValidationError("baseline_share must be in (0, 1)")
        for name in ("fpr", "fnr"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1]")
        if self.score_noise < 0:
            raise ValidationError("score_noise must be >= 0")

    def month_list(self) -> list[str]:
        y, m = int(self.start_month[:4]), int(self.start_month[5:7])
        total = (y * 12 + m - 1) + self.months - 1
        end = f"{total // 12:04d}-{total % 12 + 1:02d}"
        return month_range(self.start_month, end)

    def to_json(self) -> dict:
        return {
            "months": self.months,
            "outlets": self.outlets,
            "articles_mean": self.articles_mean,
            "articles_dispersion": self.articles_dispersion,
            "persistence": self.persistence,
            "innovation_scale": self.innovation_scale,
            "baseline_share": self.baseline_share,
            "start_month": self.start_month,
            "seed": self.seed,
            "fpr": self.fpr,
            "fnr": self.fnr,
            "score_mode": self.score_mode,
            "score_noise": self.score_noise,
        }

    @classmethod
    def from_config(cls, raw: Mapping) -> "SimConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"unknown simulation config keys: {sorted(unknown)}")
        return cls(**raw)


@dataclass
class SimCorpus:
    corpus: Corpus
    latent_share: dict[str, float]  # month -> s_t
    latent_u: dict[str, float]  # month -> U_t
    gold: dict[str, int] = field(default_factory=dict)


def simulate_corpus(config: SimConfig) -> SimCorpus:
    """Draw a synthetic corpus whose gold labels follow the latent path.

    Bodies are placeholders; the corpus exists to exercise the pipeline,
    not to look like news.
    """
    months = config.month_list()
    path_rng = np.random.default_rng([config.seed, 0])
    u = 0.0
    latent_u: dict[str, float] = {}
    latent_share: dict[str, float] = {}
    for month in months:
        u = config.persistence * u + config.innovation_scale * path_rng.standard_normal()
        latent_u[month] = u
        latent_share[month] = float(np.clip(config.baseline_share + u, 0.001, 0.999))

    docs: list[Document] = []
    gold: dict[str, int] = {}
    for i in range(config.outlets):
        outlet = f"outlet-{i:03d}"
        for t, month in enumerate(months):
            cell_rng = np.random.default_rng([config.seed, 1, i, t])
            count = _draw_count(cell_rng, config.articles_mean, config.articles_dispersion)
            labels = (cell_rng.random(count) < latent_share[month]).astype(int)
            date = dt.date(int(month[:4]), int(month[5:7]), 1)
            for k in range(count):
                doc_id = f"sim-{i:03d}-{month}-{k:05d}"
                docs.append(
                    Document(
                        id=doc_id,
                        outlet=outlet,
                        date=date,
                        body=f"synthetic article {doc_id}",
                        gold_epu=int(labels[k]),
                    )
                )
                gold[doc_id] = int(labels[k])
    return SimCorpus(corpus=Corpus(docs), latent_share=latent_share, latent_u=latent_u, gold=gold)


def _draw_count(rng: np.random.Generator, mean: float, dispersion: float) -> int:
    if dispersion == 0.0:
        draw = rng.poisson(mean)
    else:
        # variance = mean + dispersion * mean^2
        r = 1.0 / dispersion
        p = r / (r + mean)
        draw = rng.negative_binomial(r, p)
    return max(1, int(draw))


def inject_errors(
    gold: Mapping[str, int], fpr: float, fnr: float, seed: int = 0
) -> dict[str, int]:
    """Flip each positive with probability fnr, each negative with fpr."""
    for name, rate in (("fpr", fpr), ("fnr", fnr)):
        if not 0.0 <= rate <= 1.0:
            raise ValidationError(f"{name} must be in [0, 1]")
    ids = sorted(gold)
    rng = np.random.default_rng([seed, 2])
    u = rng.random(len(ids))
    out = {}
    for k, doc_id in enumerate(ids):
        y = gold[doc_id]
        flip = u[k] < (fnr if y == 1 else fpr)
        out[doc_id] = 1 - y if flip else y
    return out


def inject_score_noise(
    gold: Mapping[str, int],
    fpr: float,
    fnr: float,
    noise: float = 0.0,
    seed: int = 0,
) -> dict[str, float]:
    """Emit synthetic probabilities around the error-rate means.

    p = gold*(1-fnr) + (1-gold)*fpr plus Gaussian noise, clipped to [0,1].
    """
    ids = sorted(gold)
    rng = np.random.default_rng([seed, 3])
    eps = rng.standard_normal(len(ids)) * noise
    out = {}
    for k, doc_id in enumerate(ids):
        y = gold[doc_id]
        base = (1.0 - fnr) if y == 1 else fpr
        out[doc_id] = float(np.clip(base + eps[k], 0.0, 1.0))
    return out


@dataclass(frozen=True)
class DecompositionReport:
    corr_pred_gold: float | None
    corr_pred_latent: float | None
    errors: dict[str, float]  # month -> pred index minus gold index
    mean_error: float
    sd_error: float
    max_abs_error: float

    def to_json(self) -> dict:
        return {
            "corr_pred_gold": self.corr_pred_gold,
            "corr_pred_latent": self.corr_pred_latent,
            "errors": dict(sorted(self.errors.items())),
            "mean_error": self.mean_error,
            "sd_error": self.sd_error,
            "max_abs_error": self.max_abs_error,
        }


def error_decomposition(
    pred_index: IndexSeries,
    gold_index: IndexSeries,
    latent_share: Mapping[str, float],
) -> DecompositionReport:
    """Compare a noisy-classifier index to the gold-label index."""
    if set(pred_index.values) != set(gold_index.values):
        raise ValidationError("prediction and gold indices cover different months")
    months = pred_index.months()
    errors = {m: pred_index.values[m] - gold_index.values[m] for m in months}
    corr_pg = correlate(pred_index, gold_index).r
    latent_series = IndexSeries(values={m: float(latent_share[m]) for m in latent_share})
    corr_pl = correlate(pred_index, latent_series).r

    values = [errors[m] for m in months]
    n = len(values)
    mean = math.fsum(values) / n
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else 0.0
    return DecompositionReport(
        corr_pred_gold=corr_pg,
        corr_pred_latent=corr_pl,
        errors=errors,
        mean_error=mean,
        sd_error=sd,
        max_abs_error=max(abs(v) for v in values),
    )


@dataclass
class SimRun:
    config: SimConfig
    sim: SimCorpus
    predicted: dict[str, float] | dict[str, int]
    gold_index: IndexSeries
    pred_index: IndexSeries
    decomposition: DecompositionReport


def run_simulation(config: SimConfig, t0: list[str] | None = None) -> SimRun:
    """One full lab pass: simulate, inject errors, build both indices.

    T0 defaults to the entire simulated window. Label mode builds binary
    indices for gold and prediction; score mode builds the prediction
    index probabilistically from the noisy scores.
    """
    sim = simulate_corpus(config)
    months = config.month_list()
    t0 = t0 or months
    gold_values = {i: float(v) for i, v in sim.gold.items()}
    gold_index = build_index(
        sim.corpus, gold_values, mode="binary", t0=t0, task="sim", model_id="gold"
    )
    if config.score_mode:
        predicted: dict = inject_score_noise(
            sim.gold, config.fpr, config.fnr, config.score_noise, config.seed
        )
        pred_index = build_index(
            sim.corpus, predicted, mode="probabilistic", t0=t0, task="sim",
            model_id=f"noisy-scores(fpr={config.fpr},fnr={config.fnr})",
        )
    else:
        predicted = inject_errors(sim.gold, config.fpr, config.fnr, config.seed)
        pred_index = build_index(
            sim.corpus, {i: float(v) for i, v in predicted.items()}, mode="binary", t0=t0,
            task="sim", model_id=f"noisy-labels(fpr={config.fpr},fnr={config.fnr})",
        )
    decomposition = error_decomposition(pred_index, gold_index, sim.latent_share)
    return SimRun(
        config=config,
        sim=sim,
        predicted=predicted,
        gold_index=gold_index,
        pred_index=pred_index,
        decomposition=decomposition,
    )
