"""Checkable statistics behind the consistency conditions.

The balance diagnostic Monte-Carlo estimates the expected within-cluster
weighted residual mean (the quantity that must vanish for the random
effects scale to be estimable); the bounds report gives empirical
analogues of the weight/sampling-fraction bounds; the informativeness
summary pairs population and sample quantiles of the latents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .design import (SampleDraw, TwoStageDesign, WeightSet, inclusion_probs,
                     size_measures, systematic_pps)
from .popgen import Population
from .rng import substream

QUANTS = (0.05, 0.5, 0.95)


@dataclass(frozen=True)
class BalanceReport:
    """Per-cluster weighted residual means, replicate-averaged.

    ``overall_mean`` averages ``per_cluster`` across clusters; ``mc_se``
    treats the per-cluster values as independent draws of the cluster-level
    expectation (clusters are generated and sampled independently), so it
    reflects both population and design noise.
    """

    per_cluster: np.ndarray       # (M,) replicate-averaged weighted residual means
    overall_mean: float
    mc_se: float
    sampling_fraction: np.ndarray  # (M,) f_h = n_k / N_h
    replicate_means: np.ndarray    # (T,) per-replicate cluster averages
    n_replicates: int

    def to_json(self) -> dict:
        return {
            "overall_mean": self.overall_mean,
            "mc_se": self.mc_se,
            "n_replicates": self.n_replicates,
            "n_clusters": int(len(self.per_cluster)),
            "mean_sampling_fraction": float(self.sampling_fraction.mean()),
        }


@dataclass(frozen=True)
class InformativenessSummary:
    """5/50/95% quantiles of cluster effects and noise, population vs sample."""

    design: str
    population_quantiles: dict  # {"a": (q05, q50, q95), "eps": (...)}
    sample_quantiles: dict

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BoundsReport:
    """Empirical versions of the design-bound constants.

    ``cluster_weight_bound`` is max_k w_k * m / M, ``unit_weight_bound`` is
    max over clusters of max_j w_{j|k} * n_k / N_k, ``cluster_fraction`` is
    m / M, flagged when below ``threshold`` (the non-consistency corner
    where the cluster sampling fraction vanishes).
    """

    cluster_weight_bound: float
    unit_weight_bound: float
    cluster_fraction: float
    threshold: float
    flagged: bool

    def to_json(self) -> dict:
        return asdict(self)


def weighted_residual_balance(population: Population, design: TwoStageDesign,
                              n_replicates: int) -> BalanceReport:
    """Monte Carlo estimate of the expected weighted residual mean.

    Within-cluster samples are drawn afresh for *every* population cluster
    (stage order reversed: the cluster stage is irrelevant to the
    statistic), each replicate on its own RNG substream.  The per-cluster
    statistic is sum_j w_{j|h} eps_j / sum_j w_{j|h} with w = 1/pi.
    """
    if n_replicates < 1:
        raise ValueError("n_replicates must be >= 1")
    M = population.M
    pi = [inclusion_probs(size_measures(population, design.unit_kind, cluster=h), design.n_k)
          for h in range(M)]
    eps = population.eps0
    per_cluster = np.zeros(M)
    rep_means = np.zeros(n_replicates)
    for t in range(n_replicates):
        acc = 0.0
        for h in range(M):
            sel = systematic_pps(pi[h], substream(design.seed, 4, t, h))
            w = 1.0 / pi[h][sel]
            stat = float(np.sum(w * eps[h][sel]) / w.sum())
            per_cluster[h] += stat
            acc += stat
        rep_means[t] = acc / M
    per_cluster /= n_replicates
    f_h = design.n_k / np.asarray(population.config.N_h, dtype=float)
    return BalanceReport(
        per_cluster=per_cluster,
        overall_mean=float(per_cluster.mean()),
        mc_se=float(per_cluster.std(ddof=1) / math.sqrt(M)),
        sampling_fraction=f_h,
        replicate_means=rep_means,
        n_replicates=n_replicates,
    )


@dataclass(frozen=True)
class WeightedREAverage:
    """Posterior draws of the weighted random-effect average sum_k w_k a_k / M_hat."""

    values: np.ndarray
    mean: float
    sd: float


def weighted_re_average(draws, weights: WeightSet) -> WeightedREAverage:
    """Per-draw weighted average of cluster effects and its posterior mean/SD.

    Requires an augmented chain (integrated chains carry no effects).
    """
    if draws.a is None:
        raise ValueError("draws carry no cluster effects (integrated-likelihood chain)")
    vals = draws.a @ np.asarray(weights.w_k) / weights.M_hat
    sd = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    return WeightedREAverage(values=vals, mean=float(vals.mean()), sd=sd)


def informativeness_summary(population: Population, sample: SampleDraw,
                            design: str = "") -> InformativenessSummary:
    """Paired population/sample quantiles of a-values and noise values."""
    pop_a = np.quantile(population.a0, QUANTS)
    pop_eps = np.quantile(population.eps_flat(), QUANTS)
    samp_a = np.quantile(population.a0[sample.cluster_ids], QUANTS)
    samp_eps = np.quantile(
        np.concatenate([population.eps0[k][sample.unit_ids[i]]
                        for i, k in enumerate(sample.cluster_ids)]), QUANTS)
    as_tuple = lambda q: tuple(float(v) for v in q)
    return InformativenessSummary(
        design=design,
        population_quantiles={"a": as_tuple(pop_a), "eps": as_tuple(pop_eps)},
        sample_quantiles={"a": as_tuple(samp_a), "eps": as_tuple(samp_eps)},
    )


def informativeness_to_csv(summaries: list[InformativenessSummary], path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["design", "source", "variable", "q05", "q50", "q95"])
        for s in summaries:
            for source, quants in (("population", s.population_quantiles),
                                   ("sample", s.sample_quantiles)):
                for var in ("a", "eps"):
                    writer.writerow([s.design, source, var,
                                     *[repr(q) for q in quants[var]]])


def bounds_report(population: Population, sample: SampleDraw, weights: WeightSet,
                  threshold: float = 0.01) -> BoundsReport:
    """Empirical weight-bound constants and the cluster sampling fraction."""
    M = population.M
    m = sample.m
    wk_bound = float(np.max(weights.w_k) * m / M)
    unit_bound = 0.0
    for i, k in enumerate(sample.cluster_ids):
        N_k = population.config.N_h[k]
        n_k = len(sample.unit_ids[i])
        unit_bound = max(unit_bound, float(np.max(weights.w_j_given_k[i]) * n_k / N_k))
    frac = m / M
    return BoundsReport(cluster_weight_bound=wk_bound, unit_weight_bound=unit_bound,
                        cluster_fraction=frac, threshold=threshold,
                        flagged=frac < threshold)
