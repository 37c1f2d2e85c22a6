"""Survey-weighted estimation of (mu, sigma_a, sigma_eps) from a sample.

Three routes share one pseudo-posterior target:

* a Gibbs sampler over the augmented state (mu, tau_a, tau_eps, a_1..a_m)
  whose full conditionals are conjugate because the unit likelihood is
  exponentiated by the marginal weight ``w_jk`` and the random-effect
  prior by the cluster weight ``w_k``;
* adaptive random-walk Metropolis on (mu, log tau_a, log tau_eps) using
  the likelihood with every cluster effect marginalized out analytically;
* simplex (Nelder-Mead) maximization of that integrated posterior.

Precisions ``tau`` are carried internally; reported scales are
``sigma = tau**-0.5`` applied per draw.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import ChainDivergenceError, ConfigError
from .rng import substream

log = logging.getLogger(__name__)

_TAU_MIN, _TAU_MAX = 1e-12, 1e12
PARAM_NAMES = ("b0", "sigma_a", "sigma_eps")


@dataclass(frozen=True)
class PriorConfig:
    """Inverse-gamma hyperparameters on the variances tau_a^-1, tau_eps^-1.

    Equivalently Gamma(alpha, rate=beta) priors on the precisions.  The
    intercept carries an improper flat prior.
    """

    alpha1: float = 0.1
    beta1: float = 0.1
    alpha2: float = 0.1
    beta2: float = 0.1

    def __post_init__(self):
        if min(self.alpha1, self.beta1, self.alpha2, self.beta2) <= 0:
            raise ConfigError("prior hyperparameters must be positive")


@dataclass(frozen=True)
class ParamState:
    mu: float
    tau_a: float
    tau_eps: float
    a: np.ndarray | None = None

    def __post_init__(self):
        if not (self.tau_a > 0 and self.tau_eps > 0):
            raise ConfigError("precisions must be positive")

    @property
    def sigma_a(self) -> float:
        return self.tau_a ** -0.5

    @property
    def sigma_eps(self) -> float:
        return self.tau_eps ** -0.5


@dataclass(frozen=True)
class ChainConfig:
    n_iterations: int = 4000
    n_burnin: int = 2000
    thin: int = 1
    seed: int = 0
    init: ParamState | str = "auto"

    def __post_init__(self):
        if not 0 <= self.n_burnin < self.n_iterations:
            raise ConfigError("need 0 <= n_burnin < n_iterations")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")


@dataclass(frozen=True)
class DrawsMatrix:
    """Post-burn-in, thinned chain states with summary accessors."""

    mu: np.ndarray
    tau_a: np.ndarray
    tau_eps: np.ndarray
    a: np.ndarray | None = None          # (n_draws, m) for augmented chains
    acceptance_rate: float | None = None
    iterations: np.ndarray | None = None

    @property
    def n_draws(self) -> int:
        return len(self.mu)

    @property
    def sigma_a(self) -> np.ndarray:
        return self.tau_a ** -0.5

    @property
    def sigma_eps(self) -> np.ndarray:
        return self.tau_eps ** -0.5

    def values(self, param: str) -> np.ndarray:
        if param in ("b0", "mu"):
            return self.mu
        if param == "sigma_a":
            return self.sigma_a
        if param == "sigma_eps":
            return self.sigma_eps
        raise KeyError(param)

    def mean(self, param: str) -> float:
        return float(self.values(param).mean())

    def sd(self, param: str) -> float:
        return float(self.values(param).std(ddof=1))

    def quantiles(self, param: str, qs=(0.05, 0.5, 0.95)) -> np.ndarray:
        return np.quantile(self.values(param), qs)

    def point_estimates(self) -> dict:
        return {p: self.mean(p) for p in PARAM_NAMES}

    def state(self, i: int) -> ParamState:
        return ParamState(mu=float(self.mu[i]), tau_a=float(self.tau_a[i]),
                          tau_eps=float(self.tau_eps[i]),
                          a=None if self.a is None else self.a[i])

    def to_csv(self, path, include_effects: bool = False) -> None:
        header = ["iteration", "mu", "sigma_a", "sigma_eps"]
        n_eff = self.a.shape[1] if (include_effects and self.a is not None) else 0
        header += [f"a_{k + 1}" for k in range(n_eff)]
        its = self.iterations if self.iterations is not None else np.arange(self.n_draws)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.n_draws):
                row = [int(its[i]), repr(float(self.mu[i])),
                       repr(float(self.sigma_a[i])), repr(float(self.sigma_eps[i]))]
                row += [repr(float(v)) for v in (self.a[i][:n_eff] if n_eff else ())]
                writer.writerow(row)

    def summary(self, mode: str = "", converged: bool = True) -> dict:
        qs = {p: dict(zip(("q05", "q50", "q95"),
                          (float(v) for v in self.quantiles(p)))) for p in PARAM_NAMES}
        return {
            "mode": mode,
            "point_estimates": self.point_estimates(),
            "posterior_sd": {p: self.sd(p) for p in PARAM_NAMES},
            "quantiles": qs,
            "acceptance_rate": self.acceptance_rate,
            "converged": converged,
        }


@dataclass(frozen=True)
class _SuffStats:
    """Per-cluster weighted sums; everything the three routes consume."""

    w_k: np.ndarray    # cluster weights
    sw: np.ndarray     # sum_j w_jk
    swy: np.ndarray    # sum_j w_jk y_jk
    swyy: np.ndarray   # sum_j w_jk y_jk^2
    n_k: np.ndarray    # realized units per cluster

    @property
    def m(self) -> int:
        return len(self.w_k)


def _suffstats(sample, weights) -> _SuffStats:
    w_jk, y = weights.w_jk, sample.y_s
    m = len(y)
    return _SuffStats(
        w_k=np.asarray(weights.w_k, dtype=float),
        sw=np.array([w_jk[k].sum() for k in range(m)]),
        swy=np.array([(w_jk[k] * y[k]).sum() for k in range(m)]),
        swyy=np.array([(w_jk[k] * y[k] ** 2).sum() for k in range(m)]),
        n_k=np.array([len(y[k]) for k in range(m)]),
    )


# ---------------------------------------------------------------------------
# Full conditional pseudo-posterior distributions (augmented model)
# ---------------------------------------------------------------------------

def fc_a_k(k: int, mu: float, tau_a: float, tau_eps: float, sample, weights):
    """Normal full conditional for cluster effect a_k: returns (h_k, phi_k).

    phi_k = tau_eps * sum_j w_jk + tau_a * w_k,
    h_k = tau_eps * sum_j w_jk (y_jk - mu) / phi_k.
    """
    w = weights.w_jk[k]
    y = sample.y_s[k]
    phi = tau_eps * w.sum() + tau_a * weights.w_k[k]
    e = tau_eps * float(np.sum(w * (y - mu)))
    return e / phi, float(phi)


def fc_mu(a: np.ndarray, tau_eps: float, sample, weights):
    """Normal full conditional for the intercept: returns (mean, precision).

    mean = sum w_jk (y_jk - a_k) / sum w_jk, precision = tau_eps * sum w_jk.
    """
    num = den = 0.0
    for k in range(len(sample.y_s)):
        w = weights.w_jk[k]
        num += float(np.sum(w * (sample.y_s[k] - a[k])))
        den += float(w.sum())
    return num / den, tau_eps * den


def fc_tau_a(a: np.ndarray, w_k: np.ndarray, prior: PriorConfig):
    """Inverse-gamma full conditional for tau_a^-1: returns (shape, scale).

    Sampling tau_a itself is a Gamma(shape, rate=scale) draw.
    """
    return 0.5 * float(np.sum(w_k)) + prior.alpha1, \
        0.5 * float(np.sum(w_k * np.asarray(a) ** 2)) + prior.beta1


def fc_tau_eps(mu: float, a: np.ndarray, sample, weights, prior: PriorConfig):
    """Inverse-gamma full conditional for tau_eps^-1: returns (shape, scale)."""
    sw = ssr = 0.0
    for k in range(len(sample.y_s)):
        w = weights.w_jk[k]
        r = sample.y_s[k] - mu - a[k]
        sw += float(w.sum())
        ssr += float(np.sum(w * r ** 2))
    return 0.5 * sw + prior.alpha2, 0.5 * ssr + prior.beta2


# ---------------------------------------------------------------------------
# Joint densities
# ---------------------------------------------------------------------------

def _gamma_logpdf(tau: float, alpha: float, beta: float) -> float:
    # Gamma(alpha, rate=beta) density in the precision; equals the
    # IG(alpha, beta) prior on the variance after change of variables.
    return alpha * math.log(beta) - math.lgamma(alpha) + (alpha - 1.0) * math.log(tau) - beta * tau


def log_priors(tau_a: float, tau_eps: float, prior: PriorConfig) -> float:
    """Log prior density at (tau_a, tau_eps); the flat mu prior adds nothing."""
    if tau_a <= 0 or tau_eps <= 0:
        raise ValueError("precisions must be positive")
    return _gamma_logpdf(tau_a, prior.alpha1, prior.beta1) + \
        _gamma_logpdf(tau_eps, prior.alpha2, prior.beta2)


def augmented_logpseudolikelihood(state: ParamState, sample, weights) -> float:
    """Weighted log pseudo-likelihood of the augmented model.

    sum_jk w_jk log N(y_jk | mu + a_k, tau_eps^-1)
    + sum_k w_k log N(a_k | 0, tau_a^-1).
    """
    a = state.a
    if a is None or len(a) != len(sample.y_s):
        raise ValueError("state must carry one cluster effect per sampled cluster")
    mu, tau_a, tau_eps = state.mu, state.tau_a, state.tau_eps
    ll = 0.0
    for k in range(len(sample.y_s)):
        w = weights.w_jk[k]
        r = sample.y_s[k] - mu - a[k]
        ll += float(np.sum(w * (0.5 * math.log(tau_eps) - 0.5 * math.log(2 * math.pi)
                                - 0.5 * tau_eps * r ** 2)))
    w_k = np.asarray(weights.w_k, dtype=float)
    ll += float(np.sum(w_k * (0.5 * math.log(tau_a) - 0.5 * math.log(2 * math.pi)
                              - 0.5 * tau_a * np.asarray(a) ** 2)))
    return ll


def augmented_logpseudoposterior(state: ParamState, sample, weights,
                                 prior: PriorConfig) -> float:
    """Augmented log pseudo-likelihood plus log priors (a density in the
    precisions; each full conditional is proportional to this joint along
    its own coordinate)."""
    if state.tau_a <= 0 or state.tau_eps <= 0:
        raise ValueError("precisions must be positive")
    return augmented_logpseudolikelihood(state, sample, weights) + \
        log_priors(state.tau_a, state.tau_eps, prior)


# ---------------------------------------------------------------------------
# Integrated likelihood route
# ---------------------------------------------------------------------------

def _integrated_loglik_stats(mu: float, tau_a: float, tau_eps: float,
                             stats: _SuffStats) -> float:
    # The 2-pi power carries the weighted exponents (sw + w_k - 1)/2 so the
    # value equals the exact integral of the weighted augmented integrand,
    # not just the integral up to a theta-free constant.
    if tau_a <= 0 or tau_eps <= 0:
        raise ValueError("precisions must be positive")
    phi = tau_eps * stats.sw + tau_a * stats.w_k
    h = tau_eps * (stats.swy - mu * stats.sw) / phi
    sw_res = stats.swyy - 2.0 * mu * stats.swy + mu ** 2 * stats.sw
    ll = (0.5 * phi * h ** 2 - 0.5 * np.log(phi)
          + 0.5 * stats.w_k * math.log(tau_a) + 0.5 * stats.sw * math.log(tau_eps)
          - 0.5 * (stats.sw + stats.w_k - 1.0) * math.log(2 * math.pi)
          - 0.5 * tau_eps * sw_res)
    return float(ll.sum())


def integrated_loglik(theta, sample, weights) -> float:
    """Log pseudo-likelihood with every a_k marginalized analytically.

    ``theta`` is (mu, tau_a, tau_eps) or a ParamState.  Per cluster the
    exponentiated value equals the integral over a_k of the weighted
    augmented integrand; the closed form is the reciprocal of a normal
    density at h_k times weighted normal kernels in tau_a and tau_eps.
    """
    if isinstance(theta, ParamState):
        mu, tau_a, tau_eps = theta.mu, theta.tau_a, theta.tau_eps
    else:
        mu, tau_a, tau_eps = theta
    return _integrated_loglik_stats(float(mu), float(tau_a), float(tau_eps),
                                    _suffstats(sample, weights))


def integrated_logposterior(theta, sample, weights, prior: PriorConfig) -> float:
    """integrated_loglik plus log priors; the MAP objective."""
    if isinstance(theta, ParamState):
        tau_a, tau_eps = theta.tau_a, theta.tau_eps
    else:
        tau_a, tau_eps = theta[1], theta[2]
    return integrated_loglik(theta, sample, weights) + log_priors(tau_a, tau_eps, prior)


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

def _auto_init(stats: _SuffStats) -> tuple[float, float, float]:
    """Moment-based start: weighted mean, inverse weighted within-cluster
    residual variance, inverse variance of cluster means (floored at 1e-4)."""
    mu0 = float(stats.swy.sum() / stats.sw.sum())
    ybar = stats.swy / stats.sw
    wss = float(np.sum(stats.swyy - stats.sw * ybar ** 2))
    var_eps = max(wss / stats.sw.sum(), 1e-8)
    var_a = max(float(np.var(ybar)), 1e-4)
    return mu0, 1.0 / var_a, 1.0 / var_eps


def _resolve_init(chain: ChainConfig, stats: _SuffStats) -> tuple[float, float, float]:
    if isinstance(chain.init, ParamState):
        return chain.init.mu, chain.init.tau_a, chain.init.tau_eps
    if chain.init == "auto":
        return _auto_init(stats)
    raise ConfigError(f"unknown chain init: {chain.init!r}")


def _clamp_tau(tau: float, what: str, it: int, warned: set) -> float:
    if not math.isfinite(tau):
        raise ChainDivergenceError(it, f"{what} non-finite at iteration {it}")
    if tau < _TAU_MIN or tau > _TAU_MAX:
        if what not in warned:
            log.warning("%s clamped to [%g, %g] at iteration %d", what, _TAU_MIN, _TAU_MAX, it)
            warned.add(what)
        return min(max(tau, _TAU_MIN), _TAU_MAX)
    return tau


def run_gibbs(sample, weights, prior: PriorConfig, chain: ChainConfig) -> DrawsMatrix:
    """Gibbs scan over (a_1..a_m | ...), (mu | ...), (tau_a | ...), (tau_eps | ...).

    The per-iteration updates are the vectorized counterparts of the
    ``fc_*`` functions.  Deterministic given ``chain.seed``; raises
    ChainDivergenceError (with the iteration index) on a non-finite state.
    """
    stats = _suffstats(sample, weights)
    rng = substream(chain.seed)
    mu, tau_a, tau_eps = _resolve_init(chain, stats)
    m = stats.m
    sw_tot = float(stats.sw.sum())
    swy_tot = float(stats.swy.sum())
    w_k_tot = float(stats.w_k.sum())
    warned: set = set()

    kept = []
    for it in range(chain.n_iterations):
        phi = tau_eps * stats.sw + tau_a * stats.w_k
        h = tau_eps * (stats.swy - mu * stats.sw) / phi
        a = h + rng.standard_normal(m) / np.sqrt(phi)

        mean_mu = (swy_tot - float(np.sum(a * stats.sw))) / sw_tot
        mu = mean_mu + rng.standard_normal() / math.sqrt(tau_eps * sw_tot)

        shape1 = 0.5 * w_k_tot + prior.alpha1
        scale1 = 0.5 * float(np.sum(stats.w_k * a ** 2)) + prior.beta1
        tau_a = _clamp_tau(rng.gamma(shape1, 1.0 / scale1), "tau_a", it, warned)

        loc = mu + a
        ssr = float(np.sum(stats.swyy - 2.0 * loc * stats.swy + loc ** 2 * stats.sw))
        shape2 = 0.5 * sw_tot + prior.alpha2
        scale2 = 0.5 * ssr + prior.beta2
        tau_eps = _clamp_tau(rng.gamma(shape2, 1.0 / scale2), "tau_eps", it, warned)

        if not (math.isfinite(mu) and np.isfinite(a).all()):
            raise ChainDivergenceError(it)
        if it >= chain.n_burnin and (it - chain.n_burnin) % chain.thin == 0:
            kept.append((it, mu, tau_a, tau_eps, a.copy()))

    its, mus, tas, tes, a_draws = zip(*kept)
    return DrawsMatrix(mu=np.array(mus), tau_a=np.array(tas), tau_eps=np.array(tes),
                       a=np.array(a_draws), iterations=np.array(its))


def run_integrated_mcmc(sample, weights, prior: PriorConfig, chain: ChainConfig) -> DrawsMatrix:
    """Adaptive random-walk Metropolis on x = (mu, log tau_a, log tau_eps).

    The target is integrated_loglik + log priors + the log-Jacobian of the
    log transforms.  Per-coordinate proposal scales track the running chain
    standard deviations and a global scale adapts toward 0.234 acceptance;
    adaptation freezes after burn-in, over which the acceptance rate is
    recorded.
    """
    stats = _suffstats(sample, weights)
    rng = substream(chain.seed)
    mu0, ta0, te0 = _resolve_init(chain, stats)
    x = np.array([mu0, math.log(ta0), math.log(te0)])

    def logpost(v: np.ndarray) -> float:
        mu, lta, lte = v
        if abs(lta) > 600 or abs(lte) > 600:
            return -math.inf
        tau_a, tau_eps = math.exp(lta), math.exp(lte)
        ll = _integrated_loglik_stats(mu, tau_a, tau_eps, stats)
        lp = (prior.alpha1 * lta - prior.beta1 * tau_a
              + prior.alpha2 * lte - prior.beta2 * tau_eps)
        return ll + lp

    lp = logpost(x)
    if not math.isfinite(lp):
        raise ChainDivergenceError(0, "non-finite log posterior at initialization")

    base_sd = np.array([1.0 / math.sqrt(te0 * stats.sw.sum()),
                        math.sqrt(2.0 / stats.m), math.sqrt(2.0 / stats.n_k.sum())])
    base_sd = np.maximum(base_sd, 1e-3)
    log_scale = math.log(2.38 / math.sqrt(3.0))
    run_mean = x.copy()
    run_m2 = np.zeros(3)
    accepted = proposals = 0

    kept = []
    for it in range(chain.n_iterations):
        adapting = it < chain.n_burnin
        step = math.exp(log_scale) * base_sd
        prop = x + step * rng.standard_normal(3)
        lp_prop = logpost(prop)
        if math.isnan(lp_prop):
            raise ChainDivergenceError(it, f"NaN log posterior at iteration {it}")
        alpha = min(1.0, math.exp(min(0.0, lp_prop - lp)))
        accept = rng.uniform() < alpha
        if accept:
            x, lp = prop, lp_prop
        if adapting:
            log_scale += (it + 1) ** -0.6 * (alpha - 0.234)
            log_scale = min(max(log_scale, -10.0), 5.0)
            delta = x - run_mean
            run_mean += delta / (it + 1)
            run_m2 += delta * (x - run_mean)
            if it >= 200:
                base_sd = np.maximum(np.sqrt(run_m2 / it), 1e-6)
        else:
            proposals += 1
            accepted += int(accept)
        if it >= chain.n_burnin and (it - chain.n_burnin) % chain.thin == 0:
            kept.append((it, x[0], math.exp(x[1]), math.exp(x[2])))

    its, mus, tas, tes = zip(*kept)
    return DrawsMatrix(mu=np.array(mus), tau_a=np.array(tas), tau_eps=np.array(tes),
                       a=None, acceptance_rate=accepted / max(proposals, 1),
                       iterations=np.array(its))


def map_estimate(sample, weights, prior: PriorConfig, init: ParamState | str = "auto",
                 seed: int = 0, n_starts: int = 3, max_evals: int = 2000):
    """Nelder-Mead maximization of the integrated log posterior.

    Runs ``n_starts`` jittered starts in (mu, log tau_a, log tau_eps) and
    returns ``(theta, loglik, converged)`` for the best: the MAP state,
    the integrated log-likelihood there, and whether the winning start met
    the 1e-9 objective tolerance within ``max_evals`` evaluations.
    """
    stats = _suffstats(sample, weights)
    if isinstance(init, ParamState):
        mu0, ta0, te0 = init.mu, init.tau_a, init.tau_eps
    else:
        mu0, ta0, te0 = _auto_init(stats)
    x0 = np.array([mu0, math.log(ta0), math.log(te0)])
    rng = substream(seed, 7)

    def neg_obj(v: np.ndarray) -> float:
        mu, lta, lte = v
        if abs(lta) > 600 or abs(lte) > 600:
            return math.inf
        tau_a, tau_eps = math.exp(lta), math.exp(lte)
        ll = _integrated_loglik_stats(mu, tau_a, tau_eps, stats)
        return -(ll + _gamma_logpdf(tau_a, prior.alpha1, prior.beta1)
                 + _gamma_logpdf(tau_eps, prior.alpha2, prior.beta2))

    best = None
    converged = False
    for s in range(n_starts):
        start = x0 if s == 0 else x0 + rng.normal(0.0, [0.25, 0.5, 0.5])
        res = minimize(neg_obj, start, method="Nelder-Mead",
                       options={"fatol": 1e-9, "xatol": 1e-8, "maxfev": max_evals,
                                "maxiter": max_evals})
        if best is None or res.fun < best.fun:
            best = res
            converged = bool(res.success)
    mu, lta, lte = best.x
    theta = ParamState(mu=float(mu), tau_a=float(math.exp(lta)), tau_eps=float(math.exp(lte)))
    ll = _integrated_loglik_stats(theta.mu, theta.tau_a, theta.tau_eps, stats)
    return theta, float(ll), converged


def map_objective(theta: ParamState, sample, weights, prior: PriorConfig) -> float:
    """The quantity map_estimate maximizes (integrated log posterior)."""
    return integrated_logposterior(theta, sample, weights, prior)


def map_summary(theta: ParamState, loglik: float, converged: bool, mode: str = "") -> dict:
    """Estimator-summary JSON shape for the MAP route."""
    return {
        "mode": mode,
        "point_estimates": {"b0": theta.mu, "sigma_a": theta.sigma_a,
                            "sigma_eps": theta.sigma_eps},
        "posterior_sd": None,
        "quantiles": None,
        "acceptance_rate": None,
        "loglik": loglik,
        "converged": converged,
    }
