"""Regression with additive box weights and Gaussian noise, and its posterior sampler.

Each box k carries a weight ``omega_k``; a point's mean is the sum of the
weights of the boxes covering it. Priors: boxes from the bounding process,
``omega_k ~ N(mu_omega, eps2_omega)`` and ``sigma2 ~ IG(1, 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .moves import accept, log_add_ratio, log_delete_ratio, propose_birth, propose_geometry
from .partition import Domain, Partition, domain_from_points
from .sampler import RbpParams, sample_partition


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RegressionHyper:
    tau: float = 1.0
    lam: float = 2.0
    mu_omega: float = 0.0
    eps2_omega: float = 1.0
    p0: float = 0.5
    n_birth_death: int = 1

    def __post_init__(self):
        if not 0 < self.p0 < 1:
            raise ConfigError(f"p0 must lie in (0, 1), got {self.p0}")
        if not self.eps2_omega > 0:
            raise ConfigError("eps2_omega must be positive")
        RbpParams(self.tau, self.lam)


@dataclass(frozen=True)
class RegressionData:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float).ravel()
        if X.ndim == 1:
            X = X.reshape(len(y), -1) if len(y) else X.reshape(0, 1)
        if X.shape[0] != y.shape[0]:
            raise ConfigError("features and labels differ in length")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def N(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class RegressionState:
    partition: Partition
    weights: np.ndarray
    sigma2: float
    hyper: RegressionHyper

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if len(w) != self.partition.K:
            raise ConfigError("one weight per box required")
        if not self.sigma2 > 0:
            raise ConfigError("sigma2 must be positive")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def K(self) -> int:
        return self.partition.K

    def to_dict(self) -> dict:
        d = self.partition.to_dict()
        d["weights"] = self.weights.tolist()
        d["sigma2"] = float(self.sigma2)
        return d


def _evolve(state: RegressionState, **changes) -> RegressionState:
    """``replace`` without re-validation, for updates that keep the invariants by construction."""
    new = object.__new__(RegressionState)
    new.__dict__.update(state.__dict__)
    for name, v in changes.items():
        if isinstance(v, np.ndarray):
            v.flags.writeable = False
        new.__dict__[name] = v
    return new


def predict_means(state: RegressionState, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if state.K == 0:
        return np.zeros(len(X))
    return state.partition.coverage(X) @ state.weights


def predict_mean(state: RegressionState, x) -> float:
    return float(predict_means(state, np.reshape(x, (1, -1)))[0])


def _gauss_ll(y, mean, sigma2) -> float:
    r = y - mean
    return -0.5 * len(y) * math.log(2 * math.pi * sigma2) - 0.5 * float(r @ r) / sigma2


def log_likelihood(state: RegressionState, data: RegressionData) -> float:
    if data.N == 0:
        return 0.0
    return _gauss_ll(data.labels, predict_means(state, data.features), state.sigma2)


def gibbs_sigma2(state: RegressionState, data: RegressionData, rng) -> float:
    """Draw sigma2 from ``IG(1 + N/2, 1 + SSR/2)``."""
    if data.N:
        r = data.labels - predict_means(state, data.features)
        ssr = float(r @ r)
    else:
        ssr = 0.0
    shape = 1.0 + data.N / 2.0
    scale = 1.0 + ssr / 2.0
    return scale / rng.gamma(shape)


def omega_conditional(state: RegressionState, data: RegressionData, k: int) -> tuple[float, float]:
    """Mean and variance of the Gaussian full conditional of ``omega_k``."""
    h = state.hyper
    if data.N:
        cov = state.partition.coverage(data.features)
        inside = cov[:, k]
        others = cov[inside] @ state.weights - state.weights[k]
        resid_sum = float(np.sum(data.labels[inside] - others))
        n_k = int(inside.sum())
    else:
        resid_sum, n_k = 0.0, 0
    var = 1.0 / (1.0 / h.eps2_omega + n_k / state.sigma2)
    mean = var * (h.mu_omega / h.eps2_omega + resid_sum / state.sigma2)
    return mean, var


def gibbs_omega(state: RegressionState, data: RegressionData, k: int, rng) -> float:
    mean, var = omega_conditional(state, data, k)
    return mean + math.sqrt(var) * rng.standard_normal()


def birth_death_step(state: RegressionState, data: RegressionData, rng, add_bias: float = 1.0) -> RegressionState:
    """One add-or-delete proposal for a box.

    ``add_bias`` multiplies the add acceptance ratio; it exists only so the
    correctness tests can check that a wrong ratio is detected.
    """
    h = state.hyper
    part = state.partition
    y, X = data.labels, data.features
    pred = predict_means(state, X) if data.N else None

    if rng.random() < h.p0:
        new_part, k = propose_birth(part, rng)
        w_new = h.mu_omega + math.sqrt(h.eps2_omega) * rng.standard_normal()
        weights = np.insert(state.weights, k, w_new)
        log_alpha = log_add_ratio(part, h.p0) + math.log(add_bias)
        if data.N:
            new_pred = pred + w_new * new_part.coverage(X)[:, k]
            log_alpha += _gauss_ll(y, new_pred, state.sigma2) - _gauss_ll(y, pred, state.sigma2)
    else:
        if part.K == 0:
            return state
        k = int(rng.integers(part.K))
        new_part = part.remove(k)
        weights = np.delete(state.weights, k)
        log_alpha = log_delete_ratio(part, h.p0)
        if data.N:
            new_pred = pred - state.weights[k] * part.coverage(X)[:, k]
            log_alpha += _gauss_ll(y, new_pred, state.sigma2) - _gauss_ll(y, pred, state.sigma2)

    if accept(log_alpha, rng):
        return _evolve(state, partition=new_part, weights=weights)
    return state


def mh_geometry_step(state: RegressionState, data: RegressionData, k: int, d: int, rng) -> RegressionState:
    """Redraw box k's interval on dimension d from the prior; accept on likelihood ratio."""
    new_part = propose_geometry(state.partition, k, d, rng)
    proposed = _evolve(state, partition=new_part)
    log_alpha = log_likelihood(proposed, data) - log_likelihood(state, data) if data.N else 0.0
    return proposed if accept(log_alpha, rng) else state


def regression_kernel(state: RegressionState, data: RegressionData, rng, add_bias: float = 1.0) -> RegressionState:
    """One full sweep: birth/death, geometry of every (k, d), every weight, then sigma2."""
    for _ in range(state.hyper.n_birth_death):
        state = birth_death_step(state, data, rng, add_bias=add_bias)
    D = state.partition.domain.dim
    for k in range(state.K):
        for d in range(D):
            state = mh_geometry_step(state, data, k, d, rng)
    for k in range(state.K):
        w = state.weights.copy()
        w[k] = gibbs_omega(state, data, k, rng)
        state = _evolve(state, weights=w)
    return _evolve(state, sigma2=gibbs_sigma2(state, data, rng))


def sample_prior_state(domain: Domain, hyper: RegressionHyper, rng) -> RegressionState:
    part = sample_partition(RbpParams(hyper.tau, hyper.lam), domain, rng)
    w = hyper.mu_omega + math.sqrt(hyper.eps2_omega) * rng.standard_normal(part.K)
    sigma2 = 1.0 / rng.gamma(1.0)
    return RegressionState(part, w, sigma2, hyper)


def simulate_labels(state: RegressionState, features, rng) -> np.ndarray:
    mean = predict_means(state, features)
    return mean + math.sqrt(state.sigma2) * rng.standard_normal(len(mean))


def run_regression_mcmc(
    data: RegressionData,
    hyper: RegressionHyper,
    iters: int,
    rng,
    domain: Optional[Domain] = None,
    margin: float = 0.0,
    init: Optional[RegressionState] = None,
    burn_in: float = 0.5,
    thin: int = 1,
) -> list[RegressionState]:
    """Run one chain and return the retained states.

    ``data.features`` are raw coordinates; the fitting domain defaults to
    their minimum bounding box (widened by ``margin``). The first
    ``burn_in`` fraction of iterations is discarded and every ``thin``-th
    of the rest is kept.
    """
    if data.N == 0:
        raise ConfigError("cannot fit regression to empty data")
    if iters < 1:
        raise ConfigError("iters must be at least 1")
    if not 0 <= burn_in < 1 or thin < 1:
        raise ConfigError("burn_in must lie in [0, 1) and thin be positive")
    if domain is None:
        domain = init.partition.domain if init is not None else domain_from_points(data.features, margin)
    local = RegressionData(np.clip(domain.to_local(data.features), 0.0, domain.lengths), data.labels)
    state = init if init is not None else sample_prior_state(domain, hyper, rng)

    first_kept = int(math.floor(burn_in * iters))
    samples = []
    for it in range(iters):
        state = regression_kernel(state, local, rng)
        if it >= first_kept and (it - first_kept) % thin == 0:
            samples.append(state)
    return samples


def posterior_predict(samples: list[RegressionState], X) -> np.ndarray:
    """Posterior mean prediction at raw points ``X`` (clipped into the domain)."""
    if not samples:
        raise ConfigError("no posterior samples")
    domain = samples[0].partition.domain
    local = np.clip(domain.to_local(np.atleast_2d(X)), 0.0, domain.lengths)
    return np.mean([predict_means(s, local) for s in samples], axis=0)


def rmae(y, yhat) -> float:
    return float(np.mean(np.abs(np.asarray(y) - np.asarray(yhat))))
