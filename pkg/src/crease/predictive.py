"""Posterior predictive summaries: nu(t) curves, forecasts and head-to-head
comparisons.

``nu`` is the expected score of a completed innings, ``sum_{x>=1} P(X >= x)``,
evaluated by truncated summation with a geometric tail bound.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from . import gp
from .fit import PosteriorDraws
from .model import AbilityParams, Career, log_score_pmf, log_survival, truncation_cap
from .sampler import NSResult, posterior_resample

__all__ = [
    "NuCurve",
    "Forecast",
    "Comparison",
    "nu_of_params",
    "nu_values",
    "posterior_draws",
    "nu_curve",
    "conditional_log_mu2",
    "extrapolate",
    "pair_outcomes",
    "compare",
]

DEFAULT_LEVEL = 0.68
TAIL_TOL = 1e-12
# Elements per block when evaluating many parameter sets at once.
BLOCK_ELEMENTS = 2_000_000


@dataclass(frozen=True)
class NuCurve:
    t_values: np.ndarray
    median: np.ndarray
    band_low: np.ndarray
    band_high: np.ndarray
    level: float = DEFAULT_LEVEL
    draws: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self):
        return len(self.t_values)


@dataclass(frozen=True)
class Forecast:
    """Predicted nu over the next ``horizon`` innings.

    ``log_mu2`` holds one conditional GP realisation per posterior draw
    (rows) and future innings (columns).
    """

    horizon: int
    curve: NuCurve
    next_innings_nu: float
    log_mu2: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class Comparison:
    player_a: str
    player_b: str
    expected_margin: float
    p_outscore: float
    p_tie: float
    p_reverse: float
    nu_a: float
    nu_b: float


def nu_of_params(p: AbilityParams, tol: float = TAIL_TOL) -> float:
    """Expected score under ``p``; truncation error below ``tol``."""
    cap = truncation_cap(p.mu2, tol)
    return float(np.exp(log_survival(np.arange(1, cap + 1), p)).sum())


def _nu_block(c, d, mu2, tol):
    cap = truncation_cap(float(mu2.max()), tol)
    a = np.arange(cap, dtype=float)
    mu = mu2[:, None] * (1.0 + (c - 1.0)[:, None] * np.exp(-a[None, :] / (d * mu2)[:, None]))
    log_s = np.cumsum(-np.log1p(1.0 / mu), axis=1)
    return np.exp(log_s).sum(axis=1)


def nu_values(c, d, mu2, tol: float = TAIL_TOL, threads: int = 1) -> np.ndarray:
    """Vectorised ``nu`` over broadcastable arrays of ``(c, d, mu2)``.

    Blocks are formed after sorting by ``mu2`` so each uses a tight cap. The
    result does not depend on ``threads``.
    """
    c, d, mu2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (c, d, mu2)))
    shape = mu2.shape
    c, d, mu2 = c.ravel(), d.ravel(), mu2.ravel()
    order = np.argsort(mu2, kind="stable")
    caps = [truncation_cap(float(v), tol) for v in mu2[order]]
    blocks = []
    start = 0
    while start < order.size:
        stop = start + 1
        while stop < order.size and (stop - start + 1) * caps[stop] <= BLOCK_ELEMENTS:
            stop += 1
        blocks.append(order[start:stop])
        start = stop

    def work(idx):
        return _nu_block(c[idx], d[idx], mu2[idx], tol)

    out = np.empty(mu2.size)
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(idx) for idx in blocks]
    for idx, res in zip(blocks, results):
        out[idx] = res
    return out.reshape(shape)


def posterior_draws(result: NSResult, n_innings: int, n: int = 500, seed: int = 0) -> PosteriorDraws:
    return PosteriorDraws.from_unit(posterior_resample(result, n, seed), n_innings)


def _summarise(t_values, values: np.ndarray, level: float, keep: int) -> NuCurve:
    if not 0 < level <= 1:
        raise ValueError("level must lie in (0, 1]")
    lo, mid, hi = np.quantile(values, [(1 - level) / 2, 0.5, (1 + level) / 2], axis=0)
    return NuCurve(
        t_values=np.asarray(t_values),
        median=mid,
        band_low=np.minimum(lo, mid),
        band_high=np.maximum(hi, mid),
        level=level,
        draws=values[:keep].copy() if keep else None,
    )


def nu_curve(
    career: Optional[Career],
    draws: PosteriorDraws,
    level: float = DEFAULT_LEVEL,
    keep: int = 0,
    threads: int = 1,
) -> NuCurve:
    """Pointwise median and central ``level`` band of nu(t) over the draws.

    ``keep`` retains that many per-draw curves for plotting.
    """
    if career is not None and len(career) != draws.n_innings:
        raise ValueError("posterior draws do not match the career length")
    values = nu_values(draws.c[:, None], draws.d[:, None], np.exp(draws.log_mu2), threads=threads)
    return _summarise(np.arange(1, draws.n_innings + 1), values, level, keep)


def conditional_log_mu2(
    log_mu2_obs, m: float, sigma: float, ell: float, horizon: int
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of ``log mu2`` at innings ``I+1..I+horizon``.

    Noise-free GP regression on the observed path, using the same jittered
    kernel as the prior.
    """
    f = np.asarray(log_mu2_obs, dtype=float)
    n_obs = f.size
    t_obs = np.arange(1.0, n_obs + 1.0)
    t_new = np.arange(n_obs + 1.0, n_obs + horizon + 1.0)
    if sigma == 0:
        return np.full(horizon, math.log(m)), np.zeros((horizon, horizon))
    chol = gp.cholesky_factor(t_obs, gp.GPHyper(m, sigma, ell))
    k_cross = gp.kernel(t_obs, t_new, sigma, ell)
    v = solve_triangular(chol, k_cross, lower=True)
    w = solve_triangular(chol, f - math.log(m), lower=True)
    mean = math.log(m) + v.T @ w
    cov = gp.kernel(t_new, t_new, sigma, ell) - v.T @ v
    return mean, 0.5 * (cov + cov.T)


def extrapolate(
    career: Optional[Career],
    draws: PosteriorDraws,
    horizon: int = 20,
    seed: int = 0,
    level: float = DEFAULT_LEVEL,
    keep: int = 0,
    threads: int = 1,
) -> Forecast:
    """Forecast nu over the next ``horizon`` innings.

    Draw ``i`` takes its conditional GP realisation from the generator
    seeded with ``SeedSequence(seed, spawn_key=(i,))``, so results do not
    depend on evaluation order.

    Raises
    ------
    gp.CovarianceError
        If the conditional covariance cannot be factorised.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if career is not None and len(career) != draws.n_innings:
        raise ValueError("posterior draws do not match the career length")
    n_obs = draws.n_innings
    future = np.empty((len(draws), horizon))
    for i in range(len(draws)):
        mean, cov = conditional_log_mu2(
            draws.log_mu2[i], float(draws.m[i]), float(draws.sigma[i]), float(draws.ell[i]), horizon
        )
        if draws.sigma[i] == 0:
            future[i] = mean
            continue
        _, chol = gp.jittered_cholesky(cov, float(draws.sigma[i]))
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        future[i] = mean + chol @ rng.standard_normal(horizon)
    values = nu_values(draws.c[:, None], draws.d[:, None], np.exp(future), threads=threads)
    curve = _summarise(np.arange(n_obs + 1, n_obs + horizon + 1), values, level, keep)
    return Forecast(horizon, curve, float(values[:, 0].mean()), future)


def _mixture(c, d, mu2, cap):
    """Average pmf and survival ``P(X >= x)`` over a set of parameter draws."""
    a = np.arange(cap + 2, dtype=float)
    mu = mu2[:, None] * (1.0 + (c - 1.0)[:, None] * np.exp(-a[None, :] / (d * mu2)[:, None]))
    log_step = -np.log1p(1.0 / mu)
    log_s = np.concatenate([np.zeros((len(mu2), 1)), np.cumsum(log_step, axis=1)], axis=1)
    pmf = np.exp(log_s[:, :-1] - np.log1p(mu))
    return pmf[:, : cap + 1].mean(axis=0), np.exp(log_s[:, : cap + 2]).mean(axis=0)


def pair_outcomes(pa: AbilityParams, pb: AbilityParams, tol: float = TAIL_TOL) -> tuple[float, float, float]:
    """``(P(A > B), P(A == B), P(B > A))`` for one pair of next-innings abilities."""
    cap = truncation_cap(max(pa.mu2, pb.mu2), tol)
    x = np.arange(cap + 1)
    pmf_a, pmf_b = np.exp(log_score_pmf(x, pa)), np.exp(log_score_pmf(x, pb))
    surv_a = np.exp(log_survival(x + 1, pa))
    surv_b = np.exp(log_survival(x + 1, pb))
    return float(pmf_b @ surv_a), float(pmf_a @ pmf_b), float(pmf_a @ surv_b)


def compare(
    forecast_a: Forecast,
    draws_a: PosteriorDraws,
    forecast_b: Forecast,
    draws_b: PosteriorDraws,
    seed: int = 0,
    n_draws: Optional[int] = None,
    names: tuple[str, str] = ("A", "B"),
    tol: float = TAIL_TOL,
) -> Comparison:
    """Next-innings head-to-head between two independently fitted players.

    Every draw of A is paired with every draw of B. Because the outcome
    probabilities are bilinear in the two score distributions, the average
    over all pairs equals the outcome probabilities of the two posterior
    mixture distributions, which is what is computed.

    With ``n_draws`` set, that many draws per player are chosen with
    replacement by a generator seeded with ``seed``; both players use the same
    index stream, so identical inputs give exactly symmetric results.
    """
    def pick(draws, forecast):
        idx = np.arange(len(draws))
        if n_draws is not None:
            idx = np.random.default_rng(seed).integers(len(draws), size=n_draws)
        return draws.c[idx], draws.d[idx], np.exp(forecast.log_mu2[idx, 0])

    ca, da, ma = pick(draws_a, forecast_a)
    cb, db, mb = pick(draws_b, forecast_b)
    cap = truncation_cap(float(max(ma.max(), mb.max())), tol)
    pmf_a, surv_a = _mixture(ca, da, ma, cap)
    pmf_b, surv_b = _mixture(cb, db, mb, cap)
    nu_a = float(nu_values(ca, da, ma, tol).mean())
    nu_b = float(nu_values(cb, db, mb, tol).mean())
    return Comparison(
        player_a=names[0],
        player_b=names[1],
        expected_margin=nu_a - nu_b,
        p_outscore=float(pmf_b @ surv_a[1 : cap + 2]),
        p_tie=float(pmf_a @ pmf_b),
        p_reverse=float(pmf_a @ surv_b[1 : cap + 2]),
        nu_a=nu_a,
        nu_b=nu_b,
    )
