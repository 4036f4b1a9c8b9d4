"""Nested sampling over the unit cube with constrained Metropolis exploration.

The engine knows nothing about cricket: it integrates any log-likelihood
defined on ``(0, 1)^dim`` against the uniform prior.

Ties in the likelihood (plateaus) are broken with an auxiliary uniform
coordinate carried by every particle, so the hard constraint is the
lexicographic order on ``(log_like, tiebreak)``. On a continuous likelihood
this never matters; on a flat one it lets the prior mass shrink normally.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "NSConfig",
    "NSResult",
    "SamplerError",
    "DegenerateWeightsError",
    "run",
    "posterior_resample",
    "effective_sample_size",
]

LogLike = Callable[[np.ndarray], float]


class SamplerError(RuntimeError):
    """Raised when constrained exploration stalls."""


class DegenerateWeightsError(ValueError):
    """Posterior weights too concentrated to resample from."""


@dataclass
class NSConfig:
    n_particles: int = 1000
    mcmc_steps: int = 1000
    termination_frac: float = 1e-6
    seed: int = 0
    step_scale: float = 0.02
    target_acceptance: float = 0.35
    # Draw log t ~ log(Beta(n, 1)) instead of the deterministic -1/n.
    stochastic_shrinkage: bool = False
    max_iterations: Optional[int] = None
    max_stalls: int = 10

    def __post_init__(self):
        if self.n_particles < 2:
            raise ValueError("n_particles must be at least 2")
        if self.mcmc_steps < 1:
            raise ValueError("mcmc_steps must be at least 1")
        if not self.termination_frac > 0:
            raise ValueError("termination_frac must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not 0 < self.step_scale <= 1:
            raise ValueError("step_scale must lie in (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class NSResult:
    """Evidence estimate and weighted samples (dead points then final live set).

    ``log_weight`` is normalised so that ``exp(log_weight).sum() == 1``.
    """

    log_z: float
    log_z_err: float
    information: float
    n_iterations: int
    u: np.ndarray = field(repr=False)
    log_like: np.ndarray = field(repr=False)
    log_weight: np.ndarray = field(repr=False)
    acceptance: np.ndarray = field(repr=False)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weight)

    @property
    def samples(self):
        return list(zip(self.u, self.log_like, self.log_weight))

    def summary(self) -> str:
        return (
            f"niter: {self.n_iterations}\n"
            f"nsamples: {len(self.log_like)}\n"
            f"logz: {self.log_z:.4f} +/- {self.log_z_err:.4f}\n"
            f"h: {self.information:.4f}"
        )


def _reflect(x: np.ndarray) -> np.ndarray:
    x = np.mod(x, 2.0)
    return np.where(x > 1.0, 2.0 - x, x)


def _reflect_scalar(x: float) -> float:
    x = x % 2.0
    return 2.0 - x if x > 1.0 else x


def _beats(ll: float, tb: float, ll_star: float, tb_star: float) -> bool:
    return ll > ll_star or (ll == ll_star and tb > tb_star)


def _safe_loglike(model: LogLike, u: np.ndarray) -> float:
    ll = float(model(u))
    return -math.inf if math.isnan(ll) else ll


def _evolve(model, u, tb, ll, ll_star, tb_star, steps, scale, rng):
    dim = u.size
    p_coord = min(1.0, 10.0 / dim)
    mask = rng.random((steps, dim)) < p_coord
    empty = ~mask.any(axis=1)
    if empty.any():
        mask[np.flatnonzero(empty), rng.integers(dim, size=int(empty.sum()))] = True
    kicks = scale * rng.standard_normal((steps, dim + 1))
    kicks[:, :dim] *= mask
    accepted = 0
    for s in range(steps):
        new_u = _reflect(u + kicks[s, :dim])
        new_tb = _reflect_scalar(tb + float(kicks[s, dim]))
        new_ll = _safe_loglike(model, new_u)
        if _beats(new_ll, new_tb, ll_star, tb_star):
            u, tb, ll = new_u, new_tb, new_ll
            accepted += 1
    return u, tb, ll, accepted


def _log_diff(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``log(exp(a) - exp(b))`` for ``a > b``."""
    with np.errstate(divide="ignore"):
        return a + np.log1p(-np.exp(b - a))


def _dead_log_widths(log_x: np.ndarray) -> np.ndarray:
    """Trapezoid weights (in prior mass) of the dead points.

    ``log_x[0] == 0`` is the full prior; ``log_x[k]`` is the mass enclosed by
    dead point ``k``. The first interval takes the height of the first dead
    point, so a constant likelihood integrates exactly.
    """
    n_dead = log_x.size - 1
    out = np.empty(n_dead)
    if n_dead == 1:
        out[0] = _log_diff(log_x[0:1], log_x[1:2])[0]
        return out
    first = np.exp(log_x[0]) - np.exp(log_x[1]) + 0.5 * (np.exp(log_x[1]) - np.exp(log_x[2]))
    out[0] = math.log(first)
    out[1:-1] = _log_diff(log_x[1:-2], log_x[3:]) - math.log(2.0)
    out[-1] = _log_diff(log_x[-2:-1], log_x[-1:])[0] - math.log(2.0)
    return out


def run(
    model: LogLike,
    dim: int,
    cfg: NSConfig,
    progress: Optional[Callable[[dict], None]] = None,
    progress_every: int = 100,
) -> NSResult:
    """Run nested sampling on ``model`` over the unit cube of dimension ``dim``.

    Parameters
    ----------
    model : callable
        Maps a point of ``(0, 1)^dim`` to a finite log-likelihood. It is only
        ever called from the calling thread.
    dim : int
        Dimension of the cube.
    cfg : NSConfig
        Particle count, MCMC steps per replacement, seed etc.
    progress : callable, optional
        Receives ``{"iteration", "log_z", "worst_log_like", "step_scale"}``
        every ``progress_every`` iterations.

    Returns
    -------
    NSResult

    Raises
    ------
    SamplerError
        If ``cfg.max_stalls`` consecutive replacements accept no move.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    n = cfg.n_particles
    rng = np.random.default_rng(cfg.seed)

    live_u = rng.random((n, dim))
    live_tb = rng.random(n)
    live_ll = np.array([_safe_loglike(model, u) for u in live_u])

    dead_u: list[np.ndarray] = []
    dead_ll: list[float] = []
    log_x = [0.0]
    acceptance: list[float] = []

    log_z = -math.inf
    log_frac = math.log(cfg.termination_frac)
    scale = cfg.step_scale
    stalls = 0
    k = 0

    while True:
        if k >= n and live_ll.max() + log_x[-1] < log_frac + log_z:
            break
        if cfg.max_iterations is not None and k >= cfg.max_iterations:
            break
        k += 1

        lowest = live_ll.min()
        ties = np.flatnonzero(live_ll == lowest)
        worst = int(ties[np.argmin(live_tb[ties])]) if ties.size > 1 else int(ties[0])
        ll_star, tb_star = float(live_ll[worst]), float(live_tb[worst])

        if cfg.stochastic_shrinkage:
            step = math.log(rng.random()) / n
        else:
            step = -1.0 / n
        log_x.append(log_x[-1] + step)
        dead_u.append(live_u[worst].copy())
        dead_ll.append(ll_star)

        # Running estimate only; final weights are rebuilt below.
        height = ll_star if k == 1 else float(np.logaddexp(dead_ll[-2], ll_star) - math.log(2))
        if np.isfinite(height):
            log_z = float(np.logaddexp(log_z, height + _log_diff(np.array(log_x[-2]), np.array(log_x[-1]))))

        if progress is not None and k % progress_every == 0:
            progress({"iteration": k, "log_z": log_z, "worst_log_like": ll_star, "step_scale": scale})

        j = int(rng.integers(n - 1))
        if j >= worst:
            j += 1
        u, tb, ll, accepted = _evolve(
            model, live_u[j].copy(), float(live_tb[j]), float(live_ll[j]),
            ll_star, tb_star, cfg.mcmc_steps, scale, rng,
        )
        if accepted and not _beats(ll, tb, ll_star, tb_star):
            raise AssertionError("constrained move accepted below threshold")
        live_u[worst], live_tb[worst], live_ll[worst] = u, tb, ll

        rate = accepted / cfg.mcmc_steps
        acceptance.append(rate)
        stalls = stalls + 1 if accepted == 0 else 0
        if stalls >= cfg.max_stalls:
            raise SamplerError(
                f"no MCMC move accepted for {stalls} consecutive replacements at "
                f"iteration {k} (log L* = {ll_star:.6g}, step scale {scale:.3g}); "
                "the likelihood may have a plateau or the proposal scale collapsed"
            )
        scale = float(np.clip(scale * math.exp(rate - cfg.target_acceptance), 1e-12, 1.0))

    log_x_arr = np.asarray(log_x)
    dead_ll_arr = np.asarray(dead_ll)
    log_w = np.concatenate([
        dead_ll_arr + _dead_log_widths(log_x_arr),
        live_ll + log_x_arr[-1] - math.log(n),
    ])
    all_ll = np.concatenate([dead_ll_arr, live_ll])
    all_u = np.vstack([np.asarray(dead_u).reshape(-1, dim), live_u])

    log_z = float(logsumexp(log_w))
    log_w = log_w - log_z
    log_w -= logsumexp(log_w)
    p = np.exp(log_w)
    finite = p > 0
    info = float(np.sum(p[finite] * all_ll[finite]) - log_z)
    info = max(info, 0.0)

    return NSResult(
        log_z=log_z,
        log_z_err=math.sqrt(info / n),
        information=info,
        n_iterations=k,
        u=all_u,
        log_like=all_ll,
        log_weight=log_w,
        acceptance=np.asarray(acceptance),
    )


def effective_sample_size(log_weight) -> float:
    w = np.exp(np.asarray(log_weight) - logsumexp(log_weight))
    return float(1.0 / np.sum(w**2))


def posterior_resample(result: NSResult, n: int, seed: int, min_ess: float = 2.0) -> np.ndarray:
    """Draw ``n`` equally weighted posterior points by systematic resampling.

    Raises
    ------
    DegenerateWeightsError
        If the effective sample size of the weights is below ``min_ess``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    ess = effective_sample_size(result.log_weight)
    if ess < min_ess:
        raise DegenerateWeightsError(
            f"effective sample size {ess:.3g} < {min_ess}; rerun with more particles"
        )
    w = np.exp(result.log_weight - logsumexp(result.log_weight))
    cdf = np.cumsum(w)
    cdf[-1] = 1.0
    rng = np.random.default_rng(seed)
    positions = (rng.random() + np.arange(n)) / n
    idx = np.searchsorted(cdf, positions, side="right")
    return result.u[np.minimum(idx, len(w) - 1)]
