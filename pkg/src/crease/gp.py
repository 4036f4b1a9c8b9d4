"""Gaussian-process prior over per-innings log ability, and the map from the
sampler's unit cube to model parameters.

Unit-cube layout: ``[C, D, m, sigma, ell, z_1 .. z_I]``. The ``z`` block holds
whitened GP coordinates, coloured by the Cholesky factor of the kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import ndtri

from .model import CareerParams

__all__ = [
    "GPHyper",
    "CovarianceError",
    "N_HYPER",
    "build_covariance",
    "cholesky_factor",
    "log_mu2_from_whitened",
    "prior_transform",
    "gp_log_density",
    "unit_dim",
    "kernel",
    "jittered_cholesky",
    "hyper_from_unit",
]

N_HYPER = 5
U_EPS = 1e-12
MAX_JITTER_RETRIES = 3

LOG_M_CENTRE = math.log(25.0)
LOG_M_SCALE = 0.75
SIGMA_RATE = 10.0
ELL_MAX = 100.0


class CovarianceError(np.linalg.LinAlgError):
    """Kernel matrix could not be factorised even after jitter escalation."""


@dataclass(frozen=True)
class GPHyper:
    m: float
    sigma: float
    ell: float

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"m must be positive, got {self.m}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        # The prior only reaches ell <= ELL_MAX; larger values are allowed for
        # direct use of the kernel.
        if not self.ell > 0:
            raise ValueError(f"ell must be positive, got {self.ell}")


def unit_dim(n_innings: int) -> int:
    return N_HYPER + n_innings


def kernel(ta: np.ndarray, tb: np.ndarray, sigma: float, ell: float) -> np.ndarray:
    """Squared-exponential covariance between two sets of innings indices."""
    diff = ta[:, None] - tb[None, :]
    return sigma**2 * np.exp(-0.5 * (diff / ell) ** 2)


def _base_jitter(sigma: float) -> float:
    return 1e-8 * sigma**2 if sigma > 0 else 1e-12


def jittered_cholesky(k: np.ndarray, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """``(K + jitter I, chol)`` with the jitter raised tenfold on failure."""
    jitter = _base_jitter(sigma)
    eye = np.eye(len(k))
    for _ in range(MAX_JITTER_RETRIES + 1):
        kj = k + jitter * eye
        try:
            return kj, np.linalg.cholesky(kj)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise CovarianceError(
        f"kernel not factorisable (sigma={sigma}, jitter up to {jitter / 10:g})"
    )


def build_covariance(t_indices, h: GPHyper) -> np.ndarray:
    """Squared-exponential kernel over innings indices, with diagonal jitter.

    Raises
    ------
    CovarianceError
        If Cholesky still fails after three tenfold jitter increases.
    """
    t = np.asarray(t_indices, dtype=float)
    if t.ndim != 1 or np.any(np.diff(t) <= 0):
        raise ValueError("innings indices must be strictly increasing")
    kj, _ = jittered_cholesky(kernel(t, t, h.sigma, h.ell), h.sigma)
    return kj


@lru_cache(maxsize=32)
def _cached_factor(n: int, sigma: float, ell: float) -> np.ndarray:
    t = np.arange(1.0, n + 1.0)
    _, chol = jittered_cholesky(kernel(t, t, sigma, ell), sigma)
    chol.setflags(write=False)
    return chol


def cholesky_factor(t_indices, h: GPHyper) -> np.ndarray:
    t = np.asarray(t_indices, dtype=float)
    if t.size and t[0] == 1.0 and np.array_equal(t, np.arange(1.0, t.size + 1.0)):
        return _cached_factor(t.size, float(h.sigma), float(h.ell))
    return np.linalg.cholesky(build_covariance(t, h))


def log_mu2_from_whitened(z, h: GPHyper, t_indices=None) -> np.ndarray:
    """Colour standard-normal ``z`` into ``log mu2`` with mean ``log m``."""
    z = np.asarray(z, dtype=float)
    if h.sigma == 0:
        return np.full(z.shape, math.log(h.m))
    if t_indices is None:
        t_indices = np.arange(1, z.size + 1)
    return math.log(h.m) + cholesky_factor(t_indices, h) @ z


def _clamp(u: np.ndarray) -> np.ndarray:
    return np.clip(u, U_EPS, 1.0 - U_EPS)


def hyper_from_unit(u) -> tuple[float, float, GPHyper]:
    """``(C, D, GPHyper)`` from the first five unit-cube coordinates."""
    u1, u2, u3, u4, u5 = _clamp(np.asarray(u[:N_HYPER], dtype=float))
    c = -math.expm1(0.5 * math.log1p(-u1))
    d = -math.expm1(0.2 * math.log1p(-u2))
    m = math.exp(LOG_M_CENTRE + LOG_M_SCALE * float(ndtri(u3)))
    sigma = -math.log1p(-u4) / SIGMA_RATE
    ell = ELL_MAX * u5
    return c, d, GPHyper(m, sigma, ell)


def prior_transform(u, n_innings: int) -> tuple[CareerParams, GPHyper]:
    """Map a point of the unit cube to career parameters and GP hyperparameters.

    C ~ Beta(1, 2), D ~ Beta(1, 5), m ~ Lognormal(log 25, 0.75^2),
    sigma ~ Exponential(rate 10), ell ~ Uniform(0, 100), and
    ``log mu2 = log m + chol(K) z`` with ``z_t = Phi^-1(u_{5+t})``.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (unit_dim(n_innings),):
        raise ValueError(f"expected {unit_dim(n_innings)} coordinates, got {u.shape}")
    c, d, h = hyper_from_unit(u)
    z = ndtri(_clamp(u[N_HYPER:]))
    log_mu2 = log_mu2_from_whitened(z, h)
    return CareerParams(c, d, np.exp(log_mu2)), h


def gp_log_density(log_mu2, h: GPHyper, t_indices=None) -> float:
    """Multivariate normal log-density of ``log mu2`` under the GP prior."""
    x = np.asarray(log_mu2, dtype=float)
    if t_indices is None:
        t_indices = np.arange(1, x.size + 1)
    if len(t_indices) != x.size:
        raise ValueError("log_mu2 and t_indices differ in length")
    chol = cholesky_factor(t_indices, h)
    resid = solve_triangular(chol, x - math.log(h.m), lower=True)
    log_det = 2.0 * np.log(np.diag(chol)).sum()
    return float(-0.5 * (resid @ resid + log_det + x.size * math.log(2 * math.pi)))
