"""Glue between the career likelihood, the GP prior and the sampler."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from . import gp
from .model import Career, CareerLikelihood, CareerParams
from .sampler import NSConfig, NSResult, run

__all__ = ["CareerModel", "PosteriorDraws", "fit_career", "median_summary"]


class CareerModel:
    """Log-likelihood of a career as a function of unit-cube coordinates."""

    def __init__(self, career: Career):
        self.career = career
        self.n_innings = len(career)
        self.dim = gp.unit_dim(self.n_innings)
        self._loglike = CareerLikelihood(career)

    def unpack(self, u) -> tuple[float, float, gp.GPHyper, np.ndarray]:
        """``(c, d, hyper, log_mu2)`` for one cube point."""
        u = np.asarray(u, dtype=float)
        c, d, h = gp.hyper_from_unit(u)
        z = ndtri(np.clip(u[gp.N_HYPER:], gp.U_EPS, 1.0 - gp.U_EPS))
        return c, d, h, gp.log_mu2_from_whitened(z, h)

    def params(self, u) -> tuple[CareerParams, gp.GPHyper]:
        return gp.prior_transform(u, self.n_innings)

    def __call__(self, u) -> float:
        c, d, _, log_mu2 = self.unpack(u)
        return self._loglike(c, d, np.exp(log_mu2))


@dataclass(frozen=True)
class PosteriorDraws:
    """Equally weighted posterior draws unpacked into model quantities.

    Arrays are indexed by draw along the first axis; ``log_mu2`` has one
    column per innings.
    """

    c: np.ndarray
    d: np.ndarray
    m: np.ndarray
    sigma: np.ndarray
    ell: np.ndarray
    log_mu2: np.ndarray
    z: np.ndarray

    def __len__(self):
        return len(self.c)

    @property
    def n_innings(self) -> int:
        return self.log_mu2.shape[1]

    @classmethod
    def from_unit(cls, u: np.ndarray, n_innings: int) -> "PosteriorDraws":
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if u.shape[1] != gp.unit_dim(n_innings):
            raise ValueError(f"expected {gp.unit_dim(n_innings)} columns, got {u.shape[1]}")
        cols = {k: np.empty(len(u)) for k in ("c", "d", "m", "sigma", "ell")}
        log_mu2 = np.empty((len(u), n_innings))
        z = ndtri(np.clip(u[:, gp.N_HYPER:], gp.U_EPS, 1.0 - gp.U_EPS))
        for i, row in enumerate(u):
            c, d, h = gp.hyper_from_unit(row)
            cols["c"][i], cols["d"][i] = c, d
            cols["m"][i], cols["sigma"][i], cols["ell"][i] = h.m, h.sigma, h.ell
            log_mu2[i] = gp.log_mu2_from_whitened(z[i], h)
        return cls(log_mu2=log_mu2, z=z, **cols)

    def hyper(self, i: int) -> gp.GPHyper:
        return gp.GPHyper(float(self.m[i]), float(self.sigma[i]), float(self.ell[i]))

    def subset(self, idx) -> "PosteriorDraws":
        return PosteriorDraws(
            self.c[idx], self.d[idx], self.m[idx], self.sigma[idx],
            self.ell[idx], self.log_mu2[idx], self.z[idx],
        )


def fit_career(career: Career, cfg: NSConfig, progress=None, progress_every: int = 100) -> NSResult:
    model = CareerModel(career)
    return run(model, model.dim, cfg, progress=progress, progress_every=progress_every)


def median_summary(draws: PosteriorDraws) -> dict[str, float]:
    return {
        name: float(np.median(getattr(draws, name)))
        for name in ("c", "d", "m", "sigma", "ell")
    }

