"""Synthetic careers drawn from the generative model.

Used as a known-truth oracle for validation: a GP path of log ability, one
score per innings from the hazard model, and optional not-out censoring.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gp
from .model import AbilityParams, Career, Innings, log_survival, truncation_cap

__all__ = ["SimulatedCareer", "sample_scores", "simulate_career", "simulate_from_prior"]


@dataclass(frozen=True)
class SimulatedCareer:
    career: Career
    c: float
    d: float
    hyper: gp.GPHyper
    mu2: np.ndarray

    def ability(self, t: int) -> AbilityParams:
        return AbilityParams.from_shape(self.c, self.d, float(self.mu2[t]))


def _draw(p: AbilityParams, uniforms: np.ndarray) -> np.ndarray:
    cap = truncation_cap(p.mu2)
    neg_log_s = -np.asarray(log_survival(np.arange(1, cap + 1), p))
    # X >= x  iff  S(x) > U
    return np.searchsorted(neg_log_s, -np.log(uniforms), side="left")


def sample_scores(c: float, d: float, mu2, rng: np.random.Generator) -> np.ndarray:
    """One dismissal-terminated score per entry of ``mu2``."""
    mu2 = np.asarray(mu2, dtype=float)
    uniforms = 1.0 - rng.random(mu2.size)
    scores = np.empty(mu2.size, dtype=np.int64)
    values, inverse = np.unique(mu2, return_inverse=True)
    for k, value in enumerate(values):
        sel = inverse == k
        scores[sel] = _draw(AbilityParams.from_shape(c, d, float(value)), uniforms[sel])
    return scores


def simulate_career(
    *,
    c: float,
    d: float,
    m: float,
    sigma: float,
    ell: float,
    n_innings: int,
    not_out_rate: float = 0.0,
    seed: int = 0,
    player_id: str = "simulated",
) -> SimulatedCareer:
    """Draw a career with known parameters.

    ``c = 1`` gives a constant within-innings ability (geometric scores).
    A not-out innings is reported at a uniform fraction of the score the
    batsman would have reached.
    """
    if n_innings < 1:
        raise ValueError("n_innings must be >= 1")
    if not 0.0 <= not_out_rate <= 1.0:
        raise ValueError("not_out_rate must lie in [0, 1]")
    if not (0 < c <= 1 and d > 0):
        raise ValueError(f"invalid shape parameters c={c}, d={d}")
    hyper = gp.GPHyper(m, sigma, ell)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n_innings)
    mu2 = np.exp(gp.log_mu2_from_whitened(z, hyper))
    scores = sample_scores(c, d, mu2, rng)
    not_out = rng.random(n_innings) < not_out_rate
    fractions = rng.random(n_innings)
    reported = np.where(not_out, np.floor(fractions * scores), scores).astype(np.int64)
    innings = tuple(Innings(int(s), not bool(no)) for s, no in zip(reported, not_out))
    return SimulatedCareer(Career(player_id, innings), c, d, hyper, mu2)


def simulate_from_prior(
    n_innings: int, *, not_out_rate: float = 0.0, seed: int = 0, player_id: str = "simulated"
) -> SimulatedCareer:
    rng = np.random.default_rng(seed)
    c, d, h = gp.hyper_from_unit(rng.random(gp.N_HYPER))
    return simulate_career(
        c=c, d=d, m=h.m, sigma=h.sigma, ell=h.ell, n_innings=n_innings,
        not_out_rate=not_out_rate, seed=int(rng.integers(2**63)), player_id=player_id,
    )

