"""Within-innings batting model: effective average, hazard and the
censored career likelihood.

A batsman on score ``x`` is dismissed with probability ``H(x) = 1 / (mu(x) + 1)``
where the effective average ``mu(x)`` rises from ``mu1`` towards ``mu2`` on an
e-folding scale ``L``. Not-out innings are right-censored and contribute the
survival probability ``P(X >= y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "Innings",
    "Career",
    "AbilityParams",
    "CareerParams",
    "effective_average",
    "hazard",
    "log_survival",
    "survival",
    "score_pmf",
    "log_score_pmf",
    "career_log_likelihood",
    "CareerLikelihood",
    "career_from_scores",
    "truncation_cap",
]


@dataclass(frozen=True)
class Innings:
    score: int
    dismissed: bool = True

    def __post_init__(self):
        if int(self.score) != self.score or self.score < 0:
            raise ValueError(f"score must be a non-negative integer, got {self.score!r}")


@dataclass(frozen=True)
class Career:
    """Chronological innings record of one player."""

    player_id: str
    innings: tuple[Innings, ...]

    def __post_init__(self):
        object.__setattr__(self, "innings", tuple(self.innings))
        if len(self.innings) < 1:
            raise ValueError("a career needs at least one innings")

    def __len__(self):
        return len(self.innings)

    @property
    def n_not_out(self) -> int:
        return sum(not inn.dismissed for inn in self.innings)

    @property
    def scores(self) -> np.ndarray:
        return np.array([inn.score for inn in self.innings], dtype=np.int64)

    @property
    def dismissed(self) -> np.ndarray:
        return np.array([inn.dismissed for inn in self.innings], dtype=bool)

    @property
    def total_runs(self) -> int:
        return int(self.scores.sum())

    def batting_average(self) -> float:
        """Runs per dismissal; ``inf`` if the player was never out."""
        outs = len(self) - self.n_not_out
        if outs == 0:
            return math.inf
        return self.total_runs / outs

    def __add__(self, other: "Career") -> "Career":
        return Career(self.player_id, self.innings + other.innings)


@dataclass(frozen=True)
class AbilityParams:
    """Hazard parameters for a single innings.

    ``mu1 == mu2`` is accepted as the constant-ability (geometric) limit.
    """

    mu1: float
    mu2: float
    big_l: float

    def __post_init__(self):
        if not (0 < self.mu1 <= self.mu2):
            raise ValueError(f"need 0 < mu1 <= mu2, got mu1={self.mu1}, mu2={self.mu2}")
        if not self.big_l > 0:
            raise ValueError(f"need L > 0, got {self.big_l}")

    @classmethod
    def from_shape(cls, c: float, d: float, mu2: float) -> "AbilityParams":
        return cls(c * mu2, mu2, d * mu2)

    @classmethod
    def constant(cls, mu: float) -> "AbilityParams":
        return cls(mu, mu, 1.0)


@dataclass(frozen=True)
class CareerParams:
    """Shared shape ``(c, d)`` plus one ``mu2`` per innings."""

    c: float
    d: float
    mu2_series: np.ndarray = field(repr=False)

    def __post_init__(self):
        series = np.asarray(self.mu2_series, dtype=float)
        if series.ndim != 1 or series.size < 1:
            raise ValueError("mu2_series must be a non-empty 1-D sequence")
        if not (0 < self.c <= 1 and self.d > 0):
            raise ValueError(f"invalid shape parameters c={self.c}, d={self.d}")
        if np.any(series <= 0):
            raise ValueError("all mu2 values must be positive")
        object.__setattr__(self, "mu2_series", series)

    def ability(self, t: int) -> AbilityParams:
        """Parameters of innings ``t`` (zero-based)."""
        return AbilityParams.from_shape(self.c, self.d, float(self.mu2_series[t]))


def effective_average(x, p: AbilityParams):
    x = np.asarray(x, dtype=float)
    out = p.mu2 + (p.mu1 - p.mu2) * np.exp(-x / p.big_l)
    return out if out.ndim else float(out)


def hazard(x, p: AbilityParams):
    mu = np.asarray(effective_average(x, p))
    out = 1.0 / (mu + 1.0)
    return out if out.ndim else float(out)


def _log_survival_steps(n: int, p: AbilityParams) -> np.ndarray:
    """``log(1 - H(a))`` for ``a = 0..n-1``."""
    mu = np.asarray(effective_average(np.arange(n), p), dtype=float)
    return -np.log1p(1.0 / mu)


def log_survival(x, p: AbilityParams):
    """``log P(X >= x)`` accumulated in log space."""
    xs = np.asarray(x, dtype=np.int64)
    top = int(xs.max()) if xs.size else 0
    cum = np.concatenate(([0.0], np.cumsum(_log_survival_steps(top, p))))
    out = cum[xs]
    return out if out.ndim else float(out)


def survival(x, p: AbilityParams):
    out = np.exp(log_survival(x, p))
    return out if np.ndim(out) else float(out)


def log_score_pmf(x, p: AbilityParams):
    xs = np.asarray(x, dtype=np.int64)
    log_h = -np.log1p(np.asarray(effective_average(xs, p)))
    out = log_h + np.asarray(log_survival(xs, p))
    return out if out.ndim else float(out)


def score_pmf(x, p: AbilityParams):
    out = np.exp(log_score_pmf(x, p))
    return out if np.ndim(out) else float(out)


class CareerLikelihood:
    """Vectorised censored log-likelihood for a fixed career.

    Every survival factor ``log(1 - H(a))`` of every innings is laid out in
    one flat array, so an evaluation is a single pass of ``exp``/``log1p``
    over ``total_runs`` elements.
    """

    def __init__(self, career: Career):
        self.career = career
        scores = career.scores
        self.n_innings = len(scores)
        self._step_innings = np.repeat(np.arange(self.n_innings), scores)
        self._step_score = (
            np.concatenate([np.arange(s) for s in scores]).astype(float)
            if scores.sum()
            else np.zeros(0)
        )
        out = career.dismissed
        self._out_innings = np.flatnonzero(out)
        self._out_score = scores[out].astype(float)

    def __call__(self, c: float, d: float, mu2_series) -> float:
        mu2 = np.asarray(mu2_series, dtype=float)
        if mu2.shape != (self.n_innings,):
            raise ValueError(
                f"mu2_series has length {mu2.size}, career has {self.n_innings} innings"
            )
        big_l = d * mu2
        m2 = mu2[self._step_innings]
        mu = m2 + (c - 1.0) * m2 * np.exp(-self._step_score / big_l[self._step_innings])
        total = -np.log1p(1.0 / mu).sum()
        m2 = mu2[self._out_innings]
        mu = m2 + (c - 1.0) * m2 * np.exp(-self._out_score / big_l[self._out_innings])
        total -= np.log1p(mu).sum()
        return float(total)


def career_log_likelihood(career: Career, cp: CareerParams) -> float:
    if len(cp.mu2_series) != len(career):
        raise ValueError(
            f"mu2_series has length {len(cp.mu2_series)}, career has {len(career)} innings"
        )
    return CareerLikelihood(career)(cp.c, cp.d, cp.mu2_series)


def career_from_scores(player_id: str, scores: Sequence[int], dismissed: Sequence[bool] | None = None) -> Career:
    if dismissed is None:
        dismissed = [True] * len(scores)
    return Career(player_id, tuple(Innings(int(s), bool(o)) for s, o in zip(scores, dismissed)))


DEFAULT_CAP = 2000


def truncation_cap(mu2: float, tol: float = 1e-12, cap: int = DEFAULT_CAP) -> int:
    """Smallest cap (``cap`` doubled as needed) whose tail bound is below ``tol``.

    Every hazard is at least ``1 / (mu2 + 1)``, so the survival mass beyond
    ``X`` is bounded by ``(mu2 + 1) * (1 - 1/(mu2 + 1)) ** (X + 1)``.
    """
    log_q = -math.log1p(1.0 / mu2)
    log_tol = math.log(tol)
    while math.log1p(mu2) + (cap + 1) * log_q >= log_tol:
        cap *= 2
    return cap
