"""Score files, fit archives and plot-ready tables.

Score-file grammar
------------------
One innings per line, in chronological order. An innings is a non-negative
integer, optionally followed by ``*`` for not out. ``#`` starts a comment;
blank lines are ignored. Example::

    # player: K Williamson
    13
    5*
    102

Fit archive
-----------
A gzip-compressed UTF-8 JSON document::

    {"format": "crease-fit", "version": 1, "created": "...",
     "sha256": "<hex digest of the canonical payload text>",
     "payload": {...}}

Reals are written as shortest round-trip decimal strings (Python ``repr``),
so reloading reproduces every stored float bit for bit.
"""

from __future__ import annotations

import datetime as _dt
import gzip
import hashlib
import io
import json
import os
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from . import __version__
from .model import Career, Innings
from .predictive import Comparison, Forecast, NuCurve
from .sampler import NSConfig, NSResult

__all__ = [
    "ScoreParseError",
    "ArchiveError",
    "ArchiveVersionError",
    "FitArchive",
    "parse_scores",
    "read_scores",
    "emit_scores",
    "write_fit",
    "read_fit",
    "emit_curve",
    "emit_comparison",
    "emit_table",
    "PRIOR_DESCRIPTION",
]

ARCHIVE_FORMAT = "crease-fit"
ARCHIVE_VERSION = 1

PRIOR_DESCRIPTION = {
    "C": "Beta(1, 2)",
    "D": "Beta(1, 5)",
    "m": "Lognormal(log(25), 0.75^2)",
    "sigma": "Exponential(rate=10)",
    "ell": "Uniform(0, 100)",
    "log_mu2": "GP(mean=log(m), squared-exponential kernel(sigma, ell)) over innings index",
    "mu1": "C * mu2",
    "L": "D * mu2",
}

PathLike = Union[str, os.PathLike]


class ScoreParseError(ValueError):
    def __init__(self, line_no: int, line: str, reason: str):
        self.line_no = line_no
        self.line = line
        super().__init__(f"line {line_no}: {reason}: {line.strip()!r}")


class ArchiveError(IOError):
    """Archive is truncated, corrupt or not a fit archive."""


class ArchiveVersionError(ArchiveError):
    """Archive was written by an incompatible format version."""


def _parse_token(token: str, line_no: int, line: str) -> Innings:
    body, not_out = (token[:-1], True) if token.endswith("*") else (token, False)
    if body.startswith("-") and body[1:].isdigit():
        raise ScoreParseError(line_no, line, "negative score")
    if not body.isdigit() or not body.isascii():
        raise ScoreParseError(line_no, line, "expected a non-negative integer with optional '*'")
    return Innings(int(body), dismissed=not not_out)


def parse_scores(text: str, player_id: str = "player") -> Career:
    """Parse score-file text into a :class:`Career`.

    Raises
    ------
    ScoreParseError
        On a malformed line (reported with its 1-based line number) or if the
        text holds no innings.
    """
    innings = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        tokens = content.split()
        if len(tokens) != 1:
            raise ScoreParseError(line_no, line, "expected one innings per line")
        innings.append(_parse_token(tokens[0], line_no, line))
    if not innings:
        raise ScoreParseError(0, "", "no innings found")
    return Career(player_id, tuple(innings))


def read_scores(path: PathLike, player_id: Optional[str] = None) -> Career:
    path = Path(path)
    return parse_scores(path.read_text(encoding="utf-8"), player_id or path.stem)


def emit_scores(career: Career, header: bool = True) -> str:
    lines = [f"# player: {career.player_id}"] if header else []
    lines += [f"{inn.score}{'' if inn.dismissed else '*'}" for inn in career.innings]
    return "\n".join(lines) + "\n"


@dataclass
class FitArchive:
    player_id: str
    career: Career
    config: NSConfig
    result: NSResult
    metadata: dict = field(default_factory=dict)
    created: str = ""

    def payload(self) -> dict:
        r = self.result
        return {
            "player_id": self.player_id,
            "scores": emit_scores(self.career, header=False),
            "model": {
                "priors": PRIOR_DESCRIPTION,
                "code_version": __version__,
                **self.metadata,
            },
            "config": self.config.to_dict(),
            "result": {
                "log_z": r.log_z,
                "log_z_err": r.log_z_err,
                "information": r.information,
                "n_iterations": r.n_iterations,
                "dim": int(r.u.shape[1]),
                "u": r.u.tolist(),
                "log_like": r.log_like.tolist(),
                "log_weight": r.log_weight.tolist(),
                "acceptance": r.acceptance.tolist(),
            },
        }


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        when = _dt.datetime.fromtimestamp(int(epoch), tz=_dt.timezone.utc)
    else:
        when = _dt.datetime.now(tz=_dt.timezone.utc).replace(microsecond=0)
    return when.isoformat()


def write_fit(archive: FitArchive, path: PathLike) -> Path:
    """Write ``archive`` to ``path``.

    The payload bytes depend only on the fit; the timestamp honours
    ``SOURCE_DATE_EPOCH`` for fully reproducible files.
    """
    payload_text = _canonical(archive.payload())
    created = archive.created or _timestamp()
    doc = (
        '{"created":' + json.dumps(created)
        + ',"format":' + json.dumps(ARCHIVE_FORMAT)
        + ',"payload":' + payload_text
        + ',"sha256":' + json.dumps(hashlib.sha256(payload_text.encode()).hexdigest())
        + ',"version":' + str(ARCHIVE_VERSION) + "}"
    )
    path = Path(path)
    buf = io.BytesIO()
    with gzip.GzipFile(filename="", mode="wb", fileobj=buf, mtime=0) as gz:
        gz.write(doc.encode("utf-8"))
    path.write_bytes(buf.getvalue())
    archive.created = created
    return path


def read_fit(path: PathLike) -> FitArchive:
    """Load an archive written by :func:`write_fit`.

    Raises
    ------
    ArchiveError
        If the file is truncated, corrupt or fails its checksum.
    ArchiveVersionError
        If the format version is not supported.
    """
    try:
        raw = gzip.decompress(Path(path).read_bytes())
        doc = json.loads(raw.decode("utf-8"))
    except (OSError, EOFError, zlib.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArchiveError(f"{path}: unreadable fit archive ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != ARCHIVE_FORMAT:
        raise ArchiveError(f"{path}: not a {ARCHIVE_FORMAT} archive")
    if doc.get("version") != ARCHIVE_VERSION:
        raise ArchiveVersionError(
            f"{path}: archive version {doc.get('version')!r} is not supported "
            f"(expected {ARCHIVE_VERSION}); refit with this release"
        )
    payload = doc["payload"]
    if hashlib.sha256(_canonical(payload).encode()).hexdigest() != doc.get("sha256"):
        raise ArchiveError(f"{path}: checksum mismatch")
    try:
        res = payload["result"]
        result = NSResult(
            log_z=float(res["log_z"]),
            log_z_err=float(res["log_z_err"]),
            information=float(res["information"]),
            n_iterations=int(res["n_iterations"]),
            u=np.asarray(res["u"], dtype=float).reshape(-1, int(res["dim"])),
            log_like=np.asarray(res["log_like"], dtype=float),
            log_weight=np.asarray(res["log_weight"], dtype=float),
            acceptance=np.asarray(res["acceptance"], dtype=float),
        )
        model = dict(payload["model"])
        for key in ("priors", "code_version"):
            model.pop(key, None)
        return FitArchive(
            player_id=payload["player_id"],
            career=parse_scores(payload["scores"], payload["player_id"]),
            config=NSConfig(**payload["config"]),
            result=result,
            metadata=model,
            created=doc.get("created", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ArchiveError(f"{path}: malformed payload ({exc})") from exc


def _fmt(x) -> str:
    return repr(float(x))


def emit_curve(curve: Union[NuCurve, Forecast], n_draws: Optional[int] = None) -> str:
    """Tab-separated ``t, median, low, high[, draw_1 ...]`` rows."""
    if isinstance(curve, Forecast):
        curve = curve.curve
    draws = curve.draws if curve.draws is not None else np.zeros((0, len(curve)))
    if n_draws is not None:
        draws = draws[:n_draws]
    header = ["t", "median", "low", "high"] + [f"draw_{k + 1}" for k in range(len(draws))]
    rows = ["\t".join(header)]
    for j, t in enumerate(curve.t_values):
        cells = [str(int(t)), _fmt(curve.median[j]), _fmt(curve.band_low[j]), _fmt(curve.band_high[j])]
        cells += [_fmt(v) for v in draws[:, j]]
        rows.append("\t".join(cells))
    return "\n".join(rows) + "\n"


def emit_table(rows: Iterable[tuple[str, float, float]]) -> str:
    """Per-player summary with columns ``player``, ``career_average``, ``predicted_nu``."""
    out = ["player\tcareer_average\tpredicted_nu"]
    out += [f"{name}\t{avg:.1f}\t{nu:.1f}" for name, avg, nu in rows]
    return "\n".join(out) + "\n"


def emit_comparison(cmp: Comparison) -> str:
    """Key-value table of a head-to-head comparison."""
    pairs = [
        ("player_a", cmp.player_a),
        ("player_b", cmp.player_b),
        ("expected_margin", _fmt(cmp.expected_margin)),
        ("p_outscore", _fmt(cmp.p_outscore)),
        ("p_tie", _fmt(cmp.p_tie)),
        ("p_reverse", _fmt(cmp.p_reverse)),
        ("nu_a", _fmt(cmp.nu_a)),
        ("nu_b", _fmt(cmp.nu_b)),
    ]
    return "key\tvalue\n" + "".join(f"{k}\t{v}\n" for k, v in pairs)
