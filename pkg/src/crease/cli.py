"""Command-line interface: ``crease fit | predict | compare | simulate | summary``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .dataio import (
    ArchiveError,
    FitArchive,
    ScoreParseError,
    emit_comparison,
    emit_curve,
    emit_scores,
    emit_table,
    read_fit,
    read_scores,
    write_fit,
)
from .fit import fit_career, median_summary
from .gp import CovarianceError
from .predictive import compare, extrapolate, nu_curve, posterior_draws
from .sampler import DegenerateWeightsError, NSConfig, SamplerError
from .simulate import simulate_career, simulate_from_prior

log = logging.getLogger("crease")

EXIT_OK = 0
EXIT_PARSE = 3
EXIT_SAMPLER = 4
EXIT_IO = 5

PRESETS = {
    "full": {"particles": 1000, "mcmc_steps": 1000},
    "desk": {"particles": 200, "mcmc_steps": 200},
}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("CREASE_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise CliError(f"CREASE_SEED must be an integer, got {env!r}", 2)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {out}: {exc}", EXIT_IO)
    return out


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO)


def _record_config(out: Path, command: str, resolved: dict) -> None:
    resolved = {"command": command, "crease_version": __version__, **resolved}
    _write(out / f"{command}_config.json", json.dumps(resolved, indent=2, sort_keys=True) + "\n")


def _load_archive(path: str) -> FitArchive:
    if not Path(path).is_file():
        raise CliError(f"archive not found: {path}", EXIT_IO)
    try:
        return read_fit(path)
    except ArchiveError as exc:
        raise CliError(str(exc), EXIT_IO)


def _draws(archive: FitArchive, n: int, seed: int):
    try:
        return posterior_draws(archive.result, len(archive.career), n=n, seed=seed)
    except DegenerateWeightsError as exc:
        raise CliError(str(exc), EXIT_SAMPLER)


def cmd_fit(args) -> int:
    seed = _seed(args)
    preset = PRESETS[args.preset]
    particles = args.particles or preset["particles"]
    steps = args.mcmc_steps or preset["mcmc_steps"]
    try:
        career = read_scores(args.scores, args.player)
    except ScoreParseError as exc:
        raise CliError(f"{args.scores}: {exc}", EXIT_PARSE)
    except OSError as exc:
        raise CliError(f"cannot read {args.scores}: {exc}", EXIT_IO)
    cfg = NSConfig(
        n_particles=particles, mcmc_steps=steps, seed=seed,
        termination_frac=args.termination_frac,
    )
    out = _out_dir(args)
    _record_config(out, "fit", {
        "scores": str(args.scores), "player": career.player_id, "n_innings": len(career),
        "sampler": cfg.to_dict(), "threads": args.threads,
    })
    progress_path = out / "progress.log"
    log.info("fitting %s: %d innings, %d particles x %d steps, seed %d",
             career.player_id, len(career), particles, steps, seed)
    with open(progress_path, "w", encoding="utf-8") as progress_file:
        progress_file.write("iteration\tlog_z\tworst_log_like\tstep_scale\n")

        def progress(info):
            progress_file.write(
                f"{info['iteration']}\t{info['log_z']!r}\t{info['worst_log_like']!r}\t{info['step_scale']!r}\n"
            )
            progress_file.flush()
            log.debug("it=%d logz=%.4f", info["iteration"], info["log_z"])

        try:
            result = fit_career(career, cfg, progress=progress, progress_every=args.progress_every)
        except (SamplerError, CovarianceError) as exc:
            raise CliError(f"sampler failed: {exc}", EXIT_SAMPLER)
    archive = FitArchive(career.player_id, career, cfg, result)
    path = out / f"{_safe_name(career.player_id)}.fit.json.gz"
    try:
        write_fit(archive, path)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO)
    print(result.summary())
    print(f"archive\t{path}")
    return EXIT_OK


def _safe_name(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name) or "player"


def _forecast(archive: FitArchive, args, seed: int):
    draws = _draws(archive, args.draws, seed)
    try:
        curve = nu_curve(archive.career, draws, level=args.level, keep=args.keep, threads=args.threads)
        fc = extrapolate(archive.career, draws, horizon=args.horizon, seed=seed,
                         level=args.level, keep=args.keep, threads=args.threads)
    except CovarianceError as exc:
        raise CliError(f"forecast failed: {exc}", EXIT_SAMPLER)
    return draws, curve, fc


def cmd_predict(args) -> int:
    seed = _seed(args)
    archive = _load_archive(args.archive)
    out = _out_dir(args)
    _record_config(out, "predict", {
        "archive": str(args.archive), "horizon": args.horizon, "level": args.level,
        "draws": args.draws, "keep": args.keep, "seed": seed, "threads": args.threads,
    })
    _, curve, fc = _forecast(archive, args, seed)
    name = _safe_name(archive.player_id)
    _write(out / f"{name}.nu_curve.tsv", emit_curve(curve))
    _write(out / f"{name}.forecast.tsv", emit_curve(fc))
    table = emit_table([(archive.player_id, archive.career.batting_average(), fc.next_innings_nu)])
    _write(out / f"{name}.table.tsv", table)
    sys.stdout.write(table)
    return EXIT_OK


def cmd_compare(args) -> int:
    seed = _seed(args)
    archives = [_load_archive(p) for p in (args.archive_a, args.archive_b)]
    out = _out_dir(args)
    _record_config(out, "compare", {
        "archives": [str(args.archive_a), str(args.archive_b)], "draws": args.draws,
        "seed": seed, "threads": args.threads,
    })
    fitted = []
    for archive in archives:
        draws = _draws(archive, args.draws, seed)
        try:
            fc = extrapolate(archive.career, draws, horizon=1, seed=seed, threads=args.threads)
        except CovarianceError as exc:
            raise CliError(f"forecast failed: {exc}", EXIT_SAMPLER)
        fitted.append((archive, draws, fc))
    (arc_a, draws_a, fc_a), (arc_b, draws_b, fc_b) = fitted
    cmp = compare(fc_a, draws_a, fc_b, draws_b, seed=seed, names=(arc_a.player_id, arc_b.player_id))
    table = emit_table([
        (arc_a.player_id, arc_a.career.batting_average(), fc_a.next_innings_nu),
        (arc_b.player_id, arc_b.career.batting_average(), fc_b.next_innings_nu),
    ])
    kv = emit_comparison(cmp)
    _write(out / "comparison.tsv", kv)
    _write(out / "table.tsv", table)
    sys.stdout.write(kv + "\n" + table)
    return EXIT_OK


def cmd_simulate(args) -> int:
    seed = _seed(args)
    if args.from_prior:
        sim = simulate_from_prior(args.innings, not_out_rate=args.not_out_rate, seed=seed, player_id=args.player)
    else:
        missing = [k for k in ("c", "d", "m", "sigma", "ell") if getattr(args, k) is None]
        if missing:
            raise CliError("simulate needs --from-prior or all of --c --d --m --sigma --ell "
                           f"(missing: {', '.join('--' + k for k in missing)})", 2)
        try:
            sim = simulate_career(
                c=args.c, d=args.d, m=args.m, sigma=args.sigma, ell=args.ell,
                n_innings=args.innings, not_out_rate=args.not_out_rate, seed=seed,
                player_id=args.player,
            )
        except ValueError as exc:
            raise CliError(f"invalid simulation parameters: {exc}", 2)
    out = _out_dir(args)
    h = sim.hyper
    _record_config(out, "simulate", {
        "innings": args.innings, "not_out_rate": args.not_out_rate, "seed": seed,
        "player": args.player, "c": sim.c, "d": sim.d, "m": h.m, "sigma": h.sigma, "ell": h.ell,
    })
    name = _safe_name(args.player)
    _write(out / f"{name}.txt", emit_scores(sim.career))
    truth = ["t\tmu2"] + [f"{t + 1}\t{v!r}" for t, v in enumerate(sim.mu2)]
    _write(out / f"{name}.truth.tsv", "\n".join(truth) + "\n")
    print(f"scores\t{out / (name + '.txt')}")
    return EXIT_OK


def cmd_summary(args) -> int:
    archive = _load_archive(args.archive)
    seed = _seed(args)
    r = archive.result
    draws = _draws(archive, args.draws, seed)
    med = median_summary(draws)
    rows = [
        ("player", archive.player_id),
        ("innings", len(archive.career)),
        ("not_outs", archive.career.n_not_out),
        ("career_average", f"{archive.career.batting_average():.2f}"),
        ("log_z", f"{r.log_z:.4f}"),
        ("log_z_err", f"{r.log_z_err:.4f}"),
        ("information", f"{r.information:.4f}"),
        ("iterations", r.n_iterations),
        ("particles", archive.config.n_particles),
        ("mcmc_steps", archive.config.mcmc_steps),
        ("mean_acceptance", f"{float(np.mean(r.acceptance)) if r.acceptance.size else float('nan'):.3f}"),
    ] + [(f"median_{k}", f"{v:.4g}") for k, v in med.items()]
    sys.stdout.write("".join(f"{k}\t{v}\n" for k, v in rows))
    return EXIT_OK


def _common(p: argparse.ArgumentParser, out_dir: bool = True) -> None:
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default: $CREASE_SEED or 0)")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for predictive summaries; results do not depend on it")
    if out_dir:
        p.add_argument("--out-dir", default=".", help="directory for all outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crease", description=__doc__)
    parser.add_argument("--version", action="version", version=f"crease {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the career model to a score file")
    p.add_argument("scores")
    p.add_argument("--player", default=None, help="player id (default: file stem)")
    p.add_argument("--preset", choices=sorted(PRESETS), default="full",
                   help="full: 1000 particles x 1000 steps; desk: 200 x 200")
    p.add_argument("--particles", type=int, default=None)
    p.add_argument("--mcmc-steps", type=int, default=None)
    p.add_argument("--termination-frac", type=float, default=1e-6)
    p.add_argument("--progress-every", type=int, default=100)
    _common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="nu(t) curve and forecast from a fit archive")
    p.add_argument("archive")
    p.add_argument("--horizon", type=int, default=20)
    p.add_argument("--level", type=float, default=0.68)
    p.add_argument("--draws", type=int, default=500, help="posterior draws to resample")
    p.add_argument("--keep", type=int, default=20, help="per-draw curves written for plotting")
    _common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("compare", help="next-innings comparison of two fitted players")
    p.add_argument("archive_a")
    p.add_argument("archive_b")
    p.add_argument("--draws", type=int, default=500)
    _common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="draw a synthetic score file from the model")
    p.add_argument("--innings", type=int, required=True)
    p.add_argument("--from-prior", action="store_true")
    for name in ("c", "d", "m", "sigma", "ell"):
        p.add_argument(f"--{name}", type=float, default=None)
    p.add_argument("--not-out-rate", type=float, default=0.0)
    p.add_argument("--player", default="simulated")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("summary", help="print evidence and posterior medians of an archive")
    p.add_argument("archive")
    p.add_argument("--draws", type=int, default=1000)
    _common(p, out_dir=False)
    p.set_defaults(func=cmd_summary)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"crease: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
