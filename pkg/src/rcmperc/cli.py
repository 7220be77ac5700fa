"""Command-line entry point: ``rcmperc <command> [flags]``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

from .complex import build, count_faces
from .config import ConfigError, RunConfig, atomic_write, parse_family
from .estimation import NoCrossingError, decay_fit, estimate_beta_c, theta_sweep
from .exploration import explore, osss_check
from .geometry import CubeGrid, window_for_radius
from .render import render_svg
from .sampler import sample

COMMANDS = ("build", "render", "sweep", "betac", "decay", "osss", "explore")
EXIT_OK, EXIT_CONFIG, EXIT_RUN = 0, 2, 3

log = logging.getLogger("rcmperc")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rcmperc", description="Percolation of random simplicial complexes.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--seed", type=int, help="master seed (falls back to the config, then RCM_SEED)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    p.add_argument("--family", help="family spec, e.g. vr:r=0.3,D=0.8,alpha=1")
    p.add_argument("--beta", type=_floats, help="intensity or comma-separated intensities")
    p.add_argument("--r", type=_floats, help="radius or comma-separated radii")
    p.add_argument("--s", type=float, help="sphere radius for the exploration")
    p.add_argument("--q", type=int, help="connectivity level q")
    p.add_argument("--n", type=int, help="realizations per cell")
    p.add_argument("--bracket", type=_floats, help="beta bracket lo,hi for betac")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if args.config:
        import tomli

        try:
            data = tomli.loads(Path(args.config).read_text())
        except (OSError, tomli.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    cfg = RunConfig.from_dict(data)
    if args.seed is not None:
        cfg.seed = args.seed
    elif "seed" not in data and os.environ.get("RCM_SEED"):
        try:
            cfg.seed = int(os.environ["RCM_SEED"])
        except ValueError as exc:
            raise ConfigError("RCM_SEED must be an integer") from exc
    if args.family:
        cfg.family = parse_family(args.family)
    for name, attr in (("beta", "betas"), ("r", "r"), ("s", "s"), ("q", "q"), ("n", "n"),
                       ("out", "out"), ("threads", "threads"), ("bracket", "bracket")):
        val = getattr(args, name)
        if val is not None:
            setattr(cfg, attr, val)
    return cfg.validate()


def _write_json(path: Path, doc: dict) -> None:
    atomic_write(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _grid(cfg: RunConfig, D: float) -> CubeGrid:
    return CubeGrid(cfg.d, D)


def cmd_build(cfg: RunConfig, out: Path) -> str:
    fam = cfg.connection_family()
    r = max(cfg.r)
    real = sample(cfg.seed, cfg.betas[0], window_for_radius(r, _grid(cfg, fam.D), fam.D), fam.mark_law,
                  with_origin=True)
    cx = build(real, fam)
    faces = {str(j): count_faces(cx, j) for j in range(cx.alpha + 1)}
    atomic_write(out / "complex.json", cx.to_json() + "\n")
    _write_json(out / "build.json", {"meta": cfg.metadata(), "beta": cfg.betas[0], "r": r, "faces": faces,
                                     "edge_cutoff_applied": cx.edge_cutoff_applied, "redraws": real.redraws})
    return f"built complex: faces {faces}"


def _explore(cfg: RunConfig):
    cfg.check_sphere()
    fam = cfg.connection_family()
    r = max(cfg.r)
    real = sample(cfg.seed, cfg.betas[0], window_for_radius(r, _grid(cfg, fam.D), fam.D), fam.mark_law,
                  with_origin=True)
    cx = build(real, fam, alpha=min(fam.alpha, max(cfg.q + 1, 2)))
    return cx, explore(real, fam, cfg.q, r, cfg.s, complex_=cx), r


def cmd_explore(cfg: RunConfig, out: Path) -> str:
    _, trace, r = _explore(cfg)
    doc = json.loads(trace.to_json())
    doc["meta"] = cfg.metadata()
    _write_json(out / "trace.json", doc)
    return f"explored: revealed {len(trace.revealed)} cubes, B_r = {trace.decision}"


def cmd_render(cfg: RunConfig, out: Path) -> str:
    if cfg.d != 2:
        raise ConfigError("render needs d = 2")
    cx, trace, r = _explore(cfg)
    svg = render_svg(cx, r, cfg.s, cfg.q, trace, title=f"seed {cfg.seed}, beta {cfg.betas[0]}")
    atomic_write(out / "render.svg", svg)
    return f"rendered {cx.n} points to render.svg"


def cmd_sweep(cfg: RunConfig, out: Path) -> str:
    fam = cfg.connection_family()
    res = theta_sweep(fam, cfg.q, cfg.betas, cfg.r, cfg.n, cfg.seed, cfg.threads, cfg.d)
    atomic_write(out / "sweep.csv", res.to_csv())
    doc = res.summary()
    doc["meta"] = cfg.metadata()
    _write_json(out / "sweep.json", doc)
    return f"sweep: {len(res.betas)} beta x {len(res.rs)} r cells, n = {res.n}"


def cmd_betac(cfg: RunConfig, out: Path) -> str:
    fam = cfg.connection_family()
    res = estimate_beta_c(fam, cfg.q, cfg.r_small, cfg.r_large, tuple(cfg.bracket), cfg.n, cfg.seed,
                          cfg.n_beta, cfg.tau, cfg.threads, cfg.d)
    atomic_write(out / "betac_sweep.csv", res.sweep.to_csv())
    doc = res.summary()
    doc["meta"] = cfg.metadata()
    _write_json(out / "betac.json", doc)
    parts = [f"{k} {getattr(res, k).beta_c_hat:.4g}" for k in ("crossing", "bisection") if getattr(res, k)]
    return "beta_c: " + ", ".join(parts)


def cmd_decay(cfg: RunConfig, out: Path) -> str:
    fam = cfg.connection_family()
    fit = decay_fit(fam, cfg.q, cfg.betas[0], cfg.r, cfg.n, cfg.seed, cfg.threads, cfg.d)
    doc = fit.summary()
    doc["meta"] = cfg.metadata()
    _write_json(out / "decay.json", doc)
    return f"decay: slope {fit.slope:.4g}, R^2 {fit.r2:.4g}" if not fit.degenerate else "decay: degenerate (all zero)"


def cmd_osss(cfg: RunConfig, out: Path) -> str:
    cfg.check_sphere()
    fam = cfg.connection_family()
    r = max(cfg.r)
    rows, summaries = [], []
    for beta in cfg.betas:
        res = osss_check(beta, fam, cfg.q, r, cfg.s, cfg.n, cfg.seed, cfg.threads, cfg.d)
        summaries.append(res.summary())
        rows.extend((beta, c, dl, z) for c, dl, z in zip(res.cubes, res.revealment, res.influence))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["beta", "cube", "delta_hat", "zeta_hat"])
    for beta, c, dl, z in rows:
        w.writerow([repr(float(beta)), c, repr(float(dl)), repr(float(z))])
    atomic_write(out / "osss_cubes.csv", buf.getvalue())
    _write_json(out / "osss.json", {"meta": cfg.metadata(), "results": summaries})
    return "osss: " + ", ".join(f"beta {s['beta']:g}: lhs {s['lhs']:.4g} rhs {s['rhs']:.4g}" for s in summaries)


HANDLERS = {"build": cmd_build, "render": cmd_render, "sweep": cmd_sweep, "betac": cmd_betac,
            "decay": cmd_decay, "osss": cmd_osss, "explore": cmd_explore}


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out)
    try:
        msg = HANDLERS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoCrossingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN
    print(msg)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
