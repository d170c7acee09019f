"""Command-line front end.

Exit codes: 0 success, 1 invalid arguments or configuration, 2 unreadable or
malformed files, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import fileio
from .bayesopt import INIT_PRESETS, SCHEDULES
from .errors import ConditioningError, EvaluationError, InputError, StateError
from .objective import GridDomain, ObjectiveContext, grid_oracle, slice_scores, tune, tuning_config
from .pique import PiqueConfig, pique_score
from .tomo import (
    FilterParams,
    Sinogram,
    add_poisson_noise,
    detector_offsets,
    fbp_volume,
    jaszczak_inserts,
    projection_angles,
    radon_volume,
    shepp_logan,
    sphere_phantom,
)

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3
TRACE_COLUMNS = ("step", "rho", "omega0", "pique", "beta_m", "schedule", "init_preset")


class UsageError(Exception):
    """Bad command-line usage (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    """Settings of a ``tune`` run; built from a key=value file plus flags."""

    schedule: str = "constant"
    lam: float = 0.9
    init: str = "nine"
    budget: int = 20
    grid_m: int = 1000
    oracle: int = 0
    seed: int = 0
    out: str = "."
    block_size: int = 16
    segment_length: int = 6
    uniform_threshold: float = 0.1
    segment_std_threshold: float = 0.1
    mscn_stability: float = 1.0
    score_stability: float = 1.0

    # config-file spelling of a few fields
    ALIASES = {"lambda": "lam"}

    @classmethod
    def from_sources(cls, file_values, overrides):
        values = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, raw in file_values.items():
            name = cls.ALIASES.get(key, key)
            if name not in types:
                raise InputError(f"unknown configuration key {key!r}")
            values[name] = _convert(name, raw, types[name])
        for name, v in overrides.items():
            if v is not None:
                values[name] = v
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def validate(self):
        if self.schedule not in SCHEDULES:
            raise InputError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if not 0.0 < self.lam < 1.0:
            raise InputError(f"lambda must lie in (0, 1), got {self.lam}")
        if self.init not in INIT_PRESETS:
            raise InputError(f"init must be one of {sorted(INIT_PRESETS)}, got {self.init!r}")
        if self.budget <= len(INIT_PRESETS[self.init]):
            raise InputError(
                f"budget {self.budget} must exceed the {len(INIT_PRESETS[self.init])} initial points"
            )
        if self.grid_m < 2:
            raise InputError("grid_m must be at least 2")
        if self.budget > self.grid_m ** 2:
            raise InputError("budget exceeds the number of grid nodes")
        if self.oracle and self.oracle < 2:
            raise InputError("oracle grid needs at least 2 nodes per axis")
        self.pique_config()

    def pique_config(self):
        return PiqueConfig(
            block_size=self.block_size,
            segment_length=self.segment_length,
            uniform_threshold=self.uniform_threshold,
            segment_std_threshold=self.segment_std_threshold,
            mscn_stability=self.mscn_stability,
            score_stability=self.score_stability,
        )


def _convert(name, raw, typ):
    typ = typ if isinstance(typ, str) else typ.__name__
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
    except ValueError:
        raise InputError(f"configuration key {name!r}: cannot read {raw!r} as {typ}") from None
    return raw


def _fmt(v):
    return "" if v is None else f"{v:.6f}"


def _load_sinograms(path):
    data = fileio.read_volume(path)
    meta = fileio.read_meta(path)
    if meta.get("kind", "sinogram") != "sinogram":
        raise InputError(f"{path} holds a {meta['kind']}, not a sinogram")
    n_angles, n_bins = data.shape[1], data.shape[2]
    angles, offsets = projection_angles(n_angles), detector_offsets(n_bins)
    size = int(meta["size"]) if "size" in meta else int(math.floor(n_bins / math.sqrt(2.0)))
    return [Sinogram(angles, offsets, sl) for sl in data], size


def _check_params(rho, omega0):
    if not 1.0 <= rho <= 10.0:
        raise InputError(f"rho must lie in [1, 10], got {rho}")
    if not 0.1 <= omega0 <= 1.0:
        raise InputError(f"omega0 must lie in [0.1, 1], got {omega0}")
    return FilterParams(rho, omega0)


def cmd_phantom(args):
    if args.size < 32:
        raise InputError(f"size must be at least 32, got {args.size}")
    if args.slices < 1:
        raise InputError("slices must be at least 1")
    if args.kind == "shepp-logan":
        vol = np.repeat(shepp_logan(args.size)[None], args.slices, axis=0)
    else:
        vol = sphere_phantom(args.size, args.slices, jaszczak_inserts(args.ratio))
    fileio.write_volume(args.out, vol)
    fileio.write_meta(args.out, {"kind": "phantom", "phantom": args.kind, "size": args.size,
                                 "slices": args.slices})
    print(f"wrote {args.kind} phantom {args.size}x{args.size}x{args.slices} to {args.out}")


def cmd_radon(args):
    vol = fileio.read_volume(args.input)
    if vol.shape[1] != vol.shape[2]:
        raise InputError(f"slices must be square, got {vol.shape[2]}x{vol.shape[1]}")
    if args.angles < 1:
        raise InputError("angles must be at least 1")
    sinos = radon_volume(vol, args.angles)
    if args.counts is not None:
        if args.counts <= 0:
            raise InputError("counts must be positive")
        rng = np.random.default_rng(args.seed)
        sinos = [add_poisson_noise(s, args.counts, rng) for s in sinos]
    fileio.write_volume(args.out, np.stack([s.data for s in sinos]))
    meta = {"kind": "sinogram", "size": vol.shape[2], "angles": args.angles,
            "bins": sinos[0].data.shape[1]}
    if args.counts is not None:
        meta.update(counts=float(args.counts), seed=args.seed)
    fileio.write_meta(args.out, meta)
    print(f"wrote {len(sinos)} sinograms ({args.angles} angles) to {args.out}")


def cmd_fbp(args):
    params = _check_params(args.rho, args.omega0)
    sinos, size = _load_sinograms(args.input)
    size = args.size or size
    if size < 1:
        raise InputError("size must be positive")
    vol = fbp_volume(sinos, params, size)
    fileio.write_volume(args.out, vol)
    fileio.write_meta(args.out, {"kind": "reconstruction", "rho": params.order,
                                 "omega0": params.cutoff, "size": size,
                                 "source": Path(args.input).name})
    print(f"wrote {len(vol)} slices to {args.out}")


def _pique_from_args(args):
    return PiqueConfig(block_size=args.block_size, segment_length=args.segment_length)


def cmd_pique(args):
    vol = fileio.read_volume(args.input)
    cfg = _pique_from_args(args)
    scores = []
    for z, sl in enumerate(vol):
        try:
            scores.append(pique_score(sl, cfg))
        except InputError as exc:
            raise InputError(f"slice {z}: {exc}") from exc
    mean = float(np.mean(scores))
    lines = ["slice,pique"] + [f"{z},{s:.6f}" for z, s in enumerate(scores)] + [f"mean,{mean:.6f}"]
    text = "\n".join(lines) + "\n"
    if args.csv:
        Path(args.csv).write_text(text)
    sys.stdout.write(text)


def _tune_config(args):
    file_values = {}
    if args.config:
        file_values = fileio.parse_keyvalue(Path(args.config).read_text(), args.config)
    overrides = {"schedule": args.schedule, "lam": args.lam, "init": args.init,
                 "budget": args.budget, "grid_m": args.grid_m, "oracle": args.oracle,
                 "out": args.out}
    return RunConfig.from_sources(file_values, overrides)


def _write_landscape(path, orc):
    rows = ["rho,omega0,pique"]
    for i, r in enumerate(orc.rho_axis):
        for j, w in enumerate(orc.omega_axis):
            rows.append(f"{r:.6f},{w:.6f},{orc.pique[i, j]:.6f}")
    Path(path).write_text("\n".join(rows) + "\n")


def cmd_tune(args):
    cfg = _tune_config(args)
    sinos, size = _load_sinograms(args.input)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    domain = GridDomain(cfg.grid_m)
    ctx = ObjectiveContext(sinos, size, cfg.pique_config(), domain)
    orc = grid_oracle(ctx, cfg.oracle) if cfg.oracle else None
    bo = tuning_config(domain, cfg.schedule, cfg.init, cfg.budget, cfg.lam)
    report = tune(ctx, bo, orc, cfg.init)
    wall = time.perf_counter() - t0
    rows = [",".join(TRACE_COLUMNS)]
    for r in report.trace:
        rows.append(f"{r.step},{r.rho:.6f},{r.omega0:.6f},{r.pique:.6f},{_fmt(r.beta_m)},"
                    f"{r.schedule},{r.init_preset}")
    (out / "trace.csv").write_text("\n".join(rows) + "\n")
    summary = [
        f"schedule={cfg.schedule}",
        f"init={cfg.init}",
        f"budget={cfg.budget}",
        f"best_rho={report.best_params.order:.6f}",
        f"best_omega0={report.best_params.cutoff:.6f}",
        f"best_pique={report.best_pique:.6f}",
        f"wall_time={wall:.3f}",
    ]
    if orc is not None:
        _write_landscape(out / "landscape.csv", orc)
        summary += [
            f"oracle_best_rho={orc.best_params.order:.6f}",
            f"oracle_best_omega0={orc.best_params.cutoff:.6f}",
            f"oracle_best_pique={-orc.best_value:.6f}",
            f"final_simple_regret={report.final_simple_regret:.6f}",
        ]
    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    print("\n".join(summary))


def cmd_grid(args):
    if args.m < 2:
        raise InputError("grid needs at least 2 nodes per axis")
    sinos, size = _load_sinograms(args.input)
    ctx = ObjectiveContext(sinos, size, _pique_from_args(args))
    orc = grid_oracle(ctx, args.m)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_landscape(out / "landscape.csv", orc)
    p = orc.best_params
    print(f"best_rho={p.order:.6f}\nbest_omega0={p.cutoff:.6f}\nbest_pique={-orc.best_value:.6f}")


def cmd_export(args):
    vol = fileio.read_volume(args.input)
    if not 0 <= args.slice < len(vol):
        raise InputError(f"slice index {args.slice} out of range [0, {len(vol)})")
    fileio.write_pgm(args.out, vol[args.slice])
    print(f"wrote slice {args.slice} to {args.out}")


def _add_pique_flags(p):
    p.add_argument("--block-size", type=int, default=16)
    p.add_argument("--segment-length", type=int, default=6)


def build_parser():
    parser = _Parser(prog="spectune", description="FBP filter tuning with PIQUE and kernel BO")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("phantom", help="write a synthetic phantom volume")
    p.add_argument("--kind", choices=("shepp-logan", "spheres"), default="shepp-logan")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--slices", type=int, default=1)
    p.add_argument("--ratio", type=float, default=5.0, help="hot sphere to background ratio")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("radon", help="forward-project every slice")
    p.add_argument("input")
    p.add_argument("--angles", type=int, default=360)
    p.add_argument("--counts", type=float, help="Poisson noise: events in the brightest bin")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_radon)

    p = sub.add_parser("fbp", help="filtered back-projection")
    p.add_argument("input")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--omega0", type=float, required=True)
    p.add_argument("--size", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fbp)

    p = sub.add_parser("pique", help="score every slice")
    p.add_argument("input")
    p.add_argument("--csv")
    _add_pique_flags(p)
    p.set_defaults(func=cmd_pique)

    p = sub.add_parser("tune", help="Bayesian optimization of (rho, omega0)")
    p.add_argument("input")
    p.add_argument("--config")
    p.add_argument("--schedule", choices=SCHEDULES)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--init", choices=sorted(INIT_PRESETS))
    p.add_argument("--budget", type=int)
    p.add_argument("--grid-m", type=int)
    p.add_argument("--oracle", type=int, metavar="M")
    p.add_argument("--out")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("grid", help="exhaustive objective sweep on a coarse grid")
    p.add_argument("input")
    p.add_argument("--m", type=int, default=15)
    p.add_argument("--out", required=True)
    _add_pique_flags(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("export", help="write one slice as an 8-bit PGM")
    p.add_argument("input")
    p.add_argument("--slice", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except (UsageError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (fileio.FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConditioningError, EvaluationError, StateError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
