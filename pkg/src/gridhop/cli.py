"""Command line entry point: ``gridhop {simulate,estimate,bench,hoptable}``.

Exit status is 0 on success, 2 on invalid input and 1 on any other failure.
Diagnostics go to stderr; results go to the files named by ``--out`` (or to
stdout for ``estimate`` without ``--out``).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .bench import (
    AlgoSpec,
    ScenarioError,
    TableCache,
    draw_scene,
    load_scenario,
    run_bench,
    trial_streams,
    with_overrides,
)
from .direct import direct_estimate
from .frameio import FrameFileHeader, FrameFormatError, TruthRecord, read_frames, write_frames, write_truth_track
from .hopping import hop_estimate
from .indirect import indirect_estimate
from .interp import HopTableError, InterpScheme, write_hop_table
from .synth import NoiseSpec, synthesize_frame

log = logging.getLogger("gridhop")

# Nominal frame period used to timestamp simulated truth tracks.
FRAME_PERIOD_S = 0.06


class UsageError(ValueError):
    pass


def _common(p: argparse.ArgumentParser, out_help: str):
    p.add_argument("--scenario", required=True, metavar="PATH", help="scenario file (INI key = value sections)")
    p.add_argument("--out", metavar="PATH", help=out_help)
    p.add_argument("--seed", type=int, metavar="N", help="override the scenario seed")
    p.add_argument("--density", type=float, metavar="D", help="location grid density (overrides the sweep)")
    p.add_argument("--scheme", choices=[s.value for s in InterpScheme], help="hop interpolation scheme")
    p.add_argument("--oversample", type=int, metavar="N", help="hop FFT range oversampling factor")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridhop", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate frames for a scenario into an MRF1 file",
                       description="SNR is per complex sample, relative to the target's |alpha|^2.")
    _common(p, "MRF1 output file (truth track written next to it as <out>.truth)")
    p.add_argument("--snr", type=float, metavar="DB", help="override the SNR (default: first scenario SNR)")

    p = sub.add_parser("estimate", help="run one estimator over the frames of an MRF1 file")
    _common(p, "CSV of estimates (default: stdout)")
    p.add_argument("--frames", required=True, metavar="PATH", help="MRF1 input file")
    p.add_argument("--algo", choices=["indirect", "direct", "hop"], default="hop")
    p.add_argument("--hoptable", action="append", default=[], metavar="PATH", help="GHT1 table to reuse")

    p = sub.add_parser("bench", help="Monte Carlo comparison; writes trials.csv and summary.csv",
                       description="SNR is per complex sample, relative to the target's |alpha|^2.")
    _common(p, "output directory")
    p.add_argument("--algo", choices=["indirect", "direct", "hop"], help="run only this algorithm")
    p.add_argument("--threads", type=int, metavar="N", help="worker threads")
    p.add_argument("--hoptable", action="append", default=[], metavar="PATH", help="GHT1 table to reuse")
    p.add_argument("--no-timing", action="store_true",
                   help="skip timing (timing columns become 0, making the CSVs reproducible byte for byte)")

    p = sub.add_parser("hoptable", help="precompute a GHT1 hop table for a scenario grid")
    _common(p, "GHT1 output file")
    return parser


def _scenario(args):
    sc = load_scenario(args.scenario)
    kw = {"seed": args.seed}
    if args.density is not None:
        kw["densities"] = (args.density,)
    if getattr(args, "threads", None) is not None:
        kw["threads"] = args.threads
    if getattr(args, "no_timing", False):
        kw["timing"] = False
    try:
        sc = with_overrides(sc, **kw)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    return sc


def _hop_spec(sc, args) -> AlgoSpec:
    base = next((a for a in sc.algorithms if a.kind == "hop"), AlgoSpec("hop", "hop"))
    scheme = args.scheme or base.scheme.value
    P = args.oversample or base.oversample
    label = "hop" if (args.scheme is None and args.oversample is None) else f"hop:{scheme}:{P}"
    return AlgoSpec.parse(label, scheme, P)


def _require_out(args):
    if not args.out:
        raise UsageError(f"{args.command}: --out is required")
    return Path(args.out)


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    out = _require_out(args)
    if sc.mode == "exact":
        raise ScenarioError("simulate needs a fixed geometry; scene mode 'exact' draws one per trial")
    snr = args.snr if args.snr is not None else sc.snr_db[0]
    grid, vgrid = sc.location_grid(sc.densities[0]), sc.velocity_grid()
    frames, truth = [], []
    for t in range(sc.trials):
        rng, noise_seed = trial_streams(sc.seed, t)
        geom, target, gains = draw_scene(sc, grid, vgrid, rng)
        frames.append(synthesize_frame(sc.cfg, geom, [target], NoiseSpec(snr, noise_seed), gains))
        truth.append(TruthRecord(t * FRAME_PERIOD_S, target.x, target.v))
    write_frames(out, FrameFileHeader.for_scene(sc.cfg, sc.geom, len(frames)), frames)
    write_truth_track(str(out) + ".truth", truth)
    log.info("wrote %d frames to %s", len(frames), out)
    return 0


def cmd_estimate(args) -> int:
    sc = _scenario(args)
    header, frames = read_frames(args.frames)
    cfg = header.config(sc.cfg.c)
    geom = header.geometry()
    grid, vgrid = sc.location_grid(sc.densities[0]), sc.velocity_grid()
    sc = with_overrides(sc, cfg=cfg)
    table = None
    if args.algo == "hop":
        table = TableCache(args.hoptable).get(grid, geom, cfg, _hop_spec(sc, args))
    rows = []
    for n, frame in enumerate(frames):
        if args.algo == "indirect":
            est = indirect_estimate(frame, (grid, vgrid), geom, cfg,
                                    sc.indirect_range_oversample, sc.indirect_doppler_oversample)
        elif args.algo == "direct":
            est = direct_estimate(frame, (grid, vgrid), geom, cfg)
        else:
            est = hop_estimate(frame, table, vgrid, geom, cfg, sc.hop_doppler_oversample)
        rows.append([n, args.algo, *(repr(float(c)) for c in (*est.x, *est.v)), est.online_ns])
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "algorithm", "est_x0", "est_x1", "est_v0", "est_v1", "t_online_ns"])
        w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_bench(args) -> int:
    sc = _scenario(args)
    out = _require_out(args)
    if args.algo or args.scheme or args.oversample:
        if args.algo in (None, "hop"):
            hop = _hop_spec(sc, args)
            algos = tuple(a for a in sc.algorithms if a.kind != "hop") if args.algo is None else ()
            algos = algos + (hop,)
        else:
            algos = (AlgoSpec.parse(args.algo),)
        sc = with_overrides(sc, algorithms=algos)
    records = run_bench(sc, out, TableCache(args.hoptable))
    log.info("wrote %d trial records to %s", len(records), out)
    return 0


def cmd_hoptable(args) -> int:
    sc = _scenario(args)
    out = _require_out(args)
    if sc.mode == "exact":
        raise ScenarioError("hoptable needs a fixed geometry; scene mode 'exact' draws one per trial")
    spec = _hop_spec(sc, args)
    grid = sc.location_grid(sc.densities[0])
    table = TableCache().get(grid, sc.geom, sc.cfg, spec)
    write_hop_table(out, table)
    log.info("wrote %s table (P=%d, %d bins x %d receivers) to %s in %.1f ms", spec.scheme.value,
             spec.oversample, table.n_bins, table.Q, out, table.build_ns / 1e6)
    return 0


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "bench": cmd_bench, "hoptable": cmd_hoptable}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ScenarioError, UsageError, FrameFormatError, HopTableError) as exc:
        print(f"gridhop: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"gridhop: error: no such file: {exc.filename}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"gridhop: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
