"""Command-line entry point: ``corrtomo <subcommand> [options]``."""

import argparse
import json
import logging
import sys
import warnings

from .scenarios import ConfigError, ScenarioConfig, run_scenario

SUBCOMMANDS = {
    "calibrate": "calibrate",
    "sweep-crossover": "crossover-sweep",
    "corr-variance": "corr-variance",
    "state-tomo": "state-tomo",
    "process-tomo": "process-tomo",
    "channelize": "channelize",
    "bench": "channelizer-bench",
}


def _global_flags(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="scenario JSON config")
    p.add_argument("--seed", type=int, default=d, help="RNG seed (unsigned 64-bit)")
    p.add_argument("--out", default=d, help="output directory")
    p.add_argument("--threads", type=int, default=d, help="worker threads for compiled kernels")
    p.add_argument("--json", action="store_true", default=argparse.SUPPRESS if suppress else False,
                   help="print the report as JSON instead of a table")


def build_parser():
    parser = argparse.ArgumentParser(prog="corrtomo", description=__doc__)
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    parents = argparse.ArgumentParser(add_help=False)
    _global_flags(parents, suppress=True)

    p = sub.add_parser("calibrate", parents=[parents], help="fit a matched-filter kernel")
    p.add_argument("--records", help="record file with channel 0 = ground, channel 1 = excited shots")
    p.add_argument("--shots", type=int, help="simulated calibration shots per state")

    p = sub.add_parser("sweep-crossover", parents=[parents], help="soft vs threshold variance sweep")
    p.add_argument("--snr-min", type=float)
    p.add_argument("--snr-max", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--shots", type=int)
    p.add_argument("--reps", type=int)

    p = sub.add_parser("corr-variance", parents=[parents], help="correlated-record variance table")
    p.add_argument("--shots", type=int)

    for name in ("state-tomo", "process-tomo"):
        p = sub.add_parser(name, parents=[parents], help=f"{name.split('-')[0]} tomography of ZX(-pi/2)")
        p.add_argument("--shots", type=int, help="shots per configuration")
        p.add_argument("--sampler", choices=["values", "records"])
        p.add_argument("--noiseless", action="store_true", default=None)
        if name == "state-tomo":
            p.add_argument("--manifest", help="reconstruct from an experiment manifest")
            p.add_argument("--save-values", action="store_true", default=None)

    p = sub.add_parser("channelize", parents=[parents], help="split a digitizer stream into channels")
    p.add_argument("--input", help="stream record file (real part of channel 0)")
    p.add_argument("--channel", action="append", metavar="IF_HZ:BW_HZ:DECIM",
                   help="channel spec, repeat once per channel")

    p = sub.add_parser("bench", parents=[parents], help="channelizer accuracy and throughput")
    return parser


def config_from_args(args):
    base = json.loads(open(args.config).read()) if args.config else {}
    base["scenario"] = SUBCOMMANDS[args.command]

    def put(path, value):
        if value is None:
            return
        node = base
        *head, last = path.split(".")
        for h in head:
            node = node.setdefault(h, {})
        node[last] = value

    put("seed", args.seed)
    put("output_dir", args.out)
    put("threads", args.threads)
    g = vars(args).get
    put("input", g("records") or g("input"))
    put("channels", g("channel"))
    put("sweep.snr_min", g("snr_min"))
    put("sweep.snr_max", g("snr_max"))
    put("sweep.points", g("points"))
    put("shots.reps", g("reps"))
    if args.command == "calibrate":
        put("shots.calibration", g("shots"))
    elif args.command == "corr-variance":
        put("shots.corr", g("shots"))
    else:
        put("shots.per_config", g("shots"))
    put("tomography.sampler", g("sampler"))
    put("tomography.noiseless", g("noiseless"))
    put("tomography.manifest", g("manifest"))
    put("tomography.save_values", g("save_values"))
    return ScenarioConfig.from_dict(base)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    warnings.filterwarnings("ignore", module="numba")
    try:
        cfg = config_from_args(args)
        report = run_scenario(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if getattr(args, "json", False):
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        print(report.table())
    return 0


if __name__ == "__main__":
    sys.exit(main())
