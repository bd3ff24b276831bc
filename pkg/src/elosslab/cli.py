"""Command-line entry point: ``elosslab <group> <action> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .tasks.config import ConfigError
from .tasks.io import FormatError, read_config, write_csv
from .tasks.runners import replay, run_command

log = logging.getLogger("elosslab")

# (group, action) -> [(flag, config key, type, help)]
_OPTIONS = {
    ("shapes", "gen"): [("--n-vertices", "n_vertices", int, "polygon vertex count (default 5)"),
                        ("--theta-aug", "theta_aug", float, "max rotation in radians (default pi)"),
                        ("--size", "size", int, "number of samples (default 10000)")],
    ("shapes", "train"): [("--loss", "loss", str, "mse | energy | kabsch | sparse-energy"),
                          ("--coeff", "coeff", str, "coefficient scheme, e.g. exponential:1.0"),
                          ("--epochs", "epochs", int, None), ("--lr", "lr", float, None),
                          ("--batch-size", "batch_size", int, None),
                          ("--n-vertices", "n_vertices", int, None),
                          ("--theta-aug", "theta_aug", float, None)],
    ("shapes", "eval"): [("--run", "run", str, "directory of a finished shapes train run"),
                         ("--data", "data", str, "dataset file from 'shapes gen'")],
    ("spins", "gen"): [("--L", "L", int, "lattice side (default 4)"),
                       ("--size", "size", int, "number of Hamiltonians (default 2000)")],
    ("spins", "train"): [("--loss", "loss", str, "cross-entropy | margin | local-energy | true-energy"),
                         ("--epochs", "epochs", int, None), ("--lr", "lr", float, None),
                         ("--batch-size", "batch_size", int, None), ("--L", "L", int, None),
                         ("--h0", "h0", float, None), ("--T", "T", float, None)],
    ("spins", "eval"): [("--run", "run", str, "directory of a finished spins train run"),
                        ("--data", "data", str, "dataset file from 'spins gen'")],
    ("rigidity", "sample"): [("--n", "n", int, "node count (default 50)"),
                             ("--d", "d", int, "dimension (default 2)"),
                             ("--pool-size", "pool_size", int, "number of edge sets (default 16)")],
    ("rigidity", "check"): [("--edges", "edges", str, "edge file from 'rigidity sample'"),
                            ("--d", "d", int, "dimension (default 2)")],
    ("score-lab", "run"): [("--sigma-t", "sigma_t", float, "noise level (default 0.05)"),
                           ("--mc-samples", "mc_samples", int, "posterior samples per estimate (default 64)"),
                           ("--trials", "trials", int, "estimates per batch (default 50)"),
                           ("--batches", "batches", int, "trial batches (default 200)"),
                           ("--density", "density", str, "pair-distance-gaussian | isotropic-gaussian")],
    ("bench", "losses"): [("--sizes", "sizes", str, "comma-separated cloud sizes"),
                          ("--repeats", "repeats", int, "timed repeats per size (default 5)")],
}
_SEED_OPTIONAL = {("shapes", "eval"), ("spins", "eval"), ("bench", "losses")}
_TRAIN = {("shapes", "train"), ("spins", "train")}


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", help="key=value config file; flags override it")
    p.add_argument("--seed", type=int, metavar="U64", help="master seed (required for generation and training)")
    p.add_argument("--out", metavar="DIR", help="output directory (default runs/<group>-<action>)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="extra config entry, repeatable")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elosslab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"elosslab {__version__}")
    groups = parser.add_subparsers(dest="group", metavar="GROUP", required=True)
    common = _common()
    sub_by_group = {}
    for (group, action), opts in _OPTIONS.items():
        if group not in sub_by_group:
            gp = groups.add_parser(group, help=f"{group} commands")
            sub_by_group[group] = gp.add_subparsers(dest="action", metavar="ACTION", required=True)
        ap = sub_by_group[group].add_parser(action, parents=[common], help=f"{group} {action}")
        for flag, key, kind, help_text in opts:
            ap.add_argument(flag, dest=f"opt_{key}", type=kind, help=help_text)
        if (group, action) in _TRAIN:
            ap.add_argument("--lr-grid", metavar="LR,LR,...",
                            help="train once per learning rate into DIR/lr_<value>")
            ap.add_argument("--svg", action="store_true", help="also write an SVG metric curve")
    rp = groups.add_parser("replay", help="re-run a saved manifest")
    rp.add_argument("manifest", help="manifest.txt of an earlier run")
    rp.add_argument("--out", required=True, metavar="DIR")
    rp.add_argument("-v", "--verbose", action="store_true")
    return parser


def _collect_config(args, parser) -> dict:
    config = read_config(args.config) if args.config else {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            parser.error(f"--set expects KEY=VALUE, got {item!r}")
        config[key.strip()] = value.strip()
    for name, value in vars(args).items():
        if name.startswith("opt_") and value is not None:
            config[name[4:]] = str(value)
    if args.seed is not None:
        config["seed"] = str(args.seed)
    if getattr(args, "svg", False):
        config["svg"] = "1"
    return config


def _lr_sweep(command, config, out: Path, grid: str) -> None:
    rows = []
    for text in grid.split(","):
        lr = float(text)
        m = run_command(command, dict(config, lr=repr(lr)), out / f"lr_{lr!r}")
        rows.append({"lr": lr, **m.metrics})
        print(f"lr={lr!r}: " + ", ".join(f"{k}={v:.6g}" for k, v in m.metrics.items()))
    write_csv(out / "lr_sweep.csv", list(rows[0]), rows)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.group == "replay":
            m = replay(args.manifest, args.out)
        else:
            key = (args.group, args.action)
            config = _collect_config(args, parser)
            if key not in _SEED_OPTIONAL and "seed" not in config:
                parser.error("an explicit --seed (or 'seed' in --config) is required for reproducibility")
            command = f"{args.group}-{args.action}"
            out = Path(args.out or Path("runs") / command)
            if getattr(args, "lr_grid", None):
                _lr_sweep(command, config, out, args.lr_grid)
                return 0
            m = run_command(command, config, out)
    except (ConfigError, FormatError, ValueError, OSError, KeyError) as exc:
        print(f"elosslab: error: {exc}", file=sys.stderr)
        return 1
    for k, v in m.metrics.items():
        print(f"{k} = {v:.6g}" if isinstance(v, float) else f"{k} = {v}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
