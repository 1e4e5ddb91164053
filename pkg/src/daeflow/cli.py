"""``daeflow`` command line: experiment data files and the ``verify`` self-check.

Exit codes: 0 success, 1 configuration error, 2 numerical failure, and 3
when ``verify`` ran but some checks failed. Errors print one line to stderr
starting with ``error[config]:`` or ``error[numerical]:``.
"""

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import experiments
from .config import load_config
from .errors import ConfigError, NumericalError

COMMANDS = ("orbit", "variance-decay", "entropy", "ridgelet", "swissroll", "verify")

DEFAULT_OUT = {
    "orbit": "orbit.csv",
    "variance-decay": "variance_decay.csv",
    "entropy": "entropy.csv",
    "ridgelet": "ridgelet.json",
    "swissroll": "swissroll",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage problems are configuration errors
        raise ConfigError(message)


def build_parser():
    parser = _Parser(prog="daeflow", description="DAE transport-map experiments")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--seed", type=str)
        p.add_argument("--out", metavar="PATH")
        if name == "orbit":
            p.add_argument("--mode")
        if name in ("orbit", "variance-decay"):
            p.add_argument("--tau")
        if name in ("orbit", "variance-decay", "entropy"):
            p.add_argument("--t-max", dest="t_max")
            p.add_argument("--dt")
        if name == "variance-decay":
            p.add_argument("--train", action="store_const", const="true")
    return parser


# output --------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    _atomic_write(path, "\n".join(lines) + "\n")


def write_columns(path, cols):
    header = list(cols)
    data = np.column_stack([np.asarray(cols[h], dtype=float) for h in header])
    write_csv(path, header, data)


def write_json(path, doc):
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


# commands --------------------------------------------------------------------------


def cmd_orbit(cfg):
    times, positions, meta = experiments.orbit_table(cfg)
    dim = positions[0].shape[1]
    header = ["t", "particle_id"] + [f"x{i + 1}" for i in range(dim)]
    rows = []
    for t, pts in zip(times, positions):
        for pid, p in enumerate(pts):
            rows.append([float(t), pid, *p])
    out = cfg["out"]
    write_csv(out, header, rows)
    write_json(os.path.splitext(out)[0] + ".json", meta)
    return out


def cmd_variance_decay(cfg):
    write_columns(cfg["out"], experiments.variance_decay_table(cfg))
    return cfg["out"]


def cmd_entropy(cfg):
    write_columns(cfg["out"], experiments.entropy_table(cfg))
    return cfg["out"]


def cmd_ridgelet(cfg):
    write_json(cfg["out"], experiments.ridgelet_report(cfg))
    return cfg["out"]


SWISSROLL_FILES = ("X", "k0h0", "decoded", "phi0", "phi1phi0")


def cmd_swissroll(cfg):
    arrays, summary, _ = experiments.swissroll_run(cfg)
    out = cfg["out"]
    for name in SWISSROLL_FILES:
        write_csv(os.path.join(out, f"{name}.csv"), ["point_id", "x1", "x2"], [[i, *p] for i, p in enumerate(arrays[name])])
    write_json(os.path.join(out, "summary.json"), summary)
    return out


def cmd_verify(cfg):
    from .checks import run_checks

    results = run_checks(seed=cfg["seed"])
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if failed:
        print("failed: " + ", ".join(failed))
    return 0 if not failed else 3


HANDLERS = {
    "orbit": cmd_orbit,
    "variance-decay": cmd_variance_decay,
    "entropy": cmd_entropy,
    "ridgelet": cmd_ridgelet,
    "swissroll": cmd_swissroll,
}


def run(argv):
    args = build_parser().parse_args(argv)
    if args.command is None:
        raise ConfigError("a command is required: " + " | ".join(COMMANDS))
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    cfg = load_config(args.command, args.config, overrides)
    if args.command == "verify":
        return cmd_verify(cfg)
    if cfg["out"] is None:
        cfg.values["out"] = DEFAULT_OUT[args.command]
    print(HANDLERS[args.command](cfg))
    return 0


def main(argv=None):
    try:
        return run(sys.argv[1:] if argv is None else argv)
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"error[numerical]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
