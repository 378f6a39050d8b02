"""Figure rendering for benchmark output directories.

Subcommands::

    mlopt-plots convergence --in <dir> --out <dir> [--skip-wall LABEL]...
    mlopt-plots grid        --in <dir> --out <dir>

``convergence`` consumes a comparison directory (one ``<solver>/trace.csv``
per solver) or a single run directory containing ``trace.csv``.  ``grid``
consumes snapshot dumps (``snapshots/snap_k####.pgm``), either directly or
one level down per solver.
"""

from __future__ import annotations

import argparse
import os
import re
import sys

from .convergence import plot_convergence
from .grid import plot_reconstruction_grid
from .traces import TraceFormatError, load_trace

_SNAP_RE = re.compile(r"snap_k(\d+)\.pgm$")


def discover_traces(in_dir):
    """(label, path) pairs: single-run dir or one subdir per solver."""
    direct = os.path.join(in_dir, "trace.csv")
    if os.path.exists(direct):
        return [(os.path.basename(os.path.normpath(in_dir)), direct)]
    found = []
    for name in sorted(os.listdir(in_dir)):
        candidate = os.path.join(in_dir, name, "trace.csv")
        if os.path.exists(candidate):
            found.append((name, candidate))
    return found


def discover_snapshots(in_dir):
    """``{label: {k: path}}`` for direct or per-solver snapshot layouts."""

    def scan(snap_dir):
        snaps = {}
        for name in sorted(os.listdir(snap_dir)):
            match = _SNAP_RE.search(name)
            if match:
                snaps[int(match.group(1))] = os.path.join(snap_dir, name)
        return snaps

    direct = os.path.join(in_dir, "snapshots")
    if os.path.isdir(direct):
        label = os.path.basename(os.path.normpath(in_dir))
        snaps = scan(direct)
        return {label: snaps} if snaps else {}
    groups = {}
    for name in sorted(os.listdir(in_dir)):
        snap_dir = os.path.join(in_dir, name, "snapshots")
        if os.path.isdir(snap_dir):
            snaps = scan(snap_dir)
            if snaps:
                groups[name] = snaps
    return groups


def cmd_convergence(args) -> int:
    pairs = discover_traces(args.in_dir)
    if not pairs:
        print(f"[mlopt-plots] no trace.csv found under {args.in_dir}",
              file=sys.stderr)
        return 1
    traces = [load_trace(path, label=label) for label, path in pairs]
    paths = plot_convergence(traces, args.out_dir,
                             skip_wall=tuple(args.skip_wall))
    for path in paths:
        print(f"[mlopt-plots] wrote {path}")
    return 0


def cmd_grid(args) -> int:
    groups = discover_snapshots(args.in_dir)
    if not groups:
        print(f"[mlopt-plots] no snapshots found under {args.in_dir}",
              file=sys.stderr)
        return 1
    out_path = os.path.join(args.out_dir, "reconstruction_grid.png")
    plot_reconstruction_grid(groups, out_path)
    print(f"[mlopt-plots] wrote {out_path}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlopt-plots",
        description="Render figures from mlopt benchmark outputs")
    sub = parser.add_subparsers(dest="command", required=True)

    conv = sub.add_parser("convergence",
                          help="relative objective vs iteration / wall time")
    conv.add_argument("--in", dest="in_dir", required=True)
    conv.add_argument("--out", dest="out_dir", required=True)
    conv.add_argument("--skip-wall", action="append", default=[],
                      metavar="LABEL",
                      help="omit this solver from the wall-time panel")

    grid = sub.add_parser("grid", help="reconstruction snapshot grid")
    grid.add_argument("--in", dest="in_dir", required=True)
    grid.add_argument("--out", dest="out_dir", required=True)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "convergence":
            return cmd_convergence(args)
        return cmd_grid(args)
    except (TraceFormatError, ValueError) as exc:
        print(f"[mlopt-plots] error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"[mlopt-plots] I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
