"""Command-line entry point: run, analyze, probe, render.

Exit codes: 0 success, 1 configuration problem (single machine-parsable
error line), 2 runtime failure (last-snapshot path printed when available).
"""

import argparse
import sys
from pathlib import Path

from .config import load_config
from .driver import PROBE_IDS, analyze_run, execute_run, render_run, run_probe
from .errors import ArgumentError, ConfigError, StepFailureError


def _build_parser():
    p = argparse.ArgumentParser(prog="bqpatch",
                                description="Boussinesq temperature-patch simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a configured simulation")
    run_p.add_argument("--config", required=True, metavar="PATH")
    run_p.add_argument("--out", metavar="DIR", default=None)

    an_p = sub.add_parser("analyze", help="recompute diagnostics from snapshots")
    an_p.add_argument("run_dir", metavar="RUNDIR")
    an_p.add_argument("--out", metavar="DIR", default=None)

    pr_p = sub.add_parser("probe", help="run an inequality probe ensemble")
    pr_p.add_argument("--lemma", required=True, metavar="ID", dest="probe_id",
                      help=f"one of: {', '.join(PROBE_IDS)}")
    pr_p.add_argument("--config", metavar="PATH", default=None)
    pr_p.add_argument("--out", metavar="DIR", default="probe_out")
    pr_p.add_argument("--ensemble-size", type=int, default=64, metavar="N")
    pr_p.add_argument("--seed", type=int, default=20240, metavar="S")
    pr_p.add_argument("--base-n", type=int, default=None, metavar="RES")

    re_p = sub.add_parser("render", help="write grayscale images of a run")
    re_p.add_argument("run_dir", metavar="RUNDIR")
    re_p.add_argument("--out", metavar="DIR", default=None)
    return p


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            out = args.out or cfg.get("outputs", "directory")
            state, _, out_path = execute_run(cfg, out)
            print(f"run complete: t={state.t:.6g} -> {out_path}")
        elif args.command == "analyze":
            out = analyze_run(args.run_dir, args.out)
            print(f"analysis written to {out}")
        elif args.command == "probe":
            cfg = load_config(args.config) if args.config else None
            seed = args.seed
            base_n = args.base_n
            if cfg is not None:
                seed = cfg.get("seeds", "main") if args.seed == 20240 else args.seed
                base_n = base_n or cfg.get("grid", "n")
            report, path = run_probe(args.probe_id, args.out, seed=seed,
                                     size=args.ensemble_size, base_n=base_n,
                                     cfg=cfg)
            print(f"probe {args.probe_id}: max_ratio={report.max_ratio:.6g} "
                  f"growth={report.growth_factor:.4f} -> {path}")
        elif args.command == "render":
            written = render_run(args.run_dir, args.out)
            print(f"wrote {len(written)} images")
    except (ConfigError, ArgumentError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StepFailureError as exc:
        snap = exc.diagnostics.get("last_snapshot", "<none>")
        print(f"runtime failure: {exc} (last snapshot: {snap})", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
