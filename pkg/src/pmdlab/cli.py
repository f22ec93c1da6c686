"""Command line: ``pmdlab run|verify|rate|gen``.

Exit codes: 0 ok, 1 a check or assertion failed, 2 bad input.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .mdp import MdpError, save_mdp
from .policy_classes import ClassError

log = logging.getLogger("pmdlab")


def _cmd_run(args):
    from .experiment import ExperimentConfig, load_config, run_experiment

    if args.config:
        cfg = load_config(args.config, args.seed)
    else:
        cfg = ExperimentConfig.from_dict({"instance": args.instance or "fig1"}, args.seed)
    status = run_experiment(cfg, args.out, jobs=args.jobs, with_verify=args.with_verify)
    summary = json.loads((Path(args.out) / "summary.json").read_text())
    for name, s in summary.get("cells", {}).items():
        rate = s["rate"] or {}
        print(f"{name}: final gap {s['final_gap']:.3e}  slope {rate.get('slope')}  "
              f"({rate.get('status', '-')})")
    if "npg_baseline" in summary:
        b = summary["npg_baseline"]
        print(f"log-linear NPG floor certificate {b['floor_certificate']:.1f} (H = {b['horizon']:.1f})")
    for row in summary.get("rows", []):
        print(f"p={row['p']:<6g} ratio {row['ratio']:.3f}  bound {row['bound']:.3f}")
    print(f"outputs in {args.out}")
    return status


def _cmd_verify(args):
    from .verify.suite import run_suite, summary_table

    reports = run_suite(args.seed or 0, n=args.n)
    payload = json.dumps([r.to_dict() for r in reports], indent=2)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "verify.json").write_text(payload)
    else:
        print(payload)
    print(summary_table(reports), file=sys.stderr)
    return 0 if all(r.passed for r in reports) else 1


def _cmd_rate(args):
    from .rates import fit_rate

    ks, gaps = [], []
    with open(args.csv, newline="") as fh:
        for row in csv.DictReader(fh):
            k = int(row["k"])
            if k > 0:
                ks.append(k)
                gaps.append(float(row["gap"]))
    print(json.dumps(fit_rate(ks, gaps, args.window).to_dict()))
    return 0


def _cmd_gen(args):
    from .instances import generate_random_instance

    mdp, cls = generate_random_instance(args.states, args.actions, args.bases, args.seed,
                                        args.gamma)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_mdp(mdp, out / "mdp.json")
    (out / "class.json").write_text(json.dumps(cls.to_dict()))
    print(f"wrote {out / 'mdp.json'} and {out / 'class.json'}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="pmdlab", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run PMD experiments")
    r.add_argument("--config", help="experiment JSON")
    r.add_argument("--instance", choices=["fig1", "fig2-smoothness"],
                   help="built-in instance when no config is given")
    r.add_argument("--seed", type=int)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", default="results")
    r.add_argument("--with-verify", action="store_true")
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("verify", help="run the lemma certification suite")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--n", type=int, default=50, help="random instances per check")
    v.add_argument("--out")
    v.set_defaults(func=_cmd_verify)

    f = sub.add_parser("rate", help="fit the tail log-log slope of a run CSV")
    f.add_argument("csv")
    f.add_argument("--window", type=float, default=0.5)
    f.set_defaults(func=_cmd_rate)

    g = sub.add_parser("gen", help="write a seeded random MDP and hull class")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--states", type=int, default=4)
    g.add_argument("--actions", type=int, default=3)
    g.add_argument("--bases", type=int, default=3)
    g.add_argument("--gamma", type=float, default=0.8)
    g.add_argument("--out", default=".")
    g.set_defaults(func=_cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (MdpError, ClassError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AssertionError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
