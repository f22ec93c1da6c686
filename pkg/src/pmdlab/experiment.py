"""Experiment configs, parameter sweeps and result export."""
from __future__ import annotations

import csv
import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path


from . import instances as inst
from .mdp import load_mdp
from .policy_classes import class_from_dict
from .pmd import PmdConfig, run_pmd

log = logging.getLogger(__name__)

BUILTINS = ("fig1", "fig2-smoothness", "random")

FIG1_DEFAULTS = {"eta": 5e-5, "K": 2000, "initial": [1.0, 0.0]}
RANDOM_DEFAULTS = {"eta": 0.05, "K": 500}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    instance: dict
    pmd: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    seed: int | None = None
    rate_window: float = 0.5
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, data: dict, seed=None, base_dir="."):
        if "instance" not in data:
            raise ConfigError("config needs an 'instance' entry")
        unknown = set(data) - {"instance", "pmd", "sweep", "seed", "rate_window"}
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        inst_spec = data["instance"]
        if isinstance(inst_spec, str):
            inst_spec = {"builtin": inst_spec}
        cfg = cls(inst_spec, dict(data.get("pmd", {})), dict(data.get("sweep", {})),
                  data.get("seed") if seed is None else seed, float(data.get("rate_window", 0.5)),
                  Path(base_dir))
        cfg.validate()
        return cfg

    def validate(self):
        spec = self.instance
        if "builtin" in spec:
            if spec["builtin"] not in BUILTINS:
                raise ConfigError(f"unknown built-in instance {spec['builtin']!r}; "
                                  f"choose from {', '.join(BUILTINS)}")
            if spec["builtin"] == "random" and self.seed is None:
                raise ConfigError("random instances need a seed")
        elif not {"mdp", "class"} <= set(spec):
            raise ConfigError("instance needs 'builtin' or both 'mdp' and 'class' paths")
        for axis, vals in self.sweep.items():
            if axis not in ("eta", "eps_expl", "K"):
                raise ConfigError(f"cannot sweep over {axis!r}")
            if not isinstance(vals, list) or not vals:
                raise ConfigError(f"sweep axis {axis!r} needs a nonempty list")
        if not 0 < self.rate_window <= 1:
            raise ConfigError("rate_window must lie in (0, 1]")


def load_config(path, seed=None) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return ExperimentConfig.from_dict(data, seed, path.parent)


def resolve_instance(cfg: ExperimentConfig):
    """``(mdp, class, default pmd settings)`` for the configured source."""
    spec = dict(cfg.instance)
    name = spec.pop("builtin", None)
    if name == "fig1":
        return inst.fig1(spec.get("gamma", 0.99), spec.get("p", 0.01)), inst.fig1_hull(), FIG1_DEFAULTS
    if name == "random":
        mdp, cls = inst.generate_random_instance(spec.get("n_states", 4), spec.get("n_actions", 3),
                                                 spec.get("n_bases", 3), cfg.seed,
                                                 spec.get("gamma", 0.8))
        return mdp, cls, RANDOM_DEFAULTS
    mdp = load_mdp(cfg.base_dir / spec["mdp"])
    path = cfg.base_dir / spec["class"]
    try:
        cls_data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return mdp, class_from_dict(cls_data, mdp.n_states, mdp.n_actions), RANDOM_DEFAULTS


def cell_configs(cfg: ExperimentConfig, defaults: dict):
    base = {**defaults, **cfg.pmd}
    if cfg.seed is not None:
        base.setdefault("seed", cfg.seed)
    axes = sorted(cfg.sweep)
    out = []
    for combo in itertools.product(*(cfg.sweep[a] for a in axes)):
        params = {**base, **dict(zip(axes, combo))}
        try:
            pc = PmdConfig(**params)
        except TypeError as exc:
            raise ConfigError(f"bad pmd settings: {exc}") from None
        name = "_".join(f"{a}={v:g}" for a, v in zip(axes, combo)) or "base"
        out.append((name, pc))
    return out


def _run_cell(args):
    name, mdp, cls, pc, out, window = args
    run = run_pmd(mdp, cls, pc)
    run.to_csv(out / f"run_{name}.csv")
    run.write_summary(out / f"run_{name}.json", window)
    return name, run.summary(window), [r.k for r in run.records], run.gaps.tolist()


def _fig2_table(out: Path):
    from .plotting import plot_ratios
    from .verify.counterexamples import fig2_smoothness_ratio

    ps = [0.2, 0.1, 0.05, 0.02, 0.01]
    rows = [(p, p * p, fig2_smoothness_ratio(p), 1 / (8 * p)) for p in ps]
    with open(out / "fig2_smoothness.tsv", "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t")
        w.writerow(["p", "eps", "ratio", "bound"])
        for row in rows:
            w.writerow([repr(x) for x in row])
    plot_ratios([r[1] for r in rows], [r[2] for r in rows], [r[3] for r in rows],
                out / "fig2_smoothness.png")
    ok = all(r[2] >= r[3] for r in rows)
    (out / "summary.json").write_text(json.dumps(
        {"instance": "fig2-smoothness", "rows": [dict(zip(["p", "eps", "ratio", "bound"], r))
                                                 for r in rows], "all_above_bound": ok},
        indent=2, sort_keys=True))
    return ok


def _npg_baseline(mdp):
    from . import mdp as mdp_core
    from .verify.counterexamples import npg_floor_certificate, run_npg

    cls = inst.fig1_loglinear()
    thetas = run_npg(mdp, cls, eta=0.01, K=200, theta0=[2.0, 0.0])
    mu_star = mdp_core.occupancy(mdp, inst.constant_policy(0.5))
    cert = npg_floor_certificate(mdp, cls, thetas, mu_star)
    return {"eps_bias": cert["eps_bias"], "floor_certificate": cert["floor"],
            "final_value": cert["values"][-1], "horizon": mdp.horizon}


def run_experiment(cfg: ExperimentConfig, out, jobs: int = 1, with_verify: bool = False) -> int:
    """Run every sweep cell and write CSVs, summaries, gap TSV and figures under ``out``.

    Returns 0 on success and 1 if a verification report fails.
    """
    from .plotting import plot_gaps

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    status = 0
    if cfg.instance.get("builtin") == "fig2-smoothness":
        status = 0 if _fig2_table(out) else 1
    else:
        mdp, cls, defaults = resolve_instance(cfg)
        cells = cell_configs(cfg, defaults)
        args = [(name, mdp, cls, pc, out, cfg.rate_window) for name, pc in cells]
        if jobs > 1 and len(args) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                results = list(ex.map(_run_cell, args))
        else:
            results = [_run_cell(a) for a in args]
        results.sort(key=lambda r: r[0])
        summary = {"instance": cfg.instance, "seed": cfg.seed,
                   "cells": {name: s for name, s, _, _ in results}}
        if cfg.instance.get("builtin") == "fig1":
            summary["npg_baseline"] = _npg_baseline(mdp)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
        with open(out / "gaps.tsv", "w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t")
            w.writerow(["cell", "k", "gap"])
            for name, _, ks, gaps in results:
                for k, g in zip(ks, gaps):
                    w.writerow([name, k, repr(g)])
        plot_gaps({name: (ks, gaps) for name, _, ks, gaps in results}, out / "gaps.png")
    if with_verify:
        from .verify.suite import run_suite

        reports = run_suite(cfg.seed or 0)
        (out / "verify.json").write_text(json.dumps([r.to_dict() for r in reports], indent=2))
        if not all(r.passed for r in reports):
            status = 1
    return status
