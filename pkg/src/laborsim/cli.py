"""Reproducible experiment runner.

Subcommands: ``simulate`` (observational dataset), ``evaluate`` (oracle
risk tables), ``fit`` (transition models to JSON), ``compare``
(naive/g-comp/ICE vs oracle bias report), ``serve`` (HTTP session
service). Every command is a pure function of (config, seed): rerunning
with the same inputs reproduces each output file byte for byte, which the
emitted manifest (config hash + output hashes) makes checkable.

Exit codes: 0 ok, 2 usage or config error, 3 data error, 4 fit
non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys

from . import __version__
from .coarse import cell_to_state, distress_cell, initial_support
from .config import ScmConfig, config_from_json_dict, default_config
from .dataset import write_dataset
from .datagen import generate_dataset, positivity_report
from .errors import (
    ConfigError,
    DataFormatError,
    LaborSimError,
    NonConvergenceError,
    PositivityError,
    SeparationError,
)
from .estimands import builtin_estimand, builtin_label
from .estimators import (
    fit_gcomp,
    fit_naive,
    gcomp_predict,
    ice_estimate,
    split_by_person,
)
from .oracle import kernel_for, oracle_exact, risk_profile
from .policy import default_policy, policy_from_json_dict, policy_to_json_dict
from .regimes import VaginalOnly, regime_from_json_dict
from .rng import substream
from .states import MODE_COARSE

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NONCONVERGENCE = 4


# --- experiment config -----------------------------------------------------

_EXPERIMENT_KEYS = {
    "scm", "mode", "policy", "seed", "n_persons", "n_mc", "estimands",
    "conditions", "compare", "positivity",
}


class Experiment:
    """Parsed experiment configuration (see docs/formats.md)."""

    def __init__(self, data: dict, seed_override: int | None = None,
                 mode_override: str | None = None):
        unknown = set(data) - _EXPERIMENT_KEYS
        if unknown:
            raise ConfigError(f"unknown experiment keys {sorted(unknown)}")
        seed = seed_override if seed_override is not None else data.get("seed")
        if seed is None:
            raise ConfigError("a seed is mandatory (no wall-clock seeding)")
        self.seed = int(seed)
        if "scm" in data:
            scm = dict(data["scm"])
            if mode_override:
                raise ConfigError("--mode cannot override an explicit scm block")
            scm.setdefault("seed", self.seed)
            self.scm = config_from_json_dict(scm)
        else:
            mode = mode_override or data.get("mode", MODE_COARSE)
            self.scm = default_config(mode, seed=self.seed)
        self.policy = (policy_from_json_dict(data["policy"])
                       if "policy" in data else default_policy())
        self.n_persons = int(data.get("n_persons", 10_000))
        self.n_mc = int(data.get("n_mc", 100_000))
        self.estimands = list(data.get("estimands", [1, 2, 3, 4, 5, 6, 7]))
        for eid in self.estimands:
            if eid not in range(1, 8):
                raise ConfigError(f"unknown estimand id {eid}")
        self.conditions = data.get("conditions", {"n_random": 5, "hours": [0]})
        self.compare = data.get("compare", {})
        self.positivity = data.get("positivity", {})
        self.raw = data

    def canonical_json(self) -> str:
        doc = {
            "scm": self.scm.to_json_dict(),
            "policy": policy_to_json_dict(self.policy),
            "seed": self.seed,
            "n_persons": self.n_persons,
            "n_mc": self.n_mc,
            "estimands": self.estimands,
            "conditions": self.conditions,
            "compare": self.compare,
            "positivity": self.positivity,
        }
        return json.dumps(doc, sort_keys=True)


def load_experiment(path: str, seed_override: int | None, mode_override: str | None) -> Experiment:
    if not os.path.exists(path):
        raise ConfigError(f"config file {path} does not exist")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return Experiment(data, seed_override, mode_override)


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir: str, exp: Experiment, filenames: list[str]) -> None:
    manifest = {
        "config_hash": hashlib.sha256(exp.canonical_json().encode()).hexdigest(),
        "seed": exp.seed,
        "versions": {"laborsim": __version__},
        "outputs": {name: _sha256(os.path.join(out_dir, name)) for name in sorted(filenames)},
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _conditions_for(exp: Experiment) -> list[tuple[int, object]]:
    """(condition_id, state) pairs from the experiment's conditions block."""
    cfg = exp.scm
    spec = exp.conditions
    out = []
    if isinstance(spec, list):
        for i, item in enumerate(spec):
            out.append((i, _parse_condition(item, cfg)))
        return out
    if not isinstance(spec, dict):
        raise ConfigError("conditions must be a list of states or a sampling block")
    n_random = int(spec.get("n_random", 5))
    hours = list(spec.get("hours", [0]))
    include_distress = bool(spec.get("include_distress", True))
    if cfg.mode != MODE_COARSE:
        raise ConfigError("random condition sampling is defined on the coarse grid; "
                          "list explicit conditions for continuous configs")
    cells = initial_support(cfg)
    rng = substream(exp.seed, "conditions")
    cid = 0
    if include_distress:
        out.append((cid, cell_to_state(distress_cell(), 0)))
        cid += 1
    all_cells = kernel_for(cfg).cells
    for _ in range(n_random):
        hour = int(hours[rng.integers(len(hours))])
        pool = cells if hour == 0 else all_cells
        cell = pool[rng.integers(len(pool))]
        out.append((cid, cell_to_state(cell, hour)))
        cid += 1
    return out


def _parse_condition(item: dict, cfg: ScmConfig):
    from .states import FHR_CATEGORIES, BP_CATEGORIES
    from .coarse import Cell
    if cfg.mode != MODE_COARSE:
        raise ConfigError("explicit conditions are currently supported for coarse configs")
    required = {"fhr", "dilatation", "sbp", "dbp"}
    missing = required - set(item)
    if missing:
        raise ConfigError(f"condition missing fields {sorted(missing)}")
    cell = Cell(FHR_CATEGORIES.index(item["fhr"]), int(item["dilatation"]),
                BP_CATEGORIES.index(item["sbp"]), BP_CATEGORIES.index(item["dbp"]))
    return cell_to_state(cell, int(item.get("k", 0)))


# --- subcommands -------------------------------------------------------------

def cmd_simulate(exp: Experiment, out_dir: str) -> int:
    ds = generate_dataset(exp.n_persons, exp.scm, exp.policy, exp.seed)
    write_dataset(ds, os.path.join(out_dir, "dataset.jsonl"))
    write_manifest(out_dir, exp, ["dataset.jsonl"])
    print(f"simulate: wrote {len(ds)} person-hours for {ds.n_persons} persons to {out_dir}")
    return EXIT_OK


def cmd_evaluate(exp: Experiment, out_dir: str) -> int:
    conditions = _conditions_for(exp)
    rows = []
    for cid, condition in conditions:
        methods = ["exact", "mc"] if exp.scm.mode == MODE_COARSE else ["mc"]
        for method in methods:
            estimates = risk_profile(exp.estimands, condition, exp.scm, exp.policy,
                                     method=method, n_mc=exp.n_mc, seed=exp.seed)
            for eid, est in zip(exp.estimands, estimates):
                rows.append({"estimand_id": eid, "k": condition.k, "condition_id": cid,
                             "method": est.method, "p": est.p, "se": est.se, "n": est.n})
    path = os.path.join(out_dir, "oracle_risks.csv")
    _write_csv(path, ["estimand_id", "k", "condition_id", "method", "p", "se", "n"], rows)
    with open(os.path.join(out_dir, "conditions.json"), "w", encoding="utf-8") as fh:
        json.dump([{"condition_id": cid, "k": c.k,
                    "cell": _cell_json(c)} for cid, c in conditions], fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(out_dir, exp, ["oracle_risks.csv", "conditions.json"])
    print(f"evaluate: wrote {len(rows)} oracle rows to {out_dir}")
    return EXIT_OK


def _cell_json(state) -> dict:
    from .states import FHR_CATEGORIES, BP_CATEGORIES
    return {"fhr": FHR_CATEGORIES[int(state.tv.fhr)], "dilatation": int(state.tv.dilatation),
            "sbp": BP_CATEGORIES[int(state.tv.sbp)], "dbp": BP_CATEGORIES[int(state.tv.dbp)]}


def cmd_fit(exp: Experiment, out_dir: str) -> int:
    ds = generate_dataset(exp.n_persons, exp.scm, exp.policy, exp.seed)
    train, _ = split_by_person(ds, 0.8, exp.seed)
    models = fit_gcomp(train)
    with open(os.path.join(out_dir, "models.json"), "w", encoding="utf-8") as fh:
        fh.write(models.to_json())
        fh.write("\n")
    write_manifest(out_dir, exp, ["models.json"])
    print(f"fit: wrote transition models ({models.n_rows} training rows) to {out_dir}")
    return EXIT_OK


def cmd_compare(exp: Experiment, out_dir: str) -> int:
    if exp.scm.mode != MODE_COARSE:
        raise ConfigError("compare runs against the exact oracle and requires coarse mode")
    estimand_ids = list(exp.compare.get("estimands", [1, 2, 5, 7]))
    methods = list(exp.compare.get("methods", ["naive", "gcomp", "ice"]))
    n_mc = int(exp.compare.get("n_mc", exp.n_mc))

    ds = generate_dataset(exp.n_persons, exp.scm, exp.policy, exp.seed)
    train, _ = split_by_person(ds, 0.8, exp.seed)
    models = fit_gcomp(train) if "gcomp" in methods else None
    naive = fit_naive(train, 0, exp.scm.horizon) if "naive" in methods else None

    conditions = [(cid, c) for cid, c in _conditions_for(exp) if c.k == 0]
    rows = []
    for eid in estimand_ids:
        spec = builtin_estimand(eid, 0, horizon=exp.scm.horizon)
        ice = ice_estimate(train, spec) if "ice" in methods else None
        for cid, condition in conditions:
            truth = oracle_exact(spec, condition, exp.scm, exp.policy).p
            for method in methods:
                if method == "naive":
                    est = naive.predict(condition)
                elif method == "gcomp":
                    rng = substream(exp.seed, "compare-gcomp", eid, cid)
                    est = gcomp_predict(models, condition, spec, n_mc=n_mc, rng=rng)
                elif method == "ice":
                    est = ice.predict(condition)
                else:
                    raise ConfigError(f"unknown compare method {method!r}")
                rows.append({"estimand_id": eid, "k": 0, "condition_id": cid,
                             "method": method, "p": est.p, "oracle_p": truth,
                             "bias": est.p - truth, "se": est.se, "n": est.n})
    path = os.path.join(out_dir, "comparison.csv")
    _write_csv(path, ["estimand_id", "k", "condition_id", "method", "p", "oracle_p",
                      "bias", "se", "n"], rows)
    summary = _summarize(rows, estimand_ids, methods, conditions, exp)
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(summary)
    write_manifest(out_dir, exp, ["comparison.csv", "summary.txt"])
    print(summary, end="")
    return EXIT_OK


def _summarize(rows, estimand_ids, methods, conditions, exp: Experiment) -> str:
    lines = [f"estimator vs exact-oracle comparison "
             f"(n_persons={exp.n_persons}, seed={exp.seed})", ""]
    lines.append(f"rows: {len(rows)} = {len(estimand_ids)} estimands x "
                 f"{len(conditions)} profiles x {len(methods)} methods")
    lines.append("")
    lines.append(f"{'estimand':<42}{'method':>8}{'max |bias|':>12}")
    for eid in estimand_ids:
        for method in methods:
            errs = [abs(r["bias"]) for r in rows
                    if r["estimand_id"] == eid and r["method"] == method]
            lines.append(f"{eid}: {builtin_label(eid):<39}{method:>8}{max(errs):>12.4f}")
    distress = [r for r in rows if r["condition_id"] == 0 and r["estimand_id"] == 2
                and r["method"] == "naive"]
    if distress:
        r = distress[0]
        lines.append("")
        lines.append(f"naive vs vaginal-only oracle at the distress profile: "
                     f"estimate {r['p']:.4f}, truth {r['oracle_p']:.4f}, "
                     f"gap {abs(r['bias']):.4f}")
    lines.append("")
    return "\n".join(lines)


def cmd_positivity(exp: Experiment, out_dir: str) -> int:
    regime = (regime_from_json_dict(exp.positivity["regime"])
              if "regime" in exp.positivity else VaginalOnly())
    threshold = int(exp.positivity.get("threshold", 5))
    ds = generate_dataset(exp.n_persons, exp.scm, exp.policy, exp.seed)
    report = positivity_report(ds, regime, threshold=threshold)
    report.to_csv(os.path.join(out_dir, "positivity.csv"))
    write_manifest(out_dir, exp, ["positivity.csv"])
    n_flag = int(report.flagged.sum())
    n_struct = len(report.structural_zero_rows())
    print(f"positivity: {len(report.hours)} cells, {n_flag} flagged, "
          f"{n_struct} structural zeros -> {out_dir}")
    return EXIT_OK


def _write_csv(path: str, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for row in rows:
            w.writerow(row)


def cmd_serve(args) -> int:
    import uvicorn
    from .estimators import TransitionModels
    from .service import create_app

    models = None
    if args.models:
        with open(args.models, "r", encoding="utf-8") as fh:
            models = TransitionModels.from_json_dict(json.load(fh))
    coarse_cfg = default_config(MODE_COARSE, seed=0)
    continuous_cfg = default_config(MODE_CONTINUOUS, seed=0)
    if args.config:
        exp = load_experiment(args.config, args.seed, None)
        if exp.scm.mode == MODE_COARSE:
            coarse_cfg = exp.scm
        else:
            continuous_cfg = exp.scm
    app = create_app(coarse_cfg=coarse_cfg, continuous_cfg=continuous_cfg,
                     models=models, console_dir=args.console)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="laborsim",
        description="simulate, evaluate, fit, compare, serve: what-if risks during labor")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--mode", choices=["coarse", "continuous"], default=None,
                       help="override the mode when no scm block is given")

    for name in ("simulate", "evaluate", "fit", "compare", "positivity"):
        common(sub.add_parser(name))

    serve = sub.add_parser("serve")
    serve.add_argument("--config", default=None)
    serve.add_argument("--seed", type=int, default=None)
    serve.add_argument("--models", default=None, help="fitted models JSON for side-by-side estimates")
    serve.add_argument("--console", default=None, help="static console build to mount at /console")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8645)
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
    "fit": cmd_fit,
    "compare": cmd_compare,
    "positivity": cmd_positivity,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "serve":
        return cmd_serve(args)
    try:
        exp = load_experiment(args.config, args.seed, args.mode)
        out_dir = args.out or f"run-{args.command}"
        os.makedirs(out_dir, exist_ok=True)
        return _COMMANDS[args.command](exp, out_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, PositivityError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NonConvergenceError, SeparationError) as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except LaborSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
