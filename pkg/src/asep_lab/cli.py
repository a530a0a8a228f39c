"""Command-line batch runner.

    asep-lab CONFIG [-o OUTDIR] [--seed S] [--replicas R] [--threads T]
                    [--dry-run] [--trace PATH]

Writes ``<experiment>__<observable>.csv`` per observable and covariance with
header ``experiment,observable,checkpoint_t,replica_stat,value,ci_low,ci_high,n``,
and ``acceptance.json`` listing every [expect] entry. Exit codes: 0 all
acceptance entries pass, 1 some entry fails, 2 config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .experiments import violations
from .stats import (Accumulator, InsufficientData, covariance_arrays, ks_gaussian, report,
                    run_replicas, second_moment_ci)

HEADER = ["experiment", "observable", "checkpoint_t", "replica_stat", "value",
          "ci_low", "ci_high", "n"]
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
REPORT_FORMAT = "asep-lab-acceptance/1"


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def observable_rows(name, obs_id, t, samples):
    n = samples.size
    rows = []
    try:
        rep = report_samples(samples)
    except InsufficientData:
        return [[name, obs_id, _fmt(t), "mean", _fmt(samples.mean() if n else None), "", "", n]]
    rows.append([name, obs_id, _fmt(t), "mean", _fmt(rep["mean"]), *map(_fmt, rep["mean_ci"]), n])
    rows.append([name, obs_id, _fmt(t), "var", _fmt(rep["var"]), *map(_fmt, rep["var_ci"]), n])
    rows.append([name, obs_id, _fmt(t), "skewness", _fmt(rep["skewness"]), "", "", n])
    rows.append([name, obs_id, _fmt(t), "kurtosis", _fmt(rep["kurtosis"]), "", "", n])
    rows.append([name, obs_id, _fmt(t), "second_moment", _fmt(rep["second_moment"]),
                 *map(_fmt, rep["second_moment_ci"]), n])
    if n >= 100 and rep["var"] > 0:
        rows.append([name, obs_id, _fmt(t), "ks_pvalue", _fmt(ks_gaussian(samples)["pvalue"]),
                     "", "", n])
    return rows


def report_samples(samples: np.ndarray) -> dict:
    rep = report(Accumulator().extend(samples))
    m, lo, hi = second_moment_ci(samples)
    rep["second_moment"] = m
    rep["second_moment_ci"] = (lo, hi)
    return rep


def measure(expect, cfg: ExperimentConfig, result) -> tuple[float, tuple | None]:
    if expect.stat == "cov":
        cov = next(c for c in cfg.covariances if c.id == expect.target)
        res = covariance_arrays(_samples(cfg, result, cov.a), _samples(cfg, result, cov.b))
        return res["cov"], res["ci"]
    name, t = expect.target.split("@")
    x = _samples(cfg, result, (name, float(t)))
    if expect.stat == "ks_pvalue":
        return ks_gaussian(x)["pvalue"], None
    rep = report_samples(x)
    ci = rep.get(f"{expect.stat}_ci")
    return rep[expect.stat], ci


def _samples(cfg, result, ref):
    name, t = ref
    j = min(range(len(cfg.experiment.checkpoints)),
            key=lambda k: abs(cfg.experiment.checkpoints[k] - t))
    return result.samples[name][:, j]


@dataclass
class Outcome:
    code: int
    result: object
    entries: list


def run(config_path, out_dir, seed=None, replicas=None, threads=1, dry_run=False,
        trace=None, stream=None) -> int:
    stream = stream or sys.stdout
    try:
        cfg = load_config(config_path, seed=seed, replicas=replicas)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    exp = cfg.experiment
    if dry_run:
        events = exp.expected_events() * cfg.replicas
        print(f"experiment {exp.name}: L={exp.params.L} "
              f"horizon={exp.params.horizon:g} replicas={cfg.replicas} "
              f"estimated_events={events:.3g}", file=stream)
        return EXIT_OK
    if trace is not None:
        with open(trace, "wb") as fh:
            exp.run_one(exp.plan(1, cfg.master_seed).seeds()[0], trace=fh)
    return execute(cfg, out_dir, threads, stream).code


def execute(cfg: ExperimentConfig, out_dir, threads=1, stream=None) -> Outcome:
    """Simulate every replica, write the CSVs and the acceptance report."""
    stream = stream or sys.stdout
    exp = cfg.experiment
    result = run_replicas(exp.plan(cfg.replicas, cfg.master_seed), threads=threads)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for spec in exp.observables:
        rows = []
        for j, t in enumerate(exp.checkpoints):
            rows += observable_rows(exp.name, spec.id, t, result.samples[spec.id][:, j])
        _write_csv(out / f"{exp.name}__{spec.id}.csv", rows)
    for cov in cfg.covariances:
        res = covariance_arrays(_samples(cfg, result, cov.a), _samples(cfg, result, cov.b))
        rows = [[exp.name, cov.id, _fmt(cov.b[1]), "cov", _fmt(res["cov"]),
                 *map(_fmt, res["ci"]), res["n"]]]
        _write_csv(out / f"{exp.name}__{cov.id}.csv", rows)

    entries = []
    bad_paths = violations(result)
    for e in cfg.expectations:
        value, ci = measure(e, cfg, result)
        entries.append({"name": e.name, "experiment": exp.name, "target": e.target,
                        "stat": e.stat, "measured": value, "ci": list(ci) if ci else None,
                        "expected": e.value, "tolerance": e.tolerance,
                        "pass": e.passes(value, ci)})
    entries.append({"name": "pathwise_identities", "experiment": exp.name,
                    "target": "conservation+tagged_current_relation", "stat": "violations",
                    "measured": bad_paths, "ci": None, "expected": 0,
                    "tolerance": {"abs_tol": 0}, "pass": bad_paths == 0})
    with open(out / "acceptance.json", "w") as fh:
        json.dump({"format": REPORT_FORMAT, "entries": entries}, fh, indent=2)
        fh.write("\n")
    for entry in entries:
        status = "PASS" if entry["pass"] else "FAIL"
        print(f"{status} {exp.name}:{entry['name']} measured={entry['measured']!r} "
              f"expected={entry['expected']!r}", file=stream)
    code = EXIT_OK if all(e["pass"] for e in entries) else EXIT_FAIL
    return Outcome(code, result, entries)


def _write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        w.writerows(rows)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="asep-lab", description=__doc__.splitlines()[0])
    ap.add_argument("config", help="experiment config (INI grammar, see asep_lab.config)")
    ap.add_argument("-o", "--output", default="results", help="output directory")
    ap.add_argument("--seed", type=int, help="override master_seed")
    ap.add_argument("--replicas", type=int, help="override replica count")
    ap.add_argument("--threads", type=int, default=1, help="max concurrent replicas")
    ap.add_argument("--dry-run", action="store_true", help="validate and estimate cost only")
    ap.add_argument("--trace", help="write a binary event trace of replica 0 here")
    args = ap.parse_args(argv)
    return run(args.config, args.output, seed=args.seed, replicas=args.replicas,
               threads=args.threads, dry_run=args.dry_run, trace=args.trace)


if __name__ == "__main__":
    sys.exit(main())
