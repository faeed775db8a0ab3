#!/usr/bin/env python3
"""End-to-end checks of the command-line tool: exit codes, file outputs,
and the cross-command consistency promises."""

import json
import math
import subprocess
import sys
import tempfile
from pathlib import Path

CLI = sys.argv[1]
FAILED = []


def run(*args, expect=0):
    proc = subprocess.run([CLI, *args], capture_output=True, text=True)
    if proc.returncode != expect:
        raise AssertionError(
            f"{' '.join(args[:2])}: exit {proc.returncode}, expected {expect}\n"
            f"stdout: {proc.stdout}\nstderr: {proc.stderr}"
        )
    return proc


def check(name, fn):
    try:
        fn()
        print(f"[ok] {name}")
    except AssertionError as err:
        FAILED.append(name)
        print(f"[FAILED] {name}: {err}")


def write_discrete_csv(path):
    # three covariate cells; every cell has both arms inside and outside the
    # trial. The d2 indicator makes a linear model in (x1, d2) saturated.
    rows = ["participation,treatment,outcome,x1,d2"]
    cells = {
        0.0: {"count": 12, "arms": {1: [1.0, 2.0], 0: [3.0]}},
        1.0: {"count": 8, "arms": {1: [2.0], 0: [4.0, 6.0]}},
        2.0: {"count": 10, "arms": {1: [0.0, 1.0, 1.0], 0: [2.0, 2.0]}},
    }
    for x1, cell in cells.items():
        d2 = 1 if x1 == 2.0 else 0
        trial = 0
        for arm, outcomes in cell["arms"].items():
            for y in outcomes:
                rows.append(f"1,{arm},{y},{x1},{d2}")
                trial += 1
        for _ in range(cell["count"] - trial):
            rows.append(f"0,,,{x1},{d2}")
    path.write_text("\n".join(rows) + "\n")
    # plug-in estimands by hand
    n = sum(c["count"] for c in cells.values())
    plugin = {}
    for arm in (0, 1):
        plugin[arm] = sum(
            c["count"] / n * (sum(c["arms"][arm]) / len(c["arms"][arm]))
            for c in cells.values()
        )
    return plugin


def make_null_binary_csv(path, n=900, seed=3, incomplete=5):
    import random

    rng = random.Random(seed)
    rows = ["participation,treatment,outcome,x1,x2"]
    for i in range(n):
        x1, x2 = rng.gauss(0, 1), rng.gauss(0, 1)
        if i < incomplete:  # covariate missingness -> complete-case drop
            rows.append(f"0,,,,{x2:.6f}")
            continue
        s = rng.random() < 1 / (1 + math.exp(-(-0.5 + 0.7 * x1)))
        if s:
            a = 1 if rng.random() < 0.5 else 0
            p = 1 / (1 + math.exp(-(0.4 * x1 - 0.3 * x2)))  # same both arms
            y = 1 if rng.random() < p else 0
            rows.append(f"1,{a},{y},{x1:.6f},{x2:.6f}")
        else:
            rows.append(f"0,,,{x1:.6f},{x2:.6f}")
    path.write_text("\n".join(rows) + "\n")


def main():
    tmp = Path(tempfile.mkdtemp(prefix="targetpop_cli_"))

    def calibrate_trivial():
        out = run("calibrate", "intercept", "--theta-rest", "0,0,0",
                  "--fraction", "0.5").stdout
        value = float(out.split("=")[1].split()[0])
        assert abs(value) < 1e-8, out

    def calibrate_reference_values():
        out = run("calibrate", "tau-binary", "--marginal-or", "0.9",
                  "--psi", "0").stdout
        value = float(out.split("=")[1].split()[0])
        assert abs(value - (-0.1603)) < 0.01, out
        out = run("calibrate", "tau-binary", "--marginal-or", "1.0",
                  "--psi", "0").stdout
        value = float(out.split("=")[1].split()[0])
        assert abs(value) < 1e-6, out

    def verify_matches_oracle():
        csv = tmp / "discrete.csv"
        plugin = write_discrete_csv(csv)
        out = run("verify", "--input", str(csv), "--covariates", "x1,d2").stdout
        assert "estimators match the enumeration oracle" in out, out
        # the printed plug-in values agree with the hand enumeration
        for arm in (0, 1):
            line = next(l for l in out.splitlines() if l.startswith(str(arm)))
            assert abs(float(line.split()[1]) - plugin[arm]) < 1e-9, line

    def estimate_discrete_equals_oracle():
        csv = tmp / "discrete.csv"
        plugin = write_discrete_csv(csv)
        report = tmp / "report.json"
        run("estimate", "--input", str(csv),
            "--participation-covariates", "x1,d2",
            "--treatment-covariates", "x1,d2", "--family", "gaussian",
            "--output", str(report))
        data = json.loads(report.read_text())
        # (x1, d2) spans the three cells, so every nuisance model is
        # saturated and the estimators agree with the plug-in estimand
        for entry in data["estimates"]:
            if entry["estimator"] == "trial_only":
                continue
            for arm in (0, 1):
                got = entry["arms"][str(arm)]["mean"]
                assert abs(got - plugin[arm]) < 1e-7, (entry["estimator"], got)

    def estimate_null_binary_cis_cover_zero():
        # a trial nested in a cohort with a binary outcome, no true effect,
        # a few incomplete rows, and both risk-difference and risk-ratio
        # contrasts with percentile intervals
        csv = tmp / "null.csv"
        make_null_binary_csv(csv, incomplete=5)
        report = tmp / "null_report.json"
        run("estimate", "--input", str(csv),
            "--participation-covariates", "x1,x2",
            "--outcome-covariates", "x1,x2",
            "--contrasts", "difference,ratio", "--bootstrap", "300",
            "--seed", "11", "--output", str(report))
        data = json.loads(report.read_text())
        assert data["bootstrap"]["replicates"] == 300
        assert data["rows_dropped_incomplete"] == 5
        for entry in data["estimates"]:
            for contrast in entry["contrasts"]:
                null_value = 0.0 if contrast["kind"] == "difference" else 1.0
                assert contrast["ci_low"] <= null_value <= contrast["ci_high"], (
                    entry["estimator"], contrast)

    def estimate_all_trial_collapse():
        csv = tmp / "all_trial.csv"
        import random

        rng = random.Random(7)
        rows = ["participation,treatment,outcome,x1"]
        sums = {0: [0.0, 0], 1: [0.0, 0]}
        for _ in range(300):
            x1 = rng.gauss(0, 1)
            a = 1 if rng.random() < 0.5 else 0
            y = 0.3 * a + 0.5 * x1 + rng.gauss(0, 1)
            sums[a][0] += y
            sums[a][1] += 1
            rows.append(f"1,{a},{y:.17g},{x1:.17g}")
        csv.write_text("\n".join(rows) + "\n")
        report = tmp / "all_trial.json"
        run("estimate", "--input", str(csv), "--participation-covariates", "x1",
            "--family", "gaussian", "--output", str(report))
        data = json.loads(report.read_text())
        trial = next(e for e in data["estimates"] if e["estimator"] == "trial_only")
        ipw = next(e for e in data["estimates"] if e["estimator"] == "ipw")
        for arm in (0, 1):
            mean = sums[arm][0] / sums[arm][1]
            assert abs(trial["arms"][str(arm)]["mean"] - mean) < 1e-12
            assert abs(ipw["arms"][str(arm)]["mean"] - mean) < 1e-12

    def simulate_runs_grid():
        config = tmp / "grid.json"
        config.write_text(json.dumps({
            "master_seed": 99,
            "replicates": 5,
            "scenarios": [
                {"outcome": "continuous", "cohort_size": 2000,
                 "trial_size": 400, "tau": 1.0, "psi": 1.0},
            ],
        }))
        out_csv = tmp / "summary.csv"
        run("simulate", "--config", str(config), "--output", str(out_csv))
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0].startswith("scenario,outcome,cohort_size"), lines[0]
        assert len(lines) == 4  # header + bias/variance/mse
        # deterministic rerun
        out2 = tmp / "summary2.csv"
        run("simulate", "--config", str(config), "--output", str(out2))
        assert out_csv.read_text() == out2.read_text()

    def error_exit_codes():
        # missing file -> 1
        run("estimate", "--input", str(tmp / "missing.csv"),
            "--participation-covariates", "x1", expect=1)
        # missing mandatory column -> 1
        bad = tmp / "bad.csv"
        bad.write_text("participation,treatment,x1\n1,1,0.5\n")
        run("estimate", "--input", str(bad),
            "--participation-covariates", "x1", expect=1)
        # unknown option -> 1
        run("estimate", "--nope", expect=1)
        # numerical failure (separated participation model) -> 2
        sep = tmp / "sep.csv"
        rows = ["participation,treatment,outcome,x1"]
        for i in range(30):
            x1 = i / 10.0
            if i >= 15:
                rows.append(f"1,{i % 2},1.0,{x1}")
            else:
                rows.append(f"0,,,{x1}")
        sep.write_text("\n".join(rows) + "\n")
        run("estimate", "--input", str(sep),
            "--participation-covariates", "x1", "--family", "gaussian",
            expect=2)

    check("calibrate intercept trivial", calibrate_trivial)
    check("calibrate tau-binary values", calibrate_reference_values)
    check("verify matches the enumeration oracle", verify_matches_oracle)
    check("estimate on a discrete file equals the oracle", estimate_discrete_equals_oracle)
    check("null binary cohort: bootstrap CIs cover zero", estimate_null_binary_cis_cover_zero)
    check("all-randomized file: ipw equals trial means", estimate_all_trial_collapse)
    check("simulate writes a deterministic summary", simulate_runs_grid)
    check("error exit codes", error_exit_codes)

    if FAILED:
        print(f"{len(FAILED)} CLI check(s) failed: {FAILED}")
        return 1
    print("all CLI checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
