#!/usr/bin/env python3
"""Runs every report-producing emf subcommand on a small fixture and validates
the JSON output against the shipped emf-report/1 schema."""

import copy
import json
import pathlib
import subprocess
import sys

import jsonschema


def run(emf, *args):
    proc = subprocess.run([emf, *args], capture_output=True, text=True)
    if proc.returncode != 0:
        sys.exit(f"emf {' '.join(args)} exited {proc.returncode}:\n{proc.stderr}")
    return proc.stdout


def main():
    emf, schema_path, workdir = sys.argv[1:4]
    work = pathlib.Path(workdir)
    work.mkdir(parents=True, exist_ok=True)
    schema = json.loads(pathlib.Path(schema_path).read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)

    fixtures = work / "fixtures"
    run(emf, "selftest", "--fixtures", str(fixtures), "--fixture-length", "2400")
    data = str(fixtures / "daily_cycle.csv")

    common = ["--data", data, "--delta", "50", "--lookback", "48", "--horizon", "8"]
    small = ["--epochs", "2", "--patience", "1", "--batch-size", "128"]
    reports = {}
    for kind, extra in [
        ("emforecaster", ["--patch-len", "8", "--patch-stride", "8", "--embed-dim", "8", "--hidden-dim", "8",
                          "--blocks", "1", "--seeds", "0,1"]),
        ("dlinear", ["--dlinear-m", "3"]),
        ("mlp", ["--mlp-hidden", "16"]),
        ("persistence", []),
    ]:
        ckpt = work / f"{kind}.emfc"
        out = run(emf, "train", "--quiet", "--model", kind, *common, *small, *extra, "--out", str(ckpt))
        path = work / f"{kind}.json"
        path.write_text(out)
        reports[f"train:{kind}"] = json.loads(out)

    reports["eval"] = json.loads(run(emf, "eval", "--checkpoint", str(work / "dlinear.emfc")))
    reports["conformal"] = json.loads(run(emf, "conformal", "--checkpoint", str(work / "mlp.emfc"),
                                          "--alpha", "0.2"))
    reports["tos"] = json.loads(run(emf, "tos", *(str(work / f"{k}.json") for k in
                                                  ("emforecaster", "dlinear", "mlp", "persistence"))))
    reports["sweep"] = json.loads(run(emf, "sweep", "--model", "emforecaster", *common, *small,
                                      "--hidden-dim", "8", "--blocks", "1", "--patch-lens", "8,16",
                                      "--embed-dims", "4"))
    reports["ingest"] = json.loads(run(emf, "ingest", "--data", data, "--delta", "0.5",
                                       "--out", str(work / "cleaned.csv")))
    reports["analyze"] = json.loads(run(emf, "analyze", "--data", data,
                                        "--data", str(fixtures / "two_cycle.csv")))

    failures = 0
    for name, doc in reports.items():
        errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
        status = "ok" if not errors else "INVALID"
        print(f"{status:8} {name}")
        for e in errors[:5]:
            print(f"         {list(e.path)}: {e.message}")
        failures += bool(errors)

    # The schema must actually constrain: a report with a coverage above 1 is rejected.
    broken = copy.deepcopy(reports["eval"])
    broken["jc"] = 1.5
    if validator.is_valid(broken):
        print("INVALID  schema accepted jc=1.5")
        failures += 1
    del broken["jc"]
    if validator.is_valid(broken):
        print("INVALID  schema accepted a report without jc")
        failures += 1

    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
