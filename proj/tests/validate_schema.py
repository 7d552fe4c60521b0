"""Runs each CLI command on small simulated data and validates its JSON output."""
import json
import pathlib
import shutil
import subprocess
import sys

import jsonschema
from referencing import Registry, Resource


def main() -> int:
    exe, schema_dir, work = sys.argv[1], pathlib.Path(sys.argv[2]), pathlib.Path(sys.argv[3])
    shutil.rmtree(work, ignore_errors=True)
    work.mkdir(parents=True)

    schemas = {p.name: json.loads(p.read_text()) for p in schema_dir.glob("*.schema.json")}
    registry = Registry().with_resources((name, Resource.from_contents(s)) for name, s in schemas.items())

    def run(*args):
        subprocess.run([exe, *args], check=True, stdout=subprocess.DEVNULL)

    data = work / "d.csv"
    run("draw", "--dgp", "well_specified", "--n", "200", "--seed", "3", "--with-g", "--out", str(data))
    run("kernel", "--K", "2", "--out", str(work / "kernel.json"))
    run("estimate", "--data", str(data), "--g-known", "col:g", "--t", "quantiles:3", "--folds", "5",
        "--mc-draws", "10000", "--out", str(work / "est"))
    run("estimate", "--data", str(data), "--covariates", "W1", "--t", "0.1", "--folds", "5",
        "--mc-draws", "10000", "--out", str(work / "est1"))
    run("bandwidth", "--data", str(data), "--covariates", "W1", "--t", "0,0.2", "--folds", "5",
        "--out", str(work / "bw"))
    cfg = work / "cfg.json"
    cfg.write_text(json.dumps({"n": 200, "reps": 2, "t": [0.0], "delta": 0.3, "V": 5, "mc_draws": 10000}))
    run("simulate", str(cfg), "--out", str(work / "sim"))

    checks = [
        ("kernel.schema.json", work / "kernel.json"),
        ("result.schema.json", work / "est" / "result.json"),
        ("result.schema.json", work / "est1" / "result.json"),
        ("selected.schema.json", work / "bw" / "selected.json"),
        ("report.schema.json", work / "sim" / "report.json"),
    ]
    failed = 0
    for schema_name, path in checks:
        validator = jsonschema.Draft202012Validator(schemas[schema_name], registry=registry)
        errors = list(validator.iter_errors(json.loads(path.read_text())))
        for e in errors:
            print(f"{path}: {e.json_path}: {e.message}")
        failed += bool(errors)
        print(f"{'ok  ' if not errors else 'FAIL'} {path.relative_to(work)} against {schema_name}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
