"""Validates analyze reports (success and failure) against docs/report.schema.json."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema


def run(binary, *args):
    return subprocess.run([binary, *args], capture_output=True, text=True)


def main():
    binary, schema_path = sys.argv[1], sys.argv[2]
    schema = json.loads(Path(schema_path).read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        reports = []
        for b_mt in ("7.5", "0"):
            csv, rep = tmp / f"b{b_mt}.csv", tmp / f"b{b_mt}.json"
            assert run(binary, "simulate", "--b-mt", b_mt, "--out", str(csv)).returncode == 0
            assert run(binary, "analyze", "--in", str(csv), "--report", str(rep)).returncode == 0
            reports.append((rep, True))

        lines = (tmp / "b0.csv").read_text().splitlines()
        flat = [l if l.startswith("#") or l.startswith("f_mhz") else f"{l.split(',')[0]},200,6" for l in lines]
        (tmp / "flat.csv").write_text("\n".join(flat) + "\n")
        failed = run(binary, "analyze", "--in", str(tmp / "flat.csv"), "--report", str(tmp / "flat.json"))
        assert failed.returncode == 5, failed.returncode
        reports.append((tmp / "flat.json", False))

        for path, ok in reports:
            doc = json.loads(path.read_text())
            validator.validate(doc)
            assert doc["fit"]["converged"] is ok
            assert ("error" in doc) is (not ok)
            assert (doc["field"] is None) is (not ok)
            print(f"valid: {path.name}")


if __name__ == "__main__":
    main()
