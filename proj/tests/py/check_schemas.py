"""Runs the CLI end to end and validates every JSON artifact against docs/schemas."""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

CLI, SRC = Path(sys.argv[1]), Path(sys.argv[2])
SCHEMAS = SRC / "docs" / "schemas"


def schema(name):
    s = json.loads((SCHEMAS / f"{name}.schema.json").read_text())
    jsonschema.Draft202012Validator.check_schema(s)
    return jsonschema.Draft202012Validator(s)


def run(*args):
    subprocess.run([str(CLI), *map(str, args)], check=True, capture_output=True)


def check_doc(name, doc):
    errors = sorted(schema(name).iter_errors(doc), key=str)
    if errors:
        raise SystemExit(f"{name}: {errors[0].message}")


def check_lines(name, path):
    lines = [json.loads(l) for l in path.read_text().splitlines() if l.strip()]
    assert lines, path
    for doc in lines:
        check_doc(name, doc)
    return len(lines)


def main():
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp)
        run("--config", SRC / "configs" / "pipeline.yaml", "--out", out / "run", "pipeline")
        run_dir = out / "run"
        check_doc("manifest", json.loads((run_dir / "manifest.json").read_text()))
        check_lines("fingerprint", run_dir / "fingerprints.jsonl")
        check_lines("prediction", run_dir / "predictions.jsonl")
        for name, file in [("simulation", "simulation.json"), ("metrics", "metrics.json"),
                           ("certificate", "certificate.json"), ("cost", "cost.json")]:
            check_doc(name, json.loads((run_dir / file).read_text()))

        # standalone subcommands share the same formats
        syn = out / "syn"
        run("--seed", 7, "--out", syn, "gen-synthetic", "--classes", 4, "--per-class", 30)
        check_lines("prediction", syn / "predictions.jsonl")
        run("--out", out / "m.json", "metrics", "--truth", syn / "dataset.jsonl", "--pred", syn / "predictions.jsonl")
        check_doc("metrics", json.loads((out / "m.json").read_text()))
        subprocess.run([str(CLI), "--out", out / "c.json", "calibrate", "--truth", syn / "dataset.jsonl",
                        "--pred", syn / "predictions.jsonl", "--alpha", "0.2"], check=False)
        check_doc("certificate", json.loads((out / "c.json").read_text()))
        run("--out", out / "cost.json", "cost", "--req-per-day", 200)
        check_doc("cost", json.loads((out / "cost.json").read_text()))
    print("all artifacts match their schemas")


if __name__ == "__main__":
    main()
