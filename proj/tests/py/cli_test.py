"""Exit-code contract of the canoncache CLI: 0 ok, 1 I/O, 2 validation, 3 infeasible certificate."""
import subprocess
import sys
import tempfile
from pathlib import Path

CLI, SRC = Path(sys.argv[1]), Path(sys.argv[2])
MINI = SRC / "data" / "minicorpus"


def code(*args):
    return subprocess.run([str(CLI), *map(str, args)], capture_output=True, text=True).returncode


def main():
    failures = []

    def expect(want, *args):
        got = code(*args)
        if got != want:
            failures.append(f"expected {want}, got {got}: {' '.join(map(str, args))}")

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        expect(0, "fingerprint", "--input", MINI / "dataset.jsonl", "--lexicons", SRC / "data" / "lexicons")
        expect(0, "cost")
        expect(0, "--out", tmp / "syn", "gen-synthetic", "--classes", 3, "--per-class", 20)
        expect(0, "calibrate", "--truth", tmp / "syn" / "dataset.jsonl", "--pred", tmp / "syn" / "predictions.jsonl",
               "--alpha", 0.5)

        # validation errors
        expect(2, "no-such-subcommand")
        expect(2, "calibrate", "--truth", tmp / "syn" / "dataset.jsonl", "--pred", tmp / "syn" / "predictions.jsonl",
               "--alpha", 1.5)
        expect(2, "calibrate", "--truth", tmp / "syn" / "dataset.jsonl", "--pred", tmp / "syn" / "predictions.jsonl",
               "--variant", "pac_bayes")
        expect(2, "--out", tmp / "bad", "gen-synthetic", "--classes", 4, "--accuracy", 0.1)
        expect(2, "cost", "--sensitivity", "0.5:1.5:0.1")
        bad = tmp / "bad.jsonl"
        bad.write_text('{"id": "a", "text": "x", "extra": 1}\n')
        expect(2, "fingerprint", "--input", bad, "--lexicons", SRC / "data" / "lexicons")

        # I/O
        expect(1, "fingerprint", "--input", tmp / "missing.jsonl", "--lexicons", SRC / "data" / "lexicons")

        # an unreachable risk level cannot be certified
        expect(3, "calibrate", "--truth", tmp / "syn" / "dataset.jsonl", "--pred", tmp / "syn" / "predictions.jsonl",
               "--alpha", 0.001, "--variant", "hoeffding_union")

    if failures:
        print("\n".join(failures))
        sys.exit(1)
    print("exit codes ok")


if __name__ == "__main__":
    main()
