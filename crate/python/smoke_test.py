"""Smoke test for the qfaas Python module.

Install first:  pip install --no-build-isolation ./crates/py
Run:            python python/smoke_test.py
"""

import math
import pathlib
import sys

import qfaas

ROOT = pathlib.Path(__file__).resolve().parent.parent
QRNG = (ROOT / "functions" / "qrng.qf").read_text()
BELL = (ROOT / "functions" / "bell.qf").read_text()


def check(cond, what):
    if not cond:
        print(f"FAIL {what}")
        sys.exit(1)
    print(f"ok   {what}")


def main():
    check(isinstance(qfaas.__version__, str), "version string")

    amps = qfaas.simulate("qubits 2\nh 0\ncx 0 1\nmeasure all")
    h = 1 / math.sqrt(2)
    check(len(amps) == 4, "bell statevector has 4 amplitudes")
    check(abs(amps[0] - h) < 1e-12 and abs(amps[3] - h) < 1e-12, "bell amplitudes are 1/sqrt(2) on 00 and 11")
    check(abs(amps[1]) < 1e-12 and abs(amps[2]) < 1e-12, "bell amplitudes vanish on 01 and 10")

    counts = qfaas.sample("qubits 2\nh 0\ncx 0 1\nmeasure all", 4096, seed=7)
    check(sum(counts.values()) == 4096, "sample counts sum to shots")
    check(set(counts) <= {"00", "11"}, "bell samples only 00 and 11")
    check(counts == qfaas.sample("qubits 2\nh 0\ncx 0 1\nmeasure all", 4096, seed=7), "seeded sampling repeats")

    stats = qfaas.circuit_stats("qubits 3\nh 0\ncx 0 1\ncx 1 2\nmeasure all")
    check(stats == {"width": 3, "gate_count": 3, "two_qubit_count": 2, "depth": 3}, "circuit stats")

    info = qfaas.describe(QRNG)
    check(info["name"] == "qrng" and info["params"][0]["name"] == "n", "describe qrng")
    try:
        qfaas.describe("fn broken\ncircuit {\n  qubits 1\n  h 0 +\n  measure all\n}\n")
        check(False, "syntax error raises")
    except ValueError as e:
        check("4:" in str(e), f"syntax error raises with line number ({e})")

    check(qfaas.build(QRNG, 3).splitlines()[0] == "qubits 3", "build qrng for n=3")

    report = qfaas.run(QRNG, 4, shots=1024, seed=11)
    check(0 <= report["data"] < 16, "qrng data in [0, 16)")
    check(sum(report["counts"].values()) == 1024, "qrng counts sum to shots")
    check(report["bindings"] == {"n": 4}, "qrng bindings")
    check(qfaas.run(QRNG, 4, shots=1024, seed=11)["counts"] == report["counts"], "seeded run repeats")

    bell = qfaas.run(BELL, shots=2048, seed=3)
    check(set(bell["counts"]) <= {"00", "11"}, "bell function counts")

    try:
        qfaas.run(QRNG, 99)
        check(False, "out-of-range input raises")
    except ValueError:
        check(True, "out-of-range input raises")
    print("all checks passed")


if __name__ == "__main__":
    main()
