"""Smoke test for the `qpc` extension module.

Build and run from the repository root:

    cargo build --release -p qpc-python --features extension-module
    cp target/release/libqpc.so python/qpc.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import qpc  # noqa: E402


def check_states():
    psi5 = qpc.GhzState(5, 3)
    assert psi5.q == [False, True, False] and not psi5.delta
    assert psi5.x_expansion() == [("+++", 1), ("+--", -1), ("-+-", 1), ("--+", -1)]
    assert psi5.t_xor(0, 1) and not psi5.t_xor(0, 2)
    assert qpc.GhzState.from_bits([False, True, False], False) == psi5
    bits = psi5.measure([0, 1, 2], "Z", seed=3)
    assert bits[0] ^ bits[1] and not bits[0] ^ bits[2]
    try:
        qpc.GhzState(9, 3)
    except ValueError:
        pass
    else:
        raise AssertionError("index 9 accepted for n = 3")


def check_run():
    config = json.dumps({
        "schema_version": 1,
        "protocol": "proposed",
        "n": 3,
        "m": 4,
        "check_rounds": 0,
        "decoy_count": 5,
        "adversary": {"kind": "eve_intercept_resend", "params": {"links": [1]}},
    })
    stats = qpc.run(config, trials=4000, seed=1, jobs=1)
    metric = {m["name"]: m for m in stats["metrics"]}["detection_decoy"]
    target = qpc.closed_form("intercept_detection", 5)
    assert math.isclose(target, 1 - 0.75 ** 5)
    assert abs(metric["estimate"] - target) < 3 * math.sqrt(target * (1 - target) / 4000)
    assert qpc.run(config, trials=500, seed=2, jobs=1) == qpc.run(config, trials=500, seed=2, jobs=2)

    try:
        qpc.run(config.replace('"m": 4', '"m": -4'))
    except ValueError as e:
        assert "`m`" in str(e)
    else:
        raise AssertionError("negative m accepted")


def check_transcript():
    config = json.dumps({"schema_version": 1, "protocol": "proposed", "n": 3, "m": 4,
                         "secrets": {"policy": "explicit", "values": ["0110", "0110", "1010"]}})
    out = qpc.transcript(config, seed=5)
    assert out["secrets"] == ["0110", "0110", "1010"]
    assert out["transcript"]["events"]


def main():
    check_states()
    check_run()
    check_transcript()
    lo, hi = qpc.wilson(50, 100)
    assert lo < 0.5 < hi
    assert "paper_tables" in qpc.SUITES
    print("qpc smoke test: ok")


if __name__ == "__main__":
    main()
