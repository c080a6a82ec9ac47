"""Smoke test for the pycorrsense extension module.

Build and run from the repository root:

    cargo build --release -p corrsense-py --features extension-module
    cp target/release/libpycorrsense.so python/pycorrsense.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pycorrsense as cs


def main():
    model = cs.SensingModel("mtx1", 64, 32, seed=3)
    assert (model.n, model.m) == (64, 32)
    print(model)

    inst = cs.gen_instance(model, 2, 1, setting="gaussian", seed=7)
    assert len(inst.y) == 32 and len(inst.x_true) == 64
    y = model.measure(inst.x_true, inst.z_true)
    assert max(abs(a - b) for a, b in zip(y, inst.y)) < 1e-12

    res = cs.solve_penalized_l1(model, inst.y, lambda_reg=1.0)
    print(res, "error", cs.recovery_error(res, inst))
    assert cs.check_success(res, inst)

    res = cs.solve_irls_lp(model, inst.y, p=0.5)
    print(res, "error", cs.recovery_error(res, inst))

    h = 1 / math.sqrt(2)
    rip = cs.exact_rip([[h, h], [h, -h]], 1)
    assert abs(rip["delta"]) < 1e-12, rip

    thr = cs.recovery_threshold(1, 1, 1.0)
    assert abs(thr["threshold"] - 0.4923659639173309) < 1e-12, thr

    cert = cs.certify_uniqueness(cs.SensingModel("mtx1", 16, 8, seed=0), 1, 1)
    print("certificate", cert["delta_2s2k"], "satisfied", cert["satisfied"])

    try:
        cs.SensingModel("no_such_family", 8, 4)
    except cs.CorrsenseError as e:
        print("rejected:", e)
    else:
        raise AssertionError("unknown family accepted")

    assert cs.derive_seed(1, [2, 3]) == cs.derive_seed(1, [2, 3])
    print("smoke test passed")


if __name__ == "__main__":
    main()
