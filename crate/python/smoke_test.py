"""Smoke test for the romstab extension module.

Build and install first:

    pip install maturin
    maturin develop --release -m crates/python/Cargo.toml

then run `python python/smoke_test.py`.
"""

import json
import math
import sys
import tempfile

import numpy as np

import romstab


def check(name, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'} {name} {detail}".rstrip())
    return ok


def main():
    results = []

    model = romstab.TruthModel.burgers(128, 0.01)
    x = model.grid
    u0 = np.sin(2 * math.pi * x)
    times, states = model.simulate(u0, 0.2, 1e-3)
    results.append(check("burgers trajectory shape", states.shape == (len(times), 128)))

    basis = romstab.PodBasis.compute(states[::10], model.weights, r=4)
    err = basis.orthonormality_error()
    results.append(check("pod orthonormal", err <= 1e-10, f"({err:.2e})"))
    q = basis.project(states[-1])
    back = basis.reconstruct(q)
    results.append(check("project/reconstruct shape", back.shape == (128,)))

    rom = romstab.QuadraticRom.assemble(model, basis)
    results.append(check("rom dimension", rom.dim == 4 and rom.c.shape == (4, 4, 4)))
    closure = romstab.ClosureConfig(0.01, 1e-3)
    t_rom, q_rom = rom.integrate(basis.project(u0), 0.2, 1e-3, closure)
    results.append(check("closed rom bounded", np.isfinite(q_rom).all()))
    far = 100.0 * np.ones(4)
    if rom.invariant_set_margin(closure, far) < 0:
        results.append(check("lyapunov bound negative outside S", rom.lyapunov_bound(closure, far) < 0))

    target = np.array([0.3, -0.2])
    res = romstab.extremum_seek(
        lambda p: float(np.sum((np.asarray(p) - target) ** 2)),
        a=[0.08, 0.1], omega=[10.0, 50.0], k_max=600,
    )
    results.append(check("extremum seeking reduces cost", res["best_q"] < res["trace"][0][2], f"({res['best_q']:.3e})"))

    cfg = json.loads(romstab.preset_config("burgers-small"))
    results.append(check("preset round-trip", cfg["name"] == "burgers-small"))

    with tempfile.TemporaryDirectory() as out:
        summary = romstab.run_pipeline(out, preset="burgers-small")
        results.append(check("pipeline tuned <= nominal", summary["Q_tuned"] <= summary["Q_nominal"],
                             f"(ratio {summary['improvement_ratio']:.2f})"))
        files = romstab.report(out)
        results.append(check("report files", len(files) == 5))

    try:
        romstab.TruthModel.burgers(4, 0.01)
        results.append(check("invalid n rejected", False))
    except ValueError:
        results.append(check("invalid n rejected", True))

    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
