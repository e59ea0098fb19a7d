"""Smoke test for the fluxloss Python extension.

Build and install first:  pip install --no-build-isolation ./crates/py
Run:                      python3 python/smoke_test.py   (or pytest)
"""

import csv
import json
import math
import os
import tempfile

import fluxloss

CURVE_HEADER = ["temperature_k", "field_v_per_m", "s_ohm_per_t", "s_err", "sprime_ohm_per_t", "sprime_err"]
Q_HEADER = ["temperature_k", "field_v_per_m", "photon_n", "q0", "q0_err", "f0_hz", "f0_err"]


def close(a, b, rel):
    return abs(a - b) <= rel * abs(b)


def test_model():
    s, sp = fluxloss.sensitivity_model(0.01)
    assert close(s * 100, 1.897, 1e-3), s
    assert sp > 0
    assert close(fluxloss.scale_sensitivity_frequency(0.7, 6e9, 1.3e9), 0.3258, 1e-3)
    w = 2 * math.pi * 6e9
    t_star = math.log(w / 2.22e10) / 0.701
    assert close(fluxloss.depinning_frequency(t_star), w, 1e-9)
    z = fluxloss.surface_impedance(0.01, 1e-8)
    assert isinstance(z, complex) and z.real > 0
    assert close(fluxloss.t1_bound(0.02, 1e-6), 0.3647, 1e-3)
    assert fluxloss.t1_bound(0.02, 0.0) == math.inf
    try:
        fluxloss.sensitivity_model(9.5)
    except ValueError as e:
        assert "temperature" in str(e)
    else:
        raise AssertionError("T above Tc accepted")


def test_material_override():
    s1, _ = fluxloss.sensitivity_model(0.01)
    s2, _ = fluxloss.sensitivity_model(0.01, material={"rho_n": 8e-10})
    assert close(s2, 2 * s1, 1e-12)
    try:
        fluxloss.sensitivity_model(0.01, material={"rho": 1})
    except ValueError:
        pass
    else:
        raise AssertionError("unknown material key accepted")


def test_ratio_and_decay():
    r, sigma = fluxloss.flux_trapping_ratio(250.5, 13.3, 254.8, 13.7)
    assert round(r, 2) == 1.02 and close(sigma, 0.077, 0.02)
    w = 2 * math.pi * 6e9
    times = [i * 1e-4 for i in range(300)]
    powers = [1e-14 * math.exp(-w * t / 1e9) for t in times]
    windows = fluxloss.ql_from_decay(times, powers, 6e9)
    assert len(windows) == 280
    assert all(close(q, 1e9, 1e-6) for _, _, q in windows)
    assert close(fluxloss.q0_from_ql(1e9, 1.4e9), 3.5e9, 1e-12)


def spec(noise):
    def ds(cid, mg, f):
        return {"cooldown_id": cid, "b_trap_tesla": mg * 1e-7,
                "pinning": {"omega0_rad_s": 2.22e10, "alpha_per_k": 0.701, "f": f}}
    return {
        "datasets": [ds("CD2", 50, 1910.0), ds("CD3", 100, 743.0), ds("CD4", 250, 497.0)],
        "temperatures_k": {"min": 0.01, "max": 1.3, "n": 25},
        "noise": {"s_rel": noise, "s_prime_rel": noise},
        "seed": 7,
    }


def write_curve(path, c):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_HEADER)
        for row in zip(c["temperature_k"], c["field_v_per_m"], c["s"], c["s_err"], c["s_prime"], c["s_prime_err"]):
            w.writerow([repr(v) for v in row])
    with open(path[:-4] + ".json", "w") as fh:
        json.dump({"cooldown_id": c["cooldown_id"], "b_trap_tesla": c["b_trap_tesla"]}, fh)


def test_fit():
    curves = fluxloss.generate_sensitivity_curves(spec(0.05))
    assert len(curves) == 3 and len(curves[0]["s"]) == 25
    with tempfile.TemporaryDirectory() as d:
        paths = []
        for c in curves:
            p = os.path.join(d, c["cooldown_id"] + ".csv")
            write_curve(p, c)
            paths.append(p)
        report = fluxloss.fit_curves(paths)
    assert report["converged"]
    assert close(report["params"]["omega0_rad_s"], 2.22e10, 0.05)
    assert close(report["params"]["alpha_per_k"], 0.701, 0.05)
    for f, truth in zip(report["params"]["f"], [1910.0, 743.0, 497.0]):
        assert close(f, truth, 0.10)


def test_extract():
    g, b, q_ref, f0 = 275.0, 1e-5, 5e9, 6e9
    temps = [0.01, 0.4, 0.8, 1.2]
    with tempfile.TemporaryDirectory() as d:
        def write(name, b_trap, rows):
            with open(os.path.join(d, name + ".csv"), "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(Q_HEADER)
                w.writerows([[repr(v) for v in r] for r in rows])
            with open(os.path.join(d, name + ".json"), "w") as fh:
                json.dump({"cooldown_id": name, "b_trap_tesla": b_trap}, fh)
        write("ref", 0.0, [[t, 50.0, 1e6, q_ref, 0.0, f0, 0.0] for t in temps])
        rows = []
        for t in temps:
            s, sp = fluxloss.sensitivity_model(t, f=100.0)
            rows.append([t, 50.0, 1e6, 1 / (1 / q_ref + s * b / g), 0.0, f0 - sp * b * f0 / (2 * g), 0.0])
        write("flux", b, rows)
        c = fluxloss.extract_sensitivity(os.path.join(d, "ref.csv"), os.path.join(d, "flux.csv"))
    for t, s in zip(c["temperature_k"], c["s"]):
        assert close(s, fluxloss.sensitivity_model(t)[0], 1e-6)


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            fn()
            print(f"ok  {name}")
    print("smoke test passed")
