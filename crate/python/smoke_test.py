"""Smoke test for the compiled `convexdiv` extension.

Build and install first, e.g.

    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/convexdiv-*.whl
    python python/smoke_test.py
"""

import math
import os
import random
import tempfile

import convexdiv as cd


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    h = cd.Generator("power:2")
    assert h.kind == "convex" and close(h.integral, 1 / 3)
    assert h.validate()["checks"], h.validate()

    v = cd.two_sample(h, [1, 3], [2, 4])
    assert close(v["value"], 1 / 12), v
    assert close(cd.two_sample("power:2", [2, 4], [1, 3])["value"], 1 / 12)
    assert close(cd.k_sample(h, [[1, 3], [2, 4]])["value"], 1 / 48)

    xi = cd.Generator("expsq:1")
    assert xi.kind == "log_convex"
    t = cd.tau(xi, [1, 3], [2, 4])
    assert close(t["value"], 0.18863245629725676, 1e-9), t

    table = cd.simulate_null("two_sample", h, [10, 10], replicates=499, seed=3)
    assert len(table) == 499
    again = cd.simulate_null("two_sample", "power:2", [10, 10], replicates=499, seed=3)
    assert table.replicates == again.replicates
    assert cd.p_value(table, -1.0) == 1.0
    assert cd.p_value(table, 1e9) == 1 / 500
    cv = cd.critical_value(table, 0.05)
    assert cv["rank"] == 475 and cv["value"] == table.replicates[474]

    with tempfile.TemporaryDirectory() as d:
        for fmt in ("binary", "csv"):
            path = os.path.join(d, "t." + fmt)
            table.save(path, fmt)
            assert cd.NullTable.load(path).replicates == table.replicates

    rng = random.Random(1)
    x = [rng.random() for _ in range(40)]
    y = [rng.random() + 1.0 for _ in range(40)]
    report = cd.run_test("two_sample", h, [x, y], replicates=199, seed=1)
    assert report["p_value"] == 1 / 200, report["p_value"]
    assert all(c["reject"] for c in report["critical_values"])

    exact = cd.enumerate_null("two_sample", h, [2, 2])
    assert [round(s["probability"], 12) for s in exact["support"]] == [round(4 / 6, 12), round(2 / 6, 12)]

    assert close(cd.population_functional(h, "uniform", "power:2"), 0.7, 1e-9)
    assert close(cd.cvm_distance("uniform", "power:2"), 1 / 30, 1e-9)
    assert close(cd.jensen_gap(h, ["uniform", "power:2"]), 1 / 120, 1e-9)

    for bad in (lambda: cd.Generator("power:1"), lambda: cd.two_sample(h, [], [1.0]), lambda: cd.cvm_distance("gamma:2", "uniform")):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    cases = cd.run_battery()
    failed = [c["id"] for c in cases if not c["passed"]]
    assert not failed, failed
    assert not math.isnan(sum(c["value"] for c in cases))

    print(f"convexdiv {cd.__version__}: smoke test passed ({len(cases)} battery cases)")


if __name__ == "__main__":
    main()
