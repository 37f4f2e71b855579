"""Smoke test for the flexprot extension module.

Build and run from the repository root:

    cargo build -p flexprot-py --release
    cp target/release/libflexprot.so python/flexprot.so
    python3 python/smoke_test.py
"""

import math

import flexprot


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    assert close(flexprot.series_availability([0.9, 0.9]), 0.81)
    assert close(flexprot.parallel_availability([0.9, 0.9]), 0.99)
    assert close(flexprot.link_availability(99.0, 1.0), 0.99)
    assert flexprot.demand_to_slots(100) == 9
    assert flexprot.demand_to_slots(10) == 2

    a_pp, a_pl = flexprot.ava_dcyc_update(0.9 * 0.95, 0.9, 0.99)
    assert close(a_pp * 0.9, 0.9 * 0.95 * a_pl)
    est, se = flexprot.sample_series_availability([0.9, 0.95], samples=200_000, seed=3)
    assert abs(est - 0.855) <= 4 * se

    net = flexprot.Network.nsfnet(avg_availability=0.99, seed=7)
    assert len(net.nodes()) == 14 and len(net.links()) == 22
    paths = net.candidate_paths("1", "14", slots=4)
    assert 1 <= len(paths) <= 5
    for p in paths:
        assert p["nodes"][0] == "1" and p["nodes"][-1] == "14"
        assert p["free_slots"] == 320 and 0.0 < p["availability"] < 1.0

    ids = []
    for s, d in [("1", "14"), ("3", "10"), ("6", "12"), ("2", "8")]:
        got = net.provision(s, d, rate_gbps=100, a_th=0.999, mode="dsbpss")
        assert got is not None
        assert got["protected"] == (got["needs_protection"] and got["a_pp"] >= 0.999 - 1e-12)
        ids.append(got["id"])
    net.audit()
    assert net.single_failures()["sound"]
    for i in ids:
        net.release(i)
    assert net.is_idle()

    ring = flexprot.Network.from_text(
        "node a\nnode b\nnode c\nnode d\n"
        "link a b 10 0.999\nlink b c 10 0.999\nlink c d 10 0.999\nlink d a 10 0.999\nlink a c 10 0.95\n"
    )
    got = ring.provision("a", "c", rate_gbps=40, a_th=0.999, mode="dcycles")
    assert got["protected"] and got["cycles"], got

    r = flexprot.run(mode="dcycles", load_erlang=20, a_th=0.999, n_requests=5000, seed=2)
    assert 0.0 <= r["bp"] <= 1.0 and 0.0 < r["utilization"] <= 1.0
    again = flexprot.run(mode="dcycles", load_erlang=20, a_th=0.999, n_requests=5000, seed=2)
    assert r == again
    quiet = flexprot.run(avg_availability=0.999999, a_th=0.9, n_requests=5000)
    assert quiet["restorability"] is None and quiet["protection_capacity"] == 0.0
    assert not math.isnan(r["bbp"])

    print("smoke test ok:", {k: r[k] for k in ("bp", "bbp", "utilization", "restorability")})


if __name__ == "__main__":
    main()
