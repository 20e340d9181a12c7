"""Smoke test for the entaep_py extension module.

Install the bindings first:
    pip install -e crates/entaep-py --no-build-isolation
then run:
    python3 python/smoke_test.py
"""

import json
import math

import entaep_py as ep


def check(label, ok, detail=""):
    print(f"{'pass' if ok else 'FAIL'}  {label}{'  ' + detail if detail else ''}")
    assert ok, label


def uniform_shannon(k):
    return ep.Measure.renyi([(j, 1.0 / k, 1.0) for j in range(k)])


def main():
    # GHZ normalization: every weighted marginal-entropy measure gives 1.
    ghz = ep.State.ghz(3, 2)
    val = ep.evaluate(uniform_shannon(3), ghz)
    check("ghz evaluates to one", abs(val - 1.0) < 1e-12, f"value={val!r}")

    # Entropy dispatch: log-rank at order 0, agreement of shannon and
    # renyi at order 1, antitone in the order.
    h = ep.shannon_entropy([0.75, 0.25])
    check("shannon of (3/4, 1/4)", abs(h - 0.8112781244591328) < 1e-12)
    check("renyi order 1 is shannon", abs(ep.renyi_entropy([0.75, 0.25], 1.0) - h) < 1e-12)
    orders = [0.0, 0.5, 1.0, 2.0, math.inf]
    vals = [ep.renyi_entropy([0.6, 0.3, 0.1], a) for a in orders]
    check("renyi is nonincreasing", all(x >= y - 1e-12 for x, y in zip(vals, vals[1:])))

    psi = ep.State.random([2, 3, 2], seed=5)
    h0 = ep.marginal_entropy(psi, [1], 0.0)
    h1 = ep.marginal_entropy(psi, [1], 1.0)
    check("marginal order 0 dominates order 1", h0 >= h1 - 1e-12, f"{h0:.6f} >= {h1:.6f}")

    # Additivity and the direct-sum identity hold to solver precision.
    phi = ep.State.random([2, 3, 2], seed=6)
    spec = uniform_shannon(3)
    check("additivity residual", ep.check_additivity(spec, psi, phi) < 1e-9)
    check("direct-sum residual", ep.check_direct_sum_identity(spec, psi, phi, 0.3) < 1e-9)

    # Continuity envelope vanishes at zero and bounds a real perturbation.
    a0, b0 = ep.continuity_bound(3, 0.0)
    check("envelope vanishes at delta 0", a0 == 0.0 and b0 == 0.0)
    delta = ep.trace_distance_pure(psi, phi)
    a, b = ep.continuity_bound(3, delta)
    diff = abs(ep.evaluate(spec, psi) - ep.evaluate(spec, phi))
    envelope = a * math.log2(12) + b
    check("envelope bounds the difference", diff <= envelope, f"{diff:.4f} <= {envelope:.4f}")

    # Classical regularized rate decreases toward H(P) as n grows.
    rates = [ep.regularized_smooth_h0([0.75, 0.25], 0.01, n) for n in (10, 50, 200)]
    check("classical rate shrinks with n", rates[0] > rates[1] > rates[2] > h)

    # Smoothing certifies a feasible witness below the base value.
    base = ep.evaluate(spec, psi)
    value, cert = ep.smooth_estimate(spec, psi, 0.1, seed=1)
    check("smoothing lowers the value", value <= base + 1e-12, f"{value:.6f} <= {base:.6f}")
    check("witness stays in the ball", cert >= 0.9 - 1e-12, f"certificate={cert:.6f}")

    # Per-copy order-0 estimates on GHZ sit exactly at the analytic
    # limit: the flat Schmidt spectrum leaves nothing to truncate.
    alpha0 = ep.Measure.renyi([(j, 1.0 / 3.0, 0.0) for j in range(3)])
    limit, rows = ep.phi_estimate(alpha0, ghz, 0.01, [1, 2, 4])
    check("ghz analytic limit is one", abs(limit - 1.0) < 1e-12)
    check("ghz per-copy estimates are flat", all(v == 1.0 for _, v, *_ in rows))
    check("rank bounds cover all cuts", all(len(r[4]) == 3 for r in rows))

    # Random protocols conserve weight and never raise the measure on
    # average; branches carry distinct register labels.
    protocol = ep.Protocol.random([2, 3, 2], steps=2, branches=2, seed=9)
    branches = protocol.apply(psi)
    total = sum(w for w, _, _ in branches)
    check("protocol conserves weight", abs(total - 1.0) < 1e-10, f"total={total!r}")
    check("labels are distinct", len({l for _, l, _ in branches}) == len(branches))
    slack = ep.monotone_avg_check(spec, psi, protocol)
    check("monotone on average", slack >= -1e-9, f"slack={slack:.3e}")

    # JSON round trips preserve states bit for bit.
    again = ep.State.from_json(psi.to_json())
    check("state json round trip", ep.fidelity_sq(psi, again) > 1.0 - 1e-12)
    parsed = json.loads(protocol.to_json())
    check("protocol json lists steps", len(parsed) == protocol.num_steps())

    print("smoke test passed")


if __name__ == "__main__":
    main()
