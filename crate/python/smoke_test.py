"""Smoke test for the rri Python extension.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/rri-*.whl
"""

import json

import rri


def close(a, b, tol):
    return all(abs(x - y) <= tol for ra, rb in zip(a, b) for x, y in zip(ra, rb))


def main():
    spin = rri.Spec.preset("spin_spin")
    assert (spin.dim_s, spin.dim_a) == (2, 2)
    assert close(spin.l1_identity_action(), [[4, 0], [0, -4]], 1e-12)

    phi = spin.update_map()
    flags = phi.verify_cptp()
    assert flags["trace_preserving"] and flags["completely_positive"]
    unital, residual = phi.is_unital()
    assert not unital and residual > 0

    report = spin.purification_report()
    assert report["order"] == 1, report["order"]
    assert rri.Spec.preset("tensor_product").liouvillian_series().purification_order() == 3
    assert rri.Spec.preset("free_only").liouvillian_series().purification_order() == "none≤3"

    l = phi.effective_liouvillian(spin.dt)
    modes = l.lindblad_decompose()["modes"]
    assert all(m["gamma"] >= -1e-9 for m in modes)
    lhs, rhs, holds = l.purity_bound([[0.7, 0.2], [0.2, 0.3]])
    assert holds, (lhs, rhs)

    kraus = phi.kraus_operators()
    rebuilt = rri.Superoperator.from_kraus(kraus)
    assert close(rebuilt.rep, phi.rep, 1e-9)

    config = json.dumps({
        "model": {"name": "tensor_product"},
        "analysis": {"dt_sweep": [0.001, 0.01, 0.1]},
        "simulate": {"steps": 20, "record_every": 5},
    })
    assert rri.analyze(config)["order"] == 3
    table = rri.sweep(config)
    assert abs(table["discrete_slope"] - table["continuous_slope"] - 1.0) < 0.3
    rows = rri.simulate(config)["rows"]
    assert len(rows) == 5 and rows[-1]["purity_discrete"] > rows[0]["purity_discrete"]

    cut = rri.Spec.preset("free_only", h_s=[[[1.5707963267948966, 0], [0, 0]], [[0, 0], [-1.5707963267948966, 0]]], dt=1.0)
    try:
        cut.update_map().effective_liouvillian(1.0)
    except rri.BranchCutError:
        pass
    else:
        raise AssertionError("expected a branch-cut error")

    print(f"rri {rri.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
