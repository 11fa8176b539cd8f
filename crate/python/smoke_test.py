"""Smoke test for the qhe_lab extension: one encrypted T-gate circuit end
to end, plus the worked examples."""

import json

import qhe_lab


def main():
    circuit = "H 0\nT 0\nCNOT 0 1\nT 1\nH 1\n"
    assert qhe_lab.t_count(circuit, 2) == 2

    bundle = qhe_lab.keygen(2, seed=7)
    assert bundle.gadget_count == 2 and bundle.remaining_gadgets == 2

    psi = qhe_lab.random_state(2, seed=3)
    ct = qhe_lab.encrypt(bundle, psi, seed=4)
    assert ct.key_index == 0

    out, report = qhe_lab.evaluate(bundle, circuit, ct, circuit_privacy=True, seed=5)
    assert report.gadgets_consumed == 2
    assert out.key_index == bundle.levels
    assert bundle.remaining_gadgets == 0

    plain = qhe_lab.decrypt(bundle, out)
    want = qhe_lab.simulate(circuit, psi)
    f = qhe_lab.fidelity(plain, want)
    assert abs(f - 1.0) < 1e-9, f

    try:
        qhe_lab.evaluate(bundle, "T 0\n", out)
    except qhe_lab.QheError as e:
        assert "out of gadgets" in str(e), e
    else:
        raise AssertionError("expected out-of-gadgets error")

    doc = json.loads(bundle.to_json())
    assert doc["format_version"] == 1 and doc["kind"] == "bundle"
    again = qhe_lab.KeyBundle.from_json(bundle.to_json())
    assert again.gadget_count == 2

    for name in ("toy", "barrington-or", "bv-chain"):
        transcript, passed = qhe_lab.run_demo(name)
        assert passed, transcript

    path, output = qhe_lab.gh_eval(0, 0)
    assert path == "in → pipe1 → pipe3 → out(Bob)" and output is False

    totals = [row[2] for row in qhe_lab.bench([1, 2, 4, 8])]
    assert totals == [40, 80, 160, 320], totals

    (cid, name, passed, detail), = qhe_lab.selftest(criterion=2)
    assert cid == 2 and passed, detail

    print(f"smoke test passed: fidelity {f:.9f}, {report!r}")


if __name__ == "__main__":
    main()
