"""Smoke test for the canm_py extension module.

Builds nothing itself: run `cargo build --release -p canm-py` first, then
`python3 python/smoke_test.py`. The script copies the cdylib next to
itself under the importable name if needed.
"""

import json
import math
import pathlib
import shutil
import sys

HERE = pathlib.Path(__file__).resolve().parent
ROOT = HERE.parent


def ensure_module():
    target = HERE / "canm_py.so"
    built = ROOT / "target" / "release" / "libcanm_py.so"
    if built.exists() and (
        not target.exists() or built.stat().st_mtime > target.stat().st_mtime
    ):
        shutil.copy2(built, target)
    if not target.exists():
        sys.exit("build the extension first: cargo build --release -p canm-py")
    sys.path.insert(0, str(HERE))


def main():
    ensure_module()
    import canm_py

    print(f"canm_py {canm_py.version()}")

    # Sparse ruler of order 3: 8 elements covering lags 0..9 completely.
    indices, ambient = canm_py.cantor_array(3)
    assert indices[:4] == [0, 1, 2, 3], indices
    assert ambient == 10, ambient
    assert len(indices) == 8, indices
    assert canm_py.is_complete(indices, ambient)
    diffs = canm_py.difference_set(indices, ambient)
    assert diffs == list(range(10)), diffs

    # Atom entries are unit-modulus with the right phase.
    a = canm_py.atom(0.25, 5)
    assert abs(a[0] - 1) < 1e-12
    assert abs(a[1] - 1j) < 1e-12
    assert abs(a[2] + 1) < 1e-12

    # Toeplitz lift of [2, i]: constant diagonals, Hermitian.
    t = canm_py.toeplitz([2 + 0j, 1j])
    assert t[0][0] == t[1][1] == 2
    assert t[1][0] == 1j and t[0][1] == -1j

    # Worked certificate: one source at tau=0, rows {0,1} of ambient 3
    # gives q = [0, 1, 0], i.e. Re Q(tau) = cos(2 pi tau).
    q, ok = canm_py.construct_certificate([0.0], [0, 1], 3)
    assert ok
    assert abs(q[0]) < 1e-12 and abs(q[1] - 1) < 1e-12 and abs(q[2]) < 1e-12, q
    report = json.loads(canm_py.certify([0.0], [1.0], [0, 1], [0, 1, 2], 3))
    assert report["certified"], report

    peaks = canm_py.peaks_of_dual(q, 2048, 1.0 - 1e-6)
    assert len(peaks) == 1 and min(peaks[0], 1 - peaks[0]) < 1e-3, peaks

    # Small exact recovery through the full solver.
    taus = [0.12, 0.55, 0.83]
    powers = [1.0, 0.5, 2.0]
    scenario = {
        "taus": taus,
        "powers": powers,
        "array": {"type": "cantor", "order": 3},
        "solver": {"eps_abs": 1e-9, "eps_rel": 1e-8, "max_iters": 50000},
    }
    solution = json.loads(canm_py.solve_scenario(json.dumps(scenario)))
    assert solution["status"] == "converged", solution["status"]
    got = sum(p for p in powers)
    assert abs(solution["objective"] - got) < 1e-4, solution["objective"]

    x = [complex(re, im) for re, im in solution["x_hat"]]
    est_taus, est_powers = canm_py.vandermonde_decompose(x, 1e-6)
    assert len(est_taus) == 3, est_taus
    for want_t, want_p, got_t, got_p in zip(taus, powers, est_taus, est_powers):
        d = abs(want_t - got_t)
        assert min(d, 1 - d) < 1e-5, (want_t, got_t)
        assert abs(want_p - got_p) < 1e-4, (want_p, got_p)

    # Statistics pipeline at easy SNR with a known source count.
    doa_scenario = {
        "taus": [0.2, 0.62],
        "powers": [1.0, 1.0],
        "array": {"type": "cantor", "order": 3},
        "mode": "denoise",
        "lambda": 0.1,
        "snapshots": 400,
        "snr_db": 10.0,
        "seed": 7,
        "num_sources": 2,
    }
    outcome = json.loads(canm_py.run_doa(json.dumps(doa_scenario)))
    got = sorted(outcome["estimate"]["taus"])
    for want, est in zip([0.2, 0.62], got):
        d = abs(want - est)
        assert min(d, 1 - d) < 0.5 / 10, (want, est)

    print("smoke test passed")


if __name__ == "__main__":
    main()
