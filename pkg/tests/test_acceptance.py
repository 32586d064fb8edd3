"""End-to-end acceptance checks.

Each test prints one ``criterion N: PASS|FAIL ...`` line (also echoed in the pytest
terminal summary) before asserting.  Criterion 5 runs the full Monte Carlo sweep and
dominates the runtime (roughly a quarter of an hour on one core).
"""

import math

import numpy as np
import pytest

import conftest
import pauli_reference
from nonpauli_qec.algebra import (
    MAGIC_A,
    Su2Params,
    basis_residuals,
    build_basis,
    check_cross_qubit_commutation,
    solve_params_for_target,
    steane_generators,
)
from nonpauli_qec.circuits import measure_stabilizer
from nonpauli_qec.codestate import encode, logical_zero, with_ancilla
from nonpauli_qec.engine import fidelity, trial_rng
from nonpauli_qec.lattice import build_layout
from nonpauli_qec.harness import SweepConfig, emit_csv, fit_power_law, run_sweep
from nonpauli_qec.noise import SILENT, NoiseChannel
from nonpauli_qec.protocols import (
    ProtocolConfig,
    Status,
    build_trajectory_table,
    pair_stage_attempt,
    prepare,
    run_trial,
)
from nonpauli_qec.surgery import (
    build_cnot_layout,
    build_merged_layout,
    dense_seam_check,
    joint_code_state,
    merge_measure,
    merged_state_reference,
    verify_cnot_branches,
    verify_merge_branches,
)

SWEEP_SEED = 20240101


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _random_logical(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return tuple(v / np.linalg.norm(v))


# -- 1 -----------------------------------------------------------------------------


def test_criterion_1_algebra():
    rng = np.random.default_rng(1)
    worst = 0.0
    cross_ok = True
    for _ in range(1000):
        g, t, p = rng.uniform(-2 * math.pi, 2 * math.pi, size=3)
        basis = build_basis(Su2Params(g, t, p))
        worst = max(worst, max(basis_residuals(basis).values()))
        rep = check_cross_qubit_commutation(basis)
        cross_ok &= rep.passed
        worst = max(worst, max(rep.residuals.values()))
    basis = build_basis(Su2Params(1.1, 0.4, 2.7))
    gens = steane_generators(basis)
    a, b = gens[0], gens[3]
    steane = float(np.max(np.abs(a @ b - b @ a)))
    ok = worst < 1e-12 and cross_ok and steane < 1e-12
    report(1, ok, f"1000 random bases, worst residual {worst:.2e}, steane pair commutator {steane:.2e}")


# -- 2 -----------------------------------------------------------------------------

_STATUS = {Status.ACCEPTED_CORRECT: "accepted", Status.ACCEPTED_FAILED: "accepted",
           Status.DISCARDED: "discarded", Status.EXHAUSTED: "exhausted"}


def test_criterion_2_pauli_reduction():
    p = 0.05
    mismatches, trials = 0, 0
    for d in (2, 3):
        for protocol in (1, 2):
            for scheme in ("nonpauli", "pauli"):
                cfg = ProtocolConfig(protocol, scheme, d, basis_params=Su2Params(0.0),
                                     noise=NoiseChannel(p_s=p), restart_limit=100)
                for t in range(250 if d == 2 else 120):
                    key = (7, protocol, d, t)
                    res = run_trial(cfg, trial_rng(*key), keep_state=True)
                    status, record, vec = pauli_reference.run(protocol, scheme, d, p, trial_rng(*key), 100)
                    same = _STATUS[res.status] == status and res.record == record
                    if same and vec is not None:
                        same = bool(np.allclose(res.state.amplitudes, vec, atol=1e-10))
                    mismatches += not same
                    trials += 1
    report(2, mismatches == 0, f"{trials} trials at gamma=0 vs independent Pauli simulator, "
                               f"{mismatches} mismatches")


# -- 3 -----------------------------------------------------------------------------


def test_criterion_3_noiseless_protocol1():
    worst = 1.0
    for d in (2, 3, 4):
        params = solve_params_for_target(*MAGIC_A, d)
        cfg = ProtocolConfig(1, "nonpauli", d, basis_params=params)
        ctx = prepare(cfg)
        basis = ctx.target_basis
        c, s = basis.ground_coeff_plus, basis.ground_coeff_minus
        n_a = len(ctx.layout.tiles_of("A"))
        a_ids = [t.tile_id for t in ctx.order[:n_a]]
        for seed in range(4):
            res = run_trial(cfg, np.random.default_rng(seed), keep_state=True)
            assert res.status is Status.ACCEPTED_CORRECT
            signs = {tid: 1 - 2 * b for tid, b in zip(a_ids, res.trajectory[:n_a])}
            want = with_ancilla(encode(ctx.layout, basis, c ** d, s ** d, signs))
            worst = min(worst, fidelity(res.state, want))
    # pair post-selection at equal magnitudes
    cfg = ProtocolConfig(1, "nonpauli", 3, basis_params=Su2Params(math.pi / 2, math.pi / 2, 0.3))
    ctx = prepare(cfg)
    c2 = abs(ctx.target_basis.ground_coeff_plus) ** 2
    expected = c2 ** 3 + (1 - c2) ** 3
    rng = np.random.default_rng(3)
    n = 100_000
    ok_count = sum(pair_stage_attempt(ctx, SILENT, rng)[0] for _ in range(n))
    sigma = math.sqrt(n * expected * (1 - expected))
    z = (ok_count - n * expected) / sigma
    ok = worst >= 1 - 1e-9 and abs(expected - 0.25) < 1e-12 and abs(z) <= 3
    report(3, ok, f"worst fidelity {worst:.12f} (d=2,3,4); pair acceptance {ok_count / n:.5f} "
                  f"vs {expected:.5f} (z={z:+.2f})")


# -- 4 -----------------------------------------------------------------------------

_OPPOSITE = {"A": ("B",), "B": ("A",), "C": ("A", "B")}


def test_criterion_4_syndrome_semantics():
    wrong = 0
    cases = 0
    for params in (solve_params_for_target(*MAGIC_A, 3), Su2Params(2.2, 1.1, 4.0)):
        basis = build_basis(params)
        layout = build_layout(3)
        code = with_ancilla(logical_zero(layout, basis))
        ops = {"A": basis.s_a, "B": basis.s_b, "C": basis.s_c}
        for q in range(9):
            for err in "ABC":
                state = code.copy().apply_single(ops[err], q)
                flipped = set()
                for t in layout.tiles:
                    out, _ = measure_stabilizer(state, t, basis, None, np.random.default_rng(cases))
                    if out == -1:
                        flipped.add(t.tile_id)
                expected = {t.tile_id for k in _OPPOSITE[err] for t in layout.incident(q, k)}
                wrong += flipped != expected
                cases += 1
    report(4, wrong == 0, f"{cases} single-error cases at d=3, {wrong} with wrong flips")


# -- 5 -----------------------------------------------------------------------------


@pytest.fixture(scope="module")
def full_sweep(tmp_path_factory):
    cfg = SweepConfig(protocols=[1, 2], schemes=["nonpauli", "pauli"], distances=[2, 3],
                      p_s_values=[1e-3, 3e-3, 1e-2], seed=SWEEP_SEED)
    records = run_sweep(cfg)
    out = tmp_path_factory.mktemp("sweep") / "fig3.csv"
    emit_csv(records, str(out))
    print(out.read_text())
    return records


def test_criterion_5_error_scaling(full_sweep):
    recs = {(r.protocol, r.scheme, r.distance, r.p_s): r for r in full_sweep}
    problems, notes = [], []
    for protocol in (1, 2):
        for d in (2, 3):
            for p in (3e-3, 1e-2):
                np_r, pa_r = recs[(protocol, "nonpauli", d, p)], recs[(protocol, "pauli", d, p)]
                if not (np_r.ler_total < pa_r.ler_total and np_r.interval[1] < pa_r.interval[0]):
                    problems.append(f"(a) P{protocol} d={d} p={p:g}: {np_r.ler_total:.2e} vs "
                                    f"{pa_r.ler_total:.2e}")
    for protocol in (1, 2):
        for scheme in ("nonpauli", "pauli"):
            for d in (2, 3):
                rs = [recs[(protocol, scheme, d, p)] for p in (1e-3, 3e-3, 1e-2)]
                fit = fit_power_law([r.p_s for r in rs], [r.failures for r in rs], [r.shots for r in rs])
                notes.append(f"P{protocol}/{scheme}/d{d} slope {fit.slope:.2f}")
                if protocol == 1 and scheme == "nonpauli" and fit.slope < 1.7:
                    problems.append(f"(b) P1 nonpauli d={d} slope {fit.slope:.2f} < 1.7 "
                                    f"(failures {[r.failures for r in rs]})")
                if scheme == "pauli" and not 0.8 <= fit.slope <= 1.3:
                    problems.append(f"(b) P{protocol} pauli d={d} slope {fit.slope:.2f} outside [0.8, 1.3]")
    detail = "; ".join(notes)
    if problems:
        detail += " | " + "; ".join(problems)
    report(5, not problems, detail)


# -- 6 -----------------------------------------------------------------------------


def test_criterion_6_first_order_driving():
    cfg = ProtocolConfig(1, "nonpauli", 3)
    off_chain = prepare(cfg).off_chain
    counts = {s: 0 for s in Status}
    for q in off_chain:
        for err in "ABC":
            for seed in range(25):
                res = run_trial(cfg, trial_rng(6, q, ord(err), seed), inject={("drive", q): err})
                counts[res.status] += 1
    bad = counts[Status.ACCEPTED_FAILED]
    summary = ", ".join(f"{s.value} {n}" for s, n in counts.items())
    report(6, bad == 0, f"{len(off_chain)} driving sites x 3 error types x 25 runs: {summary}")


# -- 7 -----------------------------------------------------------------------------


def test_criterion_7_trajectory_table():
    cfg = ProtocolConfig(2, "nonpauli", 2)
    table = build_trajectory_table(cfg)
    total = table.total_probability()
    worst = 1.0
    for seed in range(300):
        res = run_trial(cfg, np.random.default_rng(seed), keep_state=True)
        assert res.accepted
        worst = min(worst, fidelity(res.state, table.entries[res.trajectory].reference))
    clusters = table.clustering()
    print(clusters.format())
    ok = abs(total - 1) < 1e-9 and worst >= 1 - 1e-9
    report(7, ok, f"{len(table.entries)} trajectories, probability sum {total:.12f}, worst trial "
                  f"fidelity {worst:.12f}, {len(clusters.clusters)} logical-state clusters "
                  f"(majority fraction {clusters.majority_fraction:.3f})")


# -- 8 -----------------------------------------------------------------------------


def test_criterion_8_hybrid_surgery():
    rng = np.random.default_rng(8)
    basis_q = build_basis(solve_params_for_target(*MAGIC_A, 2))
    worst, product, m_seen = 1.0, 0.0, set()
    for kind in ("rough", "smooth"):
        merged = build_merged_layout(2, kind, basis_q=basis_q)
        if kind == "rough":
            product = dense_seam_check(merged)["product"]
        for _ in range(3):
            check, per_m = verify_merge_branches(merged, _random_logical(rng), _random_logical(rng))
            worst = min(worst, check.worst_fidelity)
            m_seen |= {(2, kind, m) for m, n in per_m.items() if n}
    basis_q3 = build_basis(solve_params_for_target(*MAGIC_A, 3))
    for kind in ("rough", "smooth"):
        merged = build_merged_layout(3, kind, basis_q=basis_q3)
        for _ in range(6):
            pp, pq = _random_logical(rng), _random_logical(rng)
            mo, state = merge_measure(joint_code_state(merged, pp, pq), merged, None, rng)
            ref = merged_state_reference(merged, pp, pq, mo.m, seam_outcomes=mo.seam_outcomes)
            worst = min(worst, fidelity(state, ref))
            m_seen.add((3, kind, mo.m))
    lay = build_cnot_layout(2, basis_q=basis_q)
    inv = 1 / math.sqrt(2)
    inputs = [((1, 0), (1, 0)), ((1, 0), (0, 1)), ((0, 1), (1, 0)), ((0, 1), (0, 1)), ((inv, inv), (1, 0))]
    cnot_worst, cnot_branches = 1.0, 0
    for c, t in inputs:
        chk = verify_cnot_branches(c, t, layout=lay)
        cnot_worst = min(cnot_worst, chk.worst_fidelity)
        cnot_branches += chk.branches
    both_m = all((d, k, m) in m_seen for d in (2, 3) for k in ("rough", "smooth") for m in (0, 1))
    ok = worst >= 1 - 1e-9 and product < 1e-12 and cnot_worst >= 1 - 1e-9 and both_m
    report(8, ok, f"merge worst fidelity {worst:.12f}, both m seen {both_m}, d=2 seam product residual "
                  f"{product:.1e}, CNOT worst fidelity {cnot_worst:.12f} over {cnot_branches} branches")


# -- 9 -----------------------------------------------------------------------------


def test_criterion_9_determinism(tmp_path):
    base = dict(protocols=[1, 2], schemes=["nonpauli", "pauli"], distances=[2, 3],
                p_s_values=[0.003, 0.03], shots=400, seed=99)
    paths = []
    for workers in (1, 3):
        path = tmp_path / f"w{workers}.csv"
        emit_csv(run_sweep(SweepConfig(workers=workers, **base)), str(path))
        paths.append(path)
    a, b = (p.read_bytes() for p in paths)
    report(9, a == b, f"workers 1 vs 3: {len(a)} bytes, identical={a == b}")
