import math

import numpy as np
import pytest

import pauli_reference
from nonpauli_qec.algebra import MAGIC_A, Su2Params, build_basis
from nonpauli_qec.codestate import encode, with_ancilla
from nonpauli_qec.engine import StateVector, fidelity, trial_rng
from nonpauli_qec.noise import SILENT, NoiseChannel
from nonpauli_qec.protocols import (
    ProtocolConfig,
    Status,
    build_trajectory_table,
    classify,
    pair_acceptance_probability,
    pair_stage_attempt,
    prepare,
    run_trial,
)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_noiseless_protocol1_gives_encoded_target(d):
    cfg = ProtocolConfig(1, "nonpauli", d)
    ctx = prepare(cfg)
    n_a = len(ctx.layout.tiles_of("A"))
    for seed in range(3):
        res = run_trial(cfg, np.random.default_rng(seed), keep_state=True)
        assert res.status is Status.ACCEPTED_CORRECT
        a_ids = [t.tile_id for t in ctx.order[:n_a]]
        signs = {tid: 1 - 2 * b for tid, b in zip(a_ids, res.trajectory[:n_a])}
        want = with_ancilla(encode(ctx.layout, ctx.target_basis, *MAGIC_A, signs))
        assert fidelity(res.state, want) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("scheme", ["nonpauli", "pauli"])
@pytest.mark.parametrize("protocol", [1, 2])
@pytest.mark.parametrize("d", [2, 3])
def test_noiseless_trials_accept(protocol, scheme, d):
    cfg = ProtocolConfig(protocol, scheme, d)
    for seed in range(5):
        res = run_trial(cfg, np.random.default_rng(seed))
        assert res.status is Status.ACCEPTED_CORRECT
        assert res.fidelity > 1 - 1e-10


def test_pair_acceptance_rate_matches_formula():
    cfg = ProtocolConfig(1, "nonpauli", 3)
    ctx = prepare(cfg)
    want = pair_acceptance_probability(ctx.target_basis, 3)
    rng = np.random.default_rng(2024)
    n = 20_000
    ok = sum(pair_stage_attempt(ctx, SILENT, rng)[0] for _ in range(n))
    assert abs(ok - n * want) < 4 * math.sqrt(n * want * (1 - want))


def test_pair_acceptance_limits():
    basis = build_basis(Su2Params(0.0))
    assert pair_acceptance_probability(basis, 3) == pytest.approx(1.0)
    basis = build_basis(Su2Params(math.pi / 2, math.pi / 2, 0.0))
    assert pair_acceptance_probability(basis, 2) == pytest.approx(0.5)


@pytest.mark.parametrize("protocol,scheme,d,prep,drive", [
    (1, "nonpauli", 3, 0, 6),
    (1, "pauli", 3, 3, 0),
    (1, "nonpauli", 2, 0, 2),
    (1, "pauli", 2, 2, 0),
    (2, "nonpauli", 3, 0, 0),
    (2, "pauli", 3, 9, 0),
])
def test_gate_counts(protocol, scheme, d, prep, drive):
    res = run_trial(ProtocolConfig(protocol, scheme, d), np.random.default_rng(0))
    stages = [s for s, _ in res.gate_log]
    assert stages.count("prep") == prep
    assert stages.count("drive") == drive
    if protocol == 1 and scheme == "nonpauli":
        chain = set(prepare(ProtocolConfig(protocol, scheme, d)).chain)
        assert not chain & {q for _, q in res.gate_log}


@pytest.mark.parametrize("q", [1, 2, 4, 5, 7, 8])
def test_driving_error_is_caught(q):
    cfg = ProtocolConfig(1, "nonpauli", 3)
    res = run_trial(cfg, np.random.default_rng(q), inject={("drive", q): "A"})
    assert res.status is Status.DISCARDED


def test_classify_examples():
    a = StateVector([1, 0])
    assert classify(a, None) == (Status.ACCEPTED_FAILED, 0.0)
    assert classify(a, a)[0] is Status.ACCEPTED_CORRECT
    near = StateVector([1, 1e-4], normalize=True)
    assert classify(a, near, 1e-6) == (Status.ACCEPTED_CORRECT, pytest.approx(1 - 1e-8))
    far = StateVector([1, 1e-2], normalize=True)
    assert classify(a, far, 1e-6)[0] is Status.ACCEPTED_FAILED


def test_config_validation():
    with pytest.raises(ValueError):
        ProtocolConfig(3)
    with pytest.raises(ValueError):
        ProtocolConfig(1, "steane")
    with pytest.raises(ValueError):
        ProtocolConfig(1, distance=5)
    with pytest.raises(ValueError):
        ProtocolConfig(1, tolerance=0.0)


def test_protocol2_solves_single_qubit_target():
    p1 = ProtocolConfig(1, distance=3).resolved_params()
    p2 = ProtocolConfig(2, distance=3).resolved_params()
    assert p1 != p2
    basis = build_basis(p2)
    v = np.array([basis.ground_coeff_plus, basis.ground_coeff_minus])
    assert abs(abs(np.vdot(v, np.array(MAGIC_A))) - 1) < 1e-10


# -- trajectory tables -----------------------------------------------------------


def test_trajectory_table_d2():
    table = build_trajectory_table(ProtocolConfig(1, "nonpauli", 2))
    assert 1 <= len(table.entries) <= 8
    assert table.total_probability() == pytest.approx(1.0, abs=1e-12)
    # protocol 1 is trajectory independent: one logical state
    assert len(table.clustering().clusters) == 1


def test_trajectory_table_identity_basis_d3():
    cfg = ProtocolConfig(2, "nonpauli", 3, basis_params=Su2Params(0.0))
    table = build_trajectory_table(cfg)
    n_a = len(prepare(cfg).layout.tiles_of("A"))
    assert len(table.entries) == 2 ** n_a
    assert all(not any(t[n_a:]) for t in table.entries)
    assert table.total_probability() == pytest.approx(1.0)


def test_trajectory_table_refuses_d4():
    with pytest.raises(ValueError):
        build_trajectory_table(ProtocolConfig(2, "nonpauli", 4))


# -- Pauli reduction against the independent simulator ----------------------------

STATUS_MAP = {
    Status.ACCEPTED_CORRECT: "accepted",
    Status.ACCEPTED_FAILED: "accepted",
    Status.DISCARDED: "discarded",
    Status.EXHAUSTED: "exhausted",
}


@pytest.mark.parametrize("scheme", ["nonpauli", "pauli"])
@pytest.mark.parametrize("protocol", [1, 2])
@pytest.mark.parametrize("d", [2, 3])
def test_identity_basis_matches_pauli_oracle(protocol, scheme, d):
    p = 0.05
    cfg = ProtocolConfig(protocol, scheme, d, basis_params=Su2Params(0.0),
                         noise=NoiseChannel(p_s=p), restart_limit=50)
    trials = 60 if d == 3 else 150
    for t in range(trials):
        res = run_trial(cfg, trial_rng(99, d, t), keep_state=True)
        status, record, vec = pauli_reference.run(protocol, scheme, d, p, trial_rng(99, d, t), 50)
        assert STATUS_MAP[res.status] == status
        assert res.record == record
        if vec is not None:
            assert np.allclose(res.state.amplitudes, vec, atol=1e-10)


def test_failures_need_two_faults():
    cfg = ProtocolConfig(1, "nonpauli", 2, noise=NoiseChannel(p_s=0.03))
    seen = 0
    for t in range(4000):
        res = run_trial(cfg, trial_rng(5, t))
        if res.failed:
            seen += 1
            assert len(res.fired) >= 2, res.fired
    assert seen >= 1
