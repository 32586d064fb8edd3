"""Logical-state initialization protocols and their Pauli-scheme baselines.

Protocol 1 (chain injection)
    Data qubits start in ``|0>``.  Adjacent pairs along the X chain are measured with
    ``S^B S^B`` and post-selected on +1, which turns the chain into
    ``c^d|+..+>_B + s^d|-..->_B``.  Off-chain qubits are then driven to ``|+>_B`` and
    every tile is measured.  B tiles are deterministic; A tiles are random and fix the
    stabilizer sector.

Protocol 2 (transversal injection)
    All qubits start in ``|0>`` and every tile is measured once in canonical order.
    The outcome tuple (the trajectory) labels the heralded logical state.

The Pauli baseline of each protocol is the ``U``-conjugate circuit: code tiles use
X/Z, and the non-Pauli ground-state decomposition is replaced by explicit (noisy)
single-qubit preparation gates ``U^dag`` on the chain (protocol 1) or on every
qubit (protocol 2).

Every tile is measured twice in a row and the trial is discarded when the two
outcomes differ.  Trajectories are stored as bits (0 for +1) in canonical order.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field, replace
from typing import Hashable, Mapping

import numpy as np

from .algebra import MAGIC_A, OperatorBasis, PAULI_BASIS, Su2Params, build_basis, solve_params_for_target
from .circuits import hadamard_test
from .codestate import bloch_to_amplitudes, logical_bloch, with_ancilla
from .engine import StateVector, fidelity
from .lattice import (
    RotatedSurfaceLayout,
    build_layout,
    chain_pairs,
    deterministic_tiles,
    initial_data_state,
    protocol1_init_spec,
    protocol2_init_spec,
)
from .noise import NoiseChannel, NoiseSampler

SCHEMES = ("nonpauli", "pauli")
DEFAULT_TOLERANCE = 1e-6
DEFAULT_RESTART_LIMIT = 1000
# conditional branch probabilities below this are treated as unreachable
REACH_EPS = 1e-12


class Status(str, enum.Enum):
    ACCEPTED_CORRECT = "accepted-correct"
    ACCEPTED_FAILED = "accepted-failed"
    DISCARDED = "discarded-restart"
    EXHAUSTED = "exhausted"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ProtocolConfig:
    """One protocol instance.

    ``basis_params`` fixes the non-Pauli basis directly; when omitted it is solved from
    ``target``.  Protocol 1 solves for a chain of ``d`` qubits, protocol 2 for a single
    qubit (so the Pauli baseline prepares the physical target state on each qubit).
    """

    protocol: int
    scheme: str = "nonpauli"
    distance: int = 3
    basis_params: Su2Params | None = None
    target: tuple[complex, complex] = MAGIC_A
    noise: NoiseChannel = NoiseChannel()
    tolerance: float = DEFAULT_TOLERANCE
    restart_limit: int = DEFAULT_RESTART_LIMIT

    def __post_init__(self):
        if self.protocol not in (1, 2):
            raise ValueError(f"protocol must be 1 or 2, got {self.protocol}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.distance not in (2, 3, 4):
            raise ValueError(f"distance must be 2, 3 or 4, got {self.distance}")
        if not 0.0 < self.tolerance < 1.0:
            raise ValueError(f"tolerance {self.tolerance} outside (0, 1)")
        if self.restart_limit < 1:
            raise ValueError("restart_limit must be positive")
        object.__setattr__(self, "target", (complex(self.target[0]), complex(self.target[1])))

    def resolved_params(self) -> Su2Params:
        if self.basis_params is not None:
            return self.basis_params
        chain_len = self.distance if self.protocol == 1 else 1
        return solve_params_for_target(self.target[0], self.target[1], chain_len)


@dataclass
class TrialResult:
    status: Status
    trajectory: tuple[int, ...] = ()
    restarts: int = 0
    fidelity: float = float("nan")
    record: list[int] = field(default_factory=list)
    fired: list = field(default_factory=list)
    # single-qubit data gates of the final attempt as (stage, qubit)
    gate_log: list[tuple[str, int]] = field(default_factory=list)
    state: StateVector | None = None

    @property
    def accepted(self) -> bool:
        return self.status in (Status.ACCEPTED_CORRECT, Status.ACCEPTED_FAILED)

    @property
    def failed(self) -> bool:
        return self.status is Status.ACCEPTED_FAILED


def classify(final: StateVector, reference: StateVector | None, tolerance: float = DEFAULT_TOLERANCE):
    """``(status, fidelity)``; a missing reference (unreachable trajectory) is a failure."""
    if reference is None:
        return Status.ACCEPTED_FAILED, 0.0
    f = fidelity(final, reference)
    return (Status.ACCEPTED_CORRECT if f >= 1.0 - tolerance else Status.ACCEPTED_FAILED), f


# -- per-config context -------------------------------------------------------


class ProtocolContext:
    """Everything about a config that does not depend on the trial: layout, bases, legs, references."""

    def __init__(self, config: ProtocolConfig):
        self.config = config
        d = config.distance
        self.layout: RotatedSurfaceLayout = build_layout(d)
        self.target_basis: OperatorBasis = build_basis(config.resolved_params())
        nonpauli = config.scheme == "nonpauli"
        self.code_basis = self.target_basis if nonpauli else PAULI_BASIS
        self.channel = replace(config.noise, basis_mode=config.scheme)
        self.num_qubits = self.layout.num_data + 1
        self.drive_gate = self.target_basis.u  # |0> -> |+>_B
        self.prep_gate = self.target_basis.u_dag  # |0> -> c|0> + s'|1>
        self.order = self.layout.canonical_order()
        self.tile_legs = [t.legs(self.code_basis) for t in self.order]
        self.chain = list(self.layout.x_chain.qubits)
        chain_set = set(self.chain)
        self.off_chain = [q for q in range(self.layout.num_data) if q not in chain_set]
        self.pairs = chain_pairs(self.layout)
        sb = self.code_basis.s_b
        self.pair_legs = [[(i, sb), (j, sb)] for i, j in self.pairs]

        if config.protocol == 1:
            self.init_spec = protocol1_init_spec(self.layout)
            self.chain_state = None if nonpauli else self.prep_gate[:, 0]
            self.expected = dict(deterministic_tiles(self.layout, self.init_spec, self.code_basis,
                                                     self.chain_state))
            data0 = initial_data_state(self.layout, self.init_spec, self.code_basis, self.chain_state)
        else:
            self.init_spec = protocol2_init_spec(self.layout)
            self.chain_state = None
            self.expected = {}
            single = np.array([1.0, 0.0]) if nonpauli else self.prep_gate[:, 0]
            data0 = StateVector.product([single] * self.layout.num_data)
        self.initial_state = with_ancilla(data0)
        self._refs: dict[tuple[int, ...], StateVector | None] = {}

    def reference(self, trajectory: tuple[int, ...]) -> StateVector | None:
        """Noiseless state conditioned on ``trajectory``, or None if unreachable."""
        try:
            return self._refs[trajectory]
        except KeyError:
            pass
        state = self.initial_state.copy()
        ref: StateVector | None = state
        for legs, bit in zip(self.tile_legs, trajectory):
            expect = state.expectation(legs).real
            p = (1.0 + (1 - 2 * bit) * expect) / 2.0
            if p < REACH_EPS:
                ref = None
                break
            state.project_operator(legs, 1 - 2 * bit)
        self._refs[trajectory] = ref
        return ref


@functools.lru_cache(maxsize=64)
def prepare(config: ProtocolConfig) -> ProtocolContext:
    return ProtocolContext(config)


# -- shared steps -------------------------------------------------------------


def _measure_tiles(ctx: ProtocolContext, state, noise, rng, result: TrialResult) -> bool:
    """Double-measure every tile in canonical order; False means discard."""
    traj = []
    for tile, legs in zip(ctx.order, ctx.tile_legs):
        site = ("tile", tile.tile_id)
        first = hadamard_test(state, legs, noise, rng, site=site + (0,))
        second = hadamard_test(state, legs, noise, rng, site=site + (1,))
        result.record += [first, second]
        if first != second:
            return False
        exp = ctx.expected.get(tile.tile_id)
        if exp is not None and first != exp:
            return False
        traj.append(0 if first == 1 else 1)
    result.trajectory = tuple(traj)
    return True


def pair_stage_attempt(ctx: ProtocolContext, noise, rng, attempt: int = 0):
    """One attempt of the chain stage; returns ``(ok, state, outcomes, gate_log)``."""
    state = StateVector.ground(ctx.num_qubits)
    gate_log = []
    if ctx.config.scheme == "pauli":
        for q in ctx.chain:
            state.apply_single(ctx.prep_gate, q)
            gate_log.append(("prep", q))
            noise.after_gate(state, q, ("prep", attempt, q))
    outcomes = []
    for k, legs in enumerate(ctx.pair_legs):
        out = hadamard_test(state, legs, noise, rng, site=("pair", attempt, k))
        outcomes.append(out)
        if out != 1:
            return False, state, outcomes, gate_log
    return True, state, outcomes, gate_log


def _finish(ctx: ProtocolContext, state, result: TrialResult, keep_state: bool) -> TrialResult:
    ref = ctx.reference(result.trajectory)
    result.status, result.fidelity = classify(state, ref, ctx.config.tolerance)
    if keep_state:
        result.state = state
    return result


def run_protocol1(config: ProtocolConfig, rng, inject: Mapping[Hashable, str] | None = None,
                  *, keep_state: bool = False) -> TrialResult:
    if config.protocol != 1:
        raise ValueError("run_protocol1 needs a protocol-1 config")
    ctx = prepare(config)
    noise = NoiseSampler(ctx.channel, ctx.code_basis, rng, inject)
    result = TrialResult(status=Status.DISCARDED, fired=noise.fired)
    restarts = 0
    while True:
        ok, state, outcomes, gate_log = pair_stage_attempt(ctx, noise, rng, restarts)
        result.record += outcomes
        if ok:
            break
        restarts += 1
        if restarts >= config.restart_limit:
            result.status, result.restarts = Status.EXHAUSTED, restarts
            return result
    result.restarts = restarts
    if config.scheme == "nonpauli":
        for q in ctx.off_chain:
            state.apply_single(ctx.drive_gate, q)
            gate_log.append(("drive", q))
            noise.after_gate(state, q, ("drive", q))
    result.gate_log = gate_log
    if not _measure_tiles(ctx, state, noise, rng, result):
        return result
    return _finish(ctx, state, result, keep_state)


def run_protocol2(config: ProtocolConfig, rng, inject: Mapping[Hashable, str] | None = None,
                  *, keep_state: bool = False) -> TrialResult:
    if config.protocol != 2:
        raise ValueError("run_protocol2 needs a protocol-2 config")
    ctx = prepare(config)
    noise = NoiseSampler(ctx.channel, ctx.code_basis, rng, inject)
    result = TrialResult(status=Status.DISCARDED, fired=noise.fired)
    state = StateVector.ground(ctx.num_qubits)
    if config.scheme == "pauli":
        for q in range(ctx.layout.num_data):
            state.apply_single(ctx.prep_gate, q)
            result.gate_log.append(("prep", q))
            noise.after_gate(state, q, ("prep", 0, q))
    if not _measure_tiles(ctx, state, noise, rng, result):
        return result
    return _finish(ctx, state, result, keep_state)


def run_trial(config: ProtocolConfig, rng, inject=None, *, keep_state: bool = False) -> TrialResult:
    runner = run_protocol1 if config.protocol == 1 else run_protocol2
    return runner(config, rng, inject, keep_state=keep_state)


def pair_acceptance_probability(basis: OperatorBasis, chain_len: int) -> float:
    """Noiseless probability that every chain pair reads +1: ``|c|^{2d} + |s|^{2d}``."""
    c2 = abs(basis.ground_coeff_plus) ** 2
    s2 = abs(basis.ground_coeff_minus) ** 2
    return c2 ** chain_len + s2 ** chain_len


# -- trajectory tables ----------------------------------------------------------


@dataclass
class TrajectoryEntry:
    reference: StateVector
    bloch: tuple[float, float, float]
    amplitudes: tuple[complex, complex]
    probability: float


@dataclass
class ClusterReport:
    clusters: list[tuple[tuple[float, float, float], int, float]]  # (bloch, count, probability)
    total: int

    @property
    def majority_fraction(self) -> float:
        return max(c for _, c, _ in self.clusters) / self.total if self.total else 0.0

    @property
    def majority_probability(self) -> float:
        return max(p for _, _, p in self.clusters) if self.clusters else 0.0

    def format(self) -> str:
        lines = [f"trajectories {self.total}, logical-state clusters {len(self.clusters)}",
                 f"majority fraction {self.majority_fraction:.6f}"
                 f" (probability-weighted {self.majority_probability:.6f})"]
        for b, c, p in sorted(self.clusters, key=lambda r: -r[1]):
            lines.append(f"  bloch ({b[0]:+.6f}, {b[1]:+.6f}, {b[2]:+.6f})  count {c}  prob {p:.6f}")
        return "\n".join(lines)


@dataclass
class TrajectoryTable:
    config: ProtocolConfig
    entries: dict[tuple[int, ...], TrajectoryEntry]

    def total_probability(self) -> float:
        return float(sum(e.probability for e in self.entries.values()))

    def clustering(self, tol: float = 1e-6) -> ClusterReport:
        clusters: list[list] = []
        for e in self.entries.values():
            for c in clusters:
                if max(abs(x - y) for x, y in zip(c[0], e.bloch)) < tol:
                    c[1] += 1
                    c[2] += e.probability
                    break
            else:
                clusters.append([e.bloch, 1, e.probability])
        return ClusterReport([tuple(c) for c in clusters], len(self.entries))

    def format(self) -> str:
        lines = []
        for traj, e in sorted(self.entries.items()):
            a, b = e.amplitudes
            lines.append("".join(map(str, traj))
                         + f" p={e.probability:.10f} a={a.real:+.8f}"
                         + f" b={b.real:+.8f}{b.imag:+.8f}j")
        return "\n".join(lines)


def build_trajectory_table(config: ProtocolConfig, *, allow_large: bool = False) -> TrajectoryTable:
    """Exhaustive noiseless enumeration of tile outcomes by depth-first projection."""
    if config.distance >= 4 and not allow_large:
        raise ValueError("exhaustive tables beyond d=3 need allow_large=True")
    ctx = prepare(config)
    entries: dict[tuple[int, ...], TrajectoryEntry] = {}

    def visit(state: StateVector, depth: int, prefix: tuple[int, ...], prob: float) -> None:
        if depth == len(ctx.order):
            bloch = logical_bloch(state, ctx.layout, ctx.code_basis)
            entries[prefix] = TrajectoryEntry(state, bloch, bloch_to_amplitudes(bloch), prob)
            return
        legs = ctx.tile_legs[depth]
        expect = state.expectation(legs).real
        for bit in (0, 1):
            p = (1.0 + (1 - 2 * bit) * expect) / 2.0
            if p < REACH_EPS:
                continue
            child = state.copy()
            child.project_operator(legs, 1 - 2 * bit)
            visit(child, depth + 1, prefix + (bit,), prob * p)

    visit(ctx.initial_state.copy(), 0, (), 1.0)
    return TrajectoryTable(config, entries)
