"""Dense statevector engine.

Conventions
-----------
* Qubit ``q`` addresses bit ``q`` of the amplitude index (little-endian), so
  ``|q1 q0>`` with ``q0 = 1, q1 = 0`` is amplitude index 1.
* Operations mutate the state in place and return it, so calls can be chained.
* A projective measurement consumes exactly one uniform draw ``u`` from the
  generator and reports 1 when ``u < P(1)``.  Branches with probability below
  ``BRANCH_EPS`` are treated as impossible.
"""

from __future__ import annotations

import math
from typing import IO, Sequence

import numpy as np

from . import _kernels

MAX_QUBITS = 26
BRANCH_EPS = 1e-14
UNITARY_ATOL = 1e-12

I2 = np.eye(2, dtype=np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)

for _g in (I2, X, Y, Z, H):
    _g.setflags(write=False)


class CapacityError(ValueError):
    """Requested register does not fit the dense-simulation budget."""


def as_gate(matrix, *, check: bool = True) -> np.ndarray:
    """Return ``matrix`` as a contiguous complex 2x2 array, validating unitarity."""
    g = np.ascontiguousarray(matrix, dtype=np.complex128)
    if g.shape != (2, 2):
        raise ValueError(f"expected a 2x2 gate, got shape {g.shape}")
    if check and not is_unitary(g):
        raise ValueError("gate is not unitary")
    return g


def is_unitary(g: np.ndarray, atol: float = UNITARY_ATOL) -> bool:
    return bool(np.allclose(g @ g.conj().T, np.eye(g.shape[0]), atol=atol, rtol=0))


class StateVector:
    """Pure state of ``num_qubits`` qubits stored as 2**n complex amplitudes."""

    __slots__ = ("num_qubits", "amplitudes")

    def __init__(self, amplitudes, *, normalize: bool = False):
        amps = np.array(amplitudes, dtype=np.complex128).ravel()
        n = int(amps.shape[0]).bit_length() - 1
        if amps.shape[0] < 2 or amps.shape[0] != 1 << n:
            raise ValueError(f"amplitude count {amps.shape[0]} is not a power of two >= 2")
        if n > MAX_QUBITS:
            raise CapacityError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit budget")
        if normalize:
            nrm = np.linalg.norm(amps)
            if nrm == 0:
                raise ValueError("cannot normalize the zero vector")
            amps /= nrm
        self.num_qubits = n
        self.amplitudes = amps

    @classmethod
    def ground(cls, n: int) -> StateVector:
        _check_capacity(n)
        amps = np.zeros(1 << n, dtype=np.complex128)
        amps[0] = 1.0
        return cls(amps)

    @classmethod
    def product(cls, qubit_states: Sequence[Sequence[complex]]) -> StateVector:
        """Tensor product; ``qubit_states[q]`` is the 2-vector of qubit ``q``."""
        _check_capacity(len(qubit_states))
        vec = np.ones(1, dtype=np.complex128)
        for s in qubit_states:
            vec = np.kron(np.asarray(s, dtype=np.complex128), vec)
        return cls(vec, normalize=True)

    def copy(self) -> StateVector:
        out = StateVector.__new__(StateVector)
        out.num_qubits = self.num_qubits
        out.amplitudes = self.amplitudes.copy()
        return out

    def __len__(self) -> int:
        return self.amplitudes.shape[0]

    def __repr__(self) -> str:
        return f"StateVector(num_qubits={self.num_qubits})"

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def _check_qubit(self, q: int) -> None:
        if not 0 <= q < self.num_qubits:
            raise IndexError(f"qubit {q} out of range for {self.num_qubits} qubits")

    # -- gates ---------------------------------------------------------------

    def apply_single(self, gate: np.ndarray, q: int) -> StateVector:
        self._check_qubit(q)
        _kernels.apply_single(self.amplitudes, gate, q)
        return self

    def apply_controlled(self, gate: np.ndarray, control: int, target: int) -> StateVector:
        self._check_qubit(control)
        self._check_qubit(target)
        if control == target:
            raise ValueError("control and target must differ")
        _kernels.apply_controlled(self.amplitudes, gate, control, target)
        return self

    def apply_product(self, gate: np.ndarray, qubits: Sequence[int]) -> StateVector:
        """Apply ``gate`` on every qubit in ``qubits`` (a tensor-product operator)."""
        for q in qubits:
            self.apply_single(gate, q)
        return self

    def apply_legs(self, legs: Sequence[tuple[int, np.ndarray]]) -> StateVector:
        """Apply a tensor-product operator given as ``(qubit, gate)`` legs."""
        for q, g in legs:
            self.apply_single(g, q)
        return self

    # -- measurement ---------------------------------------------------------

    def prob_one(self, q: int) -> float:
        self._check_qubit(q)
        return float(_kernels.prob_one(self.amplitudes, q))

    def project(self, q: int, outcome: int) -> float:
        """Project qubit ``q`` onto ``outcome`` and renormalize; returns the branch probability.

        Raises ``ValueError`` when the branch is impossible.
        """
        p1 = self.prob_one(q)
        p = p1 if outcome else 1.0 - p1
        if p < BRANCH_EPS:
            raise ValueError(f"outcome {outcome} on qubit {q} has probability {p:.3g}")
        _kernels.project(self.amplitudes, q, int(outcome), 1.0 / math.sqrt(p))
        return p

    def measure(self, q: int, rng) -> int:
        """Born-rule measurement of qubit ``q``; the state collapses and is renormalized.

        A generator exposing ``note_probability(p1)`` is told the branch probability
        before the draw (used by branch enumeration).
        """
        p1 = self.prob_one(q)
        note = getattr(rng, "note_probability", None)
        if note is not None:
            note(p1)
        u = rng.random()
        if p1 < BRANCH_EPS:
            bit = 0
        elif p1 > 1.0 - BRANCH_EPS:
            bit = 1
        else:
            bit = 1 if u < p1 else 0
        p = p1 if bit else 1.0 - p1
        if p < 1e-15:
            raise RuntimeError("sampled a measurement branch of vanishing norm")
        _kernels.project(self.amplitudes, q, bit, 1.0 / math.sqrt(p))
        return bit

    def reset(self, q: int) -> StateVector:
        """Return a qubit that was just measured to ``|0>``."""
        self._check_qubit(q)
        _kernels.move_to_zero(self.amplitudes, q)
        return self

    # -- observables ---------------------------------------------------------

    def expectation(self, legs: Sequence[tuple[int, np.ndarray]]) -> complex:
        """``<psi|O|psi>`` for a tensor-product operator ``O`` given as legs."""
        other = self.copy().apply_legs(legs)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def project_operator(self, legs: Sequence[tuple[int, np.ndarray]], sign: int) -> float:
        """Apply ``(1 + sign*O)/2`` for an involutive product operator ``O``; renormalize.

        Returns the branch probability. This is the noiseless eigenspace projection used by
        reference-state construction; it does not touch any ancilla.
        """
        other = self.copy().apply_legs(legs)
        self.amplitudes += sign * other.amplitudes
        self.amplitudes *= 0.5
        p = float(np.vdot(self.amplitudes, self.amplitudes).real)
        if p < BRANCH_EPS:
            raise ValueError("projection onto an empty eigenspace")
        self.amplitudes /= math.sqrt(p)
        return p

    def dump(self, fh: IO[str]) -> None:
        """Write ``index re im`` lines with 17 significant digits."""
        for i, a in enumerate(self.amplitudes):
            fh.write(f"{i} {a.real:.17g} {a.imag:.17g}\n")


def _check_capacity(n: int) -> None:
    if not 1 <= n <= MAX_QUBITS:
        raise CapacityError(f"qubit count {n} outside 1..{MAX_QUBITS}")


def ground_state(n: int) -> StateVector:
    return StateVector.ground(n)


def apply_single(state: StateVector, gate: np.ndarray, q: int) -> StateVector:
    return state.apply_single(gate, q)


def apply_controlled(state: StateVector, gate: np.ndarray, control: int, target: int) -> StateVector:
    return state.apply_controlled(gate, control, target)


def measure_and_project(state: StateVector, q: int, rng) -> tuple[int, StateVector]:
    bit = state.measure(q, rng)
    return bit, state


def fidelity(a: StateVector, b: StateVector) -> float:
    """``|<a|b>|^2``; insensitive to global phase."""
    if a.num_qubits != b.num_qubits:
        raise ValueError(f"dimension mismatch: {a.num_qubits} vs {b.num_qubits} qubits")
    ov = np.vdot(a.amplitudes, b.amplitudes)
    return min(1.0, float(ov.real * ov.real + ov.imag * ov.imag))


def trial_rng(master_seed: int, *stream_key: int) -> np.random.Generator:
    """Generator for one trial.

    The stream is Philox-4x64 keyed by numpy's ``SeedSequence(master_seed,
    spawn_key=stream_key)`` hash, so the draws depend only on the seed and the
    key, never on scheduling or worker count.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in stream_key))
    return np.random.Generator(np.random.Philox(ss))


_kernels.warmup()
