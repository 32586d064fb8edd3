"""Independent Pauli-only simulator of both protocols, used as an oracle.

Shares nothing with the package beyond numpy: its own tensor-reshape gate
application, hard-coded tile tables, and its own Pauli noise sampling.  It consumes
random draws in the same order as the package (one draw per noise site, one per
measurement), so under the same generator the outcome records must match exactly.
"""

from __future__ import annotations

import math

import numpy as np

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
EPS = 1e-14

# (kind, qubits) in tile-id order; frozen copies of the rotated layout
TILES = {
    2: [("A", (0, 1)), ("B", (0, 1, 2, 3)), ("A", (2, 3))],
    3: [("A", (0, 1)), ("B", (0, 1, 3, 4)), ("A", (1, 2, 4, 5)), ("B", (2, 5)),
        ("B", (3, 6)), ("A", (3, 4, 6, 7)), ("B", (4, 5, 7, 8)), ("A", (7, 8))],
}


class Sim:
    def __init__(self, n: int):
        self.n = n
        self.psi = np.zeros((2,) * n, dtype=complex)
        self.psi[(0,) * n] = 1.0

    def _axis(self, q: int) -> int:
        return self.n - 1 - q

    def gate(self, g, q: int) -> None:
        ax = self._axis(q)
        self.psi = np.moveaxis(np.tensordot(g, self.psi, axes=([1], [ax])), 0, ax)

    def controlled(self, g, c: int, t: int) -> None:
        idx = [slice(None)] * self.n
        idx[self._axis(c)] = 1
        sub = self.psi[tuple(idx)]
        # the control axis is gone from ``sub``; shift the target axis if needed
        ax = self._axis(t) - (1 if self._axis(t) > self._axis(c) else 0)
        self.psi[tuple(idx)] = np.moveaxis(np.tensordot(g, sub, axes=([1], [ax])), 0, ax)

    def prob_one(self, q: int) -> float:
        idx = [slice(None)] * self.n
        idx[self._axis(q)] = 1
        return float(np.sum(np.abs(self.psi[tuple(idx)]) ** 2))

    def measure(self, q: int, rng) -> int:
        p1 = self.prob_one(q)
        u = rng.random()
        bit = 0 if p1 < EPS else 1 if p1 > 1 - EPS else int(u < p1)
        idx = [slice(None)] * self.n
        idx[self._axis(q)] = 1 - bit
        self.psi[tuple(idx)] = 0
        self.psi /= np.linalg.norm(self.psi)
        return bit

    def reset(self, q: int) -> None:
        one = [slice(None)] * self.n
        zero = list(one)
        one[self._axis(q)] = 1
        zero[self._axis(q)] = 0
        self.psi[tuple(zero)] += self.psi[tuple(one)]
        self.psi[tuple(one)] = 0

    def vector(self) -> np.ndarray:
        return self.psi.reshape(-1).copy()


def pauli_noise(sim: Sim, q: int, p: float, rng) -> None:
    u = rng.random()
    if u < p / 3:
        sim.gate(X, q)
    elif u < 2 * p / 3:
        sim.gate(Z, q)
    elif u < p:
        sim.gate(Y, q)


def pauli_hadamard_test(sim: Sim, legs, anc: int, p: float, rng) -> int:
    sim.gate(H, anc)
    pauli_noise(sim, anc, p, rng)
    for q, g in sorted(legs, key=lambda leg: leg[0]):
        sim.controlled(g, anc, q)
    sim.gate(H, anc)
    pauli_noise(sim, anc, p, rng)
    bit = sim.measure(anc, rng)
    sim.reset(anc)
    return 1 - 2 * bit


def run(protocol: int, scheme: str, d: int, p: float, rng, restart_limit: int = 1000):
    """Returns ``(status, record, final_vector)`` with status accepted/discarded/exhausted."""
    n = d * d
    anc = n
    tiles = TILES[d]
    order = [t for t in tiles if t[0] == "A"] + [t for t in tiles if t[0] == "B"]
    chain = [r * d for r in range(d)]
    record: list[int] = []
    if protocol == 1:
        attempt = 0
        while True:
            sim = Sim(n + 1)
            if scheme == "pauli":
                for q in chain:  # identity preparation gate, still noisy
                    pauli_noise(sim, q, p, rng)
            ok = True
            for a, b in zip(chain[:-1], chain[1:]):
                out = pauli_hadamard_test(sim, [(a, Z), (b, Z)], anc, p, rng)
                record.append(out)
                if out != 1:
                    ok = False
                    break
            if ok:
                break
            attempt += 1
            if attempt >= restart_limit:
                return "exhausted", record, None
        if scheme == "nonpauli":
            for q in range(n):
                if q not in chain:
                    pauli_noise(sim, q, p, rng)
        deterministic_b = True
    else:
        sim = Sim(n + 1)
        if scheme == "pauli":
            for q in range(n):
                pauli_noise(sim, q, p, rng)
        deterministic_b = False
    for kind, qubits in order:
        g = X if kind == "A" else Z
        legs = [(q, g) for q in qubits]
        first = pauli_hadamard_test(sim, legs, anc, p, rng)
        second = pauli_hadamard_test(sim, legs, anc, p, rng)
        record += [first, second]
        if first != second:
            return "discarded", record, None
        if deterministic_b and kind == "B" and first != 1:
            return "discarded", record, None
    return "accepted", record, sim.vector()
