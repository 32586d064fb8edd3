"""SU(2)-conjugated operator bases ``S^A = U X U^dag``, ``S^B = U Z U^dag``.

The transformation is ``U = exp(i gamma/2 * n.sigma)`` with rotation axis
``n = (sin theta cos phi, sin theta sin phi, cos theta)``.  Eigenvectors are
kept as columns of ``U`` (``|+>_B = U|0>``, ``|->_B = U|1>``, ``|+-_A> = U|+->``)
so that ``S^A`` maps ``|+>_B`` to ``|->_B`` exactly, which is what makes a
chain of ``S^A`` factors act as the logical X of the rotated code.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .engine import I2, X, Y, Z

TWO_PI = 2.0 * math.pi
ALGEBRA_TOL = 1e-12
COMMUTATION_TOL = 1e-10


@dataclass(frozen=True)
class Su2Params:
    """Rotation angle ``gamma`` about the axis with polar ``theta`` and azimuth ``phi``."""

    gamma: float
    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        vals = (self.gamma, self.theta, self.phi)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite SU(2) parameters {vals}")
        gamma = self.gamma % TWO_PI
        theta = self.theta % TWO_PI
        phi = self.phi
        if theta > math.pi:
            # n(theta, phi) == n(2pi - theta, phi + pi)
            theta = TWO_PI - theta
            phi = phi + math.pi
        phi = phi % TWO_PI
        object.__setattr__(self, "gamma", float(gamma))
        object.__setattr__(self, "theta", float(theta))
        object.__setattr__(self, "phi", float(phi))

    @classmethod
    def random(cls, rng: np.random.Generator) -> Su2Params:
        # uniform axis on the sphere, uniform angle
        return cls(
            gamma=float(rng.uniform(0, TWO_PI)),
            theta=float(math.acos(rng.uniform(-1, 1))),
            phi=float(rng.uniform(0, TWO_PI)),
        )


PAULI_PARAMS = Su2Params(0.0, 0.0, 0.0)


def transformation(params: Su2Params) -> np.ndarray:
    g, t, p = params.gamma, params.theta, params.phi
    n_sigma = np.array(
        [[math.cos(t), math.sin(t) * cmath.exp(-1j * p)],
         [math.sin(t) * cmath.exp(1j * p), -math.cos(t)]],
        dtype=np.complex128,
    )
    return math.cos(g / 2) * I2 + 1j * math.sin(g / 2) * n_sigma


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class OperatorBasis:
    params: Su2Params
    u: np.ndarray
    s_a: np.ndarray
    s_b: np.ndarray
    s_c: np.ndarray
    eig_a_plus: np.ndarray
    eig_a_minus: np.ndarray
    eig_b_plus: np.ndarray
    eig_b_minus: np.ndarray
    ground_coeff_plus: complex
    ground_coeff_minus: complex
    is_pauli: bool = field(default=False)

    def op(self, kind: str) -> np.ndarray:
        """Single-qubit factor of an ``A``- or ``B``-type stabilizer."""
        if kind == "A":
            return self.s_a
        if kind == "B":
            return self.s_b
        raise ValueError(f"unknown operator kind {kind!r}")

    def eigvec(self, kind: str, sign: int) -> np.ndarray:
        table = {("A", 1): self.eig_a_plus, ("A", -1): self.eig_a_minus,
                 ("B", 1): self.eig_b_plus, ("B", -1): self.eig_b_minus}
        return table[(kind, sign)]

    @property
    def u_dag(self) -> np.ndarray:
        return _frozen(self.u.conj().T)


def build_basis(params: Su2Params) -> OperatorBasis:
    u = transformation(params)
    ud = u.conj().T
    s_a = u @ X @ ud
    s_b = u @ Z @ ud
    s_c = 1j * s_a @ s_b  # == U Y U^dag
    inv_sqrt2 = 1 / math.sqrt(2)
    return OperatorBasis(
        params=params,
        u=_frozen(u),
        s_a=_frozen(s_a),
        s_b=_frozen(s_b),
        s_c=_frozen(s_c),
        eig_a_plus=_frozen(u @ np.array([inv_sqrt2, inv_sqrt2])),
        eig_a_minus=_frozen(u @ np.array([inv_sqrt2, -inv_sqrt2])),
        eig_b_plus=_frozen(u[:, 0]),
        eig_b_minus=_frozen(u[:, 1]),
        ground_coeff_plus=complex(np.conj(u[0, 0])),
        ground_coeff_minus=complex(np.conj(u[0, 1])),
        is_pauli=params.gamma == 0.0,
    )


PAULI_BASIS = build_basis(PAULI_PARAMS)


# -- checks ---------------------------------------------------------------


def residual(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)))


def kron_all(ops) -> np.ndarray:
    return reduce(np.kron, ops)


def commutator_residual(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a @ b - b @ a)))


def basis_residuals(basis: OperatorBasis) -> dict[str, float]:
    """Single-qubit algebra residuals (all should vanish)."""
    sa, sb, sc, u = basis.s_a, basis.s_b, basis.s_c, basis.u
    ud = u.conj().T
    return {
        "conjugation_a": residual(sa, u @ X @ ud),
        "conjugation_b": residual(sb, u @ Z @ ud),
        "involution_a": residual(sa @ sa, I2),
        "involution_b": residual(sb @ sb, I2),
        "involution_c": residual(sc @ sc, I2),
        "anticommutation": residual(sa @ sb, -sb @ sa),
        "c_product": residual(sc, 1j * sa @ sb),
        "unitarity_u": residual(u @ ud, I2),
        "eig_b": max(residual(sb @ basis.eig_b_plus, basis.eig_b_plus),
                     residual(sb @ basis.eig_b_minus, -basis.eig_b_minus)),
        "eig_a": max(residual(sa @ basis.eig_a_plus, basis.eig_a_plus),
                     residual(sa @ basis.eig_a_minus, -basis.eig_a_minus)),
        "ground_norm": abs(abs(basis.ground_coeff_plus) ** 2
                           + abs(basis.ground_coeff_minus) ** 2 - 1.0),
        "ground_reconstruction": residual(
            basis.ground_coeff_plus * basis.eig_b_plus
            + basis.ground_coeff_minus * basis.eig_b_minus,
            np.array([1.0, 0.0])),
    }


# 7-qubit parity checks with one generator supported on the first four qubits
_STEANE_SUPPORTS = ((0, 1, 2, 3), (0, 1, 4, 5), (0, 2, 4, 6))


def steane_generators(basis: OperatorBasis) -> list[np.ndarray]:
    """Six Steane-code generators with the first qubit's X/Z replaced by S^A/S^B."""
    gens = []
    for kind, pauli in (("A", X), ("B", Z)):
        for support in _STEANE_SUPPORTS:
            ops = []
            for q in range(7):
                if q not in support:
                    ops.append(I2)
                elif q == 0:
                    ops.append(basis.op(kind))
                else:
                    ops.append(pauli)
            gens.append(kron_all(ops))
    return gens


@dataclass
class CommutationReport:
    residuals: dict[str, float]
    informational: dict[str, float]
    tolerance: float = COMMUTATION_TOL

    @property
    def passed(self) -> bool:
        return all(v <= self.tolerance for v in self.residuals.values())

    @property
    def worst(self) -> float:
        return max(self.residuals.values())


def check_cross_qubit_commutation(basis: OperatorBasis) -> CommutationReport:
    """Verify ``[S^A x S^A, S^B x S^B] = 0`` and the substituted Steane generators commute.

    ``informational`` carries the mixed ``X x X`` vs ``S^B x S^B`` commutator, which is
    nonzero for generic non-Pauli bases and is not part of the pass criterion.
    """
    sa, sb = basis.s_a, basis.s_b
    res = {
        "two_qubit": commutator_residual(np.kron(sa, sa), np.kron(sb, sb)),
        "two_qubit_mixed_sites": commutator_residual(np.kron(sa, X), np.kron(sb, Z)),
    }
    gens = steane_generators(basis)
    # the pair S^A XXX III / S^B ZZZ III
    res["steane_pair"] = commutator_residual(gens[0], gens[3])
    res["steane_all"] = max(
        commutator_residual(gens[i], gens[j])
        for i in range(len(gens)) for j in range(i + 1, len(gens))
    )
    info = {"mixed_pauli_nonpauli": commutator_residual(np.kron(X, X), np.kron(sb, sb))}
    return CommutationReport(residuals=res, informational=info)


# -- target solving -------------------------------------------------------


def solve_params_for_target(alpha: complex, beta: complex, chain_len: int) -> Su2Params:
    """Find the basis whose ground-state coefficients, raised to ``chain_len``, give ``(alpha, beta)``.

    The ground state decomposes as ``|0> = c|+>_B + s e^{i phi'}|->_B``; post-selecting a
    chain of ``chain_len`` such qubits leaves amplitudes ``(c^d, s^d e^{i d phi'})``.  The
    returned solution uses ``theta = pi/2`` (which minimizes ``gamma`` for a given
    magnitude split) and the principal ``d``-th root of the relative phase.
    """
    if chain_len < 1:
        raise ValueError("chain length must be >= 1")
    alpha, beta = complex(alpha), complex(beta)
    n2 = abs(alpha) ** 2 + abs(beta) ** 2
    if abs(n2 - 1.0) > 1e-9:
        raise ValueError(f"target amplitudes not normalized (|a|^2+|b|^2 = {n2})")
    small = min(abs(alpha), abs(beta))
    if 0.0 < small < 1e-6:
        warnings.warn(
            f"target amplitude {small:.3g} is tiny; the {chain_len}-th root amplifies its error",
            RuntimeWarning, stacklevel=2,
        )
    mag_c = abs(alpha) ** (1.0 / chain_len)
    mag_s = abs(beta) ** (1.0 / chain_len)
    gamma = 2.0 * math.atan2(mag_s, mag_c)
    rel = cmath.phase(beta) - cmath.phase(alpha) if abs(alpha) > 0 and abs(beta) > 0 else 0.0
    # with theta = pi/2: coeff_plus = cos(gamma/2), coeff_minus = sin(gamma/2) e^{i(phi - pi/2)}
    phi = math.pi / 2 + rel / chain_len
    return Su2Params(gamma=gamma, theta=math.pi / 2, phi=phi)


MAGIC_A = (1 / math.sqrt(2), cmath.exp(1j * math.pi / 4) / math.sqrt(2))
