"""String operators and gate fidelities.

After a rotation ``R_z(theta)`` the doubly-terminated chain is an eigenstate of
a string whose axis is rotated by ``theta`` on the sites left of the measured
block and on the left termination, and unrotated to its right. The fidelity
follows from ``F^2 = (1 + s <string>) / 2`` with the sign ``s`` fixed by the
initial eigenvalue and the Pauli frame. ``oracle_fidelity`` reaches the same
number without string operators, by enumerating measurement outcomes of a
dense ground state.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .aklt import rz
from .buffering import buffered_rotation, buffered_rotation_concatenated
from .chain import ChainLayout, LayoutError, StateVector, chain_ground_state, expectation
from .measurement import PauliFrame
from .rg import uhlmann_fidelity
from .spin import (
    cartesian_states,
    pauli_matrices,
    pi_rotation_exact,
    planar_axis,
    spin1_operators,
    spin_half_operators,
    theta_state,
    two_site_dot,
)

# largest |<string>| - 1 tolerated before clamping is considered a defect
CLAMP_SLACK = 1e-9


@dataclass(frozen=True)
class StringOperator:
    axis: np.ndarray
    left_factor: np.ndarray
    site_factor: np.ndarray
    right_factor: np.ndarray
    # sites whose label exceeds ``split_label`` use ``tail_factor`` instead
    split_label: int | None = None
    tail_factor: np.ndarray | None = None

    def factors(self, layout: ChainLayout) -> dict[int, np.ndarray]:
        if not (layout.left_terminated and layout.right_terminated):
            raise LayoutError("string operators need a doubly-terminated layout")
        out = {0: self.left_factor, layout.n_sites - 1: self.right_factor}
        for pos in layout.spin1_positions:
            tail = self.split_label is not None and layout.labels[pos] > self.split_label
            out[pos] = self.tail_factor if tail else self.site_factor
        return out

    def dense(self, layout: ChainLayout) -> np.ndarray:
        f = self.factors(layout)
        return reduce(np.kron, [f[i] for i in range(layout.n_sites)])


def _axis(axis) -> np.ndarray:
    if isinstance(axis, str):
        return np.eye(3)[("x", "y", "z").index(axis)]
    if np.isscalar(axis):
        return planar_axis(float(axis))
    return np.asarray(axis, dtype=float) / np.linalg.norm(axis)


def string_operator(axis, layout: ChainLayout, right_pauli="x") -> StringOperator:
    """``sigma_axis (x) exp(i pi S_axis) (x) ... (x) sigma_right`` on ``layout``.

    ``axis`` is ``"x"|"y"|"z"``, an in-plane angle, or a 3-vector.
    """
    if not (layout.left_terminated and layout.right_terminated):
        raise LayoutError("string operators need a doubly-terminated layout")
    n = _axis(axis)
    q = pauli_matrices()
    return StringOperator(n, q.along(n), pi_rotation_exact(n), q.along(_axis(right_pauli)))


def rotated_string(theta: float, split_label: int | None, right_pauli="x") -> StringOperator:
    """String for the ``x`` logical after ``R_z(theta)`` applied at ``split_label``."""
    q = pauli_matrices()
    n = planar_axis(theta)
    return StringOperator(
        n,
        q.along(n),
        pi_rotation_exact(n),
        q.along(_axis(right_pauli)),
        split_label=split_label,
        tail_factor=pi_rotation_exact("x"),
    )


def string_expectation(state: StateVector, op: StringOperator) -> float:
    val = expectation(state, op) / state.norm**2
    if abs(val.imag) > 1e-8:
        raise ArithmeticError(f"string expectation has imaginary part {val.imag:.2e}")
    return float(val.real)


@dataclass(frozen=True)
class FidelityRecord:
    beta: float
    L: int
    theta: float
    F: float
    success_probability: float
    byproduct_sign: int
    n_spin1: int
    expectation: float = float("nan")

    @property
    def normalized_success(self) -> float:
        return self.success_probability * 3.0**self.L


def initial_sign(state: StateVector, axis: str = "x") -> int:
    """Eigenvalue of ``Sigma_axis (x) sigma_axis`` on an unmeasured state."""
    v = string_expectation(state, string_operator(axis, state.layout, axis))
    return 1 if v > 0 else -1


def fidelity_from_expectation(value: float, sign: int) -> float:
    arg = sign * value
    if abs(arg) > 1 + CLAMP_SLACK:
        raise ArithmeticError(f"string expectation {value} outside [-1, 1]")
    return math.sqrt(min(max(0.5 * (1 + arg), 0.0), 1.0))


def rotation_fidelity(
    beta: float,
    n_spin1: int,
    L: int,
    theta: float,
    block_start: int | None = None,
    ground: StateVector | None = None,
    concatenated: bool = False,
) -> FidelityRecord:
    """Fidelity of the buffered ``R_z(theta)`` on the doubly-terminated ground state."""
    state = ground if ground is not None else chain_ground_state(n_spin1, float(beta)).state
    lam = initial_sign(state, "x")
    if concatenated:
        levels = round(math.log(L, 3))
        if 3**levels != L:
            raise ValueError("concatenation needs L = 3**levels")
        res = buffered_rotation_concatenated(state, block_start, theta, levels)
    else:
        res = buffered_rotation(state, block_start, L, theta)
    op = rotated_string(theta, split_label=min(res.block_sites))
    value = string_expectation(res.post_state, op)
    s = lam * res.byproduct.sign_on("x")
    return FidelityRecord(
        beta=float(beta),
        L=L,
        theta=float(theta),
        F=fidelity_from_expectation(value, s),
        success_probability=res.success_probability,
        byproduct_sign=s,
        n_spin1=n_spin1,
        expectation=value,
    )


def worst_case_scan(
    beta: float, n_spin1: int, L: int, theta_grid, ground: StateVector | None = None
) -> tuple[float, float]:
    """``(theta_min, F_min)`` over ``theta_grid``; ties go to the first angle."""
    grid = list(theta_grid)
    if not grid:
        raise ValueError("theta grid is empty")
    state = ground if ground is not None else chain_ground_state(n_spin1, float(beta)).state
    fs = [rotation_fidelity(beta, n_spin1, L, t, ground=state).F for t in grid]
    i = int(np.argmin(fs))
    return grid[i], fs[i]


# --- dense oracle -----------------------------------------------------------

ORACLE_MAX_SPIN1 = 6


def _dense_hamiltonian(n_spin1: int, beta: float) -> np.ndarray:
    dims = [2] + [3] * n_spin1 + [2]
    x = two_site_dot()
    bond = x - beta * x @ x
    s = spin_half_operators()
    S = spin1_operators()
    left = np.real(sum(np.kron(a, b) for a, b in zip(s, S)))
    right = np.real(sum(np.kron(b, a) for a, b in zip(s, S)))
    dim = math.prod(dims)
    H = np.zeros((dim, dim))
    for i in range(len(dims) - 1):
        term = left if i == 0 else right if i == len(dims) - 2 else bond
        pre = math.prod(dims[:i])
        post = math.prod(dims[i + 2 :])
        H += np.kron(np.kron(np.eye(pre), term), np.eye(post))
    return H


def _decoded_termination_state(T: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Average two-termination state after measuring every spin-1 index of ``T``.

    ``T`` has axes ``(left, s_1..s_m, right)``. Row 0 of ``basis`` is the state
    along the string axis and row 2 is ``|z>``. Each outcome is corrected by a
    Pauli on the right qubit that undoes its sign on the x- and z-type logicals.
    """
    m = T.ndim - 2
    for j in range(m):
        T = np.moveaxis(np.tensordot(basis.conj(), T, axes=([1], [j + 1])), 0, j + 1)
    T = T.reshape(2, 3**m, 2)
    q = pauli_matrices()
    rho = np.zeros((4, 4), dtype=complex)
    for idx, outcome in enumerate(itertools.product(range(3), repeat=m)):
        flip_x = sum(o != 0 for o in outcome) % 2
        flip_z = sum(o != 2 for o in outcome) % 2
        corr = np.linalg.matrix_power(q.sz, flip_x) @ np.linalg.matrix_power(q.sx, flip_z)
        psi = (T[:, idx, :] @ corr.T).reshape(4)
        rho += np.outer(psi, psi.conj())
    return rho / np.trace(rho).real


def oracle_fidelity(beta: float, n_spin1: int, L: int, theta: float) -> float:
    """Gate fidelity from dense diagonalization and outcome enumeration.

    The block sits against the right termination. The remaining spin-1 sites
    are measured in the basis containing the zero state of ``S`` along the
    rotated axis; decoded outcomes give an effective state of the two
    termination qubits, compared with ``R_z(theta)`` applied to the decoded
    state of the unmeasured chain.
    """
    if n_spin1 > ORACLE_MAX_SPIN1:
        raise ValueError(f"oracle limited to n_spin1 <= {ORACLE_MAX_SPIN1}")
    if L > n_spin1 or L % 2 == 0:
        raise ValueError("block must be odd and fit in the chain")
    H = _dense_hamiltonian(n_spin1, beta)
    _, vecs = np.linalg.eigh(H)
    g = vecs[:, 0].reshape([2] + [3] * n_spin1 + [2])
    c = cartesian_states()
    z = c.z_state
    # the block occupies the trailing spin-1 axes; removing its first axis
    # shifts the next block site into the same position
    T = g.astype(complex)
    frame = PauliFrame()
    first = n_spin1 - L + 1
    for i in range(L):
        centre = i == L // 2
        T = np.tensordot((theta_state(theta) if centre else z).conj(), T, axes=([0], [first]))
        frame = frame.compose(PauliFrame(1, 0) if centre else PauliFrame(0, 1))
    rotated = np.array([theta_state(2 * theta), theta_state(2 * theta + np.pi), z])
    rho = _decoded_termination_state(T, rotated)
    rho0 = _decoded_termination_state(g.astype(complex), c.as_rows())
    q = pauli_matrices()
    right = np.linalg.matrix_power(q.sx, frame.x) @ np.linalg.matrix_power(q.sz, frame.z)
    U = np.kron(rz(theta), right)
    ideal = U @ rho0 @ U.conj().T
    return min(uhlmann_fidelity(rho, ideal), 1.0)
