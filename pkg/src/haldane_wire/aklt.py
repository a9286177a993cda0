"""Exact AKLT matrix product states and per-outcome logical maps.

The MPS uses Pauli matrices ``sigma_x, sigma_x sigma_z, sigma_z`` for the
Cartesian labels ``x, y, z``. A left termination spin carries the column index
of the first matrix; a right termination closes the product through the
singlet map ``sigma_x sigma_z``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import StateVector, build_layout, fix_phase
from .spin import AXES, cartesian_states, pauli_matrices, theta_state

OUTCOME_LABELS = ("standard:x", "standard:y", "standard:z", "rotated:theta", "rotated:theta+pi", "rotated:z")


@dataclass(frozen=True)
class AkltChainSpec:
    n_spin1: int
    phi: np.ndarray | None = None
    right_terminated: bool = False

    def __post_init__(self):
        if self.n_spin1 < 1:
            raise ValueError("n_spin1 must be positive")
        if self.phi is not None:
            phi = np.asarray(self.phi, dtype=complex)
            if phi.shape != (2,) or abs(np.linalg.norm(phi) - 1) > 1e-12:
                raise ValueError("phi must be a normalized 2-component vector")
            object.__setattr__(self, "phi", phi)


@dataclass(frozen=True)
class LogicalMap:
    matrix: np.ndarray
    outcome_label: str

    def is_proportional_to_unitary(self, atol: float = 1e-12) -> bool:
        m = self.matrix
        g = m.conj().T @ m
        return bool(np.allclose(g, g[0, 0] * np.eye(2), atol=atol) and abs(g[0, 0]) > atol)


def site_tensor() -> np.ndarray:
    """MPS tensor ``T[m] = sum_k <m|k> sigma_k`` in the m-basis, shape (3, 2, 2)."""
    rows = cartesian_states().as_rows()
    q = pauli_matrices()
    mats = np.array([q.mps_matrix(k) for k in AXES])
    return np.einsum("km,kab->mab", rows, mats)


def _transfer_tensor(n_spin1: int) -> np.ndarray:
    """``X[a, m_1..m_n, c] = <c| sigma_{m_n} ... sigma_{m_1} |a>``."""
    T = site_tensor()
    # psi[a, ..., v]: virtual vector after the sites so far, with the column index a
    psi = np.eye(2, dtype=complex)
    for _ in range(n_spin1):
        psi = np.einsum("...v,mwv->...mw", psi, T)
    return psi


def aklt_state(spec: AkltChainSpec) -> StateVector:
    """AKLT state on the left-terminated layout, or the doubly-terminated singlet.

    For a left-terminated chain the right edge is fixed by ``phi``; the state is
    linear in ``phi`` and the doubly-terminated state equals
    ``sum_q aklt_state(phi=|q>) (x) |q>``.
    """
    n = spec.n_spin1
    closing = pauli_matrices().sy_paper
    X = _transfer_tensor(n)
    # D[a, m..., c] = <c| sigma_y M |a>
    D = np.einsum("cv,...v->...c", closing, X)
    if spec.right_terminated:
        amps = D.reshape(-1)
        layout = build_layout(n, True, True)
    else:
        phi = spec.phi if spec.phi is not None else np.array([1.0, 0.0], dtype=complex)
        amps = np.einsum("...c,c->...", D, phi).reshape(-1)
        layout = build_layout(n, True, False)
    amps = fix_phase(amps)
    return StateVector(amps / np.linalg.norm(amps), layout)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def mps_contraction(vec: np.ndarray) -> np.ndarray:
    """Logical action ``sum_b <vec|b> sigma_b`` of projecting a site onto ``vec``."""
    T = site_tensor()
    return np.einsum("m,mab->ab", np.conj(vec), T)


def logical_map(outcome: str, basis_theta: float = 0.0) -> LogicalMap:
    """Logical action of a single-site outcome, up to global phase.

    ``outcome`` is one of ``x, y, z`` (standard basis) or ``theta``, ``theta+pi``
    and ``z`` for the basis rotated by ``basis_theta`` (use a ``rotated:`` or
    ``standard:`` prefix to disambiguate ``z``).
    """
    q = pauli_matrices()
    kind, _, name = outcome.rpartition(":")
    if name == "z":
        m, label = q.sz, (kind or "standard") + ":z"
    elif kind in ("", "standard") and name in ("x", "y"):
        m, label = q.mps_matrix(name), "standard:" + name
    elif name == "theta":
        m, label = q.sx @ rz(basis_theta), "rotated:theta"
    elif name == "theta+pi":
        m, label = q.sy_paper @ rz(basis_theta), "rotated:theta+pi"
    else:
        raise ValueError(f"unknown outcome {outcome!r}")
    return LogicalMap(np.array(m, dtype=complex), label)


def phase_free_overlap(a: np.ndarray, b: np.ndarray) -> float:
    """``|<A, B>| / (||A|| ||B||)``; equals 1 iff A and B agree up to a phase."""
    return float(abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b)))


def rotated_outcome_vector(outcome: str, theta: float) -> np.ndarray:
    return {
        "theta": theta_state(theta),
        "theta+pi": theta_state(theta + np.pi),
        "z": cartesian_states().z_state,
    }[outcome]
