"""Spin-1 and spin-1/2 operators, Cartesian spin-1 states and two-site identities.

All spin-1 matrices use the m = (+1, 0, -1) ordering. The Cartesian states are
chosen real in that basis, which makes the two-site singlet read
``(|xx> - |yy> + |zz>) / sqrt(3)`` and matches the Pauli convention
``sigma_y = sigma_x sigma_z`` used for the AKLT matrix product state.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

_SQRT2 = np.sqrt(2.0)
AXES = ("x", "y", "z")


@dataclass(frozen=True)
class SpinOperatorSet:
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray

    def __iter__(self):
        return iter((self.sx, self.sy, self.sz))

    def along(self, axis) -> np.ndarray:
        """Spin component along a named axis or a 3-vector direction."""
        n = axis_vector(axis)
        return n[0] * self.sx + n[1] * self.sy + n[2] * self.sz


@dataclass(frozen=True)
class QubitOperatorSet:
    sx: np.ndarray
    sy_std: np.ndarray
    sz: np.ndarray
    sy_paper: np.ndarray

    def mps_matrix(self, axis: str) -> np.ndarray:
        """AKLT matrix for Cartesian label ``axis`` (``sigma_y = sigma_x sigma_z``)."""
        return {"x": self.sx, "y": self.sy_paper, "z": self.sz}[axis]

    def along(self, axis) -> np.ndarray:
        n = axis_vector(axis)
        return n[0] * self.sx + n[1] * self.sy_std + n[2] * self.sz


@dataclass(frozen=True)
class CartesianTriple:
    x_state: np.ndarray
    y_state: np.ndarray
    z_state: np.ndarray

    def as_rows(self) -> np.ndarray:
        """3x3 matrix whose rows are |x>, |y>, |z> in the m-basis."""
        return np.array([self.x_state, self.y_state, self.z_state])


def axis_vector(axis) -> np.ndarray:
    if isinstance(axis, str):
        return np.eye(3)[AXES.index(axis)]
    n = np.asarray(axis, dtype=float)
    return n / np.linalg.norm(n)


def planar_axis(angle: float) -> np.ndarray:
    """Unit vector cos(angle) x + sin(angle) y."""
    return np.array([np.cos(angle), np.sin(angle), 0.0])


@lru_cache(maxsize=None)
def spin1_operators() -> SpinOperatorSet:
    sx = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / _SQRT2
    sy = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / _SQRT2
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    for m in (sx, sy, sz):
        m.flags.writeable = False
    return SpinOperatorSet(sx, sy, sz)


@lru_cache(maxsize=None)
def spin_half_operators() -> SpinOperatorSet:
    q = pauli_matrices()
    return SpinOperatorSet(q.sx / 2, q.sy_std / 2, q.sz / 2)


@lru_cache(maxsize=None)
def pauli_matrices() -> QubitOperatorSet:
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    return QubitOperatorSet(sx, sy, sz, sx @ sz)


@lru_cache(maxsize=None)
def cartesian_states() -> CartesianTriple:
    x = np.array([-1.0, 0.0, 1.0], dtype=complex) / _SQRT2
    y = np.array([1.0, 0.0, 1.0], dtype=complex) / _SQRT2
    z = np.array([0.0, 1.0, 0.0], dtype=complex)
    return CartesianTriple(x, y, z)


def theta_state(theta: float) -> np.ndarray:
    """The spin-1 state ``(1/2)[(1 + e^{-i theta})|x> + (1 - e^{-i theta})|y>]``.

    It is the zero-projection state of the spin component along the in-plane
    axis at angle ``theta / 2``. Measuring it implements ``R_z(theta)``.
    """
    c = cartesian_states()
    ph = np.exp(-1j * theta)
    return 0.5 * ((1 + ph) * c.x_state + (1 - ph) * c.y_state)


def pi_rotation(axis) -> np.ndarray:
    """``exp(i pi S_axis)`` for spin 1 via the spectral decomposition of S_axis."""
    s = spin1_operators().along(axis)
    w, v = np.linalg.eigh(s)
    m = np.rint(w)
    return (v * np.exp(1j * np.pi * m)) @ v.conj().T


def pi_rotation_exact(axis) -> np.ndarray:
    """Same as :func:`pi_rotation` using the spin-1 identity ``1 - 2 S_n^2``."""
    s = spin1_operators().along(axis)
    return np.eye(3) - 2 * s @ s


def two_site_dot() -> np.ndarray:
    """``S_1 . S_2`` for two spin-1 sites (9x9, real)."""
    s = spin1_operators()
    return np.real(sum(np.kron(a, a) for a in s)).astype(float)


def total_spin_squared(n_sites: int) -> np.ndarray:
    """``(sum_j S_j)^2`` on ``n_sites`` spin-1 sites as a dense matrix."""
    s = spin1_operators()
    dim = 3**n_sites
    out = np.zeros((dim, dim), dtype=complex)
    for comp in s:
        tot = np.zeros((dim, dim), dtype=complex)
        for j in range(n_sites):
            tot += np.kron(np.kron(np.eye(3**j), comp), np.eye(3 ** (n_sites - j - 1)))
        out += tot @ tot
    return out


def swap_operator() -> np.ndarray:
    """Exchange of two spin-1 sites as ``S.S + (S.S)^2 - 1``."""
    d = two_site_dot()
    return (d + d @ d - np.eye(9)).astype(complex)


def permutation_swap(d: int = 3) -> np.ndarray:
    """Explicit permutation matrix ``P|ab> = |ba>``."""
    p = np.zeros((d * d, d * d))
    for a in range(d):
        for b in range(d):
            p[b * d + a, a * d + b] = 1.0
    return p


@lru_cache(maxsize=None)
def singlet_state() -> np.ndarray:
    """Two-site spin-1 singlet ``(|xx> - |yy> + |zz>) / sqrt(3)`` (length 9)."""
    c = cartesian_states()
    psi = (
        np.kron(c.x_state, c.x_state)
        - np.kron(c.y_state, c.y_state)
        + np.kron(c.z_state, c.z_state)
    ) / np.sqrt(3.0)
    psi.flags.writeable = False
    return psi
