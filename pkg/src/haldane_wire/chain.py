"""Spin-1 chains with optional spin-1/2 terminations.

The Hamiltonian is ``J sum_j [S_j.S_{j+1} - beta (S_j.S_{j+1})^2]`` on the
spin-1 bonds plus ``J s.S`` on each termination bond. It is kept as a list of
dense local terms and applied matrix-free.
"""

from __future__ import annotations

import logging
import math
import os
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from . import kernels
from .spin import spin1_operators, spin_half_operators, two_site_dot

log = logging.getLogger(__name__)

# total dimension below which "auto" uses dense diagonalization
DENSE_LIMIT = 6000
BYTES_PER_AMPLITUDE = 16


class LayoutError(ValueError):
    pass


class MemoryCapExceeded(LayoutError):
    pass


class SolverConvergenceError(RuntimeError):
    """Raised when the Krylov solver misses its tolerance; carries the best residual."""

    def __init__(self, message: str, best_residual: float, energies=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.energies = energies


@dataclass(frozen=True)
class ChainLayout:
    site_dims: tuple[int, ...]
    left_terminated: bool
    right_terminated: bool
    # original positions of the remaining sites; measurement removes entries
    labels: tuple[int, ...] = ()

    def __post_init__(self):
        dims = tuple(int(d) for d in self.site_dims)
        object.__setattr__(self, "site_dims", dims)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(len(dims))))
        if len(self.labels) != len(dims):
            raise LayoutError("labels and site_dims differ in length")
        if any(d not in (2, 3) for d in dims):
            raise LayoutError(f"unsupported local dimension in {dims}")
        inner = dims[int(self.left_terminated) : len(dims) - int(self.right_terminated)]
        if any(d != 3 for d in inner):
            raise LayoutError("spin-1 sites must be contiguous between terminations")
        if self.left_terminated and dims[0] != 2:
            raise LayoutError("left termination must have dimension 2")
        if self.right_terminated and dims[-1] != 2:
            raise LayoutError("right termination must have dimension 2")

    @property
    def n_sites(self) -> int:
        return len(self.site_dims)

    @property
    def n_spin1(self) -> int:
        return sum(1 for d in self.site_dims if d == 3)

    @property
    def dim(self) -> int:
        return math.prod(self.site_dims)

    @property
    def spin1_positions(self) -> list[int]:
        return [i for i, d in enumerate(self.site_dims) if d == 3]

    def position_of(self, label: int) -> int:
        return self.labels.index(label)

    def without(self, position: int) -> "ChainLayout":
        """Layout after removing the site at ``position`` (a measured spin-1)."""
        if self.site_dims[position] != 3:
            raise LayoutError("only spin-1 sites can be removed")
        dims = self.site_dims[:position] + self.site_dims[position + 1 :]
        labels = self.labels[:position] + self.labels[position + 1 :]
        return ChainLayout(dims, self.left_terminated, self.right_terminated, labels)

    def split(self, start: int, stop: int) -> tuple[int, int, int]:
        """``(left, middle, right)`` dimensions around sites ``start:stop``."""
        d = self.site_dims
        return math.prod(d[:start]), math.prod(d[start:stop]), math.prod(d[stop:])


def build_layout(n_spin1: int, left: bool = True, right: bool = True) -> ChainLayout:
    if n_spin1 < 1:
        raise LayoutError("a chain needs at least one spin-1 site")
    dims = (2,) * bool(left) + (3,) * n_spin1 + (2,) * bool(right)
    layout = ChainLayout(dims, bool(left), bool(right))
    check_memory(layout)
    return layout


def check_memory(layout: ChainLayout, cap_mb: float | None = None) -> None:
    """Reject layouts whose state vector exceeds ``HALDANE_MEM_CAP_MB``."""
    if cap_mb is None:
        env = os.environ.get("HALDANE_MEM_CAP_MB")
        if not env:
            return
        cap_mb = float(env)
    need = layout.dim * BYTES_PER_AMPLITUDE / 2**20
    if need > cap_mb:
        raise MemoryCapExceeded(
            f"state of dimension {layout.dim} needs {need:.1f} MB > cap {cap_mb:.1f} MB"
        )


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    layout: ChainLayout

    def __post_init__(self):
        a = np.asarray(self.amplitudes)
        if a.ndim != 1 or a.shape[0] != self.layout.dim:
            raise LayoutError(
                f"amplitude length {a.shape} does not match layout dimension {self.layout.dim}"
            )
        if a.flags.writeable:
            a = a.copy() if a.base is not None else a
            a.flags.writeable = False
        object.__setattr__(self, "amplitudes", a)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        return StateVector(self.amplitudes / self.norm, self.layout)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.site_dims)

    def overlap(self, other: "StateVector") -> complex:
        if other.layout.site_dims != self.layout.site_dims:
            raise LayoutError("overlap between different layouts")
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass
class LocalOperatorSum:
    """Sum of dense operators on groups of adjacent sites."""

    layout: ChainLayout
    terms: list[tuple[tuple[int, ...], np.ndarray]] = field(default_factory=list)
    J: float = 1.0
    beta: float | None = None

    def add(self, sites: Sequence[int], matrix: np.ndarray) -> None:
        sites = tuple(int(s) for s in sites)
        if list(sites) != list(range(sites[0], sites[0] + len(sites))):
            raise LayoutError(f"term sites {sites} are not adjacent")
        d = math.prod(self.layout.site_dims[s] for s in sites)
        if matrix.shape != (d, d):
            raise LayoutError(f"term on {sites} needs a {d}x{d} matrix")
        self.terms.append((sites, matrix))

    @property
    def is_real(self) -> bool:
        return all(not np.iscomplexobj(m) or not np.any(m.imag) for _, m in self.terms)

    def apply(self, v: np.ndarray, backend=None) -> np.ndarray:
        return _apply_terms(self, v, backend)

    def dense(self) -> np.ndarray:
        """Materialize the operator (small layouts only)."""
        dims = self.layout.site_dims
        out = np.zeros((self.layout.dim, self.layout.dim), dtype=complex)
        for sites, m in self.terms:
            left = math.prod(dims[: sites[0]])
            right = math.prod(dims[sites[-1] + 1 :])
            out += np.kron(np.kron(np.eye(left), m), np.eye(right))
        return out


def _apply_terms(H: LocalOperatorSum, v: np.ndarray, backend=None) -> np.ndarray:
    v = np.asarray(v)
    if v.shape != (H.layout.dim,):
        raise LayoutError(f"vector of shape {v.shape} vs layout dimension {H.layout.dim}")
    real = H.is_real and not np.iscomplexobj(v)
    dtype = np.float64 if real else np.complex128
    v = np.ascontiguousarray(v, dtype=dtype)
    out = np.zeros_like(v)
    for sites, m in H.terms:
        shape = H.layout.split(sites[0], sites[-1] + 1)
        op = m.real if real else m
        kernels.accumulate_local(op, v.reshape(shape), out.reshape(shape), backend=backend)
    return out


@lru_cache(maxsize=None)
def bond_matrix(beta: float, J: float = 1.0) -> np.ndarray:
    x = two_site_dot()
    m = J * (x - beta * x @ x)
    m.flags.writeable = False
    return m


@lru_cache(maxsize=None)
def termination_matrix(J: float = 1.0, spin_half_first: bool = True) -> np.ndarray:
    s = spin_half_operators()
    S = spin1_operators()
    if spin_half_first:
        m = sum(np.kron(a, b) for a, b in zip(s, S))
    else:
        m = sum(np.kron(b, a) for a, b in zip(s, S))
    m = J * np.real(m)
    m.flags.writeable = False
    return m


def build_hamiltonian(layout: ChainLayout, beta: float, J: float = 1.0) -> LocalOperatorSum:
    if layout.n_spin1 == 0:
        raise LayoutError("layout has no spin-1 sites")
    if J == 0:
        raise ValueError("J must be nonzero")
    H = LocalOperatorSum(layout, J=J, beta=beta)
    dims = layout.site_dims
    for i in range(layout.n_sites - 1):
        a, b = dims[i], dims[i + 1]
        if a == 3 and b == 3:
            H.add((i, i + 1), bond_matrix(beta, J))
        elif a == 2 and b == 3:
            H.add((i, i + 1), termination_matrix(J, True))
        elif a == 3 and b == 2:
            H.add((i, i + 1), termination_matrix(J, False))
    return H


def apply(H: LocalOperatorSum, v: StateVector, backend=None) -> StateVector:
    if v.layout.site_dims != H.layout.site_dims:
        raise LayoutError("operator and state layouts differ")
    return StateVector(H.apply(v.amplitudes, backend=backend), v.layout)


ProductSpec = Mapping[int, np.ndarray]


def apply_product(factors: ProductSpec, v: np.ndarray, layout: ChainLayout) -> np.ndarray:
    """Apply a tensor product of single-site operators ``{position: matrix}``."""
    w = np.asarray(v)
    for pos, m in sorted(factors.items()):
        if m.shape != (layout.site_dims[pos],) * 2:
            raise LayoutError(f"factor at site {pos} has shape {m.shape}")
        w = kernels.apply_local(m, w.reshape(layout.split(pos, pos + 1))).reshape(-1)
    return w


def expectation(state: StateVector, obs) -> complex:
    """``<psi|O|psi>`` for a :class:`LocalOperatorSum`, a product mapping or an object
    with ``factors(layout)``."""
    v = state.amplitudes
    if isinstance(obs, LocalOperatorSum):
        if obs.layout.site_dims != state.layout.site_dims:
            raise LayoutError("operator and state layouts differ")
        w = obs.apply(v)
    else:
        factors = obs.factors(state.layout) if hasattr(obs, "factors") else obs
        w = apply_product(factors, v, state.layout)
    return complex(np.vdot(v, w))


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude amplitude is real positive."""
    i = int(np.argmax(np.abs(v)))
    ph = v[i] / abs(v[i])
    out = v / ph
    if np.iscomplexobj(out) and not np.any(np.abs(out.imag) > 1e-14 * np.abs(out).max()):
        out = out.real.copy()
    return out


@dataclass(frozen=True)
class GroundResult:
    energy: float
    state: StateVector
    residual_norm: float
    low_spectrum: np.ndarray
    method: str = "krylov"
    iterations: int = 0
    seconds: float = 0.0

    def is_unique(self, rel: float = 1e-7) -> bool:
        """Whether E0 is a singlet level (needs ``k >= 2``)."""
        if len(self.low_spectrum) < 2:
            raise ValueError("uniqueness needs at least two computed levels")
        return bool(self.low_spectrum[1] - self.low_spectrum[0] > rel * max(abs(self.energy), 1.0))

    def degeneracy(self, rel: float = 1e-7) -> int:
        e = self.low_spectrum
        return int(np.sum(e - e[0] <= rel * max(abs(e[0]), 1.0)))


def ground_state(
    H: LocalOperatorSum,
    tol: float = 1e-9,
    max_iter: int = 5000,
    k: int = 1,
    seed: int = 0,
    method: str = "auto",
    ncv: int | None = None,
) -> GroundResult:
    """Lowest ``k`` eigenpairs of ``H``.

    ``method="krylov"`` runs implicitly restarted Lanczos (ARPACK) over the
    matrix-free apply with a seeded start vector; ``"dense"`` diagonalizes the
    materialized matrix and is the reference path for small layouts.
    """
    if k < 1:
        raise ValueError("k must be positive")
    dim = H.layout.dim
    if method == "auto":
        method = "dense" if dim <= DENSE_LIMIT else "krylov"
    t0 = time.perf_counter()
    if method == "dense":
        if dim > 4 * DENSE_LIMIT:
            raise LayoutError(f"dimension {dim} too large for dense diagonalization")
        Hd = H.dense()
        if H.is_real:
            Hd = Hd.real
        w, vecs = scipy.linalg.eigh(Hd, subset_by_index=[0, min(k, dim) - 1])
        iterations = 0
    elif method == "krylov":
        w, vecs, iterations = _krylov(H, tol, max_iter, k, seed, ncv)
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(w)
    w, vecs = w[order], vecs[:, order]
    v0 = fix_phase(vecs[:, 0])
    v0 = v0 / np.linalg.norm(v0)
    r = H.apply(v0) - w[0] * v0
    res = float(np.linalg.norm(r))
    if method == "krylov" and res > tol:
        raise SolverConvergenceError(
            f"ground state residual {res:.3e} above tolerance {tol:.1e}", res, w
        )
    return GroundResult(
        energy=float(w[0]),
        state=StateVector(v0, H.layout),
        residual_norm=res,
        low_spectrum=np.asarray(w, dtype=float),
        method=method,
        iterations=iterations,
        seconds=time.perf_counter() - t0,
    )


def _krylov(H, tol, max_iter, k, seed, ncv):
    dim = H.layout.dim
    dtype = np.float64 if H.is_real else np.complex128
    count = [0]

    def matvec(x):
        count[0] += 1
        return H.apply(np.asarray(x).reshape(-1))

    op = LinearOperator((dim, dim), matvec=matvec, dtype=dtype)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(dim)
    if dtype == np.complex128:
        v0 = v0 + 1j * rng.standard_normal(dim)
    if ncv is None:
        ncv = min(dim - 1, max(2 * k + 1, 24))
    # ARPACK stops on ||r|| <= tol_rel |lambda|; aim below the absolute target
    scale = max(float(np.abs(H.layout.n_sites)), 1.0)
    try:
        w, vecs = eigsh(op, k=k, which="SA", v0=v0, ncv=ncv, maxiter=max_iter, tol=0.1 * tol / scale)
    except ArpackNoConvergence as exc:
        best = np.inf
        if exc.eigenvectors is not None and exc.eigenvectors.shape[1]:
            i = int(np.argmin(exc.eigenvalues))
            x = exc.eigenvectors[:, i]
            best = float(np.linalg.norm(H.apply(x) - exc.eigenvalues[i] * x))
        raise SolverConvergenceError(
            f"Krylov solver did not converge in {max_iter} restarts", best, exc.eigenvalues
        ) from exc
    log.debug("krylov: %d matvecs for dim %d", count[0], dim)
    return w, vecs, count[0]


def dense_ground_state(layout: ChainLayout, beta: float, k: int = 1, J: float = 1.0) -> GroundResult:
    return ground_state(build_hamiltonian(layout, beta, J), k=k, method="dense")


@lru_cache(maxsize=48)
def chain_ground_state(
    n_spin1: int,
    beta: float,
    left: bool = True,
    right: bool = True,
    tol: float = 1e-9,
    seed: int = 0,
    k: int = 2,
) -> GroundResult:
    """Memoized ground state of ``H(beta)`` for the given termination pattern."""
    layout = build_layout(n_spin1, left, right)
    res = ground_state(build_hamiltonian(layout, float(beta)), tol=tol, k=k, seed=seed)
    log.info(
        "ground state n=%d beta=%.6g E0=%.12f res=%.2e (%s, %.1fs)",
        n_spin1, beta, res.energy, res.residual_norm, res.method, res.seconds,
    )
    return res


def total_spin_operator(layout: ChainLayout, axis: int) -> LocalOperatorSum:
    """``S_tot`` component (0, 1, 2 for x, y, z) including termination spins."""
    op = LocalOperatorSum(layout)
    s1 = list(spin1_operators())[axis]
    sh = list(spin_half_operators())[axis]
    for i, d in enumerate(layout.site_dims):
        op.add((i,), s1 if d == 3 else sh)
    return op


def global_rotation(layout: ChainLayout, axis: int, phi: float) -> dict[int, np.ndarray]:
    """Product form of ``exp(i phi S_tot,axis)``."""
    s1 = list(spin1_operators())[axis]
    sh = list(spin_half_operators())[axis]
    u1 = scipy.linalg.expm(1j * phi * s1)
    uh = scipy.linalg.expm(1j * phi * sh)
    return {i: (u1 if d == 3 else uh) for i, d in enumerate(layout.site_dims)}
