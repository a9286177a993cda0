"""Three-spin to one-spin renormalization through the symmetric J=1 sector.

A block of three spin-1 sites is mapped by a 6x27 isometry onto
``H_J (x) H_L``: a spin-1 factor carrying the J=1 representation and a
two-dimensional label. Tracing the label leaves one renormalized spin-1.
Row ``2k + l`` of the isometry is ``<k|_J <l|_L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .chain import ChainLayout, StateVector
from .spin import AXES, cartesian_states, singlet_state, theta_state, total_spin_squared

SQRT5 = math.sqrt(5.0)
SQRT6 = math.sqrt(6.0)
# label-space reference states
CHI_S = np.array([1.0, -SQRT5]) / SQRT6
CHI_S_BAR = np.array([SQRT5, 1.0]) / SQRT6


@dataclass(frozen=True)
class J1SymmetricBasis:
    vectors: np.ndarray  # (6, 27), row 2k + l

    def vector(self, k: str, label: int) -> np.ndarray:
        return self.vectors[2 * AXES.index(k) + label]


@dataclass(frozen=True)
class BlockIsometry:
    matrix: np.ndarray  # (6, 27)

    def apply(self, psi_block: np.ndarray) -> np.ndarray:
        return self.matrix @ psi_block


@dataclass(frozen=True)
class BlochPoint:
    v_chi: float
    v_plus: float
    v_y: float
    weight: float

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.v_plus, self.v_chi])

    @property
    def norm(self) -> float:
        return float(math.sqrt(self.v_chi**2 + self.v_plus**2 + self.v_y**2))

    def distance(self, other: "BlochPoint") -> float:
        return float(np.linalg.norm(self.vector - other.vector))


@dataclass(frozen=True)
class LabelState:
    rho_label: np.ndarray  # unnormalized, trace = sector weight

    @property
    def weight(self) -> float:
        return float(np.trace(self.rho_label).real)

    def bloch(self) -> BlochPoint:
        """Bloch coordinates in the ``(|chi_s>, |chi_s_bar>)`` frame.

        The vector is taken from the unnormalized operator so its length is
        bounded by the sector weight and equals it for a pure label state.
        """
        U = np.array([CHI_S, CHI_S_BAR])  # rows: frame vectors in the (|0>, |1>) basis
        r = U @ self.rho_label @ U.T
        return BlochPoint(
            v_chi=float((r[0, 0] - r[1, 1]).real),
            v_plus=float(2 * r[0, 1].real),
            v_y=float(-2 * r[0, 1].imag),
            weight=self.weight,
        )

    def purity_rank(self, rel: float = 1e-8) -> int:
        w = np.linalg.eigvalsh(self.rho_label)
        return int(np.sum(w > rel * max(w.max(), 1e-300)))


def _site_embed(k: np.ndarray, singlet: np.ndarray, site: int) -> np.ndarray:
    """``|k>_site |Psi_0>_(other two)`` as a 27-vector (sites 0, 1, 2)."""
    s = singlet.reshape(3, 3)
    if site == 0:
        t = np.einsum("a,bc->abc", k, s)
    elif site == 1:
        t = np.einsum("b,ac->abc", k, s)
    else:
        t = np.einsum("c,ab->abc", k, s)
    return t.reshape(27)


@lru_cache(maxsize=None)
def j1_basis() -> J1SymmetricBasis:
    c = cartesian_states().as_rows()
    psi0 = singlet_state()
    rows = []
    for k in c:
        v1, v2, v3 = (_site_embed(k, psi0, s) for s in range(3))
        rows.append((v1 + v2 + v3) / SQRT5)
        rows.append((v1 - 2 * v2 + v3) / 2)
    vecs = np.array(rows)
    vecs.flags.writeable = False
    return J1SymmetricBasis(vecs)


@lru_cache(maxsize=None)
def block_isometry() -> BlockIsometry:
    m = j1_basis().vectors.conj().copy()
    m.flags.writeable = False
    return BlockIsometry(m)


@lru_cache(maxsize=None)
def renormalizing_isometry() -> np.ndarray:
    """Block isometry whose spin factor is expressed in the m=(+1,0,-1) basis.

    The J=1 factor of :func:`block_isometry` is indexed by Cartesian states; a
    renormalized site must use the same basis as a physical site for the block
    map to be iterated.
    """
    cart = cartesian_states().as_rows()  # (k, m)
    w = np.einsum("km,kln->mln", cart, block_isometry().matrix.reshape(3, 2, 27))
    w = w.reshape(6, 27)
    w.flags.writeable = False
    return w


def exchange_13() -> np.ndarray:
    """Permutation of block sites 1 and 3 on the 27-dim space."""
    p = np.zeros((27, 27))
    for a in range(3):
        for b in range(3):
            for c in range(3):
                p[c * 9 + b * 3 + a, a * 9 + b * 3 + c] = 1.0
    return p


class NotPositiveError(ValueError):
    pass


def label_trace(sigma: np.ndarray) -> np.ndarray:
    """Trace the spin-1 factor of a 6x6 operator on ``H_J (x) H_L``."""
    return np.einsum("kakb->ab", sigma.reshape(3, 2, 3, 2))


def spin_factor_trace(sigma: np.ndarray) -> np.ndarray:
    """Trace the label of a 6x6 operator, leaving the renormalized spin-1."""
    return np.einsum("akbk->ab", sigma.reshape(3, 2, 3, 2))


def rg_block_map(rho_block: np.ndarray, atol: float = 1e-10) -> tuple[float, LabelState]:
    rho_block = np.asarray(rho_block)
    if rho_block.shape != (27, 27):
        raise ValueError("block density must be 27x27")
    if not np.allclose(rho_block, rho_block.conj().T, atol=atol):
        raise NotPositiveError("block density is not Hermitian")
    if np.linalg.eigvalsh(rho_block).min() < -atol:
        raise NotPositiveError("block density has negative eigenvalues")
    W = block_isometry().matrix
    sigma = W @ rho_block @ W.conj().T
    label = LabelState(label_trace(sigma))
    return float(np.trace(sigma).real), label


def bare_state_decomposition(theta: float) -> tuple[complex, complex]:
    """Overlaps ``<theta_J chi_s | z,theta,z>`` and ``<z_J 0_L | z,z,z>``."""
    c = cartesian_states()
    W = block_isometry().matrix
    th = theta_state(theta)
    zthz = np.kron(np.kron(c.z_state, th), c.z_state)
    zzz = np.kron(np.kron(c.z_state, c.z_state), c.z_state)
    # |theta> expanded on the Cartesian (real) basis of H_J
    th_J = c.as_rows().conj() @ th
    target = np.kron(th_J, CHI_S)
    z_target = np.kron(np.array([0, 0, 1.0]), np.array([1.0, 0.0]))
    return complex(np.vdot(target, W @ zthz)), complex(np.vdot(z_target, W @ zzz))


def block_density(state: StateVector, start: int, stop: int) -> np.ndarray:
    """Reduced density operator of sites ``start:stop`` (positions in the layout)."""
    v3 = state.amplitudes.reshape(state.layout.split(start, stop))
    return np.einsum("lar,lbr->ab", v3, v3.conj()) / state.norm**2


@dataclass(frozen=True)
class RenormalizedChain:
    rho: np.ndarray
    site_dims: tuple[int, ...]
    weight: float

    def block_density(self, start: int, stop: int) -> np.ndarray:
        d = self.site_dims
        left, mid, right = math.prod(d[:start]), math.prod(d[start:stop]), math.prod(d[stop:])
        r = self.rho.reshape(left, mid, right, left, mid, right)
        return np.einsum("iajibj->ab", r)


def renormalize_chain(state: StateVector, trace_terminations: bool = True) -> RenormalizedChain:
    """Apply the block map to consecutive spin-1 triples and trace every label.

    Terminations are traced out first unless ``trace_terminations`` is False, in
    which case they stay as spin-1/2 factors at the ends of the output.
    """
    layout: ChainLayout = state.layout
    n = layout.n_spin1
    if n % 3:
        raise ValueError(f"{n} spin-1 sites cannot be split into blocks of three")
    m = n // 3
    W = renormalizing_isometry()
    nl = int(layout.left_terminated)
    nr = int(layout.right_terminated)
    t = state.amplitudes.reshape((2,) * nl + (27,) * m + (2,) * nr)
    for b in range(m):
        t = np.moveaxis(np.tensordot(W, t, axes=([1], [nl + b])), 0, nl + b)
    # split every 6 into (J, label) and move labels (and traced terminations) last
    t = t.reshape((2,) * nl + (3, 2) * m + (2,) * nr)
    spin_axes = [nl + 2 * b for b in range(m)]
    label_axes = [nl + 2 * b + 1 for b in range(m)]
    term_axes = list(range(nl)) + [nl + 2 * m + i for i in range(nr)]
    if trace_terminations:
        keep, traced = spin_axes, label_axes + term_axes
        dims = (3,) * m
    else:
        keep = term_axes[:nl] + spin_axes + term_axes[nl:]
        traced = label_axes
        dims = (2,) * nl + (3,) * m + (2,) * nr
    X = np.transpose(t, keep + traced).reshape(math.prod(dims), -1)
    rho = X @ X.conj().T
    weight = float(np.trace(rho).real) / state.norm**2
    return RenormalizedChain(rho / np.trace(rho).real, dims, weight)


def central_block_start(n_sites: int) -> int:
    return (n_sites - 2) // 2


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def uhlmann_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``Tr sqrt(sqrt(rho) sigma sqrt(rho))`` as the trace norm of ``sqrt(rho) sqrt(sigma)``.

    Taking singular values of the product avoids the square root of
    round-off eigenvalues near zero, which would otherwise add O(sqrt(eps)).
    """
    return float(np.sum(np.linalg.svd(_psd_sqrt(rho) @ _psd_sqrt(sigma), compute_uv=False)))


def bloch_point_of_block(rho_block: np.ndarray) -> BlochPoint:
    return rg_block_map(rho_block)[1].bloch()


def physical_bloch_point(state: StateVector, average_blocks: bool = False) -> BlochPoint:
    """Label-space point of the central physical block (or the average over blocks)."""
    pos = state.layout.spin1_positions
    n = len(pos)
    if average_blocks:
        starts = range(0, n - 2, 3)
    else:
        starts = [(n - 3) // 2]
    labels = [rg_block_map(block_density(state, pos[s], pos[s] + 3))[1].rho_label for s in starts]
    return LabelState(np.mean(labels, axis=0)).bloch()


def renormalized_bloch_point(chain: RenormalizedChain, average_blocks: bool = False) -> BlochPoint:
    """Label-space point of three consecutive renormalized sites."""
    spins = [i for i, d in enumerate(chain.site_dims) if d == 3]
    m = len(spins)
    if m < 3:
        raise ValueError("need at least three renormalized sites")
    starts = range(m - 2) if average_blocks else [central_block_start(m + 1) if m > 3 else 0]
    labels = []
    for s in starts:
        rho = chain.block_density(spins[s], spins[s] + 3)
        labels.append(rg_block_map(rho / np.trace(rho).real)[1].rho_label)
    return LabelState(np.mean(labels, axis=0)).bloch()


def bloch_points(state: StateVector, average_blocks: bool = False) -> tuple[BlochPoint, BlochPoint]:
    """``(pre, post)`` label-space points for one renormalization step of ``state``."""
    pre = physical_bloch_point(state, average_blocks)
    post = renormalized_bloch_point(renormalize_chain(state), average_blocks)
    return pre, post


def j1_projector_complement(n_sites: int = 3) -> np.ndarray:
    """Projector onto total spin J != 1 for ``n_sites`` spin-1 sites."""
    w, v = np.linalg.eigh(total_spin_squared(n_sites))
    sel = np.abs(w - 2.0) > 1e-8
    return v[:, sel] @ v[:, sel].conj().T


AKLT_BETA = -1.0 / 3.0


@dataclass(frozen=True)
class FlowStep:
    beta: float
    pre: BlochPoint
    post: BlochPoint
    reference: BlochPoint

    @property
    def pre_distance(self) -> float:
        return self.pre.distance(self.reference)

    @property
    def post_distance(self) -> float:
        return self.post.distance(self.reference)

    @property
    def contracts(self) -> bool:
        return self.post_distance < self.pre_distance


@lru_cache(maxsize=8)
def aklt_reference_point(n_spin1: int = 12) -> BlochPoint:
    """Label-space point of the exact AKLT chain, computed rather than tabulated."""
    from .aklt import AkltChainSpec, aklt_state

    return physical_bloch_point(aklt_state(AkltChainSpec(n_spin1, right_terminated=True)))


def bloch_flow(beta: float, n_spin1: int = 12, average_blocks: bool = False) -> FlowStep:
    from .chain import chain_ground_state

    g = chain_ground_state(n_spin1, beta)
    pre, post = bloch_points(g.state, average_blocks)
    return FlowStep(beta, pre, post, aklt_reference_point(n_spin1))


def nearest_curve_parameter(point: BlochPoint, curve: list[tuple[float, BlochPoint]]) -> float:
    """Parameter of the closest point on a piecewise-linear curve of labelled points.

    ``curve`` holds ``(parameter, point)`` pairs sorted by parameter; the answer is
    interpolated along the nearest segment.
    """
    if len(curve) < 2:
        raise ValueError("curve needs at least two points")
    best = (math.inf, curve[0][0])
    p = point.vector
    for (t0, a), (t1, b) in zip(curve, curve[1:]):
        seg = b.vector - a.vector
        ll = float(seg @ seg)
        u = 0.0 if ll == 0 else float(np.clip((p - a.vector) @ seg / ll, 0.0, 1.0))
        d = float(np.linalg.norm(a.vector + u * seg - p))
        if d < best[0]:
            best = (d, t0 + u * (t1 - t0))
    return best[1]
