"""Buffered rotation gates.

A block of ``L`` (odd) spin-1 sites is postselected onto ``|z>`` everywhere
except the centre, which is projected onto ``|theta>``. At the AKLT point the
joint probability is ``3**-L``. Concatenation nests blocks of three: a block of
nine is three blocks of three whose outer members perform buffered ``|z>``
measurements around a buffered rotation.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .chain import LayoutError, StateVector, chain_ground_state
from .measurement import (
    MeasurementBasis,
    PauliFrame,
    ZeroProbabilityBranch,
    byproduct,
    measure_site,
    postselect,
    trajectory_rng,
)
from .spin import cartesian_states, theta_state


@dataclass(frozen=True)
class BufferedGateResult:
    success_probability: float
    post_state: StateVector
    byproduct: PauliFrame
    L: int
    block_sites: tuple[int, ...]
    # probability that every padding site gave |z>, whatever the centre did
    padding_probability: float = float("nan")

    @property
    def failure_probability(self) -> float:
        return 1.0 - self.success_probability

    @property
    def conditional_success(self) -> float:
        """Probability of ``|theta>`` at the centre given successful padding."""
        return self.success_probability / self.padding_probability


def default_block_start(state: StateVector, L: int) -> int:
    """Position of the first block site: the block ends next to the right edge."""
    pos = state.layout.spin1_positions
    if L > len(pos):
        raise LayoutError(f"block of {L} does not fit in {len(pos)} spin-1 sites")
    return pos[-L]


def _block_labels(state: StateVector, block_start: int | None, L: int) -> tuple[int, ...]:
    if L < 1 or L % 2 == 0:
        raise ValueError("blocklength must be odd and positive")
    if block_start is None:
        block_start = default_block_start(state, L)
    dims = state.layout.site_dims
    if block_start < 0 or block_start + L > len(dims) or any(d != 3 for d in dims[block_start : block_start + L]):
        raise LayoutError(f"block {block_start}..{block_start + L - 1} is not inside the unmeasured spin-1 range")
    return state.layout.labels[block_start : block_start + L]


def _postselect_labels(state, steps):
    """Apply ``[(label, vector, outcome name, basis)]`` projections in order."""
    prob = 1.0
    frame = PauliFrame()
    for label, vec, name, basis in steps:
        p, state = postselect(state, state.layout.position_of(label), vec)
        if state is None:
            raise ZeroProbabilityBranch(f"outcome {name} on site {label} has zero probability")
        prob *= p
        frame = frame.compose(byproduct(name, basis))
    return prob, state, frame


def buffered_rotation(state: StateVector, block_start: int | None, L: int, theta: float) -> BufferedGateResult:
    """Success branch of the length-``L`` buffered ``R_z(theta)``.

    ``block_start`` is a position in ``state.layout``; ``None`` places the block
    against the right end of the spin-1 range.
    """
    labels = _block_labels(state, block_start, L)
    std = MeasurementBasis.standard()
    rot = MeasurementBasis.z_rotated(theta)
    z = cartesian_states().z_state
    c = L // 2
    outer = [(lab, z, "z", std) for i, lab in enumerate(labels) if i != c]
    p_pad, padded, frame = _postselect_labels(state, outer)
    p_c, post, f_c = _postselect_labels(padded, [(labels[c], theta_state(theta), "theta", rot)])
    return BufferedGateResult(
        success_probability=p_pad * p_c,
        post_state=post,
        byproduct=frame.compose(f_c),
        L=L,
        block_sites=labels,
        padding_probability=p_pad,
    )


def _nested_steps(labels, target, theta):
    """Projection order of a concatenated block: outer sub-blocks, then centre."""
    if len(labels) == 1:
        if target == "z":
            return [(labels[0], cartesian_states().z_state, "z", MeasurementBasis.standard())]
        return [(labels[0], theta_state(theta), "theta", MeasurementBasis.z_rotated(theta))]
    third = len(labels) // 3
    left, mid, right = labels[:third], labels[third : 2 * third], labels[2 * third :]
    return _nested_steps(left, "z", theta) + _nested_steps(right, "z", theta) + _nested_steps(mid, target, theta)


def buffered_rotation_concatenated(
    state: StateVector, block_start: int | None, theta: float, levels: int = 2
) -> BufferedGateResult:
    """``levels`` nested block-3 bufferings (``levels=2`` gives the nine-site gate)."""
    L = 3**levels
    labels = _block_labels(state, block_start, L)
    steps = _nested_steps(labels, "theta", theta)
    centre = labels[L // 2]
    pad = [s for s in steps if s[0] != centre]
    p_pad, padded, frame = _postselect_labels(state, pad)
    p_c, post, f_c = _postselect_labels(padded, [s for s in steps if s[0] == centre])
    return BufferedGateResult(p_pad * p_c, post, frame.compose(f_c), L, labels, p_pad)


def normalized_success(beta: float, n_spin1: int, L: int, theta: float = np.pi / 2, block_start=None) -> float:
    """Buffered success probability relative to its AKLT value ``3**-L``."""
    g = chain_ground_state(n_spin1, float(beta))
    return buffered_rotation(g.state, block_start, L, theta).success_probability * 3.0**L


@dataclass
class Attempt:
    block_sites: tuple[int, ...]
    outcomes: list[str] = field(default_factory=list)
    padded: bool = False
    success: bool = False
    applied: bool = False


@dataclass
class GateTrajectory:
    attempts: list[Attempt]
    frame: PauliFrame
    frame_history: list[str]
    final_state: StateVector | None

    @property
    def applied(self) -> bool:
        return bool(self.attempts) and self.attempts[-1].applied

    @property
    def first_attempt_success(self) -> bool:
        return bool(self.attempts) and self.attempts[0].success


class BranchCache:
    """Memoized measurement tree of one initial state.

    Nodes are keyed by the measurement history. Branch probabilities are kept
    for good; post-measurement states are held in an LRU store bounded by
    ``max_bytes`` and rebuilt from the nearest cached ancestor when evicted.
    """

    def __init__(self, state: StateVector, keep_states: bool = True, max_bytes: int = 256 * 2**20):
        self.root = state
        self.keep_states = keep_states
        self.max_bytes = max_bytes
        self._states: OrderedDict[tuple, StateVector] = OrderedDict()
        self._bytes = 0
        self._probs: dict[tuple, np.ndarray] = {}
        self._bases: dict[tuple, MeasurementBasis] = {}

    def _store(self, history: tuple, st: StateVector) -> None:
        if history in self._states:
            self._states.move_to_end(history)
            return
        self._states[history] = st
        self._bytes += st.amplitudes.nbytes
        while self._bytes > self.max_bytes and len(self._states) > 1:
            _, old = self._states.popitem(last=False)
            self._bytes -= old.amplitudes.nbytes

    def state(self, history: tuple) -> StateVector:
        if not history:
            return self.root
        if history in self._states:
            self._states.move_to_end(history)
            return self._states[history]
        label, key, k = history[-1]
        parent = self.state(history[:-1])
        basis = self._bases[key]
        _, st = postselect(parent, parent.layout.position_of(label), basis.vectors[k])
        if st is None:
            raise ZeroProbabilityBranch(f"history {history} has zero probability")
        self._store(history, st)
        return st

    def probabilities(self, history: tuple, label: int, basis: MeasurementBasis) -> np.ndarray:
        key = history + ((label, basis.key),)
        if key not in self._probs:
            self._bases[basis.key] = basis
            st = self.state(history)
            branches = measure_site(st, st.layout.position_of(label), basis)
            self._probs[key] = np.array([b.probability for b in branches])
            for b in branches:
                if b.post_state is not None:
                    self._store(history + ((label, basis.key, b.outcome),), b.post_state)
        return self._probs[key]


def sample_buffered_gate(
    cache: BranchCache,
    theta: float,
    rng: np.random.Generator,
    L: int = 3,
    first_block_label: int | None = None,
) -> GateTrajectory:
    """Sample the buffered gate with retries on the next block after failure.

    Padding sites are measured in the standard basis first. If all give ``|z>``
    the centre is measured in the rotated basis; ``|theta>`` and ``|theta+pi>``
    complete the gate (the latter with an extra ``Z`` byproduct). Otherwise the
    centre is measured in the standard basis and the next block is tried.
    """
    layout = cache.root.layout
    spins = [layout.labels[p] for p in layout.spin1_positions]
    start = spins.index(first_block_label) if first_block_label is not None else 0
    std = MeasurementBasis.standard()
    rot = MeasurementBasis.z_rotated(theta)
    history: tuple = ()
    frame = PauliFrame()
    frames = [frame.label]
    attempts = []
    c = L // 2
    for b0 in range(start, len(spins) - L + 1, L):
        block = tuple(spins[b0 : b0 + L])
        att = Attempt(block)
        attempts.append(att)
        order = [lab for i, lab in enumerate(block) if i != c]
        padded = True
        for lab in order:
            probs = cache.probabilities(history, lab, std)
            k = int(rng.choice(3, p=probs / probs.sum()))
            history += ((lab, std.key, k),)
            frame = frame.compose(byproduct(k, std))
            frames.append(frame.label)
            att.outcomes.append(std.outcome_names[k])
            padded &= k == 2
        basis = rot if padded else std
        probs = cache.probabilities(history, block[c], basis)
        k = int(rng.choice(3, p=probs / probs.sum()))
        history += ((block[c], basis.key, k),)
        frame = frame.compose(byproduct(k, basis))
        frames.append(frame.label)
        name = basis.outcome_names[k]
        att.outcomes.insert(c, name)
        att.padded = padded
        att.success = padded and name == "theta"
        att.applied = padded and name in ("theta", "theta+pi")
        if att.applied:
            break
    final = cache.state(history) if cache.keep_states else None
    return GateTrajectory(attempts, frame, frames, final)


def sample_gates(state: StateVector, theta: float, trials: int, seed: int, L: int = 3) -> list[GateTrajectory]:
    cache = BranchCache(state)
    return [sample_buffered_gate(cache, theta, trajectory_rng(seed, i), L) for i in range(trials)]
