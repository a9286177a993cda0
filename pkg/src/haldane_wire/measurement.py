"""Single-site projective measurements, branch bookkeeping and Pauli frames."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aklt import LogicalMap, logical_map
from .chain import LayoutError, StateVector
from .spin import cartesian_states, theta_state

# branches below this probability are reported as impossible
ZERO_PROBABILITY = 1e-26


class ZeroProbabilityBranch(RuntimeError):
    pass


@dataclass(frozen=True)
class MeasurementBasis:
    vectors: np.ndarray
    kind: str
    theta: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        if v.shape != (3, 3):
            raise ValueError("a spin-1 basis needs three 3-component vectors")
        if not np.allclose(v.conj() @ v.T, np.eye(3), atol=1e-12):
            raise ValueError("basis vectors are not orthonormal")
        object.__setattr__(self, "vectors", v)

    @classmethod
    def standard(cls) -> "MeasurementBasis":
        return cls(cartesian_states().as_rows(), "standard")

    @classmethod
    def z_rotated(cls, theta: float) -> "MeasurementBasis":
        """Ordered ``(|theta>, |theta+pi>, |z>)``."""
        z = cartesian_states().z_state
        return cls(np.array([theta_state(theta), theta_state(theta + np.pi), z]), "z_rotated", float(theta))

    @property
    def outcome_names(self) -> tuple[str, str, str]:
        if self.kind == "standard":
            return ("x", "y", "z")
        return ("theta", "theta+pi", "z")

    @property
    def key(self) -> tuple[str, float]:
        return (self.kind, self.theta)

    def logical(self, index: int) -> LogicalMap:
        prefix = "standard:" if self.kind == "standard" else "rotated:"
        return logical_map(prefix + self.outcome_names[index], self.theta)


@dataclass(frozen=True)
class PauliFrame:
    """Single-qubit Pauli modulo phase as ``X^x Z^z``."""

    x: int = 0
    z: int = 0

    def compose(self, other: "PauliFrame") -> "PauliFrame":
        return PauliFrame(self.x ^ other.x, self.z ^ other.z)

    @property
    def label(self) -> str:
        return {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "XZ"}[(self.x, self.z)]

    def matrix(self) -> np.ndarray:
        x = np.array([[0, 1], [1, 0]], dtype=complex)
        z = np.diag([1.0, -1.0]).astype(complex)
        return np.linalg.matrix_power(x, self.x) @ np.linalg.matrix_power(z, self.z)

    def sign_on(self, pauli: str) -> int:
        """+1 if conjugation preserves ``X`` or ``Z``, -1 if it negates it."""
        if pauli == "x":
            return -1 if self.z else 1
        if pauli == "z":
            return -1 if self.x else 1
        raise ValueError(pauli)


# byproduct Pauli of each outcome name, mod phase
_BYPRODUCT = {
    "x": PauliFrame(1, 0),
    "y": PauliFrame(1, 1),
    "z": PauliFrame(0, 1),
    "theta": PauliFrame(1, 0),
    "theta+pi": PauliFrame(1, 1),
}


def byproduct(outcome: int | str, basis: MeasurementBasis) -> PauliFrame:
    name = basis.outcome_names[outcome] if isinstance(outcome, (int, np.integer)) else outcome
    return _BYPRODUCT[name]


def update_frame(frame: PauliFrame, outcome: int | str, basis: MeasurementBasis) -> PauliFrame:
    return frame.compose(byproduct(outcome, basis))


@dataclass(frozen=True)
class Branch:
    probability: float
    post_state: StateVector | None
    outcome: int
    logical_byproduct: LogicalMap
    frame: PauliFrame


def _check_site(state: StateVector, position: int) -> None:
    if not 0 <= position < state.layout.n_sites:
        raise LayoutError(f"site {position} out of range for {state.layout.n_sites} sites")
    if state.layout.site_dims[position] != 3:
        raise LayoutError(f"site {position} is not an unmeasured spin-1 site")


def project_site(state: StateVector, position: int, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Unnormalized projection of a site onto ``target``; the site is removed."""
    _check_site(state, position)
    v3 = state.amplitudes.reshape(state.layout.split(position, position + 1))
    w = np.einsum("m,lmr->lr", np.conj(target), v3).reshape(-1)
    return float(np.vdot(w, w).real), w


def postselect(state: StateVector, position: int, target: np.ndarray) -> tuple[float, StateVector | None]:
    """Single-branch projection; ``(0.0, None)`` marks an impossible branch."""
    target = np.asarray(target, dtype=complex)
    p, w = project_site(state, position, target / np.linalg.norm(target))
    p *= 1.0 / state.norm**2
    if p <= ZERO_PROBABILITY:
        return 0.0, None
    return p, StateVector(w / np.linalg.norm(w), state.layout.without(position))


def measure_site(
    state: StateVector, position: int, basis: MeasurementBasis, frame: PauliFrame | None = None
) -> list[Branch]:
    frame = frame or PauliFrame()
    branches = []
    for k in range(3):
        p, post = postselect(state, position, basis.vectors[k])
        branches.append(Branch(p, post, k, basis.logical(k), update_frame(frame, k, basis)))
    return branches


def trajectory_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Independent stream for trajectory ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def sample_trajectory(
    state: StateVector,
    site_order,
    bases,
    seed: int | np.random.Generator,
) -> tuple[list[int], StateVector, PauliFrame]:
    """Measure sites (given by original label) in order, sampling each outcome.

    ``bases`` is one basis for all sites or one per site.
    """
    rng = seed if isinstance(seed, np.random.Generator) else trajectory_rng(seed)
    labels = list(site_order)
    if isinstance(bases, MeasurementBasis):
        bases = [bases] * len(labels)
    frame = PauliFrame()
    outcomes = []
    for label, basis in zip(labels, bases):
        pos = state.layout.position_of(label)
        branches = measure_site(state, pos, basis, frame)
        probs = np.array([b.probability for b in branches])
        k = int(rng.choice(3, p=probs / probs.sum()))
        outcomes.append(k)
        state, frame = branches[k].post_state, branches[k].frame
    return outcomes, state, frame
