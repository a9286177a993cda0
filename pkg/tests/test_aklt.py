import numpy as np
import pytest

from haldane_wire.aklt import (
    AkltChainSpec,
    aklt_state,
    logical_map,
    mps_contraction,
    phase_free_overlap,
    rz,
)
from haldane_wire.chain import build_hamiltonian, chain_ground_state
from haldane_wire.measurement import MeasurementBasis, measure_site
from haldane_wire.spin import cartesian_states, pauli_matrices, theta_state


@pytest.mark.parametrize("n", [2, 4, 6])
def test_doubly_terminated_state_is_exact_eigenstate(n):
    s = aklt_state(AkltChainSpec(n, right_terminated=True))
    H = build_hamiltonian(s.layout, -1 / 3)
    e0 = -(2 / 3) * (n - 1) - 2
    assert np.linalg.norm(H.apply(s.amplitudes) - e0 * s.amplitudes) < 1e-10


def test_left_terminated_state_is_eigenstate():
    n = 6
    s = aklt_state(AkltChainSpec(n, phi=np.array([0.6, 0.8j])))
    H = build_hamiltonian(s.layout, -1 / 3)
    e0 = -(2 / 3) * (n - 1) - 1
    assert np.linalg.norm(H.apply(s.amplitudes) - e0 * s.amplitudes) < 1e-10


def test_matches_solver_ground_state():
    s = aklt_state(AkltChainSpec(6, right_terminated=True))
    g = chain_ground_state(6, -1 / 3)
    assert abs(np.vdot(s.amplitudes, g.state.amplitudes)) == pytest.approx(1.0, abs=1e-8)


def test_doubly_terminated_is_sum_over_edge_states():
    n = 3
    d = aklt_state(AkltChainSpec(n, right_terminated=True)).amplitudes
    parts = []
    for q in range(2):
        phi = np.eye(2)[q]
        left = aklt_state(AkltChainSpec(n, phi=phi))
        parts.append(np.kron(left.amplitudes * left.norm, phi))
    assert phase_free_overlap(d, parts[0] + parts[1]) == pytest.approx(1.0, abs=1e-12)


def test_single_site_outcomes_uniform():
    s = aklt_state(AkltChainSpec(1))
    probs = [b.probability for b in measure_site(s, 1, MeasurementBasis.standard())]
    assert np.allclose(probs, 1 / 3, atol=1e-12)


def test_logical_maps():
    q = pauli_matrices()
    assert np.allclose(logical_map("theta", 0.0).matrix, q.sx)
    for th in (0.0, 0.7, np.pi / 2):
        assert np.allclose(logical_map("rotated:z", th).matrix, q.sz)
    M = mps_contraction(theta_state(np.pi / 2))
    target = q.sx @ rz(np.pi / 2)
    assert phase_free_overlap(M, target) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("k,name", [(0, "x"), (1, "y"), (2, "z")])
def test_standard_outcomes_contract_to_paulis(k, name):
    v = cartesian_states().as_rows()[k]
    assert phase_free_overlap(mps_contraction(v), logical_map(name).matrix) == pytest.approx(1.0, abs=1e-12)
    assert logical_map(name).is_proportional_to_unitary()


def test_theta_plus_pi_branch():
    th = 0.9
    M = mps_contraction(theta_state(th + np.pi))
    assert phase_free_overlap(M, logical_map("theta+pi", th).matrix) == pytest.approx(1.0, abs=1e-12)


def test_bad_inputs():
    with pytest.raises(ValueError):
        AkltChainSpec(0)
    with pytest.raises(ValueError):
        AkltChainSpec(3, phi=np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        logical_map("w")


def test_swapping_distinct_neighbouring_labels_flips_sign():
    n = 4
    s = aklt_state(AkltChainSpec(n, right_terminated=True))
    c = cartesian_states().as_rows()
    t = s.amplitudes.reshape((2,) + (3,) * n + (2,))
    for ax in range(1, n + 1):
        t = np.moveaxis(np.tensordot(c.conj(), t, axes=([1], [ax])), 0, ax)
    rng = np.random.default_rng(0)
    for _ in range(30):
        labels = list(rng.integers(0, 3, size=n))
        i = int(rng.integers(0, n - 1))
        if labels[i] == labels[i + 1]:
            continue
        swapped = labels.copy()
        swapped[i], swapped[i + 1] = swapped[i + 1], swapped[i]
        a = t[(slice(None), *labels, slice(None))]
        b = t[(slice(None), *swapped, slice(None))]
        assert np.allclose(a, -b, atol=1e-12)
