import numpy as np
import pytest

from haldane_wire import rg
from haldane_wire.aklt import AkltChainSpec, aklt_state
from haldane_wire.buffering import (
    BranchCache,
    buffered_rotation,
    buffered_rotation_concatenated,
    default_block_start,
    normalized_success,
    sample_buffered_gate,
    sample_gates,
)
from haldane_wire.chain import LayoutError, StateVector, build_layout, chain_ground_state
from haldane_wire.measurement import MeasurementBasis, ZeroProbabilityBranch, measure_site, trajectory_rng
from haldane_wire.spin import cartesian_states, theta_state


def aklt(n):
    return aklt_state(AkltChainSpec(n, right_terminated=True))


@pytest.mark.parametrize("theta", [0.0, 0.6, np.pi / 2, 3.0])
def test_aklt_block3_success(theta):
    assert buffered_rotation(aklt(6), None, 3, theta).success_probability == pytest.approx(1 / 27, abs=1e-10)


def test_length_one_is_bare_branch():
    g = chain_ground_state(5, 0.3).state
    th = 1.2
    res = buffered_rotation(g, 3, 1, th)
    b = measure_site(g, 3, MeasurementBasis.z_rotated(th))[0]
    assert res.success_probability == pytest.approx(b.probability, abs=1e-15)
    assert np.allclose(res.post_state.amplitudes, b.post_state.amplitudes)
    assert res.byproduct.label == "X"


def test_aklt_block3_equals_bare_gate_on_shorter_chain():
    th = 0.8
    long = buffered_rotation(aklt(7), None, 3, th)
    short = buffered_rotation(aklt(5), None, 1, th)
    assert long.byproduct == short.byproduct
    ov = abs(np.vdot(long.post_state.amplitudes, short.post_state.amplitudes))
    assert ov == pytest.approx(1.0, abs=1e-9)


def test_default_block_sits_at_right_edge():
    s = aklt(6)
    assert default_block_start(s, 3) == 4
    res = buffered_rotation(s, None, 3, 0.1)
    assert res.block_sites == (4, 5, 6)
    with pytest.raises(LayoutError):
        default_block_start(s, 9)


def test_block_validation():
    s = aklt(4)
    with pytest.raises(ValueError):
        buffered_rotation(s, 1, 2, 0.1)
    with pytest.raises(LayoutError):
        buffered_rotation(s, 0, 3, 0.1)


def test_zero_probability_branch():
    lay = build_layout(1, False, False)
    s = StateVector(cartesian_states().z_state.astype(complex), lay)
    with pytest.raises(ZeroProbabilityBranch):
        buffered_rotation(s, 0, 1, 0.3)


@pytest.mark.parametrize("beta", [-1 / 3, 0.0, 0.5])
def test_concatenated_equals_direct_nine(beta):
    g = chain_ground_state(9, beta).state
    a = buffered_rotation(g, None, 9, np.pi / 2)
    b = buffered_rotation_concatenated(g, None, np.pi / 2)
    assert abs(a.success_probability - b.success_probability) < 1e-10
    assert abs(np.vdot(a.post_state.amplitudes, b.post_state.amplitudes)) == pytest.approx(1.0, abs=1e-10)


def test_concatenated_aklt_value():
    b = buffered_rotation_concatenated(aklt(9), None, 0.4)
    assert b.success_probability == pytest.approx(3.0**-9, abs=1e-12)


def test_normalized_success_definitions():
    for L in (1, 3):
        assert normalized_success(-1 / 3, 6, L) == pytest.approx(1.0, abs=1e-9)
    g = chain_ground_state(6, 0.4).state
    p = measure_site(g, 6, MeasurementBasis.z_rotated(np.pi / 2))[0].probability
    assert normalized_success(0.4, 6, 1) == pytest.approx(3 * p, abs=1e-12)


def test_dimerizing_side_suppresses_success():
    assert normalized_success(-0.9, 9, 9) < normalized_success(0.0, 9, 9)


def test_success_links_to_label_population():
    """Pr[z theta z] = (2/5) <theta chi_s|sigma|theta chi_s> + J != 1 leakage."""
    beta, th = 0.3, 0.9
    g = chain_ground_state(6, beta).state
    rho = rg.block_density(g, 3, 6)
    z = cartesian_states().z_state
    v = np.kron(np.kron(z, theta_state(th)), z)
    direct = np.vdot(v, rho @ v).real
    W = rg.block_isometry().matrix
    sigma = W @ rho @ W.conj().T
    th_J = cartesian_states().as_rows().conj() @ theta_state(th)
    t = np.kron(th_J, rg.CHI_S)
    leak = rg.j1_projector_complement() @ v
    linked = 0.4 * np.vdot(t, sigma @ t).real + np.vdot(leak, rho @ leak).real
    assert linked == pytest.approx(direct, abs=1e-12)
    res = buffered_rotation(g, 3, 3, th)
    assert res.success_probability == pytest.approx(direct, abs=1e-12)


def test_sampled_success_rate_aklt():
    s = aklt(6)
    trials = 4000
    cache = BranchCache(s)
    hits = sum(sample_buffered_gate(cache, 0.5, trajectory_rng(2, i), 3).first_attempt_success for i in range(trials))
    p = 1 / 27
    assert abs(hits - trials * p) < 4 * np.sqrt(trials * p * (1 - p))


def test_retry_moves_to_next_block():
    g = chain_ground_state(9, 0.0).state
    runs = sample_gates(g, np.pi / 2, 200, seed=4, L=3)
    retried = [r for r in runs if len(r.attempts) > 1]
    assert retried
    for r in retried:
        for a, b in zip(r.attempts, r.attempts[1:]):
            assert b.block_sites[0] == a.block_sites[-1] + 1
            assert not a.applied
    assert runs[0].attempts == sample_gates(g, np.pi / 2, 1, seed=4, L=3)[0].attempts


def test_bounded_cache_reproduces_unbounded():
    g = chain_ground_state(6, 0.2).state
    big = BranchCache(g)
    small = BranchCache(g, max_bytes=1)
    for i in range(50):
        a = sample_buffered_gate(big, 0.7, trajectory_rng(9, i), 3)
        b = sample_buffered_gate(small, 0.7, trajectory_rng(9, i), 3)
        assert [x.outcomes for x in a.attempts] == [x.outcomes for x in b.attempts]
        assert np.array_equal(a.final_state.amplitudes, b.final_state.amplitudes)


@pytest.mark.parametrize("beta", [-1 / 3, 0.0])
def test_failed_buffer_leaves_valid_wire(beta):
    """After a failed block, standard measurements on the rest still leave a Bell pair."""
    from haldane_wire.measurement import postselect

    g = chain_ground_state(6, beta).state
    c = cartesian_states().as_rows()
    # padding gives |x>, so the centre is measured in the standard basis too
    for outcomes in [(0, 2, 1), (1, 1, 2), (2, 0, 0)]:
        s = g
        for label, k in zip((1, 2, 3), outcomes):
            _, s = postselect(s, s.layout.position_of(label), c[k])
        t = s.amplitudes.reshape(s.layout.site_dims)
        for k in (2, 0, 1):
            t = np.tensordot(c[k].conj(), t, axes=([0], [1]))
        sv = np.linalg.svd(t / np.linalg.norm(t), compute_uv=False)
        assert np.allclose(sv, 1 / np.sqrt(2), atol=1e-8)


def test_success_byproduct_is_x_for_every_length():
    for L in (1, 3, 5):
        assert buffered_rotation(aklt(7), None, L, 0.9).byproduct.label == "X"
