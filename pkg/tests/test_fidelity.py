import numpy as np
import pytest

from haldane_wire.chain import build_layout, chain_ground_state
from haldane_wire.fidelity import (
    ORACLE_MAX_SPIN1,
    fidelity_from_expectation,
    initial_sign,
    oracle_fidelity,
    rotated_string,
    rotation_fidelity,
    string_expectation,
    string_operator,
    worst_case_scan,
)

GRID = [k * np.pi / 8 for k in range(16)]


@pytest.mark.parametrize("axis", ["x", "y", "z", 0.7])
def test_string_squares_to_identity(axis):
    lay = build_layout(2, True, True)
    D = string_operator(axis, lay, "z").dense(lay)
    rng = np.random.default_rng(0)
    v = rng.standard_normal(lay.dim) + 1j * rng.standard_normal(lay.dim)
    assert np.allclose(D @ (D @ v), v, atol=1e-12)


def test_string_needs_both_terminations():
    with pytest.raises(Exception):
        string_operator("z", build_layout(3, True, False))


@pytest.mark.parametrize("beta", [-0.9, -0.3, 0.0, 0.6])
@pytest.mark.parametrize("axis", ["x", "z"])
def test_ground_state_is_string_eigenstate(beta, axis):
    g = chain_ground_state(6, beta).state
    v = string_expectation(g, string_operator(axis, g.layout, axis))
    assert abs(abs(v) - 1) < 1e-8


def test_initial_sign_of_singlet_ground_state():
    assert initial_sign(chain_ground_state(4, 0.2).state, "x") == -1


def test_rotated_string_splits_at_block():
    lay = build_layout(4, True, True)
    op = rotated_string(0.5, split_label=3)
    f = op.factors(lay)
    assert np.allclose(f[1], f[2]) and np.allclose(f[3], f[2])
    assert np.allclose(f[4], op.tail_factor)
    assert not np.allclose(f[4], f[1])


def test_fidelity_from_expectation():
    assert fidelity_from_expectation(-1.0, -1) == 1.0
    assert fidelity_from_expectation(1.0, -1) == 0.0
    assert fidelity_from_expectation(0.0, 1) == pytest.approx(np.sqrt(0.5))
    with pytest.raises(ArithmeticError):
        fidelity_from_expectation(1.1, 1)


@pytest.mark.parametrize("L", [1, 3])
def test_aklt_gate_is_exact(L):
    for th in (0.3, np.pi / 2):
        assert rotation_fidelity(-1 / 3, 6, L, th).F == pytest.approx(1.0, abs=1e-10)
        assert oracle_fidelity(-1 / 3, 6, L, th) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("beta", [-0.9, 0.0, 0.7])
def test_identity_gate_is_exact(beta):
    assert rotation_fidelity(beta, 6, 1, 0.0).F == pytest.approx(1.0, abs=1e-6)


def test_buffering_improves_fidelity():
    assert oracle_fidelity(0.0, 6, 3, np.pi / 2) >= oracle_fidelity(0.0, 6, 1, np.pi / 2)


@pytest.mark.parametrize("beta,n,L,th", [(0.0, 6, 1, np.pi / 2), (0.5, 4, 1, np.pi / 2), (-0.6, 5, 3, 1.0)])
def test_string_formula_matches_oracle(beta, n, L, th):
    assert abs(rotation_fidelity(beta, n, L, th).F - oracle_fidelity(beta, n, L, th)) < 1e-6


def test_oracle_size_limit():
    with pytest.raises(ValueError):
        oracle_fidelity(0.0, ORACLE_MAX_SPIN1 + 1, 1, 0.3)


def test_worst_case_is_quarter_turn():
    th, f = worst_case_scan(0.0, 6, 1, GRID)
    assert abs(th - np.pi / 2) <= np.pi / 8 + 1e-12 or abs(th - 3 * np.pi / 2) <= np.pi / 8 + 1e-12
    assert f < 1
    _, f_aklt = worst_case_scan(-1 / 3, 6, 1, GRID)
    assert f_aklt == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        worst_case_scan(0.0, 6, 1, [])


def test_reflection_symmetry():
    g = chain_ground_state(6, 0.3).state
    for th in GRID[1:]:
        a = rotation_fidelity(0.3, 6, 1, th, ground=g).F
        b = rotation_fidelity(0.3, 6, 1, 2 * np.pi - th, ground=g).F
        assert a == pytest.approx(b, abs=1e-8)


def test_concatenated_fidelity_equals_direct():
    a = rotation_fidelity(0.2, 9, 9, np.pi / 2)
    b = rotation_fidelity(0.2, 9, 9, np.pi / 2, concatenated=True)
    assert a.F == pytest.approx(b.F, abs=1e-10)
    with pytest.raises(ValueError):
        rotation_fidelity(0.2, 9, 5, 0.1, concatenated=True)
