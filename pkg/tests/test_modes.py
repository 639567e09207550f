import numpy as np
import pytest
from scipy.integrate import quad

from fewmode import (
    ValidationError, bath_states, default_mode_support, dirichlet_modes, free_green_kernel,
    free_state, PSpaceSolver,
)
from fewmode.modes import Q_TOLERANCE


def test_mode_frequencies_and_normalization(thin):
    basis = dirichlet_modes(thin, [1, 8, 9])
    assert basis.omegas[1] == pytest.approx(8 * np.pi)
    for m in basis.modes:
        val, _ = quad(lambda r: m.value_at(r) ** 2, *m.support, limit=200)
        assert val == pytest.approx(1.0, abs=1e-10)
    assert abs(basis.values(0.0)[0, 2]) == pytest.approx(np.sqrt(2))


def test_boundary_slopes_match_derivative(thin):
    m = dirichlet_modes(thin, [5]).modes[0]
    a, b = m.support
    eps = 1e-9
    assert m.boundary_slopes[0] == pytest.approx(float(m.derivative_at(a + eps)), rel=1e-6)
    assert m.boundary_slopes[1] == pytest.approx(float(m.derivative_at(b - eps)), rel=1e-6)


def test_selector_validation(dd):
    with pytest.raises(ValidationError):
        dirichlet_modes(dd, [1, 1])
    with pytest.raises(ValidationError):
        dirichlet_modes(dd, [0])
    with pytest.raises(ValidationError, match="inside the mode support"):
        dirichlet_modes(dd, [1], support=(-1.0, 1.0))


def test_default_support_is_between_mirrors(dd, wall):
    assert default_mode_support(dd) == (-0.5, 0.5)
    assert default_mode_support(wall) == (0.0, 1.0)


def test_free_kernel_values():
    assert free_green_kernel(0.5, 0.3, 0.3) == pytest.approx(-1j)
    k = 2.5
    assert free_green_kernel(0.5 * k * k, 0.0, np.pi / k) == pytest.approx(1j / k)


def test_free_kernel_is_a_green_function():
    # (E - K) G = 0 away from the source and the slope jumps by -2i/k * ik = 2 at r = r'
    E, rp, h = 3.0, 0.2, 1e-4
    k = np.sqrt(2 * E)
    g = lambda r: free_green_kernel(E, r, rp)
    r = 0.9
    lap = (g(r + h) - 2 * g(r) + g(r - h)) / h**2
    assert abs(E * g(r) + 0.5 * lap) < 1e-5 * k
    jump = (g(rp + h) - g(rp)) / h - (g(rp) - g(rp - h)) / h
    assert jump == pytest.approx(2.0, abs=1e-3)


def test_free_state_normalization():
    k = 1.7
    assert abs(free_state(0, k, 0.0)) ** 2 == pytest.approx(1 / (2 * np.pi * k))
    assert free_state(1, k, 0.4) == pytest.approx(np.conj(free_state(0, k, 0.4)))


def test_no_modes_no_potential_gives_plane_waves(dd):
    from fewmode import PotentialSpec, WaveKind

    vac = PotentialSpec(WaveKind.SCHROEDINGER, (-0.5, 0.5))
    basis = dirichlet_modes(vac, [])
    E = 2.0
    grid = np.linspace(-1, 1, 9)
    b = bath_states(vac, basis, E, grid=grid)
    k = np.sqrt(2 * E)
    assert np.allclose(b.psi[0], free_state(0, k, grid), atol=1e-14)
    assert np.allclose(b.psi[1], free_state(1, k, grid), atol=1e-14)


@pytest.mark.parametrize("sel", [[1], [1, 2, 3], list(range(1, 21))])
def test_bath_states_stay_in_p_space(dd, sel):
    basis = dirichlet_modes(dd, sel)
    for E in (0.3, 4.9, 60.0, 700.0):
        b = bath_states(dd, basis, E, grid=5)
        assert b.q_residual < Q_TOLERANCE
        assert np.all(b.flux_defect < 1e-10)


def test_wall_mirror_boundary_value_matches_hand_solution(wall):
    # wall at 0, delta xi at 1: psi = A sin(kr) inside, N (e^{-ikr} + S e^{ikr}) outside
    xi = wall.deltas[0].strength
    basis = dirichlet_modes(wall, [])
    for k in (0.7, 3.1, 9.3):
        E = 0.5 * k * k
        N = 1 / np.sqrt(2 * np.pi * k)
        M = np.array([[np.sin(k), -N * np.exp(1j * k)],
                      [-k * np.cos(k) - 2 * xi * np.sin(k), 1j * k * N * np.exp(1j * k)]])
        rhs = np.array([N * np.exp(-1j * k), 1j * k * N * np.exp(-1j * k)])
        A, S = np.linalg.solve(M, rhs)
        grid = np.array([0.25, 0.5, 1.0, 1.5])
        b = bath_states(wall, basis, E, grid=grid)
        exact = np.where(grid <= 1.0, A * np.sin(k * grid),
                         N * (np.exp(-1j * k * grid) + S * np.exp(1j * k * grid)))
        assert np.allclose(b.psi[0], exact, rtol=0, atol=1e-12)
        assert b.outgoing[0, 1] == pytest.approx(S, abs=1e-12)


def test_trapezoid_layers_converge_to_exact_at_second_order():
    from fewmode import double_cavity

    spec = double_cavity(7.0)
    basis = dirichlet_modes(spec, [9])
    E = 0.5 * 28.0**2
    exact = bath_states(spec, basis, E, grid=5).psi
    errs = [np.max(np.abs(bath_states(spec, basis, E, grid=5, quadrature="trapezoid",
                                      layer_nodes=n).psi - exact)) for n in (16, 32, 64)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


def test_solver_condition_is_reported(dd):
    s = PSpaceSolver(dd, dirichlet_modes(dd, [1, 2]), 3.0)
    assert np.isfinite(s.cond) and s.cond >= 1.0
