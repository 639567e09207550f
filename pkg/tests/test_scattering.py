import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fewmode import (
    SWAP, DeltaBarrier, PotentialSpec, SMatrix, ValidationError, WaveKind, bath_states,
    compute_spectrum, coupling_table, d_matrix, dirichlet_modes, double_delta, gamma_green,
    ley_loudon_cavity, ley_loudon_reflectivity, s_bg, s_full, s_io, transfer_matrix_oracle,
    transmission_peak,
)


def test_oracle_empty_is_free_propagation():
    vac = PotentialSpec(WaveKind.SCHROEDINGER, (-1, 1))
    S = transfer_matrix_oracle(vac, 3.0)
    assert np.allclose(S.matrix, SWAP)
    assert np.allclose(S.momentum_form, np.eye(2))


@given(st.floats(0.0, 50.0), st.floats(0.05, 40.0), st.floats(-2.0, 2.0))
def test_oracle_single_delta_textbook(xi, k, x0):
    spec = PotentialSpec(WaveKind.SCHROEDINGER, (x0 - 1, x0 + 1), deltas=(DeltaBarrier(x0, xi),))
    S = transfer_matrix_oracle(spec, 0.5 * k * k)
    assert abs(S.transmission) ** 2 == pytest.approx(k * k / (k * k + xi * xi), abs=1e-10)
    # absolute phases: r = -i xi/(k + i xi) e^{2ikx0}
    r = -1j * xi / (k + 1j * xi) * np.exp(2j * k * x0)
    assert S.matrix[0, 0] == pytest.approx(r, abs=1e-10)


@given(st.floats(0.0, 2.0), st.floats(0.5, 60.0))
def test_oracle_thin_mirror_reflectivity(eta, omega):
    spec = PotentialSpec(WaveKind.MAXWELL_RWA, (-1, 1), deltas=(DeltaBarrier(0.0, eta),))
    S = transfer_matrix_oracle(spec, 0.5 * omega**2)
    assert S.matrix[0, 0] == pytest.approx(ley_loudon_reflectivity(eta, omega), abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 30.0), st.floats(0.0, 30.0), st.floats(0.2, 300.0))
def test_oracle_unitary_and_reciprocal(xi1, xi2, E):
    S = transfer_matrix_oracle(double_delta(xi1, xi2), E)
    assert S.unitarity_defect() < 1e-10
    assert S.matrix[0, 1] == pytest.approx(S.matrix[1, 0], abs=1e-10)


def test_s_io_without_modes_is_identity(dd):
    basis = dirichlet_modes(dd, [])
    E = 2.0
    tab = coupling_table(dd, basis, [E])
    D = d_matrix(E, basis, gamma_green(dd, basis, E))
    assert np.allclose(s_io(tab, D).matrix, np.eye(2))


def test_s_full_identities():
    a = SMatrix(1.0, SWAP)
    b = SMatrix(1.0, np.diag([1j, -1]))
    assert np.allclose(s_full(SMatrix(1.0, np.eye(2)), b).matrix, b.matrix)
    assert np.allclose(s_full(a, SMatrix(1.0, np.eye(2))).matrix, a.matrix)
    with pytest.raises(ValidationError):
        s_full(a, SMatrix(2.0, np.eye(2)))


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 30.0), st.lists(st.integers(1, 12), min_size=0, max_size=4, unique=True),
       st.floats(0.3, 250.0))
def test_factorization_matches_oracle(xi, sel, E):
    spec = double_delta(xi)
    basis = dirichlet_modes(spec, sorted(sel))
    res = compute_spectrum(spec, basis, [E])
    for which in ("full", "io", "bg"):
        assert getattr(res, which)[0].unitarity_defect() < 1e-8
    assert np.linalg.norm(res.full[0].matrix - res.oracle[0].matrix) < 1e-8


def test_background_with_many_modes_is_smooth(dd):
    # with the low resonances moved into S_io, |T_bg|^2 varies slowly across the band
    basis = dirichlet_modes(dd, list(range(1, 41)))
    E = np.linspace(1.0, 300.0, 120)
    res = compute_spectrum(dd, basis, E, oracle=False)
    Tbg, Tfull = res.transmissivity("bg"), res.transmissivity("full")
    assert np.max(np.abs(np.diff(Tbg))) < 0.1 * np.max(np.abs(np.diff(Tfull)))


def test_wall_mirror_single_channel(wall):
    basis = dirichlet_modes(wall, [1, 2])
    res = compute_spectrum(wall, basis, np.linspace(0.5, 80.0, 17))
    for f, o in zip(res.full, res.oracle):
        assert f.matrix.shape == (1, 1)
        assert abs(f.matrix[0, 0] - o.matrix[0, 0]) < 1e-9
        assert abs(abs(f.matrix[0, 0]) - 1) < 1e-10


def test_transmission_peak_near_mode(thin):
    w = transmission_peak(thin, 8 * np.pi, 1.4)
    T = lambda x: abs(transfer_matrix_oracle(thin, 0.5 * x * x).transmission) ** 2
    assert T(w) == pytest.approx(1.0, abs=1e-10)
    assert abs(w - 8 * np.pi) < 1.0


def test_peak_matches_quoted_resonance():
    # the resonance used for the convergence study of the eta = 0.15 cavity
    w = transmission_peak(ley_loudon_cavity(0.15), 9 * np.pi, 1.4)
    assert w == pytest.approx(28.71, abs=5e-3)


def test_bg_wrong_energy_rejected(dd):
    basis = dirichlet_modes(dd, [1])
    tab = coupling_table(dd, basis, [2.0])
    D = d_matrix(3.0, basis, gamma_green(dd, basis, 3.0))
    with pytest.raises(ValidationError):
        s_io(tab, D)
    b = bath_states(dd, basis, 2.0, grid=3)
    assert s_bg(dd, basis, b, tab).matrix.shape == (2, 2)
