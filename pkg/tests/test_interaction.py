import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fewmode import (
    AtomSpec, DomainError, ValidationError, atom_couplings, atom_kappa, bath_states,
    compute_spectrum, couplings, d_matrix, dirichlet_modes, double_cavity,
    effective_permittivity_layer, gamma_green, level_shift, ley_loudon_cavity,
    linear_dispersion_oracle, linear_smatrix_with_atom, s_bg, s_io, semiclassical_steady_state,
    transfer_matrix_oracle, PSpaceSolver,
)


def _objects(spec, basis, w):
    E = 0.5 * w * w
    s = PSpaceSolver(spec, basis, E)
    bath = bath_states(spec, basis, E, solver=s, grid=np.array([spec.support[0]]))
    Wt = couplings(basis, bath)
    D = d_matrix(E, basis, gamma_green(spec, basis, E, solver=s))
    return Wt, D, s_bg(spec, basis, bath, Wt)


def test_coupling_hand_value(thin):
    basis = dirichlet_modes(thin, [9])
    g = atom_couplings(AtomSpec(28.71, 0.01, 0.0), basis)
    expected = 0.01 * 28.71 * np.sqrt(1 / (2 * 9 * np.pi)) * np.sqrt(2)
    assert abs(g.values[0]) == pytest.approx(expected, rel=1e-14)


def test_couplings_vanish_at_nodes(thin):
    basis = dirichlet_modes(thin, list(range(1, 11)))
    g = atom_couplings(AtomSpec(28.71, 0.02, 0.0), basis)
    assert np.all(g.values[1::2] == 0)          # even modes at the centre
    assert np.all(g.values[0::2] != 0)
    node = -0.5 + 1 / 3                         # node of mode 3
    g3 = atom_couplings(AtomSpec(28.71, 0.02, node), dirichlet_modes(thin, [3]))
    assert g3.values[0] == 0


def test_coupling_validation(dd, thin):
    with pytest.raises(ValidationError):
        atom_couplings(AtomSpec(10.0, 0.01), dirichlet_modes(dd, [1]))
    with pytest.raises(ValidationError):
        atom_couplings(AtomSpec(10.0, 0.01, 0.9), dirichlet_modes(thin, [1]))
    with pytest.raises(ValidationError):
        AtomSpec(-1.0, 0.01)


def test_zero_dipole_reduces_to_empty_cavity(thin):
    basis = dirichlet_modes(thin, [9])
    atom = AtomSpec(28.7, 0.0)
    g = atom_couplings(atom, basis)
    for w in (27.0, 28.3, 30.1):
        Wt, D, _ = _objects(thin, basis, w)
        assert np.allclose(linear_smatrix_with_atom(Wt, D, g, atom.omega_a).matrix,
                           s_io(Wt, D).matrix)
        lr = level_shift(g, D)
        assert lr.gamma_s == 0 and lr.delta_ls == 0
        assert np.allclose(linear_dispersion_oracle(thin, atom, 0.5 * w * w).matrix,
                           transfer_matrix_oracle(thin, 0.5 * w * w).matrix)


def test_purcell_width_non_negative_across_sweep():
    for n_mid in (1.0, 2.7, 7.0, 15.0):
        spec = double_cavity(n_mid)
        basis = dirichlet_modes(spec, [9])
        atom = AtomSpec(28.4, 0.03)
        res = compute_spectrum(spec, basis, np.linspace(26.0, 31.0, 40), atom=atom, oracle=False)
        assert np.all(res.extras["gamma_s"] >= -1e-15)
        assert np.all(np.isfinite(res.extras["kappa"]))


def test_lamb_shift_dispersive_far_from_resonance():
    spec = ley_loudon_cavity(2.0)               # very good cavity
    basis = dirichlet_modes(spec, [9])
    g = atom_couplings(AtomSpec(28.0, 0.01), basis)
    wl = 9 * np.pi
    for w in (wl - 1.2, wl + 1.2):
        _, D, _ = _objects(spec, basis, w)
        lr = level_shift(g, D)
        approx = abs(g.values[0]) ** 2 / (w - wl)
        assert lr.delta_ls == pytest.approx(approx, rel=0.05)


def test_effective_layer_strength_properties():
    atom = AtomSpec(28.7, 0.01)
    assert effective_permittivity_layer(AtomSpec(28.7, 0.0), 20.0) == 0
    assert abs(effective_permittivity_layer(atom, 1e6)) < 1e-20
    lo = effective_permittivity_layer(atom, 28.6)
    hi = effective_permittivity_layer(atom, 28.8)
    assert lo > 0 > hi
    with pytest.raises(DomainError):
        effective_permittivity_layer(atom, 28.7)


def test_linear_spectrum_unitary_with_atom(thin):
    basis = dirichlet_modes(thin, [9])
    atom = AtomSpec(28.55, 0.01)
    res = compute_spectrum(thin, basis, np.linspace(27.0, 30.0, 60), atom=atom)
    for s in res.full + res.io + res.oracle:
        assert s.unitarity_defect() < 1e-8


def test_strong_coupling_gives_split_doublet():
    spec = ley_loudon_cavity(0.289)
    basis = dirichlet_modes(spec, [9])
    from fewmode.suites import resonant_atom

    atom = resonant_atom(spec, 0.01)
    w = np.linspace(atom.omega_a - 1.0, atom.omega_a + 1.0, 800)
    res = compute_spectrum(spec, basis, w, atom=atom)
    T = res.transmissivity("full")
    interior = (T[1:-1] > T[:-2]) & (T[1:-1] > T[2:]) & (T[1:-1] > 0.2)
    peaks = w[1:-1][interior]
    assert len(peaks) == 2
    assert peaks[0] < atom.omega_a < peaks[1]
    To = np.abs(np.array([o.matrix[1, 0] for o in res.oracle])) ** 2
    assert np.max(np.abs(T - To)) < 0.05


def test_undriven_atom_stays_in_ground_state(thin):
    basis = dirichlet_modes(thin, [9])
    atom = AtomSpec(28.7, 0.03)
    g = atom_couplings(atom, basis)
    Wt, D, _ = _objects(thin, basis, 28.5)
    r = semiclassical_steady_state(Wt, D, g, atom, [0.0, 0.0])
    assert r.sigma_minus == 0 and r.sigma_z == -1
    assert np.all(r.b_out == 0)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-8, 1e4), st.floats(27.5, 29.5), st.sampled_from([0, 1]))
def test_steady_state_bounds_and_residual(b, w, ch):
    spec = double_cavity(15.0)
    basis = dirichlet_modes(spec, [9])
    atom = AtomSpec(28.4136, 0.03)
    g = atom_couplings(atom, basis)
    Wt, D, bg = _objects(spec, basis, w)
    vec = np.zeros(2)
    vec[ch] = b
    r = semiclassical_steady_state(Wt, D, g, atom, vec)
    assert -1.0 <= r.sigma_z <= 0.0
    assert r.residual() < 1e-12
    # elastic output never exceeds the input
    assert np.sum(np.abs(r.observed(bg)) ** 2) <= b * b * (1 + 1e-9)


def test_saturation_approaches_empty_cavity():
    spec = double_cavity(15.0)
    basis = dirichlet_modes(spec, [9])
    atom = AtomSpec(28.4136, 0.03)
    g = atom_couplings(atom, basis)
    Wt, D, bg = _objects(spec, basis, 28.45)
    empty = abs((bg.matrix @ s_io(Wt, D).matrix)[1, 0]) ** 2
    devs = []
    for b in (1e1, 1e2, 1e3):
        r = semiclassical_steady_state(Wt, D, g, atom, [b, 0.0])
        devs.append(abs(abs(r.observed(bg)[1]) ** 2 / b**2 - empty))
    assert devs[0] > devs[1] > devs[2]
    assert r.sigma_z > -1e-3


def test_kappa_matches_definition(thin):
    basis = dirichlet_modes(thin, [7, 9])
    atom = AtomSpec(28.6, 0.05)
    g = atom_couplings(atom, basis)
    Wt, D, _ = _objects(thin, basis, 28.2)
    Ws, Dinv, gs = Wt.scaled[0], D.inverse("omega"), g.values
    M = Ws.conj().T @ Dinv @ np.outer(gs.conj(), gs) @ Dinv @ Ws
    assert atom_kappa(Wt, D, g) == pytest.approx(2 * np.pi * abs(M[1, 0]), rel=1e-12)
