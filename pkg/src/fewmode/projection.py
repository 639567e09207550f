"""
Few-mode operators: couplings W, level-shift matrix Gamma and the D-matrix.

Normalizations.  W_lm = <chi_l|H|psi_m> with energy-normalized bath states.
For the electromagnetic kinds the frequency-normalized couplings are
W_lm / sqrt(omega_l) and the frequency-form propagator is
N^-1 D N^-1 with N = diag(sqrt(omega_l)), so W^+ D^-1 W is unchanged.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import DomainError, PotentialSpec, SolverError, ValidationError, WaveKind
from .modes import BathStateTable, PSpaceSolver, SystemBasis, bath_states


@dataclass
class CouplingTable:
    """W_lm(E) on an energy grid, array shape (n_energies, n_modes, n_channels)."""

    energies: np.ndarray
    values: np.ndarray
    omegas: np.ndarray              # omega_l of the modes
    wave_kind: WaveKind = WaveKind.SCHROEDINGER
    weights: np.ndarray | None = None           # quadrature weights in E'
    bounds: tuple[float, float] | None = None   # integration interval

    def __post_init__(self):
        self.energies = np.atleast_1d(np.asarray(self.energies, dtype=float))
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim != 3:
            vals = vals.reshape(self.energies.size, len(self.omegas), -1)
        self.values = vals
        if not np.all(np.isfinite(self.values)):
            raise SolverError("non-finite coupling values")

    @property
    def n_modes(self) -> int:
        return self.values.shape[1]

    @property
    def scaled(self) -> np.ndarray:
        """Frequency-normalized couplings W / (2 E_l)^(1/4)."""
        return self.values / np.sqrt(self.omegas)[None, :, None]

    def row(self, i: int = 0) -> np.ndarray:
        return self.values[i]


def couplings(basis: SystemBasis, bath: BathStateTable) -> CouplingTable:
    """Surface-term couplings at the energy of ``bath``."""
    solver = bath.solver
    if solver.basis is not basis and solver.basis.selector != basis.selector:
        raise ValidationError("bath states were solved for a different basis")
    if not len(basis):
        return CouplingTable([bath.energy], np.zeros((1, 0, len(bath.channels))),
                             basis.omegas, basis.wave_kind)
    pa = bath.z[solver.ia]
    pb = bath.z[solver.ib]
    W = solver.surface(pa, pb)
    return CouplingTable([bath.energy], W[None], basis.omegas, basis.wave_kind)


def coupling_table(spec: PotentialSpec, basis: SystemBasis, energies: Sequence[float],
                   threads: int = 1, **solver_kw) -> CouplingTable:
    energies = np.asarray(energies, dtype=float)

    def row(E):
        s = PSpaceSolver(spec, basis, E, **solver_kw)
        bath = bath_states(spec, basis, E, grid=np.array(spec.support), solver=s)
        return couplings(basis, bath).values[0]

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(row, energies))
    else:
        rows = [row(E) for E in energies]
    return CouplingTable(energies, np.array(rows), basis.omegas, basis.wave_kind)


@dataclass
class LevelShiftMatrix:
    """Gamma = -Delta + i gamma, split into Hermitian parts."""

    energy: float
    gamma_matrix: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def shift(self) -> np.ndarray:
        G = self.gamma_matrix
        return -0.5 * (G + G.conj().T)

    @property
    def width(self) -> np.ndarray:
        G = self.gamma_matrix
        return (G - G.conj().T) / 2j


def gamma_green(spec: PotentialSpec, basis: SystemBasis, E: float,
                solver: PSpaceSolver | None = None, **solver_kw) -> LevelShiftMatrix:
    """
    Gamma = -<chi|H_QP G~ H_PQ|chi>.

    H_PQ chi_l is the pair of surface deltas of H chi_l, so each column is one
    solve of the P-space equation with a point-source right-hand side.
    """
    if not len(basis):
        return LevelShiftMatrix(E, np.zeros((0, 0), dtype=complex))
    if solver is None:
        solver = PSpaceSolver(spec, basis, E, **solver_kw)
    y = solver.solve_surface()
    G = -solver.surface(y[solver.ia], y[solver.ib])
    return LevelShiftMatrix(E, G, {"condition": solver.cond})


def _hermitian_outer(W: np.ndarray) -> np.ndarray:
    return np.einsum("...lm,...pm->...lp", W, W.conj())


def gamma_quadrature(table: CouplingTable, E: float, W_at_E: np.ndarray | None = None,
                     tail: bool = True, tail_budget: float = 1e-4) -> LevelShiftMatrix:
    """
    Principal-value evaluation of Gamma(E) = -int dE' W W^+ / (E - E' + i0).

    The table should be a quadrature grid in E' (Gauss nodes per panel work
    best; weights are rebuilt from the node layout by ``table_weights``).
    ``W_at_E`` is the on-shell coupling; if omitted it is interpolated.
    """
    Es = table.energies
    if not Es[0] < E < Es[-1]:
        raise DomainError(f"E={E} is not interior to the coupling grid")
    F = _hermitian_outer(table.values)
    if W_at_E is None:
        re = np.array([np.interp(E, Es, table.values[:, l, m].real)
                       for l in range(table.n_modes) for m in range(table.values.shape[2])])
        im = np.array([np.interp(E, Es, table.values[:, l, m].imag)
                       for l in range(table.n_modes) for m in range(table.values.shape[2])])
        W_at_E = (re + 1j * im).reshape(table.n_modes, -1)
    F0 = W_at_E @ W_at_E.conj().T
    w = table.weights if table.weights is not None else np.gradient(Es)
    e_lo, e_hi = table.bounds if table.bounds is not None else (Es[0], Es[-1])
    diff = E - Es
    close = np.abs(diff) < 1e-12 * max(1.0, E)
    diff = np.where(close, 1.0, diff)
    integrand = (F - F0[None]) / diff[:, None, None]
    integrand[close] = 0.0
    pv = np.tensordot(w, integrand, axes=(0, 0)) + F0 * np.log((E - e_lo) / (e_hi - E))
    diag = {}
    if tail:
        t = _tail_estimate(table, E, e_hi)
        diag["tail"] = float(np.linalg.norm(t))
        pv = pv + t
        scale = max(np.linalg.norm(pv), 1e-300)
        if np.linalg.norm(t) > tail_budget * scale * 1e3:
            warnings.warn(f"quadrature tail {np.linalg.norm(t):.2e} is large at E={E}")
            diag["tail_warning"] = True
    G = -pv + 1j * np.pi * F0
    return LevelShiftMatrix(E, G, diag)


def _tail_estimate(table: CouplingTable, E: float, e_hi: float) -> np.ndarray:
    """
    Contribution of E' > E_max.

    Sharp interfaces and deltas make W W^+ ~ P(k') / k' at large k', with P
    oscillating about a mean P0.  P0 is a Hann-windowed average of k' F over
    the upper quarter of the grid in k; the oscillating remainder only
    contributes at O(1/K^2).  With K = sqrt(2 E_max) and a = sqrt(2 E),

        int_K^inf P0 / (E - k'^2/2) dk' = -(P0 / a) log((K + a) / (K - a)).
    """
    Es = table.energies
    F = _hermitian_outer(table.values)
    k = np.sqrt(2.0 * Es)
    K = np.sqrt(2.0 * e_hi)
    k0 = k[0] + 0.75 * (K - k[0])
    sel = k >= k0
    w = table.weights[sel] / k[sel] if table.weights is not None else np.gradient(k)[sel]
    win = np.sin(np.pi * (k[sel] - k0) / (K - k0)) ** 2 * w
    P0 = np.tensordot(win, F[sel] * k[sel][:, None, None], axes=(0, 0)) / win.sum()
    a = np.sqrt(2.0 * E)
    return -(P0 / a) * np.log((K + a) / (K - a))


@dataclass
class DMatrix:
    """
    D = diag(E - E_l) + Gamma in energy normalization.  ``matrix`` gives the
    form natural to the wave kind; the frequency form is N^-1 D N^-1.
    """

    energy: float
    energy_form: np.ndarray
    omegas: np.ndarray
    wave_kind: WaveKind = WaveKind.SCHROEDINGER
    _inv: np.ndarray | None = field(default=None, repr=False)

    @property
    def omega_form(self) -> np.ndarray:
        s = 1.0 / np.sqrt(self.omegas)
        return self.energy_form * s[:, None] * s[None, :]

    @property
    def matrix(self) -> np.ndarray:
        return self.energy_form if self.wave_kind is WaveKind.SCHROEDINGER else self.omega_form

    def inverse(self, form: str = "energy") -> np.ndarray:
        if self._inv is None:
            D = self.energy_form
            if D.size == 0:
                self._inv = D.copy()
            else:
                try:
                    self._inv = np.linalg.inv(D)
                except np.linalg.LinAlgError as exc:
                    raise SolverError(f"singular D-matrix at E={self.energy}") from exc
                if not np.all(np.isfinite(self._inv)):
                    raise SolverError(f"singular D-matrix at E={self.energy}")
        if form == "energy":
            return self._inv
        s = np.sqrt(self.omegas)
        return self._inv * s[:, None] * s[None, :]


def d_matrix(E: float, basis: SystemBasis, gamma: LevelShiftMatrix) -> DMatrix:
    if not np.isclose(gamma.energy, E, rtol=1e-13, atol=0):
        raise ValidationError(f"Gamma evaluated at {gamma.energy}, not {E}")
    D = np.diag(E - basis.energies).astype(complex) + gamma.gamma_matrix
    return DMatrix(float(E), D, basis.omegas, basis.wave_kind)


def gauss_energy_grid(e_lo: float, e_hi: float, panel: float, order: int = 16,
                      in_k: bool = True):
    """
    Composite Gauss-Legendre nodes and weights on [e_lo, e_hi]; panels are
    uniform in k = sqrt(2E) when ``in_k`` so that oscillations in k are
    resolved evenly.  Returns (energies, weights).
    """
    t, w = np.polynomial.legendre.leggauss(order)
    if in_k:
        k0, k1 = np.sqrt(2 * e_lo), np.sqrt(2 * e_hi)
        n = max(1, int(np.ceil((k1 - k0) / panel)))
        edges = np.linspace(k0, k1, n + 1)
        kk = (0.5 * (edges[1:] - edges[:-1])[:, None] * t[None, :]
              + 0.5 * (edges[1:] + edges[:-1])[:, None])
        wk = 0.5 * (edges[1:] - edges[:-1])[:, None] * w[None, :]
        kk, wk = kk.ravel(), wk.ravel()
        return 0.5 * kk**2, wk * kk          # dE = k dk
    n = max(1, int(np.ceil((e_hi - e_lo) / panel)))
    edges = np.linspace(e_lo, e_hi, n + 1)
    ee = 0.5 * (edges[1:] - edges[:-1])[:, None] * t + 0.5 * (edges[1:] + edges[:-1])[:, None]
    we = 0.5 * (edges[1:] - edges[:-1])[:, None] * w[None, :]
    return ee.ravel(), we.ravel()


def quadrature_table(spec: PotentialSpec, basis: SystemBasis, e_hi: float,
                     k_panel: float = 0.5, order: int = 16, e_lo: float = 0.0,
                     threads: int = 1, **solver_kw) -> CouplingTable:
    """Coupling table on a composite Gauss grid for gamma_quadrature."""
    Es, w = gauss_energy_grid(e_lo, e_hi, k_panel, order, in_k=True)
    tab = coupling_table(spec, basis, Es, threads=threads, **solver_kw)
    return CouplingTable(Es, tab.values, tab.omegas, tab.wave_kind, w, (e_lo, e_hi))


__all__ = [
    "CouplingTable", "couplings", "coupling_table", "LevelShiftMatrix",
    "gamma_green", "gamma_quadrature", "DMatrix", "d_matrix",
    "gauss_energy_grid", "quadrature_table",
]
