"""
Scattering matrices: input-output part, background part, their product, and
an independent transfer-matrix oracle.

Port convention.  Rows and columns are indexed 0 = left, 1 = right.  Column j
holds the outgoing amplitudes for unit incidence from side j, so S[1, 0] is
left-to-right transmission and free propagation is [[0, 1], [1, 0]].  Plane
waves carry absolute phases exp(+-ikr) in both the engine and the oracle.

S_io lives between bath channels (label m = side of incidence of the bath
state), and the background factor maps bath channels to ports, so that
S = S_bg S_io holds as a plain matrix product.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .geometry import (
    PotentialSpec, ValidationError, WaveKind, delta_xi, ley_loudon_reflectivity,
)
from .modes import BathStateTable, SystemBasis
from .projection import CouplingTable, DMatrix

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


@dataclass
class SMatrix:
    energy: float
    matrix: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)

    @property
    def transmission(self) -> complex:
        return self.matrix[1, 0] if self.matrix.shape[0] > 1 else self.matrix[0, 0]

    @property
    def momentum_form(self) -> np.ndarray:
        """Rows relabelled by propagation direction; free space is the identity."""
        if self.matrix.shape[0] == 1:
            return self.matrix.copy()
        return SWAP @ self.matrix

    def unitarity_defect(self) -> float:
        S = self.matrix
        return float(np.linalg.norm(S.conj().T @ S - np.eye(S.shape[0])))


@dataclass
class SpectrumResult:
    grid: np.ndarray
    energies: np.ndarray
    full: list
    io: list
    bg: list
    manifest: dict = field(default_factory=dict)
    oracle: list | None = None
    extras: dict = field(default_factory=dict)

    def stack(self, which: str = "full") -> np.ndarray:
        return np.array([s.matrix for s in getattr(self, which)])

    def transmissivity(self, which: str = "full") -> np.ndarray:
        return np.abs(self.stack(which)[:, 1, 0]) ** 2

    def composition_defect(self) -> float:
        f, b, i = self.stack("full"), self.stack("bg"), self.stack("io")
        return float(np.max(np.abs(f - b @ i))) if len(f) else 0.0


def _row(W_row) -> np.ndarray:
    if isinstance(W_row, CouplingTable):
        return W_row.values[0]
    return np.asarray(W_row, dtype=complex)


def s_io(W_row, D: DMatrix) -> SMatrix:
    """S_io = 1 - 2 pi i W^+ D^-1 W between bath channels."""
    W = _row(W_row)
    if isinstance(W_row, CouplingTable) and not np.isclose(W_row.energies[0], D.energy):
        raise ValidationError("couplings and D-matrix at different energies")
    n_ch = W.shape[1] if W.ndim == 2 else 2
    if W.size == 0:
        return SMatrix(D.energy, np.eye(n_ch), {"factor": "io", "modes": 0})
    T = W.conj().T @ D.inverse() @ W
    return SMatrix(D.energy, np.eye(n_ch) - 2j * np.pi * T,
                   {"factor": "io", "modes": W.shape[0]})


def s_bg(spec: PotentialSpec, basis: SystemBasis, bath: BathStateTable, W_row) -> SMatrix:
    """
    Background factor from the reduced T-matrix element
    <k_m|V|psi_m'> - sum_l <k_m|chi_l> W_lm'.
    """
    solver = bath.solver
    W = _row(W_row)
    if spec.wall is not None:
        # single channel: read off the outgoing amplitude directly
        return SMatrix(bath.energy, bath.outgoing[:, 1:].T.copy(), {"factor": "bg"})
    k = solver.k
    nrm = 1.0 / np.sqrt(2.0 * np.pi * bath.k)
    z = bath.z
    pv = z[:solver.nP]                           # psi at the points
    T = np.zeros((2, 2), dtype=complex)
    for m, sgn in ((0, -1.0), (1, 1.0)):          # <k_0| ~ exp(-ikr), <k_1| ~ exp(+ikr)
        ph = np.exp(sgn * 1j * k * solver.points)
        T[m] = (solver.point_xi * ph) @ pv
        for lb, sl, v in zip(solver.layers, solver._layer_slices, solver.layer_v):
            T[m] += v * (lb.exp_integrals(sgn * k) @ z[sl])
        if solver.M:
            proj = solver.Im if m == 0 else solver.Ip
            T[m] -= proj @ W
    T *= nrm
    S_mom = np.eye(2) - 2j * np.pi * T
    return SMatrix(bath.energy, SWAP @ S_mom, {"factor": "bg"})


def s_full(bg: SMatrix, io: SMatrix) -> SMatrix:
    if not np.isclose(bg.energy, io.energy, rtol=1e-13, atol=0):
        raise ValidationError(f"energy mismatch: bg at {bg.energy}, io at {io.energy}")
    return SMatrix(bg.energy, bg.matrix @ io.matrix, {"bg": bg.matrix, "io": io.matrix})


# ---------------------------------------------------------------------------
# oracle


def _slope_jump(spec: PotentialSpec, strength: float, E: float) -> complex:
    """Jump of psi'/psi across a delta: 2 xi, with xi from the thin-mirror r."""
    if spec.wave_kind is WaveKind.SCHROEDINGER:
        return 2.0 * strength
    k = np.sqrt(2.0 * E)
    r = ley_loudon_reflectivity(strength, k)
    return 2j * k * r / (1.0 + r)


def transfer_matrix_oracle(spec: PotentialSpec, E: float, atom_layer=None) -> SMatrix:
    """
    Exact S from 2x2 transfer matrices acting on (psi, psi').

    ``atom_layer`` is an optional (position, eta) pair adding a permittivity
    delta eps -> eps + eta delta(r - position); eta may be negative.
    """
    k = np.sqrt(2.0 * E)
    events = []
    for lay in spec.layers:
        events.append((lay.start, "n", lay.n))
        events.append((lay.end, "n", 1.0))
    for d in spec.deltas:
        events.append((d.position, "jump", _slope_jump(spec, d.strength, E)))
    if atom_layer is not None:
        pos, eta = atom_layer
        events.append((float(pos), "jump", -(k**2) * eta))
    # at coinciding positions apply index changes in a fixed order; deltas at an
    # interface sit where psi is continuous, so ordering does not matter
    events.sort(key=lambda e: e[0])
    x0 = spec.wall if spec.wall is not None else spec.support[0]
    x1 = spec.support[1]
    if events:
        x0 = min(x0, events[0][0])
        x1 = max(x1, events[-1][0])
    T = np.eye(2, dtype=complex)
    x, kappa = x0, k
    for pos, kind, val in events:
        T = _propagate(kappa, pos - x) @ T
        x = pos
        if kind == "n":
            kappa = val * k
        else:
            T = np.array([[1.0, 0.0], [val, 1.0]], dtype=complex) @ T
    T = _propagate(kappa, x1 - x) @ T

    def P(xx):
        e, f = np.exp(1j * k * xx), np.exp(-1j * k * xx)
        return np.array([[e, f], [1j * k * e, -1j * k * f]])

    if spec.wall is not None:
        # psi(wall) = 0 with unit slope; decompose beyond x1 as A e^{ikr} + B e^{-ikr}
        A, B = np.linalg.solve(P(x1), T @ np.array([0.0, 1.0]))
        return SMatrix(E, np.array([[A / B]]), {"factor": "oracle"})
    M = np.linalg.solve(P(x1), T @ P(x0))
    r = -M[1, 0] / M[1, 1]
    t = M[0, 0] + M[0, 1] * r
    tp = 1.0 / M[1, 1]
    rp = M[0, 1] * tp
    return SMatrix(E, np.array([[r, tp], [t, rp]]), {"factor": "oracle"})


def transmission_peak(spec: PotentialSpec, omega_guess: float, half_width: float,
                      atom_layer=None) -> float:
    """Frequency of the largest oracle |T|^2 within omega_guess +- half_width."""
    if spec.wall is not None:
        raise ValidationError("a single-channel geometry has no transmission")

    def neg(w):
        return -abs(transfer_matrix_oracle(spec, 0.5 * w * w, atom_layer).transmission) ** 2

    lo, hi = omega_guess - half_width, omega_guess + half_width
    if lo <= 0:
        raise ValidationError("search window must stay at positive frequency")
    # coarse scan first so a bounded search lands in the right basin
    ws = np.linspace(lo, hi, 401)
    i = int(np.argmin([neg(w) for w in ws]))
    a, b = ws[max(i - 1, 0)], ws[min(i + 1, ws.size - 1)]
    res = minimize_scalar(neg, bounds=(a, b), method="bounded",
                          options={"xatol": 1e-12 * max(1.0, omega_guess)})
    return float(res.x)


def _propagate(kappa, length) -> np.ndarray:
    if length == 0:
        return np.eye(2, dtype=complex)
    c, s = np.cos(kappa * length), np.sin(kappa * length)
    return np.array([[c, s / kappa], [-kappa * s, c]], dtype=complex)


__all__ = [
    "SMatrix", "SpectrumResult", "s_io", "s_bg", "s_full",
    "transfer_matrix_oracle", "transmission_peak", "SWAP",
]
