"""
Mode orderings, the few-mode deviation metric, a closed-form wall-cavity
fixture and a divergent mode-sum negative control.

Nested spectra.  With D^-1 = <chi|G|chi> (G the full resolvent of the empty
geometry) the few-mode matrices for any subset of a larger basis are plain
sub-blocks of the larger ones:

    D_sub^-1 = (D^-1)[sub, sub],   D_sub^-1 W_sub = (D^-1 W)[sub, :],
    S_bg,sub W_sub^+ D_sub^-1 = (S_bg W^+ D^-1)[:, sub].

``NestedFewModeData`` solves once per frequency for the union basis and
serves every nested selector from these blocks.  ``direct=True`` in
``deviation_sweep`` recomputes each selector from scratch instead.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .geometry import DomainError, PotentialSpec, SolverError, ValidationError
from .interaction import AtomSpec, atom_couplings, linear_dispersion_oracle
from .modes import PSpaceSolver, bath_states, dirichlet_modes
from .projection import couplings, d_matrix, gamma_green
from .scattering import s_bg, transfer_matrix_oracle


class DegenerateInputError(ValidationError):
    """Deviation metric with a vanishing normalization."""


# ---------------------------------------------------------------------------
# orderings


class OrderingKind(str, Enum):
    SYMMETRIC = "symmetric_about_dominant"
    COUNTING_UP = "counting_up"


@dataclass(frozen=True)
class OrderingScheme:
    kind: OrderingKind = OrderingKind.SYMMETRIC
    dominant: int = 9
    parity: str = "odd"             # "odd", "even" or "all"

    def __post_init__(self):
        object.__setattr__(self, "kind", OrderingKind(self.kind))
        if self.parity not in ("odd", "even", "all"):
            raise ValidationError(f"unknown parity filter {self.parity!r}")
        if self.dominant < 1:
            raise ValidationError("dominant mode index must be >= 1")

    def _pool(self, n: int) -> list[int]:
        start, step = {"odd": (1, 2), "even": (2, 2), "all": (1, 1)}[self.parity]
        span = self.dominant + 2 * n * step + 2
        return list(range(start, span, step))

    def order(self, n: int) -> list[int]:
        """First ``n`` modes in order of inclusion."""
        pool = self._pool(n)
        if self.kind is OrderingKind.COUNTING_UP:
            return pool[:n]
        # distance to the dominant mode, ties toward lower index
        return sorted(pool, key=lambda lam: (abs(lam - self.dominant), lam))[:n]


def mode_sequence(scheme: OrderingScheme, n: int) -> list[int]:
    """Sorted selector with the first ``n`` modes of ``scheme``."""
    if n < 1:
        raise ValidationError("mode count must be >= 1")
    return sorted(scheme.order(n))


# ---------------------------------------------------------------------------
# deviation metric


def _transmission(x) -> np.ndarray:
    if isinstance(x, np.ndarray) and x.ndim == 1:
        return x.astype(complex)
    if isinstance(x, np.ndarray) and x.ndim == 3:
        return x[:, 1, 0].astype(complex)
    return np.array([s.transmission for s in x], dtype=complex)


def few_mode_deviation(s_few, s_ref, s_0) -> float:
    """
    sum |T_few - T_ref|^2 / sum |T_0 - T_ref|^2 over a shared grid.

    Inputs are complex transmission arrays, (n, 2, 2) stacks or lists of
    SMatrix; only the (1, 0) element enters.
    """
    a, b, c = _transmission(s_few), _transmission(s_ref), _transmission(s_0)
    if not (a.shape == b.shape == c.shape):
        raise ValidationError(f"grid mismatch: {a.shape}, {b.shape}, {c.shape}")
    den = float(np.sum(np.abs(c - b) ** 2))
    if den == 0.0:
        raise DegenerateInputError("zero-mode spectrum coincides with the reference")
    return float(np.sum(np.abs(a - b) ** 2) / den)


@dataclass
class ConvergenceReport:
    counts: list
    deviations: list
    ordering: OrderingScheme
    reference: str = "linear_dispersion_oracle"
    selectors: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def strictly_decreasing(self) -> bool:
        d = np.asarray(self.deviations)
        return bool(np.all(np.diff(d) < 0))

    def at(self, n: int) -> float:
        return self.deviations[self.counts.index(n)]


# ---------------------------------------------------------------------------
# nested few-mode data


@dataclass
class _Blocks:
    omega: float
    dinv: np.ndarray        # D^-1 (energy form)
    dinv_w: np.ndarray      # D^-1 W
    bg_w_dinv: np.ndarray   # S_bg W^+ D^-1
    s_free: np.ndarray      # S_bg S_io of the empty geometry


class NestedFewModeData:
    """Per-frequency blocks for a union basis; serves nested selectors."""

    def __init__(self, spec: PotentialSpec, selector: Sequence[int], omegas,
                 threads: int = 1, **solver_kw):
        self.spec = spec
        self.basis = dirichlet_modes(spec, sorted(set(selector)))
        self.omegas = np.asarray(omegas, dtype=float)
        self.solver_kw = solver_kw
        if threads > 1:
            with ThreadPoolExecutor(threads) as ex:
                self.blocks = list(ex.map(self._solve, self.omegas))
        else:
            self.blocks = [self._solve(w) for w in self.omegas]

    def _solve(self, omega: float) -> _Blocks:
        spec, basis = self.spec, self.basis
        E = 0.5 * omega * omega
        s = PSpaceSolver(spec, basis, E, **self.solver_kw)
        bath = bath_states(spec, basis, E, solver=s, grid=np.array([spec.support[0]]))
        W = couplings(basis, bath).values[0]
        D = d_matrix(E, basis, gamma_green(spec, basis, E, solver=s))
        Sb = s_bg(spec, basis, bath, W).matrix
        Dinv = D.inverse()
        s_io = np.eye(W.shape[1]) - 2j * np.pi * W.conj().T @ Dinv @ W
        return _Blocks(omega, Dinv, Dinv @ W, Sb @ W.conj().T @ Dinv, Sb @ s_io)

    def positions(self, selector: Sequence[int]) -> np.ndarray:
        idx = {lam: i for i, lam in enumerate(self.basis.indices)}
        try:
            return np.array([idx[lam] for lam in selector], dtype=int)
        except KeyError as exc:
            raise ValidationError(f"mode {exc.args[0]} is not in the union basis") from None

    def empty(self) -> np.ndarray:
        return np.array([b.s_free for b in self.blocks])

    def with_atom(self, selector: Sequence[int], atom: AtomSpec, which: str = "full") -> np.ndarray:
        """
        Stack of S matrices (n_omega, 2, 2) with the atom coupled to
        ``selector``; ``which`` is "full" (S_bg S_io) only, since S_io alone
        is basis dependent and needs a direct solve.
        """
        if which != "full":
            raise ValidationError("nested data only provide the full product")
        pos = self.positions(selector)
        g_all = atom_couplings(atom, self.basis)
        ge = g_all.energy_form[pos]
        out = []
        for b in self.blocks:
            if ge.size == 0:
                out.append(b.s_free)
                continue
            left = ge @ b.dinv_w[pos]
            right = b.bg_w_dinv[:, pos] @ ge.conj()
            delta = ge @ b.dinv[np.ix_(pos, pos)] @ ge.conj()
            den = b.omega - atom.omega_a - delta
            if den == 0:
                raise SolverError(f"atomic pole hit at omega={b.omega}")
            out.append(b.s_free - 2j * np.pi * np.outer(right, left) / den)
        return np.array(out)


def direct_spectrum(spec: PotentialSpec, selector: Sequence[int], atom: AtomSpec | None,
                    omegas, which: str = "full", **solver_kw) -> np.ndarray:
    """Atom spectrum for one selector with every object rebuilt for it."""
    from .interaction import linear_smatrix_with_atom

    basis = dirichlet_modes(spec, sorted(selector))
    g = atom_couplings(atom, basis) if atom is not None else None
    out = []
    for w in np.asarray(omegas, dtype=float):
        E = 0.5 * w * w
        s = PSpaceSolver(spec, basis, E, **solver_kw)
        bath = bath_states(spec, basis, E, solver=s, grid=np.array([spec.support[0]]))
        Wt = couplings(basis, bath)
        D = d_matrix(E, basis, gamma_green(spec, basis, E, solver=s))
        if g is not None:
            io = linear_smatrix_with_atom(Wt, D, g, atom.omega_a, w).matrix
        else:
            W = Wt.values[0]
            io = np.eye(W.shape[1]) - 2j * np.pi * W.conj().T @ D.inverse() @ W
        if which == "io":
            out.append(io)
        else:
            out.append(s_bg(spec, basis, bath, Wt).matrix @ io)
    return np.array(out)


def oracle_spectra(spec: PotentialSpec, atom: AtomSpec, omegas):
    """(reference with atom, empty cavity) transfer-matrix stacks."""
    ref = np.array([linear_dispersion_oracle(spec, atom, 0.5 * w * w).matrix for w in omegas])
    s0 = np.array([transfer_matrix_oracle(spec, 0.5 * w * w).matrix for w in omegas])
    return ref, s0


def deviation_sweep(spec: PotentialSpec, atom: AtomSpec, omegas, scheme: OrderingScheme,
                    counts: Sequence[int], direct: bool = False, threads: int = 1,
                    **solver_kw) -> ConvergenceReport:
    """Delta_few for each mode count in ``counts`` under ``scheme``."""
    omegas = np.asarray(omegas, dtype=float)
    counts = sorted(set(int(n) for n in counts))
    ref, s0 = oracle_spectra(spec, atom, omegas)
    selectors = [mode_sequence(scheme, n) for n in counts]
    devs = []
    if direct:
        for sel in selectors:
            devs.append(few_mode_deviation(direct_spectrum(spec, sel, atom, omegas, **solver_kw),
                                           ref, s0))
    else:
        union = sorted(set().union(*selectors))
        data = NestedFewModeData(spec, union, omegas, threads=threads, **solver_kw)
        for sel in selectors:
            devs.append(few_mode_deviation(data.with_atom(sel, atom), ref, s0))
    return ConvergenceReport(counts, devs, scheme, selectors=selectors,
                             meta={"n_omega": int(omegas.size), "direct": direct})


# ---------------------------------------------------------------------------
# closed-form wall cavity


@dataclass(frozen=True)
class ClosedFormCavity:
    """
    Constants of the separable wall cavity: modes omega_l = l pi / L on [0, L],
    couplings script-W_l = w sqrt(l) (-1)^l / (c - s) with
    c = alpha cot(alpha) - i beta, atom coupling g_l = g~ sin(l pi r_a / L)/sqrt(l).
    """

    alpha: float
    beta: complex
    w: complex = 1.0
    g_tilde: complex = 1.0
    L: float = 1.0
    r_a: float | None = None        # default: centre

    @property
    def gamma_tilde(self) -> float:
        return np.pi / self.L

    @property
    def c(self) -> complex:
        s = math.sin(self.alpha)
        if abs(s) < 1e-14:
            raise DomainError(f"alpha = {self.alpha} is a pole of cot")
        return self.alpha * math.cos(self.alpha) / s - 1j * self.beta

    @classmethod
    def wall_mirror(cls, xi: float, k: float, L: float = 1.0, g_tilde: complex = 1.0):
        """
        Constants reproducing a Schroedinger wall at 0 with a delta xi at L,
        probed at wavenumber k (alpha = kL).  The mirror enters through a
        complex beta = alpha + 2 i xi L.
        """
        a = k * L
        nrm = (2 * np.pi * k) ** -0.5
        w = 0.5 * np.sqrt(2 / L) * np.sqrt(np.pi / L) * (-2j * k * nrm * L * np.exp(-1j * a))
        return cls(a, a + 2j * xi * L, w, g_tilde, L)


@dataclass
class ClosedFormResult:
    n: int
    s: float
    couplings: np.ndarray           # script-W_l
    dinv: np.ndarray | None         # Sherman-Morrison route (None if not materialized)
    dinv_dense: np.ndarray | None
    g_dinv_g: complex               # closed form via G1, G2
    g_dinv_g_direct: complex | None # g^T D^-1 g* from the Sherman-Morrison matrix
    G1: float
    G2: float


def closed_form_evaluate(fx: ClosedFormCavity, n: int, dense: bool | None = None,
                         matrices: bool | None = None) -> ClosedFormResult:
    """
    Partial-sum evaluation with Lambda_Q = {1, ..., n}.

    ``matrices`` materializes D^-1 (n x n); ``dense`` additionally inverts
    the assembled script-D directly for cross-checking.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    matrices = n <= 2000 if matrices is None else matrices
    dense = n <= 400 if dense is None else dense
    lam = np.arange(1, n + 1, dtype=float)
    a, L = fx.alpha, fx.L
    den = a * a - (lam * np.pi) ** 2
    if np.any(np.abs(den) < 1e-12 * max(1.0, a * a)):
        raise DomainError(f"alpha = {a} sits on a mode frequency")
    s = float(np.sum(2 * lam**2 * np.pi**2 / den))
    c = fx.c
    u = np.sqrt(lam) * (-1.0) ** lam
    W = fx.w * u / (c - s)
    r_a = 0.5 * L if fx.r_a is None else fx.r_a
    sn = np.sin(lam * np.pi * r_a / L)
    sn[np.abs(sn) < 1e-13] = 0.0
    g = fx.g_tilde * sn / np.sqrt(lam)
    d0 = den / (2 * lam * np.pi * L)            # (omega^2 - omega_l^2) / (2 omega_l)
    odd = (lam % 2 == 1)
    G1 = float(2 * abs(fx.g_tilde) ** 2 * L * np.pi * np.sum(1.0 / den[odd]))
    G2 = float(np.sum(np.sin(np.pi * lam / 2) * (-1.0) ** lam * np.pi * lam / den))
    gdg = G1 - 4 * abs(fx.g_tilde) ** 2 * L * np.pi * G2**2 / (c - s + fx.gamma_tilde * (L / np.pi) * s)
    dinv = dinv_dense = direct = None
    if matrices:
        v = u / d0
        coef = fx.gamma_tilde / (c - s + fx.gamma_tilde * (L / np.pi) * s)
        dinv = np.diag(1.0 / d0).astype(complex) - coef * np.outer(v, v)
        direct = complex(g @ dinv @ g.conj())
        if dense:
            Dm = np.diag(d0).astype(complex) + fx.gamma_tilde * np.outer(u, u) / (c - s)
            dinv_dense = np.linalg.inv(Dm)
    return ClosedFormResult(n, s, W, dinv, dinv_dense, complex(gdg), direct, G1, G2)


def g1_limit(fx: ClosedFormCavity) -> float:
    """Infinite-mode limit of G1."""
    return float(-abs(fx.g_tilde) ** 2 * fx.L * np.pi * math.tan(fx.alpha / 2) / (2 * fx.alpha))


# ---------------------------------------------------------------------------
# negative control


def mode_sum_divergence(omega: float, n_max: int, n: float = 1.0, d: float = 1.0) -> float:
    """
    Partial sum K_N = sum_{l=1}^{N} l / (x - l) with x = omega n d / pi, the
    scattering sum of a projection onto infinitely many Neumann modes.
    """
    x = omega * n * d / np.pi
    lam = np.arange(1, int(n_max) + 1, dtype=float)
    if np.any(np.isclose(x, lam, rtol=0, atol=1e-12)):
        raise DomainError(f"x = {x} is on a resonance of the sum")
    return math.fsum(lam / (x - lam))


__all__ = [
    "OrderingKind", "OrderingScheme", "mode_sequence", "few_mode_deviation",
    "DegenerateInputError", "ConvergenceReport", "NestedFewModeData", "direct_spectrum",
    "oracle_spectra", "deviation_sweep", "ClosedFormCavity", "ClosedFormResult",
    "closed_form_evaluate", "g1_limit", "mode_sum_divergence",
]
