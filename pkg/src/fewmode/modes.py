"""
System basis, free states, the free Green function and P-space bath states.

The bath states solve

    psi = f + G0 U psi,    U = H_PP - K = V - QH - HQ + QHQ,

with the retarded kernel G0(r, r') = -(i/k) exp(ik|r - r'|).  For Dirichlet
system modes the action of U on any state only involves

  * the projections c_l = <chi_l|psi>,
  * point values of psi at the delta barriers and at the mode-support edges
    (the kink of a truncated sine makes H chi_l carry surface deltas),
  * psi inside dielectric layers.

The first two are finite-rank pieces treated in closed form.  Inside a layer
psi is expanded either in the two local plane waves exp(+-i n k r) (exact for
piecewise-constant media) or in piecewise-linear hat functions on a uniform
grid (product trapezoid rule, second order).  Collocating the integral
equation at those unknowns gives a small dense Nystrom system.
"""
from __future__ import annotations

from functools import lru_cache
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import (
    DomainError, Layer, PotentialSpec, SolverError, ValidationError, WaveKind,
)

COND_LIMIT = 1e12
Q_TOLERANCE = 1e-8


# ---------------------------------------------------------------------------
# elementary exponential integrals


def _e1(z):
    """(exp(z) - 1)/z, finite at z = 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-8
    zs = np.where(small, 1.0, z)
    return np.where(small, 1.0 + 0.5 * z, np.expm1(zs) / zs)


def _e2(z):
    """Integral of t exp(z t) over [0, 1]."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 0.2
    zs = np.where(small, 1.0, z)
    big = (np.exp(zs) * (zs - 1.0) + 1.0) / (zs * zs)
    ser = np.zeros_like(z)
    term = np.ones_like(z)
    for n in range(16):
        if n:
            term = term * z / n
        ser = ser + term / (n + 2)
    return np.where(small, ser, big)


def xint(alpha, u, v):
    """Integral of exp(i alpha r) over [u, v]; robust for alpha -> 0."""
    u = np.asarray(u, dtype=float)
    h = np.asarray(v, dtype=float) - u
    return np.exp(1j * alpha * u) * h * _e1(1j * alpha * h)


def xint1(alpha, u, v):
    """Integral of (r - u) exp(i alpha r) over [u, v]."""
    u = np.asarray(u, dtype=float)
    h = np.asarray(v, dtype=float) - u
    return np.exp(1j * alpha * u) * h * h * _e2(1j * alpha * h)


# ---------------------------------------------------------------------------
# system modes


@dataclass(frozen=True)
class SystemMode:
    """Dirichlet mode sqrt(2/L) sin(q (r - a)) on [a, b], zero elsewhere."""

    index: int
    support: tuple[float, float]

    @property
    def length(self) -> float:
        return self.support[1] - self.support[0]

    @property
    def omega(self) -> float:
        return self.index * np.pi / self.length

    @property
    def energy(self) -> float:
        return 0.5 * self.omega**2

    @property
    def norm(self) -> float:
        return np.sqrt(2.0 / self.length)

    def value_at(self, r):
        r = np.asarray(r, dtype=float)
        a, b = self.support
        inside = (r >= a) & (r <= b)
        return np.where(inside, self.norm * np.sin(self.omega * (r - a)), 0.0)

    def derivative_at(self, r):
        r = np.asarray(r, dtype=float)
        a, b = self.support
        inside = (r > a) & (r < b)
        return np.where(inside, self.norm * self.omega * np.cos(self.omega * (r - a)), 0.0)

    @property
    def boundary_slopes(self) -> tuple[float, float]:
        """One-sided slopes at a (from the right) and at b (from the left)."""
        s = self.norm * self.omega
        return s, s * (-1.0) ** self.index


@dataclass(frozen=True)
class SystemBasis:
    modes: tuple[SystemMode, ...]
    selector: tuple[int, ...]
    support: tuple[float, float]
    wave_kind: WaveKind = WaveKind.SCHROEDINGER

    def __len__(self) -> int:
        return len(self.modes)

    @property
    def indices(self) -> np.ndarray:
        return np.array(self.selector, dtype=int)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([m.omega for m in self.modes], dtype=float)

    @property
    def energies(self) -> np.ndarray:
        return 0.5 * self.omegas**2

    @property
    def slopes(self) -> tuple[np.ndarray, np.ndarray]:
        sl = np.array([m.boundary_slopes for m in self.modes], dtype=float).reshape(-1, 2)
        return sl[:, 0], sl[:, 1]

    def values(self, r) -> np.ndarray:
        """Matrix chi_l(r_i) of shape (len(r), n_modes)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if not self.modes:
            return np.zeros((r.size, 0))
        return np.stack([m.value_at(r) for m in self.modes], axis=1)


def default_mode_support(spec: PotentialSpec) -> tuple[float, float]:
    """Cavity between the innermost scatterers bounding the origin side."""
    if spec.wall is not None:
        if not spec.deltas:
            raise ValidationError("wall geometry needs a mirror delta")
        return spec.wall, spec.deltas[0].position
    if spec.layers:
        if len(spec.layers) < 2:
            raise ValidationError("need two layers to bound a cavity")
        return spec.layers[0].end, spec.layers[1].start
    if len(spec.deltas) < 2:
        return spec.support
    return spec.deltas[0].position, spec.deltas[-1].position


def _check_mode_support(spec: PotentialSpec, support: tuple[float, float]) -> None:
    a, b = support
    if not b > a:
        raise ValidationError("mode support must have positive length")
    for d in spec.deltas:
        if a < d.position < b:
            raise ValidationError(
                f"delta at {d.position} lies inside the mode support {support}")
    for lay in spec.layers:
        if lay.start < b and lay.end > a:
            raise ValidationError(f"layer {lay} overlaps the mode support {support}")


def dirichlet_modes(spec: PotentialSpec, selector: Sequence[int],
                    support: tuple[float, float] | None = None) -> SystemBasis:
    """
    Dirichlet cavity modes for the indices in ``selector``.

    The support must be free of scatterers in its interior, so that the
    modes diagonalize QHQ with E_l = (l pi / L)^2 / 2 and eps = 1 on the
    support makes the weighted and plain normalizations coincide.
    """
    support = default_mode_support(spec) if support is None else (float(support[0]), float(support[1]))
    _check_mode_support(spec, support)
    sel = [int(s) for s in selector]
    if len(set(sel)) != len(sel):
        raise ValidationError(f"duplicate mode index in selector {sel}")
    if any(s < 1 for s in sel):
        raise ValidationError("mode indices start at 1")
    modes = tuple(SystemMode(s, support) for s in sel)
    return SystemBasis(modes, tuple(sel), support, spec.wave_kind)


# ---------------------------------------------------------------------------
# free states and kernel


def free_state(channel: int, k: float, r):
    """Energy-normalized plane wave; channel 0 enters from the left."""
    sign = 1.0 if channel == 0 else -1.0
    return np.exp(sign * 1j * k * np.asarray(r, dtype=float)) / np.sqrt(2.0 * np.pi * k)


def free_green_kernel(E: float, r, r_prime):
    """Retarded kernel of (E - K)^(-1) with K = -d^2/(2 dr^2)."""
    if not E > 0:
        raise DomainError("free_green_kernel needs E > 0")
    k = np.sqrt(2.0 * E)
    d = np.abs(np.asarray(r, dtype=float) - np.asarray(r_prime, dtype=float))
    return -1j / k * np.exp(1j * k * d)


# ---------------------------------------------------------------------------
# layer discretizations


class _LayerBasis:
    """Unknowns representing psi inside one layer."""

    def __init__(self, layer: Layer, k: complex, quadrature: str, nodes: int):
        self.layer = layer
        self.kappa = layer.n * k
        self.kind = quadrature
        if quadrature == "exact":
            self.size = 2
            self.colloc = np.array([layer.start, layer.end])
        elif quadrature == "trapezoid":
            self.nodes = np.linspace(layer.start, layer.end, nodes + 1)
            self.size = nodes + 1
            self.colloc = self.nodes
        else:
            raise ValidationError(f"unknown quadrature {quadrature!r}")

    def values(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lay = self.layer
        if self.kind == "exact":
            t = x - lay.start
            v = np.stack([np.exp(1j * self.kappa * t), np.exp(-1j * self.kappa * t)], axis=1)
            inside = (x >= lay.start) & (x <= lay.end)
            return v * inside[:, None]
        out = np.zeros((x.size, self.size))
        h = self.nodes[1] - self.nodes[0]
        for j, xn in enumerate(self.nodes):
            out[:, j] = np.clip(1.0 - np.abs(x - xn) / h, 0.0, None)
        return out

    def exp_integrals(self, alpha) -> np.ndarray:
        """Integrals of exp(i alpha r) times each basis function over the layer."""
        lay = self.layer
        if self.kind == "exact":
            l, u = lay.start, lay.end
            return np.array([
                np.exp(-1j * self.kappa * l) * xint(alpha + self.kappa, l, u),
                np.exp(1j * self.kappa * l) * xint(alpha - self.kappa, l, u),
            ])
        r0, r1 = self.nodes[:-1], self.nodes[1:]
        h = r1 - r0
        x0 = xint(alpha, r0, r1)
        up = xint1(alpha, r0, r1) / h  # rising edge (r - r0)/h
        down = x0 - up                 # falling edge (r1 - r)/h
        out = np.zeros(self.size, dtype=complex)
        out[:-1] += down
        out[1:] += up
        return out

    def green_integrals(self, k, x) -> np.ndarray:
        """Matrix of int G0(x, r) basis_j(r) dr over the layer, shape (len(x), size)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lay = self.layer
        pre = -1j / k
        if self.kind == "exact":
            l, u = lay.start, lay.end
            c = np.clip(x, l, u)
            cols = []
            for beta in (self.kappa, -self.kappa):
                ph = np.exp(-1j * beta * l)
                left = np.exp(1j * k * x) * xint(beta - k, l, c)
                right = np.exp(-1j * k * x) * xint(beta + k, c, u)
                cols.append(pre * ph * (left + right))
            return np.stack(cols, axis=1)
        r0, r1 = self.nodes[:-1], self.nodes[1:]
        h = r1[0] - r0[0]
        X = x[:, None]
        c = np.clip(X, r0[None, :], r1[None, :])

        def lin(alpha, u, v, base):
            # integrals of exp(i alpha r) and (r - base) exp(i alpha r) over [u, v]
            i0 = xint(alpha, u, v)
            return i0, xint1(alpha, u, v) + (u - base) * i0

        # r < x part: exp(ik(x - r)); r > x part: exp(ik(r - x))
        i0l, i1l = lin(-k, r0[None, :], c, r0[None, :])
        i0r, i1r = lin(k, c, r1[None, :], r0[None, :])
        ex_p, ex_m = np.exp(1j * k * X), np.exp(-1j * k * X)
        tot0 = ex_p * i0l + ex_m * i0r
        tot1 = ex_p * i1l + ex_m * i1r
        up = tot1 / h
        down = tot0 - up
        out = np.zeros((x.size, self.size), dtype=complex)
        out[:, :-1] += down
        out[:, 1:] += up
        return pre * out


# ---------------------------------------------------------------------------
# the P-space integral equation


@lru_cache(maxsize=64)
def _legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def _gauss_nodes(a: float, b: float, n: int):
    t, w = _legendre(n)
    return 0.5 * (b - a) * t + 0.5 * (a + b), 0.5 * (b - a) * w


class PSpaceSolver:
    """
    Dense collocation system for the P-space Lippmann-Schwinger equation at
    one energy.  Solutions are returned as unknown vectors ``z``; psi at any
    point follows from ``evaluate``.
    """

    def __init__(self, spec: PotentialSpec, basis: SystemBasis, E: float,
                 quadrature: str = "exact", layer_nodes: int = 64,
                 i_epsilon: float = 0.0):
        if not E > 0:
            raise DomainError(f"bath states need E > 0, got {E}")
        if len(basis):
            _check_mode_support(spec, basis.support)
        self.spec, self.basis, self.E = spec, basis, float(E)
        self.k = np.sqrt(2.0 * (E + 1j * i_epsilon)) if i_epsilon else np.sqrt(2.0 * E)
        self.k_real = float(np.sqrt(2.0 * E))
        self.wall = spec.wall
        k = self.k

        xi = spec.delta_strengths(E)
        pts = {d.position: x for d, x in zip(spec.deltas, xi)}
        if len(basis):
            a, b = basis.support
            pts.setdefault(a, 0.0)
            pts.setdefault(b, 0.0)
        self.points = np.array(sorted(pts))
        self.point_xi = np.array([pts[p] for p in self.points])
        self.layers = [_LayerBasis(l, k, quadrature, layer_nodes) for l in spec.layers]
        self.layer_v = spec.layer_potentials(E)

        nP = self.points.size
        nL = sum(lb.size for lb in self.layers)
        M = len(basis)
        self.nP, self.nL, self.M = nP, nL, M
        self.n = nP + nL + M
        self._layer_slices = []
        off = nP
        for lb in self.layers:
            self._layer_slices.append(slice(off, off + lb.size))
            off += lb.size

        if M:
            a, b = basis.support
            self.a, self.b = a, b
            self.ia = int(np.searchsorted(self.points, a))
            self.ib = int(np.searchsorted(self.points, b))
            self.q = basis.omegas
            self.El = basis.energies
            self.norm = np.sqrt(2.0 / (b - a))
            self.sa, self.sb = basis.slopes
            # closed-form <chi|exp(+-ikr)> over the support
            self.Ip = self._mode_exp(k, a, b)
            self.Im = self._mode_exp(-k, a, b)
            self.phi_a = self.phi(np.array([a]))[0]
            self.phi_b = self.phi(np.array([b]))[0]
            self.Mmat = self._mode_green_matrix()
        self._assemble()

    # -- mode integrals ---------------------------------------------------

    def _mode_exp(self, alpha, u, v):
        """Integral of exp(i alpha r) chi_l(r) over [u, v] for every mode."""
        a, q, nrm = self.a, self.q, self.norm
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if u.ndim:
            u, v = u[:, None], v[:, None]
        p = np.exp(-1j * q * a) * xint(alpha + q, u, v)
        m = np.exp(1j * q * a) * xint(alpha - q, u, v)
        return nrm * (p - m) / 2j

    def phi(self, x) -> np.ndarray:
        """(G chi_l)(x), shape (len(x), M)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k, a, b = self.k, self.a, self.b
        c = np.clip(x, a, b)
        left = np.exp(1j * k * x)[:, None] * self._mode_exp(-k, np.full_like(c, a), c)
        right = np.exp(-1j * k * x)[:, None] * self._mode_exp(k, c, np.full_like(c, b))
        out = -1j / k * (left + right)
        if self.wall is not None:
            out = out + 1j / k * np.exp(1j * k * (x - 2 * self.wall))[:, None] * self.Ip[None, :]
        return out

    def _mode_green_matrix(self) -> np.ndarray:
        a, b = self.a, self.b
        band = (self.q.max() + max(self.q.max(), abs(self.k))) * (b - a)
        n = 16 * ((int(0.6 * band) + 48 + 15) // 16)   # rounded up so the node cache hits
        xg, wg = _gauss_nodes(a, b, n)
        chi = self.norm * np.sin(self.q[None, :] * (xg[:, None] - a))
        ph = self.phi(xg)
        M = (chi * wg[:, None]).T @ ph
        return 0.5 * (M + M.T)

    # -- kernel pieces ------------------------------------------------------

    def green(self, x, y) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))[:, None]
        y = np.atleast_1d(np.asarray(y, dtype=float))[None, :]
        k = self.k
        g = -1j / k * np.exp(1j * k * np.abs(x - y))
        if self.wall is not None:
            g = g + 1j / k * np.exp(1j * k * (x + y - 2 * self.wall))
        return g

    def surface_green(self, x) -> np.ndarray:
        """(G beta_l)(x) for the surface distributions of H chi_l, shape (len(x), M)."""
        g = self.green(x, np.array([self.a, self.b]))
        return -0.5 * g[:, :1] * self.sa[None, :] + 0.5 * g[:, 1:] * self.sb[None, :]

    def kernel_rows(self, x) -> np.ndarray:
        """Rows K(x) with (G U psi)(x) = K(x) z."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        K = np.zeros((x.size, self.n), dtype=complex)
        K[:, :self.nP] = self.green(x, self.points) * self.point_xi[None, :]
        for lb, sl, v in zip(self.layers, self._layer_slices, self.layer_v):
            K[:, sl] = v * lb.green_integrals(self.k, x)
        if self.M:
            ph = self.phi(x)
            K[:, self.ia] += 0.5 * ph @ self.sa
            K[:, self.ib] -= 0.5 * ph @ self.sb
            K[:, self.nP + self.nL:] = -self.El[None, :] * ph - self.surface_green(x)
        return K

    def _mode_rows(self) -> np.ndarray:
        M = self.M
        Kc = np.zeros((M, self.n), dtype=complex)
        Kc[:, :self.nP] = self.phi(self.points).T * self.point_xi[None, :]
        Kc[:, self.ia] += 0.5 * self.Mmat @ self.sa
        Kc[:, self.ib] -= 0.5 * self.Mmat @ self.sb
        for lb, sl, v in zip(self.layers, self._layer_slices, self.layer_v):
            lay = lb.layer
            if lay.end <= self.a:
                Kc[:, sl] = v * (-1j / self.k) * np.outer(self.Ip, lb.exp_integrals(-self.k))
            else:
                Kc[:, sl] = v * (-1j / self.k) * np.outer(self.Im, lb.exp_integrals(self.k))
        surf = -0.5 * np.outer(self.phi_a, self.sa) + 0.5 * np.outer(self.phi_b, self.sb)
        Kc[:, self.nP + self.nL:] = -self.Mmat * self.El[None, :] - surf
        return Kc

    def _assemble(self) -> None:
        n = self.n
        A = np.zeros((n, n), dtype=complex)
        A[:self.nP] = -self.kernel_rows(self.points)
        A[np.arange(self.nP), np.arange(self.nP)] += 1.0
        for lb, sl in zip(self.layers, self._layer_slices):
            A[sl] = -self.kernel_rows(lb.colloc)
            A[sl, sl] += lb.values(lb.colloc)
        if self.M:
            mrows = slice(self.nP + self.nL, n)
            A[mrows] = -self._mode_rows()
            A[mrows, mrows] += np.eye(self.M)
        self.A = A
        self.cond = float(np.linalg.cond(A)) if n else 1.0
        if not np.isfinite(self.cond) or self.cond > COND_LIMIT:
            raise SolverError(f"bath system ill-conditioned at E={self.E}: cond={self.cond:.3e}")

    # -- right-hand sides ---------------------------------------------------

    def incident(self, channel: int, x) -> np.ndarray:
        """Unit-amplitude incident wave (not energy normalized)."""
        x = np.asarray(x, dtype=float)
        k = self.k
        if self.wall is not None:
            return np.exp(-1j * k * x) - np.exp(1j * k * (x - 2 * self.wall))
        return np.exp(1j * k * x) if channel == 0 else np.exp(-1j * k * x)

    def channels(self) -> list[int]:
        return [1] if self.wall is not None else [0, 1]

    def solve_channels(self):
        """Unknown vectors for each channel, unit incident amplitude; shape (n, n_ch)."""
        chans = self.channels()
        rhs = np.zeros((self.n, len(chans)), dtype=complex)
        for j, ch in enumerate(chans):
            col = [self.incident(ch, self.points)]
            col += [self.incident(ch, lb.colloc) for lb in self.layers]
            if self.M:
                if self.wall is not None:
                    proj = self.Im - np.exp(-2j * self.k * self.wall) * self.Ip
                else:
                    proj = self.Ip if ch == 0 else self.Im
                col.append(proj)
            rhs[:, j] = np.concatenate(col) if col else []
        return self._solve(rhs)

    def solve_surface(self):
        """Unknown vectors for y_l = G~ (H_PQ chi_l), shape (n, M)."""
        rhs = np.zeros((self.n, self.M), dtype=complex)
        rows = [self.surface_green(self.points)]
        rows += [self.surface_green(lb.colloc) for lb in self.layers]
        surf = -0.5 * np.outer(self.phi_a, self.sa) + 0.5 * np.outer(self.phi_b, self.sb)
        rows.append(surf)
        rhs[:] = np.concatenate(rows, axis=0)
        return self._solve(rhs)

    def _solve(self, rhs):
        if self.n == 0:
            return rhs
        return np.linalg.solve(self.A, rhs)

    # -- post-processing ----------------------------------------------------

    def evaluate(self, x, z, free) -> np.ndarray:
        """psi(x) = free(x) + K(x) z; ``free`` holds free-term values at x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.n == 0:
            return free
        return free + self.kernel_rows(x) @ z

    def surface(self, pa, pb):
        """Functional sigma_l(psi) = -s_l'(a) psi(a)/2 + s_l'(b) psi(b)/2."""
        return -0.5 * np.multiply.outer(self.sa, pa) + 0.5 * np.multiply.outer(self.sb, pb)

    def projections(self, z) -> np.ndarray:
        return z[self.nP + self.nL:]

    def point_values(self, z) -> np.ndarray:
        return z[:self.nP]


# ---------------------------------------------------------------------------
# bath-state table


@dataclass
class BathStateTable:
    """P-space scattering states at one energy, energy normalized."""

    energy: float
    k: float
    channels: tuple[int, ...]
    grid: np.ndarray
    psi: np.ndarray                 # (n_ch, n_grid)
    boundary: np.ndarray            # (n_ch, 2) values at the mode-support edges
    outgoing: np.ndarray            # (n_ch, 2) outgoing amplitudes (left, right)
    q_residual: float
    condition: float
    solver: PSpaceSolver = field(repr=False)
    z: np.ndarray = field(repr=False)   # normalized unknown vectors, (n, n_ch)

    @property
    def flux_defect(self) -> np.ndarray:
        return np.abs(1.0 - np.sum(np.abs(self.outgoing) ** 2, axis=1))


def default_grid(spec: PotentialSpec, n: int = 401) -> np.ndarray:
    a, b = spec.support
    pad = 0.1 * (b - a)
    lo = spec.wall if spec.wall is not None else a - pad
    return np.linspace(lo, b + pad, n)


def bath_states(spec: PotentialSpec, basis: SystemBasis, E: float,
                grid: np.ndarray | int | None = None, i_epsilon: float = 0.0,
                quadrature: str = "exact", layer_nodes: int = 64,
                solver: PSpaceSolver | None = None) -> BathStateTable:
    """
    Solve for the P-space states |psi_m^(+)> at energy E.

    Raises SolverError if the system is ill-conditioned or if the solution
    leaves P-space by more than Q_TOLERANCE.
    """
    if solver is None:
        solver = PSpaceSolver(spec, basis, E, quadrature, layer_nodes, i_epsilon)
    if grid is None or isinstance(grid, (int, np.integer)):
        grid = default_grid(spec, 401 if grid is None else int(grid))
    grid = np.asarray(grid, dtype=float)
    if spec.wall is not None and np.any(grid < spec.wall):
        raise ValidationError("grid extends behind the wall")
    k = solver.k_real
    nrm = 1.0 / np.sqrt(2.0 * np.pi * k)
    chans = solver.channels()
    z = solver.solve_channels() * nrm

    psi = np.empty((len(chans), grid.size), dtype=complex)
    ends = np.array(spec.support)
    edges = np.array(basis.support) if len(basis) else ends
    boundary = np.empty((len(chans), 2), dtype=complex)
    outgoing = np.zeros((len(chans), 2), dtype=complex)
    for j, ch in enumerate(chans):
        f = lambda x: solver.incident(ch, x) * nrm
        psi[j] = solver.evaluate(grid, z[:, j], f(grid))
        boundary[j] = solver.evaluate(edges, z[:, j], f(edges))
        pe = solver.evaluate(ends, z[:, j], f(ends)) / nrm
        kk = solver.k
        if spec.wall is not None:
            # psi = e^{-ikr} + S e^{ikr} beyond the mirror
            outgoing[j, 1] = (pe[1] - np.exp(-1j * kk * ends[1])) * np.exp(-1j * kk * ends[1])
        elif ch == 0:
            outgoing[j, 0] = (pe[0] - np.exp(1j * kk * ends[0])) * np.exp(1j * kk * ends[0])
            outgoing[j, 1] = pe[1] * np.exp(-1j * kk * ends[1])
        else:
            outgoing[j, 0] = pe[0] * np.exp(1j * kk * ends[0])
            outgoing[j, 1] = (pe[1] - np.exp(-1j * kk * ends[1])) * np.exp(-1j * kk * ends[1])
    # measured on the unit-amplitude state so the check stays meaningful as k -> 0
    qres = float(np.max(np.abs(solver.projections(z)))) / nrm if solver.M else 0.0
    if qres > Q_TOLERANCE:
        raise SolverError(f"bath state leaves P-space at E={E}: |<chi|psi>|/N = {qres:.3e}")
    return BathStateTable(float(E), k, tuple(chans), grid, psi, boundary, outgoing,
                          qres, solver.cond, solver, z)


__all__ = [
    "SystemMode", "SystemBasis", "dirichlet_modes", "default_mode_support",
    "free_state", "free_green_kernel", "PSpaceSolver", "BathStateTable",
    "bath_states", "default_grid", "xint", "xint1",
]
