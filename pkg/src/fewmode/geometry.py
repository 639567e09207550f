"""
Potentials, dielectric geometries and unit conventions.

Units: hbar = m = c = 1.  Energies follow E = k^2/2 for every wave kind, and
for the electromagnetic kinds the probe frequency is omega = k, so that
E = omega^2/2.  A dielectric profile eps(r) enters the Schroedinger-form
equation as the on-shell potential V(r, E) = (1 - eps(r)) E.

Delta barriers are never sampled.  They are carried symbolically and every
integral operator downstream handles them in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np


class FewModeError(Exception):
    """Base class for all errors raised by the package."""


class ValidationError(FewModeError, ValueError):
    """Inconsistent or malformed input."""


class DomainError(FewModeError, ValueError):
    """Argument outside the domain of a formula."""


class SolverError(FewModeError, RuntimeError):
    """A linear solve failed or lost too much precision."""


class WaveKind(str, Enum):
    SCHROEDINGER = "schroedinger"
    MAXWELL_RWA = "maxwell_rwa"
    SVE = "sve"

    @property
    def weighted(self) -> bool:
        # eps-weighted inner product for the electromagnetic kinds
        return self is not WaveKind.SCHROEDINGER


@dataclass(frozen=True)
class DeltaBarrier:
    """Point scatterer.  ``strength`` is xi (1/length) or eta (length)."""

    position: float
    strength: float


@dataclass(frozen=True)
class Layer:
    start: float
    end: float
    n: float

    @property
    def width(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class PotentialSpec:
    """
    Wave kind plus geometry.

    ``support`` bounds every layer and delta.  ``wall`` optionally places a
    hard (Dirichlet) wall at the left end of the support, turning the problem
    into a single-channel half-line problem.
    """

    wave_kind: WaveKind
    support: tuple[float, float]
    layers: tuple[Layer, ...] = ()
    deltas: tuple[DeltaBarrier, ...] = ()
    wall: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "wave_kind", WaveKind(self.wave_kind))
        object.__setattr__(self, "support", (float(self.support[0]), float(self.support[1])))
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "deltas", tuple(sorted(self.deltas, key=lambda d: d.position)))
        a, b = self.support
        if not b > a:
            raise ValidationError(f"support must have positive length, got {self.support}")
        prev_end = -np.inf
        for i, lay in enumerate(self.layers):
            if not lay.end > lay.start:
                raise ValidationError(f"layers[{i}] has non-positive width")
            if lay.start < prev_end:
                raise ValidationError(f"layers[{i}] overlaps or is out of order")
            if lay.n < 1.0:
                raise ValidationError(f"layers[{i}].n must be >= 1, got {lay.n}")
            if lay.start < a or lay.end > b:
                raise ValidationError(f"layers[{i}] lies outside the support")
            prev_end = lay.end
        if self.layers and self.wave_kind is WaveKind.SCHROEDINGER:
            raise ValidationError("schroedinger potentials are delta-only; layers are not used")
        seen = set()
        for i, d in enumerate(self.deltas):
            if d.strength < 0:
                raise ValidationError(f"deltas[{i}].strength must be >= 0")
            if not a <= d.position <= b:
                raise ValidationError(f"deltas[{i}] lies outside the support")
            if d.position in seen:
                raise ValidationError(f"two deltas share position {d.position}")
            seen.add(d.position)
        if self.wall is not None:
            if self.wall != a:
                raise ValidationError("wall must sit at the left end of the support")
            if self.layers:
                raise ValidationError("wall geometries are delta-only")
            if any(d.position == a for d in self.deltas):
                raise ValidationError("a delta cannot sit on the wall")

    @property
    def n_channels(self) -> int:
        return 1 if self.wall is not None else 2

    def epsilon(self, r) -> np.ndarray:
        """Smooth part of the permittivity profile (1 outside layers)."""
        r = np.asarray(r, dtype=float)
        eps = np.ones_like(r)
        for lay in self.layers:
            eps = np.where((r >= lay.start) & (r <= lay.end), lay.n**2, eps)
        return eps

    def delta_strengths(self, E: float) -> np.ndarray:
        """Schroedinger-form strengths xi of all deltas at energy E."""
        return np.array([delta_xi(self.wave_kind, d.strength, E) for d in self.deltas])

    def layer_potentials(self, E: float) -> np.ndarray:
        """On-shell constant potential (1 - n^2) E inside each layer."""
        return np.array([(1.0 - lay.n**2) * E for lay in self.layers])


def potential_value(spec: PotentialSpec, r, omega: float) -> np.ndarray:
    """
    Smooth part of the (possibly energy dependent) potential.

    ``omega`` is the probe frequency; for the Schroedinger kind it is unused.
    """
    r = np.asarray(r, dtype=float)
    for d in spec.deltas:
        if np.any(r == d.position):
            raise DomainError(f"r = {d.position} hits a delta barrier; use spec.deltas")
    if spec.wave_kind is WaveKind.SCHROEDINGER:
        return np.zeros_like(r)
    E = 0.5 * omega**2
    return (1.0 - spec.epsilon(r)) * E


def ley_loudon_reflectivity(eta: float, omega):
    """Amplitude reflectivity r = i w eta / (2 - i w eta) of a thin dielectric mirror."""
    if eta < 0:
        raise DomainError("eta must be non-negative")
    x = np.asarray(omega) * eta
    return 1j * x / (2.0 - 1j * x)


def delta_xi(wave_kind: WaveKind, strength: float, E: float) -> float:
    """
    Schroedinger-form strength xi of a delta, i.e. V = xi delta(r - r0).

    A thin mirror with reflectivity r is equivalent to a jump in the slope of
    size 2 xi = 2 i k r / (1 + r).  For the Ley-Loudon mirror this is real.
    """
    wave_kind = WaveKind(wave_kind)
    if wave_kind is WaveKind.SCHROEDINGER:
        return float(strength)
    k = np.sqrt(2.0 * E)
    r = ley_loudon_reflectivity(strength, k)
    return float((1j * k * r / (1.0 + r)).real)


def dispersion(wave_kind: WaveKind, value: float, given: str | None = None):
    """
    Return the triple (E, omega, k).

    ``given`` is one of "k", "omega", "energy"; by default the argument is a
    wavenumber for the Schroedinger kind and a frequency otherwise.
    """
    wave_kind = WaveKind(wave_kind)
    if not value > 0:
        raise DomainError(f"dispersion needs a positive argument, got {value}")
    if given is None:
        given = "k" if wave_kind is WaveKind.SCHROEDINGER else "omega"
    if given in ("k", "omega"):
        k = float(value)
    elif given == "energy":
        k = float(np.sqrt(2.0 * value))
    else:
        raise ValidationError(f"unknown quantity {given!r}")
    E = 0.5 * k * k
    return E, float(np.sqrt(2.0 * E)), k


# ---------------------------------------------------------------------------
# geometry builders used by the presets


def double_delta(xi1: float = 10.0, xi2: float | None = None, L: float = 1.0) -> PotentialSpec:
    xi2 = xi1 if xi2 is None else xi2
    h = 0.5 * L
    return PotentialSpec(
        WaveKind.SCHROEDINGER, (-h, h),
        deltas=(DeltaBarrier(-h, xi2), DeltaBarrier(h, xi1)),
    )


def ley_loudon_cavity(eta1: float, eta2: float | None = None, L: float = 1.0,
                      wave_kind: WaveKind = WaveKind.MAXWELL_RWA) -> PotentialSpec:
    eta2 = eta1 if eta2 is None else eta2
    h = 0.5 * L
    return PotentialSpec(
        wave_kind, (-h, h),
        deltas=(DeltaBarrier(-h, eta1), DeltaBarrier(h, eta2)),
    )


def double_cavity(n_mid: float, n0: float = 4.0, t: float = 0.01, L: float = 1.0,
                  wave_kind: WaveKind = WaveKind.MAXWELL_RWA) -> PotentialSpec:
    """Two equal cavities of length L; the left one spans [-L/2, L/2]."""
    h = 0.5 * L
    layers = (
        Layer(-h - t, -h, n0),
        Layer(h, h + t, n_mid),
        Layer(h + t + L, h + 2 * t + L, n0),
    )
    return PotentialSpec(wave_kind, (-h - t, h + 2 * t + L), layers=layers)


def wall_mirror(strength: float, L: float = 1.0,
                wave_kind: WaveKind = WaveKind.SCHROEDINGER) -> PotentialSpec:
    """Hard wall at r = 0 and one delta mirror at r = L."""
    return PotentialSpec(wave_kind, (0.0, L), deltas=(DeltaBarrier(L, strength),), wall=0.0)


__all__: Sequence[str] = [
    "FewModeError", "ValidationError", "DomainError", "SolverError",
    "WaveKind", "DeltaBarrier", "Layer", "PotentialSpec",
    "potential_value", "ley_loudon_reflectivity", "delta_xi", "dispersion",
    "double_delta", "ley_loudon_cavity", "double_cavity", "wall_mirror",
]
