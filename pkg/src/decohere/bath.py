"""Oscillator baths, thermal occupations and the bath correlation function.

A bath is a set of harmonic modes with a common mass, each coupled linearly
through its coordinate: ``B = sum_i g_i q_i``.  Continuous Ohmic baths are
only ever used through :func:`discretize_spectral_density`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class UnitsContext:
    hbar: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and math.isfinite(self.hbar)):
            raise ValueError(f"hbar must be positive and finite, got {self.hbar}")


@dataclass(frozen=True)
class BathMode:
    mass: float
    omega: float
    coupling: float

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"mode mass must be positive, got {self.mass}")
        if not self.omega > 0:
            raise ValueError(f"mode frequency must be positive, got {self.omega}")


@dataclass(frozen=True)
class DiscreteBath:
    """Ordered collection of oscillator modes sharing one mass."""

    modes: tuple[BathMode, ...]
    _omega: np.ndarray = field(init=False, repr=False, compare=False)
    _g: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        modes = tuple(self.modes)
        if not modes:
            raise ValueError("a bath needs at least one mode")
        masses = {m.mass for m in modes}
        if len(masses) != 1:
            raise ValueError("all modes of a bath must share one mass")
        object.__setattr__(self, "modes", modes)
        omega = np.array([m.omega for m in modes], dtype=float)
        g = np.array([m.coupling for m in modes], dtype=float)
        omega.flags.writeable = False
        g.flags.writeable = False
        object.__setattr__(self, "_omega", omega)
        object.__setattr__(self, "_g", g)

    @classmethod
    def from_arrays(cls, omega: Sequence[float], coupling: Sequence[float],
                    mass: float = 1.0) -> "DiscreteBath":
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        coupling = np.atleast_1d(np.asarray(coupling, dtype=float))
        if omega.shape != coupling.shape:
            raise ValueError("omega and coupling must have the same length")
        return cls(tuple(BathMode(mass, float(w), float(g))
                         for w, g in zip(omega, coupling)))

    @property
    def mass(self) -> float:
        return self.modes[0].mass

    @property
    def omega(self) -> np.ndarray:
        return self._omega

    @property
    def coupling(self) -> np.ndarray:
        return self._g

    def __len__(self) -> int:
        return len(self.modes)


@dataclass(frozen=True)
class OhmicSpectralDensity:
    """``J(w) = eta * w * exp(-w / omega_c)`` for ``w >= 0``."""

    eta: float
    omega_c: float

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError(f"eta must be non-negative, got {self.eta}")
        if not self.omega_c > 0:
            raise ValueError(f"omega_c must be positive, got {self.omega_c}")

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        return np.where(omega >= 0, self.eta * omega * np.exp(-np.abs(omega) / self.omega_c), 0.0)


@dataclass(frozen=True)
class ThermalParameters:
    """Inverse temperature; ``beta = inf`` is the zero-temperature bath."""

    beta: float = math.inf

    def __post_init__(self):
        if math.isnan(self.beta) or not self.beta > 0:
            raise ValueError(f"beta must be positive or +inf, got {self.beta}")

    @property
    def is_zero_temperature(self) -> bool:
        return math.isinf(self.beta)


@dataclass(frozen=True)
class CorrelationSamples:
    """``C(t)`` sampled on a half-axis grid; ``C(-t) = conj(C(t))``."""

    times: np.ndarray
    values: np.ndarray


def thermal_occupation(omega, thermal: ThermalParameters, units: UnitsContext = UnitsContext()):
    """Bose occupation ``1 / (exp(beta*hbar*omega) - 1)``.

    Accepts a scalar or an array of frequencies.  Exactly zero at ``beta = inf``.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(~(w > 0)):
        raise ValueError("thermal_occupation requires omega > 0")
    if thermal.is_zero_temperature:
        out = np.zeros_like(w)
    else:
        with np.errstate(over="ignore"):
            out = 1.0 / np.expm1(thermal.beta * units.hbar * w)
    return float(out) if out.ndim == 0 else out


def thermal_factor(omega, thermal: ThermalParameters, units: UnitsContext = UnitsContext()):
    """``1 + 2 n(omega) = coth(beta hbar omega / 2)``."""
    return 1.0 + 2.0 * thermal_occupation(omega, thermal, units)


def _mode_weights(bath: DiscreteBath, units: UnitsContext) -> np.ndarray:
    # g^2 hbar / (2 m w) = <B^2> contribution of each mode at T=0
    return bath.coupling ** 2 * units.hbar / (2.0 * bath.mass * bath.omega)


def correlation_function(bath: DiscreteBath, thermal: ThermalParameters,
                         units: UnitsContext, times) -> CorrelationSamples:
    """Thermal autocorrelation ``C(t) = <B(t) B(0)>`` of ``B = sum g_i q_i``.

    Each free mode has ``q(t) = q cos(wt) + p sin(wt) / (m w)``, and with
    ``<q^2> = hbar (1 + 2n) / (2 m w)``, ``<p q> = -i hbar / 2`` one gets
    ``C(t) = sum_i hbar g_i^2 / (2 m w_i) [(1 + 2n_i) cos(w_i t) - i sin(w_i t)]``.
    """
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("times must be a nonempty 1-d grid")
    if np.any(np.diff(t) < 0):
        raise ValueError("times must be nondecreasing")
    w = bath.omega
    weight = _mode_weights(bath, units)
    coth = thermal_factor(w, thermal, units)
    phase = np.outer(t, w)
    values = np.cos(phase) @ (weight * coth) - 1j * (np.sin(phase) @ weight)
    return CorrelationSamples(t, values)


def discretize_spectral_density(J: OhmicSpectralDensity, n_modes: int, omega_max: float,
                                mass: float = 1.0) -> DiscreteBath:
    """Midpoint-rule bath on ``(0, omega_max]``.

    Mode ``k`` sits at ``w_k = (k + 1/2) dw`` and carries
    ``g_k^2 / (2 m w_k) = J(w_k) dw / pi``.
    """
    if n_modes < 2:
        raise ValueError(f"n_modes must be at least 2, got {n_modes}")
    if not omega_max > 0:
        raise ValueError(f"omega_max must be positive, got {omega_max}")
    dw = omega_max / n_modes
    w = (np.arange(n_modes) + 0.5) * dw
    g = np.sqrt(2.0 * mass * w * J(w) * dw / np.pi)
    return DiscreteBath.from_arrays(w, g, mass)
