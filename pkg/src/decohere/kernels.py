"""Decoherence and phase functions of an oscillator bath, and derived rates.

``f(t)`` controls the decay ``exp(-(s - s')^2 f(t))`` of coherences between
eigenstates of the system coupling agent, ``phi(t)`` the accompanying phase
``exp(i (s^2 - s'^2) phi(t))``.  Both are available as closed mode sums and
as quadratures of the bath correlation function; the two routes check
each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bath import (CorrelationSamples, DiscreteBath, OhmicSpectralDensity,
                   ThermalParameters, UnitsContext, thermal_factor)


class WindowTooShortError(ValueError):
    """The requested threshold is not reached on the sampled time window."""


class IllDefinedRateError(ValueError):
    """The correlation function does not decay on the integration window."""


@dataclass(frozen=True)
class DecoherenceFunctions:
    times: np.ndarray
    f: np.ndarray
    phi: np.ndarray
    F: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.times)
        if len(self.f) != n or len(self.phi) != n or (self.F is not None and len(self.F) != n):
            raise ValueError("kernel samples must match the time grid")

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class ShortTimeCoefficients:
    f_quadratic: float
    phi_cubic: float


@dataclass(frozen=True)
class AccelerationEstimate:
    tau_dec: float
    tau_diss: float
    ratio: float
    delta: float


@dataclass(frozen=True)
class RateEstimate:
    gamma: float
    tail_bound: float


def one_minus_cos(x):
    """``1 - cos(x)`` without cancellation at small ``x``."""
    return 2.0 * np.sin(0.5 * np.asarray(x, dtype=float)) ** 2


def x_minus_sin(x):
    """``x - sin(x)`` without cancellation at small ``x``."""
    x = np.asarray(x, dtype=float)
    out = x - np.sin(x)
    small = np.abs(x) < 0.1
    if np.any(small):
        xs = x[small]
        x2 = xs * xs
        # Taylor series through x^13; truncation error < 1e-22 relative for |x| < 0.1
        series = xs * x2 / 6.0 * (1 - x2 / 20 * (1 - x2 / 42 * (1 - x2 / 72 * (1 - x2 / 110 * (1 - x2 / 156)))))
        out = np.where(small, 0.0, out)
        out[small] = series
    return out


def _times(times) -> np.ndarray:
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.ndim != 1 or t.size == 0:
        raise ValueError("times must be a nonempty 1-d grid")
    return t


def f_closed(bath: DiscreteBath, thermal: ThermalParameters, units: UnitsContext, times) -> np.ndarray:
    t = _times(times)
    w = bath.omega
    amp = bath.coupling ** 2 * thermal_factor(w, thermal, units) / (2.0 * bath.mass * units.hbar * w ** 3)
    return one_minus_cos(np.outer(t, w)) @ amp


def phi_closed(bath: DiscreteBath, units: UnitsContext, times) -> np.ndarray:
    t = _times(times)
    w = bath.omega
    amp = bath.coupling ** 2 / (2.0 * bath.mass * units.hbar * w ** 3)
    # t - sin(wt)/w = (wt - sin(wt)) / w
    return x_minus_sin(np.outer(t, w)) @ amp


def decoherence_functions(bath: DiscreteBath, thermal: ThermalParameters, units: UnitsContext,
                          times, second_bath: Optional[DiscreteBath] = None) -> DecoherenceFunctions:
    """Closed-sum ``f``, ``phi`` (and ``F`` for a second bath) on one grid."""
    t = _times(times)
    F = None if second_bath is None else f_closed(second_bath, thermal, units, t)
    return DecoherenceFunctions(t, f_closed(bath, thermal, units, t), phi_closed(bath, units, t), F)


def _uniform_step(t: np.ndarray) -> float:
    if t.size < 3:
        raise ValueError("quadrature needs at least 3 samples")
    h = t[1] - t[0]
    if not h > 0 or t[0] != 0.0 or not np.allclose(np.diff(t), h, rtol=1e-9, atol=0):
        raise ValueError("quadrature needs a uniform grid starting at t = 0")
    return float(h)


def simpson_weights(m: int) -> np.ndarray:
    """Unit-step composite weights for ``m`` intervals (``m + 1`` nodes).

    Simpson for even ``m``; for odd ``m >= 3`` the last three intervals use
    the 3/8 rule.  ``m = 1`` uses the two-node trapezoid.
    """
    if m < 1:
        raise ValueError("need at least one interval")
    w = np.zeros(m + 1)
    if m == 1:
        w[:] = 0.5
        return w
    k = m if m % 2 == 0 else m - 3
    if k > 0:
        w[0:k + 1:2] += 2.0 / 3.0
        w[1:k:2] += 4.0 / 3.0
        w[0] -= 1.0 / 3.0
        w[k] -= 1.0 / 3.0
    if m % 2:
        w[k:k + 4] += np.array([3.0, 9.0, 9.0, 3.0]) / 8.0
    return w


def simpson(y: np.ndarray, h: float) -> complex:
    y = np.asarray(y)
    return h * np.dot(simpson_weights(y.size - 1), y)


def f_phi_integral(corr: CorrelationSamples, units: UnitsContext):
    """``f`` and ``phi`` by quadrature of ``hbar^-2 int_0^t ds s C*(t - s)``.

    ``phi`` is taken as the imaginary part of the integral of the conjugate
    correlation so that it carries the same sign as :func:`phi_closed`.
    """
    t = np.asarray(corr.times, dtype=float)
    h = _uniform_step(t)
    c = np.conj(np.asarray(corr.values, dtype=complex))
    n = t.size
    out = np.zeros(n, dtype=complex)
    # first interval: quadratic through s = 0, h, 2h with C(-h) = conj C(h)
    g1 = h * c[0]
    g2 = 2 * h * np.conj(c[1])
    out[1] = h / 12.0 * (8 * g1 - g2)
    for k in range(2, n):
        s = t[:k + 1]
        out[k] = h * np.dot(simpson_weights(k), s * c[k::-1])
    out /= units.hbar ** 2
    return out.real, out.imag


def short_time_coefficients(bath: DiscreteBath, thermal: ThermalParameters,
                            units: UnitsContext) -> ShortTimeCoefficients:
    """Leading Taylor coefficients ``f ~ a t^2``, ``phi ~ b t^3``."""
    w, g, m, hbar = bath.omega, bath.coupling, bath.mass, units.hbar
    a = float(np.sum(g ** 2 * thermal_factor(w, thermal, units) / (4.0 * m * hbar * w)))
    b = float(np.sum(g ** 2) / (12.0 * m * hbar))
    return ShortTimeCoefficients(a, b)


def asymptotic_rate(corr: CorrelationSamples, units: UnitsContext, decay_tol: float = 0.05,
                    tail_fraction: float = 0.1) -> RateEstimate:
    """``gamma = Re hbar^-2 int_0^inf C(t) dt`` on the sampled window.

    The window must be long enough for ``C`` to have decayed: if ``|C|`` on
    the final ``tail_fraction`` of the window exceeds ``decay_tol * C(0)``
    the rate is reported as ill-defined.  The tail bound assumes the
    slowest admissible ``t^-2`` falloff beyond the window.
    """
    t = np.asarray(corr.times, dtype=float)
    h = _uniform_step(t)
    c = np.asarray(corr.values, dtype=complex)
    c0 = abs(c[0])
    if c0 == 0.0:
        return RateEstimate(0.0, 0.0)
    n_tail = max(2, int(math.ceil(tail_fraction * t.size)))
    tail = np.abs(c[-n_tail:])
    if tail.max() > decay_tol * c0:
        raise IllDefinedRateError(
            f"C(t) has not decayed on [0, {t[-1]:g}]: tail |C| = {tail.max():.3g} "
            f"vs C(0) = {c0:.3g}; the asymptotic rate is ill-defined")
    gamma = float(simpson(c.real, h).real) / units.hbar ** 2
    tail_bound = float(np.abs(c.real[-n_tail:]).max() * t[-1]) / units.hbar ** 2
    return RateEstimate(gamma, tail_bound)


def ohmic_rate_limit(J: OhmicSpectralDensity, thermal: ThermalParameters, units: UnitsContext,
                     omega_probe: float = 1e-6) -> float:
    """``(1 / 2 hbar) lim_{w->0} J(w) coth(beta hbar w / 2)``, the continuum long-time rate.

    Evaluated by Richardson extrapolation of the smooth function
    ``J(w) coth(...)`` from probes at ``w, 2w, 4w``, which cancels the
    linear and quadratic terms.
    """
    if thermal.is_zero_temperature:
        return 0.0

    def h(w):
        return float(J(w)) * float(thermal_factor(w, thermal, units))

    w1 = omega_probe
    limit = (8.0 * h(w1) - 6.0 * h(2 * w1) + h(4 * w1)) / 3.0
    return limit / (2.0 * units.hbar)


def golden_rule_rate(J: OhmicSpectralDensity, Omega: float, thermal: ThermalParameters,
                     units: UnitsContext) -> float:
    """Golden-rule rate ``(1 + 2 n(Omega)) J(Omega) / (4 hbar)``.

    Follows from ``<[B(t), B(0)]> = -2i sum c_i sin(w_i t)`` and
    ``int_0^inf sin(Omega t) sin(w t) dt = (pi/2) delta(Omega - w)``.
    """
    if not Omega > 0:
        raise ValueError(f"Omega must be positive, got {Omega}")
    return float(thermal_factor(Omega, thermal, units)) * float(J(Omega)) / (4.0 * units.hbar)


def acceleration_factor(f: DecoherenceFunctions, gamma_diss: float, delta: float) -> AccelerationEstimate:
    """``tau_dec / tau_diss`` with ``tau_dec`` defined by ``delta^2 f(tau_dec) = 1``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not gamma_diss > 0:
        raise ValueError("gamma_diss must be positive")
    t = np.asarray(f.times, dtype=float)
    y = delta ** 2 * np.asarray(f.f, dtype=float)
    above = y >= 1.0
    if not above.any():
        raise WindowTooShortError(
            f"delta^2 f(t) peaks at {y.max():.3g} < 1 on [0, {t[-1]:g}]; window too short")
    hi = int(np.argmax(above))
    if hi == 0:
        raise ValueError("delta^2 f(0) must be below threshold")
    lo = hi - 1
    tau = t[lo] + (1.0 - y[lo]) * (t[hi] - t[lo]) / (y[hi] - y[lo])
    tau_diss = 1.0 / gamma_diss
    return AccelerationEstimate(float(tau), tau_diss, float(tau / tau_diss), float(delta))
