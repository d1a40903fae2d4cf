"""Brute-force references for the analytic decoherence maps.

Two independent routes:

* exact propagation of system and bath in a truncated Fock basis followed
  by a partial trace over the bath (single bath, and two baths coupled to a
  conjugate pair ``S``, ``R``);
* Monte-Carlo averaging of the time-integrated reduced generator over
  Gaussian (Wigner) samples of the bath initial conditions.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy import stats

from .bath import DiscreteBath, ThermalParameters, UnitsContext, thermal_factor
from .evolution import (BoundaryContaminationError, BoundaryContaminationWarning,
                        ReducedDensityMatrix, momentum_transform, support_contamination)
from .kernels import one_minus_cos, phi_closed

logger = logging.getLogger(__name__)

DIMENSION_GUARD = 4096
UNITARITY_TOL = 1e-10


class DimensionGuardError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class FockBathConfig:
    modes: DiscreteBath
    n_max: int
    thermal_cutoff: int = 0

    def __post_init__(self):
        if self.thermal_cutoff < 0:
            raise ValueError("thermal_cutoff must be non-negative")
        if self.n_max < self.thermal_cutoff + 1:
            raise ValueError(f"n_max={self.n_max} leaves no room above thermal_cutoff={self.thermal_cutoff}")
        if self.n_max < self.thermal_cutoff + 4:
            warnings.warn(f"n_max={self.n_max} is less than thermal_cutoff + 4", stacklevel=2)
        if self.dimension > DIMENSION_GUARD:
            raise DimensionGuardError(f"Fock dimension {self.dimension} exceeds guard {DIMENSION_GUARD}")

    @property
    def dimension(self) -> int:
        return (self.n_max + 1) ** len(self.modes)

    def doubled(self) -> "FockBathConfig":
        return FockBathConfig(self.modes, 2 * self.n_max, 2 * self.thermal_cutoff)


@dataclass(frozen=True)
class PhaseSpaceSample:
    q0: np.ndarray
    p0: np.ndarray


@dataclass
class OracleResult:
    times: np.ndarray
    rho_series: list
    convergence: Optional[float] = None
    statistical_error: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def elements(self) -> np.ndarray:
        """Stacked matrices, shape ``(n_times, n, n)``."""
        return np.stack([r.elements for r in self.rho_series])


# --- truncated oscillator algebra -------------------------------------------

def _bath_operators(bath: DiscreteBath, n_max: int, units: UnitsContext):
    """``H_bath`` (zero-point energy dropped) and ``B = sum g_i q_i`` on the product Fock space."""
    d = n_max + 1
    a = np.diag(np.sqrt(np.arange(1, d)), 1)
    num = np.diag(np.arange(d, dtype=float))
    eye = np.eye(d)
    N = len(bath)
    dim = d ** N
    H = np.zeros((dim, dim))
    B = np.zeros((dim, dim))
    for i, (w, g) in enumerate(zip(bath.omega, bath.coupling)):
        ops_n = [eye] * N
        ops_q = [eye] * N
        ops_n[i] = num
        ops_q[i] = math.sqrt(units.hbar / (2.0 * bath.mass * w)) * (a + a.T)
        H += units.hbar * w * _kron_all(ops_n)
        B += g * _kron_all(ops_q)
    return H, B


def _kron_all(ops):
    out = ops[0]
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def _thermal_mixture(bath: DiscreteBath, cutoff: int, n_max: int, thermal: ThermalParameters,
                     units: UnitsContext):
    """Indices and renormalized Boltzmann weights of product Fock states up to ``cutoff`` quanta per mode."""
    d = n_max + 1
    if thermal.is_zero_temperature:
        return np.array([0]), np.array([1.0])
    per_mode = []
    for w in bath.omega:
        x = thermal.beta * units.hbar * w
        per_mode.append(np.exp(-x * np.arange(cutoff + 1)))
    idx, wts = [], []
    for occ in itertools.product(range(cutoff + 1), repeat=len(bath)):
        idx.append(sum(n * d ** (len(bath) - 1 - k) for k, n in enumerate(occ)))
        wts.append(math.prod(per_mode[k][n] for k, n in enumerate(occ)))
    wts = np.array(wts)
    return np.array(idx), wts / wts.sum()


def _propagate(H: np.ndarray, V0: np.ndarray, times: np.ndarray, units: UnitsContext,
               step: float, step_check: bool):
    """States ``exp(-i H t / hbar) V0`` at each requested time.

    A single step propagator ``exp(-i H h / hbar)`` (scaling-and-squaring Pade)
    advances the state; a time that is not a multiple of ``h`` gets one extra
    partial step off the main chain.  With ``step_check`` the step
    propagator is compared against two half steps.
    """
    U = scipy.linalg.expm(-1j * H * (step / units.hbar))
    meta = {"step": step}
    if step_check:
        Uh = scipy.linalg.expm(-1j * H * (0.5 * step / units.hbar))
        meta["step_check"] = float(np.abs(U - Uh @ Uh).max())
    out = []
    V = V0.astype(complex)
    n_done = 0
    for t in times:
        n_full = int(math.floor(t / step + 1e-9))
        while n_done < n_full:
            V = U @ V
            n_done += 1
        rem = t - n_full * step
        if rem > 1e-12 * step:
            out.append(scipy.linalg.expm(-1j * H * (rem / units.hbar)) @ V)
        else:
            out.append(V.copy())
    return out, meta


def _check_times(times) -> np.ndarray:
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.size == 0 or t[0] < 0 or np.any(np.diff(t) < 0):
        raise ValueError("times must be nonempty, non-negative and nondecreasing")
    return t


def _default_step(t: np.ndarray) -> float:
    d = np.diff(np.concatenate([[0.0], t]))
    d = d[d > 0]
    return float(d.min()) if d.size else 1.0


# --- single bath ---------------------------------------------------------------

def fock_propagate(rho0: ReducedDensityMatrix, cfg: FockBathConfig, thermal: ThermalParameters,
                   units: UnitsContext, times, step: Optional[float] = None, step_check: bool = True,
                   check_convergence: bool = False, convergence_tol: float = 1e-8) -> OracleResult:
    """Exact reduced dynamics under ``H = H_bath + S B``.

    For each eigenvalue ``s`` the bath evolves with ``H_s = H_bath + s B``;
    then ``rho_ss'(t) = rho_ss'(0) Tr[rho_th U_s'^dag(t) U_s(t)]`` with the
    truncated, renormalized Boltzmann mixture ``rho_th``.  The diagonal is
    left untouched.
    """
    if rho0.n > 16:
        raise ValueError("the Fock oracle handles at most 16 grid points")
    t = _check_times(times)
    h = step if step is not None else _default_step(t)
    Hb, B = _bath_operators(cfg.modes, cfg.n_max, units)
    idx, p = _thermal_mixture(cfg.modes, cfg.thermal_cutoff, cfg.n_max, thermal, units)
    V0 = np.eye(cfg.dimension)[:, idx]

    svals = rho0.grid.s
    branches = []
    unitarity = 0.0
    step_meta = {}
    for s in svals:
        Vs, step_meta = _propagate(Hb + s * B, V0, t, units, h, step_check)
        for V in Vs:
            unitarity = max(unitarity, float(np.abs(V.conj().T @ V - np.eye(len(idx))).max()))
        branches.append(Vs)
    if unitarity > UNITARITY_TOL:
        raise RuntimeError(f"branch propagators lost unitarity: {unitarity:.3g}")

    n = rho0.n
    series = []
    for k in range(t.size):
        factor = np.ones((n, n), dtype=complex)
        for a in range(n):
            for b in range(a + 1, n):
                ov = np.sum(p * np.sum(branches[b][k].conj() * branches[a][k], axis=0))
                factor[a, b] = ov
                factor[b, a] = np.conj(ov)
        series.append(ReducedDensityMatrix(rho0.grid, rho0.elements * factor))

    meta = {"n_max": cfg.n_max, "thermal_cutoff": cfg.thermal_cutoff, "n_modes": len(cfg.modes),
            "unitarity_error": unitarity, **step_meta}
    result = OracleResult(t, series, metadata=meta)
    if check_convergence:
        doubled = fock_propagate(rho0, cfg.doubled(), thermal, units, t, step=h, step_check=False)
        result.convergence = convergence_report(result, doubled)
        result.metadata["convergence"] = result.convergence
        if result.convergence > convergence_tol:
            raise ConvergenceError(
                f"cutoff doubling changed the result by {result.convergence:.3g} > {convergence_tol:g}")
    return result


def convergence_report(result: OracleResult, result_doubled: OracleResult) -> float:
    """Max elementwise deviation between two runs on the same time and eigenvalue grids."""
    if (result.times.shape != result_doubled.times.shape
            or not np.array_equal(result.times, result_doubled.times)):
        raise ValueError("results are on different time grids")
    a, b = result.elements(), result_doubled.elements()
    if a.shape != b.shape or result.rho_series[0].grid != result_doubled.rho_series[0].grid:
        raise ValueError("results are on different eigenvalue grids")
    return float(np.abs(a - b).max())


# --- two baths on a conjugate pair --------------------------------------------

def _pure_components(rho0: ReducedDensityMatrix, tol: float = 1e-14):
    w, v = np.linalg.eigh(0.5 * (rho0.elements + rho0.elements.conj().T))
    keep = w > tol * max(w.max(), 0.0)
    return w[keep], v[:, keep]


def double_bath_fock_propagate(rho0: ReducedDensityMatrix, cfg_S: FockBathConfig, cfg_R: FockBathConfig,
                               thermal: ThermalParameters, units: UnitsContext, times,
                               step: Optional[float] = None, step_check: bool = True,
                               boundary_band: Optional[int] = None, boundary_tol: float = 1e-8,
                               on_boundary: str = "error") -> OracleResult:
    """Exact reduced dynamics under ``H_bath + S B_S + R B_R``.

    ``S`` is diagonal on the grid; ``R`` is its discrete Fourier conjugate
    (centered momentum grid).  The full state lives on
    grid x bath_S x bath_R and both baths are traced out.
    """
    n = rho0.n
    if n & (n - 1):
        raise ValueError("the double-bath oracle needs a power-of-two grid")
    dS, dR = cfg_S.dimension, cfg_R.dimension
    D = n * dS * dR
    if D > DIMENSION_GUARD:
        raise DimensionGuardError(f"total dimension {D} exceeds guard {DIMENSION_GUARD}")
    t = _check_times(times)
    h = step if step is not None else _default_step(t)

    rgrid, F = momentum_transform(rho0.grid, units)
    band = boundary_band if boundary_band is not None else max(1, n // 8)
    rho_r = ReducedDensityMatrix(rgrid, F @ rho0.elements @ F.conj().T)
    contamination = max(support_contamination(rho0, band), support_contamination(rho_r, band))
    if contamination > boundary_tol and on_boundary != "ignore":
        msg = f"initial state touches the grid boundary (relative weight {contamination:.3g})"
        if on_boundary == "error":
            raise BoundaryContaminationError(msg)
        warnings.warn(msg, BoundaryContaminationWarning, stacklevel=2)

    HS, BS = _bath_operators(cfg_S.modes, cfg_S.n_max, units)
    HR, BR = _bath_operators(cfg_R.modes, cfg_R.n_max, units)
    S = np.diag(rho0.grid.s)
    R = F.conj().T @ np.diag(rgrid.s) @ F
    R = 0.5 * (R + R.conj().T)
    eS, eR, eN = np.eye(dS), np.eye(dR), np.eye(n)
    H = (np.kron(eN, np.kron(HS, eR)) + np.kron(eN, np.kron(eS, HR))
         + np.kron(S, np.kron(BS, eR)) + np.kron(R, np.kron(eS, BR)))

    lam, vecs = _pure_components(rho0)
    iS, pS = _thermal_mixture(cfg_S.modes, cfg_S.thermal_cutoff, cfg_S.n_max, thermal, units)
    iR, pR = _thermal_mixture(cfg_R.modes, cfg_R.thermal_cutoff, cfg_R.n_max, thermal, units)
    cols, weights = [], []
    for k in range(lam.size):
        for a, wa in zip(iS, pS):
            for b, wb in zip(iR, pR):
                bath_vec = np.zeros(dS * dR)
                bath_vec[a * dR + b] = 1.0
                cols.append(np.kron(vecs[:, k], bath_vec))
                weights.append(lam[k] * wa * wb)
    V0 = np.array(cols).T
    sq = np.sqrt(np.array(weights))

    states, step_meta = _propagate(H, V0, t, units, h, step_check)
    series = []
    norm_err = 0.0
    for V in states:
        norm_err = max(norm_err, float(np.abs(np.linalg.norm(V, axis=0) - 1.0).max()))
        # rows: grid points; columns: (bath basis state, weighted component) pairs
        M = (V * sq).reshape(n, dS * dR * sq.size)
        series.append(ReducedDensityMatrix(rho0.grid, M @ M.conj().T))
    if norm_err > UNITARITY_TOL:
        raise RuntimeError(f"propagation lost unitarity: {norm_err:.3g}")
    meta = {"n_max_S": cfg_S.n_max, "n_max_R": cfg_R.n_max, "dimension": D,
            "unitarity_error": norm_err, "boundary_contamination": contamination, **step_meta}
    return OracleResult(t, series, metadata=meta)


# --- Monte-Carlo over Wigner samples -------------------------------------------

@dataclass(frozen=True)
class MonteCarloAverage:
    times: np.ndarray
    mean: np.ndarray
    stderr_re: np.ndarray
    stderr_im: np.ndarray
    covariance: np.ndarray
    n_samples: int
    seed: int

    @property
    def stderr(self) -> np.ndarray:
        return np.hypot(self.stderr_re, self.stderr_im)


def wigner_variances(bath: DiscreteBath, thermal: ThermalParameters, units: UnitsContext):
    """Thermal ``<q^2>`` and ``<p^2>`` per mode."""
    coth = thermal_factor(bath.omega, thermal, units)
    q2 = units.hbar * coth / (2.0 * bath.mass * bath.omega)
    p2 = bath.mass * units.hbar * bath.omega * coth / 2.0
    return q2, p2


def sample_phase_space(bath: DiscreteBath, thermal: ThermalParameters, units: UnitsContext,
                       n: int, rng: np.random.Generator) -> PhaseSpaceSample:
    q2, p2 = wigner_variances(bath, thermal, units)
    z = rng.standard_normal((n, 2 * len(bath)))
    return PhaseSpaceSample(z[:, :len(bath)] * np.sqrt(q2), z[:, len(bath):] * np.sqrt(p2))


def integrated_generator(delta_s, bath: DiscreteBath, units: UnitsContext, times,
                         sample: PhaseSpaceSample) -> np.ndarray:
    """``int_0^t l(t') dt'`` for each sample and time, shape ``(n_samples, n_times)``.

    Termwise integration of the reduced generator gives
    ``(i/hbar) [(s^2 - s'^2) sum g^2/(2 m w^2) (t - sin(wt)/w)
    - (s - s') sum g (q0 sin(wt)/w + p0 (1 - cos(wt))/(m w^2))]``.
    """
    s, sp = delta_s
    t = np.asarray(times, dtype=float)
    w, g, m = bath.omega, bath.coupling, bath.mass
    wt = np.outer(w, t)
    A = (g / w)[:, None] * np.sin(wt)
    Bm = (g / (m * w ** 2))[:, None] * one_minus_cos(wt)
    X = sample.q0 @ A + sample.p0 @ Bm
    phase = (s ** 2 - sp ** 2) * phi_closed(bath, units, t) * units.hbar
    return (1j / units.hbar) * (phase[None, :] - (s - sp) * X)


def wigner_mc_average(delta_s, bath: DiscreteBath, thermal: ThermalParameters, units: UnitsContext,
                      times, n_samples: int, seed: int, chunk_size: int = 10_000) -> MonteCarloAverage:
    """Sample mean of ``exp(int_0^t l)`` over Gaussian bath initial conditions.

    Chunks draw from independent streams spawned from ``seed``, so the result
    depends only on ``(seed, n_samples, chunk_size)``.
    """
    if isinstance(n_samples, bool) or int(n_samples) != n_samples or n_samples < 1000:
        raise ValueError(f"n_samples must be an integer >= 1000, got {n_samples}")
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed}")
    t = np.atleast_1d(np.asarray(times, dtype=float))
    n_t = t.size
    n_chunks = -(-int(n_samples) // chunk_size)
    streams = np.random.SeedSequence(int(seed)).spawn(n_chunks)
    total = np.zeros(2 * n_t)
    cross = np.zeros((2 * n_t, 2 * n_t))
    remaining = int(n_samples)
    for ss in streams:
        m = min(chunk_size, remaining)
        remaining -= m
        rng = np.random.Generator(np.random.PCG64(ss))
        sample = sample_phase_space(bath, thermal, units, m, rng)
        z = np.exp(integrated_generator(delta_s, bath, units, t, sample))
        x = np.concatenate([z.real, z.imag], axis=1)
        total += x.sum(axis=0)
        cross += x.T @ x
    n = float(n_samples)
    mean = total / n
    cov = (cross - n * np.outer(mean, mean)) / (n - 1.0)
    cov_mean = cov / n
    var = np.clip(np.diag(cov_mean), 0.0, None)
    return MonteCarloAverage(t, mean[:n_t] + 1j * mean[n_t:], np.sqrt(var[:n_t]), np.sqrt(var[n_t:]),
                             cov_mean, int(n_samples), int(seed))


def mc_z_scores(result: MonteCarloAverage, reference) -> np.ndarray:
    """``|mean - reference|`` in units of the complex standard error, per time.

    Points with zero sampling variance score 0 when they match exactly and
    ``inf`` otherwise.
    """
    d = np.abs(result.mean - np.asarray(reference, dtype=complex))
    se = result.stderr
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, d / se, np.where(d == 0, 0.0, np.inf))
    return z


def mc_chi_square(result: MonteCarloAverage, reference, rank_tol: float = 1e-10):
    """Mahalanobis chi-square of ``mean - reference`` using the estimated covariance of the mean.

    Returns ``(chi2, dof, (lo, hi))`` with the central 99.8 % acceptance band
    of a chi-square law with ``dof`` degrees of freedom.  Directions with
    (numerically) zero variance are dropped from the count.
    """
    ref = np.asarray(reference, dtype=complex)
    d = np.concatenate([result.mean.real - ref.real, result.mean.imag - ref.imag])
    w, v = np.linalg.eigh(result.covariance)
    keep = w > rank_tol * max(w.max(), 0.0)
    proj = v[:, keep].T @ d
    chi2 = float(np.sum(proj ** 2 / w[keep]))
    dof = int(keep.sum())
    lo, hi = stats.chi2.ppf([0.001, 0.999], dof) if dof else (0.0, 0.0)
    return chi2, dof, (float(lo), float(hi))
