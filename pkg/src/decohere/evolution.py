"""Short-time evolution maps for reduced density matrices on a uniform eigenvalue grid.

Matrices are indexed ``rho[i, j] = <s_i| rho |s_j>`` with
``s_i = s_min + i * ds``.  Normalization is the plain matrix trace.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .bath import UnitsContext
from .kernels import DecoherenceFunctions

logger = logging.getLogger(__name__)


class BoundaryContaminationError(ValueError):
    pass


class BoundaryContaminationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SGrid:
    s_min: float
    ds: float
    n: int

    def __post_init__(self):
        if not self.ds > 0:
            raise ValueError(f"grid spacing must be positive, got {self.ds}")
        if self.n < 2:
            raise ValueError(f"grid needs at least 2 points, got {self.n}")

    @property
    def s(self) -> np.ndarray:
        return self.s_min + self.ds * np.arange(self.n)

    def conjugate(self, units: UnitsContext) -> "SGrid":
        """Centered momentum grid with spacing ``2 pi hbar / (n ds)``."""
        dr = 2.0 * math.pi * units.hbar / (self.n * self.ds)
        return SGrid(-(self.n // 2) * dr, dr, self.n)


@dataclass(frozen=True)
class ReducedDensityMatrix:
    grid: SGrid
    elements: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.elements, dtype=complex)
        if a.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"expected a {self.grid.n}x{self.grid.n} matrix, got {a.shape}")
        object.__setattr__(self, "elements", a)

    @property
    def n(self) -> int:
        return self.grid.n

    def trace(self) -> complex:
        return complex(np.trace(self.elements))

    def hermiticity_error(self) -> float:
        return float(np.abs(self.elements - self.elements.conj().T).max())

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.elements + self.elements.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def check(self, herm_tol: float = 1e-12, trace_tol: float = 1e-12, psd_tol: float = 1e-10) -> None:
        """Raise ``ValueError`` unless Hermitian, unit-trace and positive semidefinite."""
        if self.hermiticity_error() > herm_tol:
            raise ValueError(f"not Hermitian: {self.hermiticity_error():.3g}")
        if abs(self.trace() - 1.0) > trace_tol:
            raise ValueError(f"trace {self.trace()} differs from 1")
        if self.min_eigenvalue() < -psd_tol:
            raise ValueError(f"not positive semidefinite: min eigenvalue {self.min_eigenvalue():.3g}")

    @classmethod
    def from_state(cls, grid: SGrid, psi) -> "ReducedDensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(grid, np.outer(psi, psi.conj()))


# momentum-representation matrices carry the same invariants
MomentumDensityMatrix = ReducedDensityMatrix


def _decoherence_factor(svals: np.ndarray, f: float, phi: float) -> np.ndarray:
    s = svals[:, None]
    sp = svals[None, :]
    return np.exp(-(s - sp) ** 2 * f + 1j * (s ** 2 - sp ** 2) * phi)


def _kernel_values(kernels: DecoherenceFunctions, t_index: int):
    n = len(kernels.times)
    if not -n <= t_index < n:
        raise IndexError(f"t_index {t_index} outside kernel grid of length {n}")
    return float(kernels.f[t_index]), float(kernels.phi[t_index])


def evolve_single_bath(rho0: ReducedDensityMatrix, kernels: DecoherenceFunctions,
                       t_index: int) -> ReducedDensityMatrix:
    """Multiply each element by ``exp(-(s-s')^2 f + i (s^2 - s'^2) phi)``."""
    f, phi = _kernel_values(kernels, t_index)
    return ReducedDensityMatrix(rho0.grid, rho0.elements * _decoherence_factor(rho0.grid.s, f, phi))


def support_contamination(rho: ReducedDensityMatrix, band: int) -> float:
    """Largest ``|rho|`` in the outer ``band`` rows/columns, relative to ``max |rho|``."""
    a = np.abs(rho.elements)
    peak = a.max()
    if peak == 0.0:
        return 0.0
    band = max(1, min(band, rho.n // 2))
    edge = np.zeros_like(a, dtype=bool)
    edge[:band, :] = edge[-band:, :] = True
    edge[:, :band] = edge[:, -band:] = True
    return float(a[edge].max() / peak)


def _check_boundary(rho: ReducedDensityMatrix, width: float, tol: float, on_boundary: str) -> None:
    band = int(math.ceil(5.0 * width / rho.grid.ds))
    c = support_contamination(rho, band)
    if c <= tol or on_boundary == "ignore":
        return
    msg = f"state reaches within {band} grid points of the boundary (relative weight {c:.3g} > {tol:g})"
    if on_boundary == "error":
        raise BoundaryContaminationError(msg)
    warnings.warn(msg, BoundaryContaminationWarning, stacklevel=3)


def center_smoothing(elements: np.ndarray, ds: float, variance: float) -> np.ndarray:
    """Gaussian convolution along ``(s + s')/2`` with the given variance.

    Spectral and periodic: the 2-d transform picks up ``exp(-variance/2 * k^2)``
    where ``k = k_s + k_s'`` is folded back into the first Brillouin zone,
    which makes the filter a pure function of the shift along the diagonal.
    """
    if variance == 0.0:
        return elements.copy()
    n = elements.shape[0]
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=ds)
    band = 2.0 * np.pi / ds
    ksum = k[:, None] + k[None, :]
    ksum = (ksum + 0.5 * band) % band - 0.5 * band
    spec = np.fft.fft2(elements)
    spec *= np.exp(-0.5 * variance * ksum ** 2)
    return np.fft.ifft2(spec)


def evolve_double_bath(rho0: ReducedDensityMatrix, kernels: DecoherenceFunctions, units: UnitsContext,
                       t_index: int, boundary_tol: float = 1e-8,
                       on_boundary: str = "error") -> ReducedDensityMatrix:
    """``exp(-(s-s')^2 f) exp(hbar^2 (d_s + d_s')^2 F)`` applied to ``rho0``.

    The second factor is a heat kernel in the center coordinate with variance
    ``2 hbar^2 F``.  It is evaluated spectrally with periodic wrap, so the
    state must stay five smoothing widths away from the grid edges;
    ``on_boundary`` selects ``"error"``, ``"warn"`` or ``"ignore"``.
    """
    if kernels.F is None:
        raise ValueError("double-bath evolution needs the second-bath function F")
    f, _ = _kernel_values(kernels, t_index)
    F = float(kernels.F[t_index])
    if F < 0:
        raise ValueError("F(t) must be non-negative")
    variance = 2.0 * units.hbar ** 2 * F
    _check_boundary(rho0, math.sqrt(variance), boundary_tol, on_boundary)
    damped = rho0.elements * _decoherence_factor(rho0.grid.s, f, 0.0)
    return ReducedDensityMatrix(rho0.grid, center_smoothing(damped, rho0.grid.ds, variance))


def momentum_transform(grid: SGrid, units: UnitsContext) -> tuple[SGrid, np.ndarray]:
    """Unitary ``U[a, b] = exp(-i r_a s_b / hbar) / sqrt(n)`` and its momentum grid."""
    rgrid = grid.conjugate(units)
    U = np.exp(-1j * np.outer(rgrid.s, grid.s) / units.hbar) / math.sqrt(grid.n)
    return rgrid, U


def to_momentum_representation(rho: ReducedDensityMatrix, units: UnitsContext) -> MomentumDensityMatrix:
    rgrid, U = momentum_transform(rho.grid, units)
    return MomentumDensityMatrix(rgrid, U @ rho.elements @ U.conj().T)


def from_momentum_representation(rho_r: MomentumDensityMatrix, grid: SGrid,
                                 units: UnitsContext) -> ReducedDensityMatrix:
    """Inverse of :func:`to_momentum_representation` onto the position grid ``grid``."""
    _, U = momentum_transform(grid, units)
    return ReducedDensityMatrix(grid, U.conj().T @ rho_r.elements @ U)


def coherence_visibility(rho: ReducedDensityMatrix, region_a, region_b) -> float:
    """Peak ``|rho(s, s')|`` between two index regions over ``sqrt(peak diag_A * peak diag_B)``."""
    a = np.arange(rho.n)[region_a] if isinstance(region_a, slice) else np.asarray(list(region_a))
    b = np.arange(rho.n)[region_b] if isinstance(region_b, slice) else np.asarray(list(region_b))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("regions must be nonempty")
    if np.intersect1d(a, b).size:
        raise ValueError("regions overlap")
    d = np.abs(np.diag(rho.elements))
    norm = math.sqrt(d[a].max() * d[b].max())
    if norm == 0.0:
        return 0.0
    return float(np.abs(rho.elements[np.ix_(a, b)]).max() / norm)


def purity(rho: ReducedDensityMatrix) -> float:
    # Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.sum(np.abs(rho.elements) ** 2))


CouplingMap = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


def symmetry_protected_evolution(rho0: ReducedDensityMatrix, coupling_map: CouplingMap,
                                 kernels: DecoherenceFunctions, t_index: int) -> ReducedDensityMatrix:
    """Single-bath map for a coupling agent that is a function of the grid observable.

    ``coupling_map`` gives the coupling-agent eigenvalue at each grid point,
    either as an array or as a callable on the grid values (``np.square``
    for ``S = Sigma^2``).  Pairs with equal mapped eigenvalues are untouched.
    """
    if callable(coupling_map):
        svals = np.asarray(coupling_map(rho0.grid.s), dtype=float)
    else:
        svals = np.asarray(coupling_map, dtype=float)
    if svals.shape != (rho0.n,):
        raise ValueError("coupling map must give one eigenvalue per grid point")
    f, phi = _kernel_values(kernels, t_index)
    return ReducedDensityMatrix(rho0.grid, rho0.elements * _decoherence_factor(svals, f, phi))
