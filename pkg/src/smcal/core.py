"""Shared data model: grids, system matrices, phantoms, signals, scan setup.

All containers are immutable after construction (numpy buffers are frozen),
so they can be shared freely across threads and worker processes.

Spatial fields are stored as C-ordered arrays of shape (nz, ny, nx), i.e.
z is the slowest axis and x the fastest. This layout is a convention of
the file formats in :mod:`smcal.smio` and is fixed once here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CHANNELS = ("x", "y", "z")

#: maps axis name to the index into an (nz, ny, nx) array
AXIS_TO_DIM = {"x": 2, "y": 1, "z": 0}


class DomainError(ValueError):
    """Input violates a documented precondition."""


class RowNotFoundError(KeyError):
    """No row with the requested (channel, freq_index) pair."""


class DuplicateRowError(ValueError):
    """Two rows with the same (channel, freq_index) pair."""


class AliasError(DomainError):
    """Requested harmonic exceeds the Nyquist limit of the time sampling."""


class IncompleteDomainError(DomainError):
    """Known-voxel mask does not cover a fundamental domain."""


class DegenerateRangeError(DomainError):
    """Reference field has zero modulus range; NRMSE undefined."""


class TrainingDivergedError(RuntimeError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    if out is arr:
        out = arr.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Grid3:
    """Cell-centered spatial discretization of the field of view.

    Voxel p along an axis with n voxels and extent ``fov`` sits at
    ``(p + 0.5) / n * fov - fov / 2``, so coordinates are symmetric
    about zero for both odd and even voxel counts.
    """

    nx: int
    ny: int
    nz: int
    fov_x: float
    fov_y: float
    fov_z: float

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise DomainError("voxel counts must be >= 1")
        if min(self.fov_x, self.fov_y, self.fov_z) <= 0:
            raise DomainError("field-of-view extents must be > 0")

    @property
    def shape(self) -> tuple[int, int, int]:
        """Array shape (nz, ny, nx)."""
        return (self.nz, self.ny, self.nx)

    @property
    def n_voxels(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def voxel_volume(self) -> float:
        return (self.fov_x / self.nx) * (self.fov_y / self.ny) * (self.fov_z / self.nz)

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def fov(self) -> tuple[float, float, float]:
        return (self.fov_x, self.fov_y, self.fov_z)

    def axis_coords(self, axis: str) -> np.ndarray:
        """Cell-centered coordinates along one axis, in meters."""
        n = self.dims[CHANNELS.index(axis)]
        fov = self.fov[CHANNELS.index(axis)]
        return (np.arange(n) + 0.5) / n * fov - fov / 2

    def spatial_axes(self) -> list[str]:
        """Axes with more than one voxel, in x, y, z order."""
        return [a for a, n in zip(CHANNELS, self.dims) if n > 1]


def grid_1d(n: int, fov: float) -> Grid3:
    return Grid3(nx=n, ny=1, nz=1, fov_x=fov, fov_y=fov / n, fov_z=fov / n)


def grid_2d(nx: int, ny: int, fov_x: float, fov_y: float) -> Grid3:
    return Grid3(nx=nx, ny=ny, nz=1, fov_x=fov_x, fov_y=fov_y, fov_z=min(fov_x / nx, fov_y / ny))


def voxel_coordinate(grid: Grid3, index: tuple[int, int, int]) -> np.ndarray:
    """Position (meters) of the voxel at per-axis index (px, py, pz)."""
    out = np.empty(3)
    for i, (p, n, fov) in enumerate(zip(index, grid.dims, grid.fov)):
        if not 0 <= p < n:
            raise IndexError(f"voxel index {p} out of range [0, {n}) on axis {CHANNELS[i]}")
        out[i] = (p + 0.5) / n * fov - fov / 2
    return out


@dataclass(frozen=True)
class SMRow:
    """One system-matrix row: a complex field over a grid for (channel, k)."""

    channel: str
    freq_index: int
    values: np.ndarray  # complex128, shape grid.shape
    grid: Grid3

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise DomainError(f"unknown channel {self.channel!r}")
        if self.freq_index < 0:
            raise DomainError("freq_index must be >= 0")
        vals = np.ascontiguousarray(self.values, dtype=np.complex128)
        if vals.shape != self.grid.shape:
            raise DomainError(
                f"values shape {vals.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(vals.view(np.float64))):
            raise DomainError("row values must be finite")
        object.__setattr__(self, "values", _frozen(vals))

    @property
    def key(self) -> tuple[str, int]:
        return (self.channel, self.freq_index)

    def with_values(self, values: np.ndarray, grid: Grid3 | None = None) -> "SMRow":
        return SMRow(self.channel, self.freq_index, values, grid or self.grid)


PROVENANCES = ("simulated-closed-form", "simulated-numeric", "recovered", "loaded")


@dataclass(frozen=True)
class SystemMatrix:
    """Ordered collection of SM rows sharing one grid."""

    grid: Grid3
    rows: tuple[SMRow, ...]
    provenance: str = "loaded"

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise DomainError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "rows", tuple(self.rows))
        seen = set()
        for row in self.rows:
            if row.grid != self.grid:
                raise DomainError("all rows must share the system matrix grid")
            if row.key in seen:
                raise DuplicateRowError(f"duplicate row {row.key}")
            seen.add(row.key)

    def __len__(self) -> int:
        return len(self.rows)

    def keys(self) -> list[tuple[str, int]]:
        return [r.key for r in self.rows]

    def values_array(self) -> np.ndarray:
        """Stacked row values, shape (n_rows, nz, ny, nx)."""
        if not self.rows:
            return np.empty((0,) + self.grid.shape, dtype=np.complex128)
        return np.stack([r.values for r in self.rows])

    def with_rows(self, rows, grid: Grid3 | None = None, provenance: str | None = None):
        return SystemMatrix(grid or self.grid, tuple(rows), provenance or self.provenance)


def row_lookup(sm: SystemMatrix, channel: str, freq_index: int) -> SMRow:
    """Return the unique row for (channel, freq_index)."""
    for row in sm.rows:
        if row.channel == channel and row.freq_index == freq_index:
            return row
    raise RowNotFoundError(f"no row ({channel!r}, {freq_index})")


@dataclass(frozen=True)
class Phantom:
    """Non-negative particle concentration field over a grid."""

    grid: Grid3
    concentration: np.ndarray  # float64, shape grid.shape

    def __post_init__(self):
        c = np.asarray(self.concentration, dtype=np.float64)
        if c.shape != self.grid.shape:
            raise DomainError(
                f"concentration shape {c.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise DomainError("concentration must be finite")
        if np.any(c < 0):
            raise DomainError("concentration must be non-negative")
        object.__setattr__(self, "concentration", _frozen(c))


@dataclass(frozen=True)
class SignalVector:
    """Complex measured coefficients aligned with a SystemMatrix's row order."""

    keys: tuple[tuple[str, int], ...]
    values: np.ndarray  # complex128, shape (n_rows,)

    def __post_init__(self):
        object.__setattr__(self, "keys", tuple(tuple(k) for k in self.keys))
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.ndim != 1 or len(vals) != len(self.keys):
            raise DomainError("signal values must be 1D and aligned with keys")
        object.__setattr__(self, "values", _frozen(vals))

    def __len__(self) -> int:
        return len(self.keys)


@dataclass(frozen=True)
class ScanSequence:
    """Drive-field and selection-field configuration.

    ``freq_dividers[a] = d`` gives axis ``a`` the drive frequency
    ``1 / (base_period * d)``; a divider of 0 disables the drive on that
    axis. The full excitation period is ``base_period * lcm(dividers)``,
    the least common period of all active drives.
    """

    gradient: tuple[float, float, float]
    amplitude: tuple[float, float, float]
    base_period: float = 1.0 / 25_000.0
    freq_dividers: tuple[int, int, int] = (16, 17, 0)
    n_time_samples: int = 4096
    k_max: int = 512

    def __post_init__(self):
        if self.base_period <= 0:
            raise DomainError("base_period must be > 0")
        n = self.n_time_samples
        if n < 2 or n & (n - 1):
            raise DomainError("n_time_samples must be a power of two")
        active = [d for a, d in zip(self.amplitude, self.freq_dividers) if a > 0]
        if not active:
            raise DomainError("at least one axis must be driven")
        for amp, div in zip(self.amplitude, self.freq_dividers):
            if amp > 0 and div < 1:
                raise DomainError("driven axes need a divider >= 1")
            if amp < 0:
                raise DomainError("amplitudes must be >= 0")
        if len(active) == 2 and math.gcd(*active) != 1:
            raise DomainError("2D dividers must be coprime")
        if self.k_max > n // 2:
            raise AliasError(f"k_max {self.k_max} exceeds Nyquist {n // 2}")

    @property
    def active_axes(self) -> list[str]:
        return [ax for ax, a in zip(CHANNELS, self.amplitude) if a > 0]

    @property
    def dimensionality(self) -> int:
        return len(self.active_axes)

    @property
    def period(self) -> float:
        """Least common period of all active drives."""
        return self.base_period * self._lcm()

    def _lcm(self) -> int:
        divs = [d for a, d in zip(self.amplitude, self.freq_dividers) if a > 0]
        return math.lcm(*divs)

    @property
    def cycles(self) -> tuple[int, int, int]:
        """Drive cycles per full period, per axis (0 when undriven)."""
        lcm = self._lcm()
        return tuple(
            lcm // d if a > 0 else 0
            for a, d in zip(self.amplitude, self.freq_dividers)
        )

    def drive_fov(self) -> tuple[float, float, float]:
        """Extent 2A/G covered by the field-free point per driven axis."""
        return tuple(
            2 * a / g if a > 0 and g > 0 else math.inf
            for a, g in zip(self.amplitude, self.gradient)
        )

    def check_grid(self, grid: Grid3) -> None:
        for ax, fov, cov in zip(CHANNELS, grid.fov, self.drive_fov()):
            n = grid.dims[CHANNELS.index(ax)]
            if n > 1 and fov > cov * (1 + 1e-12):
                raise DomainError(
                    f"grid FOV {fov} on axis {ax} exceeds drive coverage 2A/G = {cov}"
                )


def sequence_1d(gradient: float = 2.0, amplitude: float = 0.024,
                divider: int = 1, **kw) -> ScanSequence:
    return ScanSequence(
        gradient=(gradient, gradient, gradient),
        amplitude=(amplitude, 0.0, 0.0),
        freq_dividers=(divider, 0, 0),
        **kw,
    )


def sequence_2d(gradient: float = 2.0, amplitude: float = 0.024,
                dividers: tuple[int, int] = (16, 17), **kw) -> ScanSequence:
    return ScanSequence(
        gradient=(gradient, gradient, gradient),
        amplitude=(amplitude, amplitude, 0.0),
        freq_dividers=(dividers[0], dividers[1], 0),
        **kw,
    )


def sequence_3d(gradient: float = 2.0, amplitude: float = 0.024,
                dividers: tuple[int, int, int] = (3, 4, 5), **kw) -> ScanSequence:
    return ScanSequence(
        gradient=(gradient, gradient, gradient),
        amplitude=(amplitude, amplitude, amplitude),
        freq_dividers=dividers,
        **kw,
    )


@dataclass(frozen=True)
class ParticleModel:
    """Langevin nanoparticle model with instantaneous relaxation.

    The mean moment magnitude is ``m_sat * L(beta * ||H||)`` with
    ``L(xi) = coth(xi) - 1/xi``.
    """

    m_sat: float = 1.0
    beta: float = 2000.0

    def __post_init__(self):
        if self.m_sat < 0:
            raise DomainError("m_sat must be >= 0")
        if self.beta <= 0:
            raise DomainError("beta must be > 0")
