"""Synthetic test phantoms (the measured OpenMPI phantoms are out of scope)."""

from __future__ import annotations

import numpy as np

from .core import DomainError, Grid3, Phantom


def dots(grid: Grid3, voxel_indices, amplitude: float = 1.0) -> Phantom:
    """Delta dots at the given (px, py, pz) voxel indices."""
    c = np.zeros(grid.shape)
    for px, py, pz in voxel_indices:
        c[pz, py, px] = amplitude
    return Phantom(grid, c)


def blob(grid: Grid3, center=(0.0, 0.0, 0.0), sigma: float = 0.2,
         amplitude: float = 1.0) -> Phantom:
    """Gaussian blob; center and sigma in units of the half-FOV."""
    axes = []
    for ax, n, fov, c0 in zip("xyz", grid.dims, grid.fov, center):
        coord = grid.axis_coords(ax) / (fov / 2)
        axes.append((coord - c0) ** 2)
    z2, y2, x2 = axes[2], axes[1], axes[0]
    r2 = z2[:, None, None] + y2[None, :, None] + x2[None, None, :]
    return Phantom(grid, amplitude * np.exp(-r2 / (2 * sigma**2)))


def bars(grid: Grid3, n_bars: int = 3, amplitude: float = 1.0) -> Phantom:
    """Resolution-style pattern: parallel bars along y, spaced along x."""
    if grid.nx < 2 * n_bars:
        raise DomainError("grid too small for the requested bar count")
    c = np.zeros(grid.shape)
    stride = grid.nx // (2 * n_bars)
    for b in range(n_bars):
        x0 = b * 2 * stride + stride // 2
        c[:, grid.ny // 4: 3 * grid.ny // 4, x0] = amplitude
    return Phantom(grid, c)
