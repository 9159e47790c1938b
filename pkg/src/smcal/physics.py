"""Ground-truth system-matrix simulation and the forward signal model.

The simulator samples the mean nanoparticle moment over one excitation
period on every voxel, takes the DFT, and converts the moment spectrum
into SM entries via the integration-by-parts identity

    integral of dm/dt * exp(-2*pi*i*k*t/T) dt  =  (2*pi*i*k/T) * T * c_k

where c_k is the k-th Fourier-series coefficient of the moment waveform.
This spectral derivative is exact for band-limited periodic signals.

Drive convention: H_axis(r, t) = G_axis * r_axis - A_axis * sin(2*pi*f_axis*t).
The sine phase makes the drive odd around t = 0 and (for an odd cycle
count) around t = T/2, which is what gives simulated rows their exact
reflection symmetries, including the complex-conjugated ones.
"""

from __future__ import annotations

import numpy as np
from scipy.constants import mu_0

from .core import (
    AXIS_TO_DIM,
    AliasError,
    CHANNELS,
    DomainError,
    Grid3,
    ParticleModel,
    Phantom,
    ScanSequence,
    SignalVector,
    SMRow,
    SystemMatrix,
)

# voxels per chunk when sampling moment waveforms (memory cap ~100 MB)
_CHUNK_VOXELS = 1024


def langevin(xi: np.ndarray) -> np.ndarray:
    """L(xi) = coth(xi) - 1/xi, with the series branch for small xi."""
    xi = np.asarray(xi, dtype=np.float64)
    out = np.empty_like(xi)
    small = np.abs(xi) < 1e-4
    out[small] = xi[small] / 3.0
    xs = xi[~small]
    out[~small] = 1.0 / np.tanh(xs) - 1.0 / xs
    return out


def langevin_deriv(xi: np.ndarray) -> np.ndarray:
    """L'(xi) = 1/xi^2 - 1/sinh(xi)^2, series branch for small xi."""
    xi = np.asarray(xi, dtype=np.float64)
    out = np.zeros_like(xi)
    small = np.abs(xi) < 1e-3
    out[small] = 1.0 / 3.0 - xi[small] ** 2 / 15.0
    xs = xi[~small]
    big = np.abs(xs) > 350.0  # sinh overflows; L' ~ 1/xi^2 there
    safe = np.where(big, 1.0, xs)
    out[~small] = 1.0 / xs**2 - np.where(big, 0.0, 1.0 / np.sinh(safe) ** 2)
    return out


def drive_field(seq: ScanSequence, r, t: float) -> np.ndarray:
    """Applied field 3-vector (T) at position r (meters) and time t (s).

    t is wrapped into [0, T). Positions outside the drive-covered FOV
    (|r| > A/G on a driven axis) raise DomainError.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3,):
        raise DomainError("position must be a 3-vector")
    period = seq.period
    t = t % period
    cov = seq.drive_fov()
    h = np.empty(3)
    for i in range(3):
        if np.isfinite(cov[i]) and abs(r[i]) > cov[i] / 2 * (1 + 1e-12):
            raise DomainError(f"position {r[i]} outside drive FOV on axis {CHANNELS[i]}")
        drive = 0.0
        if seq.amplitude[i] > 0:
            drive = seq.amplitude[i] * np.sin(2 * np.pi * seq.cycles[i] * t / period)
        h[i] = seq.gradient[i] * r[i] - drive
    return h


def mean_moment(pm: ParticleModel, h) -> np.ndarray:
    """Mean moment m_sat * L(beta*||H||) * H/||H||; zero at H = 0."""
    h = np.asarray(h, dtype=np.float64)
    norm = np.linalg.norm(h)
    if norm == 0.0:
        return np.zeros(3)
    return pm.m_sat * langevin(pm.beta * norm) * h / norm


def _moment_spectrum(seq: ScanSequence, pm: ParticleModel, grid: Grid3,
                     channels, ks) -> dict[tuple[str, int], np.ndarray]:
    """Fourier coefficients of -mu0/T * d/dt m_channel for all (channel, k).

    Returns flat complex arrays of length grid.n_voxels, in the file
    layout (z slowest, x fastest).
    """
    seq.check_grid(grid)
    n = seq.n_time_samples
    nyq = n // 2
    for k in ks:
        if k < 0:
            raise DomainError("freq_index must be >= 0")
        if k > nyq:
            raise AliasError(f"harmonic {k} exceeds Nyquist {nyq} of {n} time samples")
        if k > seq.k_max:
            raise DomainError(f"harmonic {k} exceeds k_max {seq.k_max}")
    for ch in channels:
        if ch not in CHANNELS:
            raise DomainError(f"unknown channel {ch!r}")

    zc = grid.axis_coords("z")
    yc = grid.axis_coords("y")
    xc = grid.axis_coords("x")
    Z, Y, X = np.meshgrid(zc, yc, xc, indexing="ij")
    pos = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)  # (nvox, 3) in x,y,z order

    period = seq.period
    tau = np.arange(n) / n  # t / T
    drives = np.zeros((3, n))
    for i in range(3):
        if seq.amplitude[i] > 0:
            drives[i] = seq.amplitude[i] * np.sin(2 * np.pi * seq.cycles[i] * tau)

    ks = list(ks)
    channels = list(channels)
    out = {
        (ch, k): np.empty(grid.n_voxels, dtype=np.complex128)
        for ch in channels
        for k in ks
    }
    ch_dims = [CHANNELS.index(ch) for ch in channels]

    nvox = grid.n_voxels
    for start in range(0, nvox, _CHUNK_VOXELS):
        sel = slice(start, min(start + _CHUNK_VOXELS, nvox))
        h = (seq.gradient * pos[sel])[:, :, None] - drives[None, :, :]  # (chunk, 3, n)
        hn = np.sqrt(np.einsum("vat,vat->vt", h, h))
        xi = pm.beta * hn
        scale = np.zeros_like(hn)
        nz = hn > 0
        scale[nz] = pm.m_sat * langevin(xi[nz]) / hn[nz]
        for ch, dim in zip(channels, ch_dims):
            m = scale * h[:, dim, :]  # (chunk, n)
            coeff = np.fft.fft(m, axis=-1) / n
            for k in ks:
                out[(ch, k)][sel] = -mu_0 * (2j * np.pi * k / period) * coeff[:, k]
    return out


def simulate_row_numeric(seq: ScanSequence, pm: ParticleModel, grid: Grid3,
                         channel: str, k: int) -> SMRow:
    """One SM row from the time-domain moment simulation."""
    spectra = _moment_spectrum(seq, pm, grid, [channel], [k])
    return SMRow(channel, k, spectra[(channel, k)].reshape(grid.shape), grid)


def simulate_system_matrix(seq: ScanSequence, pm: ParticleModel, grid: Grid3,
                           channels, k_range) -> SystemMatrix:
    """Simulate one row per (channel, k); deterministic row order."""
    channels = list(channels)
    ks = list(k_range)
    if not channels or not ks:
        return SystemMatrix(grid, (), provenance="simulated-numeric")
    spectra = _moment_spectrum(seq, pm, grid, channels, ks)
    rows = tuple(
        SMRow(ch, k, spectra[(ch, k)].reshape(grid.shape), grid)
        for ch in channels
        for k in ks
    )
    return SystemMatrix(grid, rows, provenance="simulated-numeric")


def _cheb_u(n: int, x: np.ndarray) -> np.ndarray:
    """Chebyshev polynomial of the second kind U_n via recurrence."""
    u_prev = np.ones_like(x)
    if n == 0:
        return u_prev
    u = 2.0 * x
    for _ in range(n - 1):
        u_prev, u = u, 2.0 * x * u - u_prev
    return u


def simulate_sm_1d_closed_form(seq: ScanSequence, pm: ParticleModel, grid: Grid3,
                               k: int, oversample: int = 32) -> SMRow:
    """Closed-form 1D row: magnetization derivative convolved with the
    Chebyshev kernel U_{k-1}(Gr/A) * sqrt(1 - (Gr/A)^2) on |Gr/A| <= 1.

    The overall complex scale is the bare -2i/T prefactor; absolute
    calibration against the numeric rows requires a least-squares scalar.
    """
    if seq.dimensionality != 1 or seq.active_axes != ["x"]:
        raise DomainError("closed form requires a 1D sequence driven on x")
    if k < 1:
        raise DomainError("closed form requires k >= 1")
    g = seq.gradient[0]
    a = seq.amplitude[0]
    x = grid.axis_coords("x")
    dx = (x[1] - x[0]) / oversample if grid.nx > 1 else a / g / (64 * oversample)

    half = a / g  # kernel support in r
    rho = np.arange(-half, half + dx / 2, dx)
    u = np.clip(g * rho / a, -1.0, 1.0)
    kernel = _cheb_u(k - 1, u) * np.sqrt(1.0 - u**2)

    rows = np.empty(grid.nx)
    for i, xi in enumerate(x):
        mprime = pm.m_sat * pm.beta * langevin_deriv(pm.beta * g * (xi - rho))
        rows[i] = np.sum(mprime * kernel) * dx * g
    vals = (-2j / seq.period) * rows
    return SMRow("x", k, vals.reshape(grid.shape), grid)


def forward_signal(sm: SystemMatrix, phantom: Phantom) -> SignalVector:
    """u_i = sum_v row_i[v] * c[v] * voxel_volume (discrete form of u = Sc)."""
    if sm.grid != phantom.grid:
        raise DomainError("system matrix and phantom grids differ")
    mat = sm.values_array().reshape(len(sm), -1)
    c = phantom.concentration.ravel()
    values = mat @ c * sm.grid.voxel_volume
    return SignalVector(tuple(sm.keys()), values)
