"""LR/HR pair generation: padding, equidistant downsampling, SNR
filtering, train/validation splitting, and rotation/flip augmentation.

The LR matrices model sparse physical measurements at fewer calibration
positions, so downsampling is plain stride-r decimation with offset 0
(no anti-alias filtering). Padding and downsampling act only on spatial
axes with more than one voxel, so flattened 2D matrices keep their
singleton z axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import AXIS_TO_DIM, DomainError, Grid3, SMRow, SystemMatrix


def _padded_grid(grid: Grid3, pre: int, post: int) -> Grid3:
    dims = {}
    fov = {}
    for ax, n, f in zip("xyz", grid.dims, grid.fov):
        extra = (pre + post) if n > 1 else 0
        dims[ax] = n + extra
        fov[ax] = f * (n + extra) / n  # keep voxel spacing
    return Grid3(nx=dims["x"], ny=dims["y"], nz=dims["z"],
                 fov_x=fov["x"], fov_y=fov["y"], fov_z=fov["z"])


def zero_pad(sm: SystemMatrix, pre: int = 1, post: int = 2) -> SystemMatrix:
    """Grow every spatial axis by (pre, post) rows of zeros."""
    if pre < 0 or post < 0:
        raise DomainError("padding must be >= 0")
    grid = _padded_grid(sm.grid, pre, post)
    pads = tuple(
        (pre, post) if sm.grid.shape[d] > 1 else (0, 0) for d in range(3)
    )
    rows = [
        r.with_values(np.pad(r.values, pads), grid)
        for r in sm.rows
    ]
    return sm.with_rows(rows, grid=grid)


def crop(sm: SystemMatrix, pre: int = 1, post: int = 2) -> SystemMatrix:
    """Inverse of zero_pad with the same (pre, post)."""
    shape = sm.grid.shape
    sel = tuple(
        slice(pre, n - post) if n > 1 else slice(None) for n in shape
    )
    dims = [len(range(*s.indices(n))) for s, n in zip(sel, shape)]
    old = sm.grid
    grid = Grid3(
        nx=dims[2], ny=dims[1], nz=dims[0],
        fov_x=old.fov_x * dims[2] / old.nx,
        fov_y=old.fov_y * dims[1] / old.ny,
        fov_z=old.fov_z * dims[0] / old.nz,
    )
    rows = [r.with_values(r.values[sel], grid) for r in sm.rows]
    return sm.with_rows(rows, grid=grid)


def downsample_equidistant(sm: SystemMatrix, ratio: int) -> SystemMatrix:
    """Keep voxels at stride-r indices 0, r, 2r, ... per spatial axis."""
    if ratio < 1:
        raise DomainError("ratio must be >= 1")
    if ratio == 1:
        return sm
    shape = sm.grid.shape
    for n in shape:
        if n > 1 and n % ratio:
            raise DomainError(f"axis size {n} not divisible by ratio {ratio}")
    sel = tuple(
        slice(None, None, ratio) if n > 1 else slice(None) for n in shape
    )
    dims = [len(range(*s.indices(n))) for s, n in zip(sel, shape)]
    old = sm.grid
    grid = Grid3(
        nx=dims[2], ny=dims[1], nz=dims[0],
        fov_x=old.fov_x, fov_y=old.fov_y, fov_z=old.fov_z,
    )
    rows = [r.with_values(r.values[sel], grid) for r in sm.rows]
    return sm.with_rows(rows, grid=grid)


def estimate_row_snr(sm: SystemMatrix, noise_sigma: float) -> np.ndarray:
    """Row energy over injected-noise energy, ||row||^2 / (sigma^2 * N)."""
    if noise_sigma <= 0:
        raise DomainError("noise_sigma must be > 0")
    n = sm.grid.n_voxels
    return np.array(
        [np.linalg.norm(r.values) ** 2 / (noise_sigma**2 * n) for r in sm.rows]
    )


def snr_filter(sm: SystemMatrix, row_snr, f_min_index: int = 0,
               snr_threshold: float = 3.0) -> SystemMatrix:
    """Retain rows with snr > threshold and freq_index >= f_min_index."""
    row_snr = np.asarray(row_snr, dtype=np.float64)
    if row_snr.shape != (len(sm),):
        raise DomainError("row_snr must align with the rows")
    rows = [
        r for r, snr in zip(sm.rows, row_snr)
        if snr > snr_threshold and r.freq_index >= f_min_index
    ]
    return sm.with_rows(rows)


@dataclass(frozen=True)
class PairSet:
    """Aligned LR/HR row pairs with a train/validation tag per pair."""

    lr_rows: tuple[SMRow, ...]
    hr_rows: tuple[SMRow, ...]
    ratio: int
    split: tuple[str, ...] = ()  # 'train' / 'validation' per pair; empty = unsplit

    def __post_init__(self):
        if len(self.lr_rows) != len(self.hr_rows):
            raise DomainError("LR and HR row lists must align")
        if self.split and len(self.split) != len(self.lr_rows):
            raise DomainError("split tags must align with pairs")
        for lr, hr in zip(self.lr_rows, self.hr_rows):
            for d in range(3):
                nl, nh = lr.grid.shape[d], hr.grid.shape[d]
                if nh > 1 and nl * self.ratio != nh:
                    raise DomainError(
                        f"HR dim {nh} is not ratio x LR dim {nl} (ratio {self.ratio})"
                    )
                if nh == 1 and nl != 1:
                    raise DomainError("singleton axes must match")

    def __len__(self) -> int:
        return len(self.lr_rows)

    def subset(self, tag: str) -> "PairSet":
        if not self.split:
            raise DomainError("pair set has not been split")
        idx = [i for i, t in enumerate(self.split) if t == tag]
        return PairSet(
            tuple(self.lr_rows[i] for i in idx),
            tuple(self.hr_rows[i] for i in idx),
            self.ratio,
        )


def make_pairs(sm_hr: SystemMatrix, ratio: int) -> PairSet:
    """Pair each HR row with its stride-r decimation."""
    lr = downsample_equidistant(sm_hr, ratio)
    return PairSet(lr.rows, sm_hr.rows, ratio)


def split_pairs(pairs: PairSet, validation_fraction: float = 0.10,
                seed: int = 0) -> PairSet:
    """Deterministic shuffled split into train and validation tags."""
    n = len(pairs)
    if not 0 <= validation_fraction < 1:
        raise DomainError("validation_fraction must be in [0, 1)")
    if n < 10 and validation_fraction > 0:
        raise DomainError("need at least 10 pairs to split")
    n_val = round(n * validation_fraction)
    order = np.random.default_rng(seed).permutation(n)
    tags = ["train"] * n
    for i in order[:n_val]:
        tags[i] = "validation"
    return replace(pairs, split=tuple(tags))


@dataclass(frozen=True)
class AugmentOp:
    """Element of the axis-aligned rotation/flip group on spatial dims.

    Represented as an axis permutation followed by per-axis flips, both
    acting on the trailing spatial dimensions of an array.
    """

    perm: tuple[int, ...]
    flips: tuple[bool, ...]

    def apply(self, arr: np.ndarray) -> np.ndarray:
        nd = len(self.perm)
        lead = arr.ndim - nd
        axes = tuple(range(lead)) + tuple(lead + p for p in self.perm)
        out = np.transpose(arr, axes)
        for i, f in enumerate(self.flips):
            if f:
                out = np.flip(out, axis=lead + i)
        return np.ascontiguousarray(out)

    def compose(self, first: "AugmentOp") -> "AugmentOp":
        """Group product: self after first."""
        perm = tuple(first.perm[p] for p in self.perm)
        flips = tuple(self.flips[i] ^ first.flips[self.perm[i]] for i in range(len(self.perm)))
        return AugmentOp(perm, flips)

    @staticmethod
    def identity(ndim: int) -> "AugmentOp":
        return AugmentOp(tuple(range(ndim)), (False,) * ndim)


def random_augment_op(rng: np.random.Generator, spatial_shape,
                      include_flips: bool = True) -> AugmentOp:
    """Random rotation/flip preserving the given spatial shape.

    For cubic (or square) shapes this draws from the full hyperoctahedral
    group; otherwise the permutation part is restricted to permutations
    that keep the shape unchanged. With ``include_flips=False`` only axis
    permutations are drawn — the subgroup that commutes with stride
    decimation, which anchors LR voxel i to HR voxel r*i from the low
    index end (a flipped LR/HR pair has the opposite sub-voxel phase and
    no longer satisfies the decimation relation).
    """
    shape = tuple(spatial_shape)
    nd = len(shape)
    perms = []
    from itertools import permutations

    for p in permutations(range(nd)):
        if tuple(shape[i] for i in p) == shape:
            perms.append(p)
    perm = perms[rng.integers(len(perms))]
    if include_flips:
        flips = tuple(bool(rng.integers(2)) for _ in range(nd))
    else:
        flips = (False,) * nd
    return AugmentOp(perm, flips)


def augment_pair(lr: np.ndarray, hr: np.ndarray, op: AugmentOp):
    """Apply one group element jointly to LR and HR channel stacks."""
    return op.apply(lr), op.apply(hr)
