"""Learned SM super-resolution with positional priors, plus baselines.

A row is treated as a 2-channel (real/imaginary) image. The position
embedding appends three coordinate ramps; a residual-dense convolutional
trunk extracts features; interpolation upsampling and a convolutional
readout produce the HR row. Non-learned interpolation baselines share
the same index-space convention as the stride-r decimation that made the
LR data: HR index h maps to LR coordinate h / r.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from scipy.ndimage import map_coordinates

from .core import DomainError, Grid3, SMRow, SystemMatrix, TrainingDivergedError
from .metrics import nrmse
from .sampling import PairSet, random_augment_op

MODES = ("none", "normalized", "symmetric")
UPSAMPLES = ("nearest", "linear")
BASELINES = ("nearest", "trilinear", "tricubic", "zero-order")


def coordinate_ramp(n: int, mode: str) -> np.ndarray:
    """Per-axis coordinate values: [0, 1] normalized or [-1, 1] symmetric."""
    if n == 1:
        return np.zeros(1)
    p = np.arange(n, dtype=np.float64)
    if mode == "normalized":
        return p / (n - 1)
    if mode == "symmetric":
        return 2.0 * p / (n - 1) - 1.0
    raise DomainError(f"unknown encoding mode {mode!r}")


def pos_embedding(x: np.ndarray, mode: str) -> np.ndarray:
    """Append coordinate channels i, j, k to a (2, *spatial) stack.

    Channel order is [real, imag, i, j, k], where i ramps along x (the
    fastest spatial axis), j along y, and k along z; axes missing from
    the spatial shape contribute constant-zero planes. mode='none'
    returns the input unchanged.
    """
    x = np.asarray(x)
    if x.ndim < 2 or x.shape[0] != 2:
        raise DomainError("expected a (2, *spatial) channel stack")
    if mode == "none":
        return x
    spatial = x.shape[1:]
    nd = len(spatial)
    planes = []
    # spatial axes are ordered slow -> fast, i.e. (z,)y,x; i/j/k index x/y/z
    for ax_from_fast in range(3):
        if ax_from_fast < nd:
            axis = nd - 1 - ax_from_fast
            ramp = coordinate_ramp(spatial[axis], mode)
            shape = [1] * nd
            shape[axis] = spatial[axis]
            plane = np.broadcast_to(ramp.reshape(shape), spatial)
        else:
            plane = np.zeros(spatial)
        planes.append(plane)
    return np.concatenate([x, np.stack(planes)], axis=0)


def row_to_stack(values: np.ndarray) -> np.ndarray:
    """Complex (nz, ny, nx) field to a squeezed real (2, *spatial) stack."""
    sq = np.squeeze(values)
    return np.stack([sq.real, sq.imag]).astype(np.float64)


def stack_to_values(stack: np.ndarray, shape: tuple[int, int, int]) -> np.ndarray:
    """Inverse of row_to_stack for a known (nz, ny, nx) target shape."""
    c = stack[0] + 1j * stack[1]
    return c.reshape(shape)


@dataclass(frozen=True)
class SRConfig:
    mode: str = "symmetric"
    ratio: int = 2
    ndim: int = 2
    blocks: int = 2
    dense_stages: int = 3
    channels: int = 16
    growth: int = 16
    res_scale: float = 0.2
    upsample: str = "linear"
    negative_slope: float = 0.2

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"unknown encoding mode {self.mode!r}")
        if self.upsample not in UPSAMPLES:
            raise DomainError(f"unknown upsample mode {self.upsample!r}")
        if self.ndim not in (2, 3):
            raise DomainError("ndim must be 2 or 3")
        if self.ratio < 1:
            raise DomainError("ratio must be >= 1")

    @property
    def in_channels(self) -> int:
        return 2 if self.mode == "none" else 5


def _conv(ndim: int, cin: int, cout: int, kernel: int = 3):
    cls = nn.Conv2d if ndim == 2 else nn.Conv3d
    return cls(cin, cout, kernel, padding=kernel // 2)


def linear_upsample(x: torch.Tensor, ratio: int) -> torch.Tensor:
    """Separable linear upsampling of the trailing spatial dims.

    Output index j samples the input at j / ratio with edge clamping, the
    same index convention as stride decimation, so output[..., ::ratio]
    equals the input exactly.
    """
    for dim in range(2, x.ndim):
        n = x.shape[dim]
        pos = torch.arange(n * ratio, dtype=x.dtype, device=x.device) / ratio
        i0 = pos.floor().long().clamp(max=n - 1)
        i1 = (i0 + 1).clamp(max=n - 1)
        w = (pos - i0.to(x.dtype)).reshape(
            [-1 if d == dim else 1 for d in range(x.ndim)])
        x = x.index_select(dim, i0) * (1 - w) + x.index_select(dim, i1) * w
    return x


class ResidualDenseBlock(nn.Module):
    def __init__(self, cfg: SRConfig):
        super().__init__()
        c, g = cfg.channels, cfg.growth
        self.stages = nn.ModuleList(
            _conv(cfg.ndim, c + i * g, g) for i in range(cfg.dense_stages)
        )
        self.fuse = _conv(cfg.ndim, c + cfg.dense_stages * g, c, kernel=1)
        self.lrelu = nn.LeakyReLU(cfg.negative_slope)
        self.res_scale = cfg.res_scale

    def forward(self, x):
        feats = [x]
        for conv in self.stages:
            feats.append(self.lrelu(conv(torch.cat(feats, dim=1))))
        return x + self.res_scale * self.fuse(torch.cat(feats, dim=1))


class SRModel(nn.Module):
    """Position-embedded residual-dense super-resolver for SM rows."""

    def __init__(self, cfg: SRConfig):
        super().__init__()
        self.cfg = cfg
        self.head = _conv(cfg.ndim, cfg.in_channels, cfg.channels)
        self.blocks = nn.ModuleList(ResidualDenseBlock(cfg) for _ in range(cfg.blocks))
        self.readout = _conv(cfg.ndim, cfg.channels, 2)
        with torch.no_grad():
            # keep the initial output near the upsampled-input regime
            self.readout.weight *= 0.1
            self.readout.bias.zero_()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.cfg.in_channels:
            raise DomainError(
                f"expected {self.cfg.in_channels} input channels, got {x.shape[1]}"
            )
        feat = self.head(x)
        trunk = feat
        for block in self.blocks:
            trunk = block(trunk)
        feat = feat + trunk
        if self.cfg.upsample == "nearest":
            up = F.interpolate(feat, scale_factor=self.cfg.ratio, mode="nearest")
        else:
            up = linear_upsample(feat, self.cfg.ratio)
        return self.readout(up)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def mse_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    return torch.mean((pred - target) ** 2)


def loss_and_gradients(model: SRModel, inputs, targets):
    """Mean-squared-error loss and exact reverse-mode gradients.

    Returns (loss, {parameter name: gradient array}).
    """
    model.zero_grad()
    x = torch.as_tensor(np.asarray(inputs)).to(next(model.parameters()).dtype)
    t = torch.as_tensor(np.asarray(targets)).to(x.dtype)
    loss = mse_loss(model(x), t)
    loss.backward()
    grads = {
        name: (p.grad.detach().clone().numpy() if p.grad is not None
               else np.zeros(p.shape))
        for name, p in model.named_parameters()
    }
    return float(loss.detach()), grads


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 8
    max_epochs: int = 60
    patience: int = 0  # 0 = no early stopping
    seed: int = 0
    augment: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 0:
            raise DomainError("training config values must be positive")


def _normalizer(lr_values: np.ndarray) -> float:
    s = float(np.abs(lr_values).max())
    return s if s > 0 else 1.0


def _prepare(pairs: PairSet, mode: str):
    """Embedded inputs and normalized targets for every pair."""
    xs, ts, scales = [], [], []
    for lr, hr in zip(pairs.lr_rows, pairs.hr_rows):
        s = _normalizer(lr.values)
        xs.append(pos_embedding(row_to_stack(lr.values / s), mode))
        ts.append(row_to_stack(hr.values / s))
        scales.append(s)
    return np.stack(xs), np.stack(ts), np.array(scales)


def _val_nrmse(model: SRModel, x_val: torch.Tensor, t_val: torch.Tensor) -> float:
    with torch.no_grad():
        pred = model(x_val).numpy()
    ref = t_val.numpy()
    vals = []
    for p, t in zip(pred, ref):
        est = p[0] + 1j * p[1]
        tru = t[0] + 1j * t[1]
        vals.append(nrmse(est, tru))
    return float(np.mean(vals))


def train(model: SRModel, pairs: PairSet, cfg: TrainConfig):
    """Fit the model; returns (model loaded with best weights, history).

    The returned parameters are those with the lowest validation NRMSE
    over the epochs. Deterministic under a fixed seed (single-threaded).
    """
    train_set = pairs.subset("train")
    val_set = pairs.subset("validation")
    if len(train_set) == 0 or len(val_set) == 0:
        raise DomainError("need non-empty train and validation splits")

    n_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        return _train_loop(model, train_set, val_set, cfg)
    finally:
        torch.set_num_threads(n_threads)


def _train_loop(model, train_set, val_set, cfg):
    mode = model.cfg.mode
    x_tr, t_tr, _ = _prepare(train_set, mode)
    x_va, t_va, _ = _prepare(val_set, mode)
    dtype = next(model.parameters()).dtype
    x_va = torch.as_tensor(x_va).to(dtype)
    t_va = torch.as_tensor(t_va).to(dtype)

    rng = np.random.default_rng(cfg.seed)
    torch.manual_seed(cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

    history = []
    best_val = _val_nrmse(model, x_va, t_va)
    best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
    since_best = 0
    spatial = x_tr.shape[2:]

    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(x_tr))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb, tb = x_tr[idx], t_tr[idx]
            if cfg.augment:
                xb = xb.copy()
                tb = tb.copy()
                for j in range(len(idx)):
                    op = random_augment_op(rng, spatial)
                    xb[j] = op.apply(xb[j])
                    tb[j] = op.apply(tb[j])
            opt.zero_grad()
            pred = model(torch.as_tensor(xb).to(dtype))
            loss = mse_loss(pred, torch.as_tensor(tb).to(dtype))
            loss.backward()
            opt.step()
            losses.append(float(loss.detach()))
        train_loss = float(np.mean(losses)) if losses else float("nan")
        if not np.isfinite(train_loss):
            raise TrainingDivergedError(epoch)
        val = _val_nrmse(model, x_va, t_va)
        history.append({"epoch": epoch, "train_loss": train_loss, "val_nrmse": val})
        if val < best_val:
            best_val = val
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            since_best = 0
        else:
            since_best += 1
            if cfg.patience and since_best >= cfg.patience:
                break

    model.load_state_dict(best_state)
    return model, history


def predict_row_values(model: SRModel, lr_values: np.ndarray,
                       hr_shape: tuple[int, int, int]) -> np.ndarray:
    """Super-resolve one complex LR field to the given HR shape."""
    s = _normalizer(lr_values)
    x = pos_embedding(row_to_stack(lr_values / s), model.cfg.mode)
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        pred = model(torch.as_tensor(x[None]).to(dtype))[0].numpy()
    return stack_to_values(pred.astype(np.float64) * s, hr_shape)


def _hr_grid(lr_grid: Grid3, ratio: int) -> Grid3:
    dims = [n * ratio if n > 1 else 1 for n in lr_grid.dims]
    return Grid3(nx=dims[0], ny=dims[1], nz=dims[2],
                 fov_x=lr_grid.fov_x, fov_y=lr_grid.fov_y, fov_z=lr_grid.fov_z)


def recover(model: SRModel, lr_sm: SystemMatrix, ratio: int) -> SystemMatrix:
    """Super-resolve every row; preserves row order."""
    if ratio != model.cfg.ratio:
        raise DomainError(f"model was built for ratio {model.cfg.ratio}, not {ratio}")
    grid = _hr_grid(lr_sm.grid, ratio)
    rows = [
        r.with_values(predict_row_values(model, r.values, grid.shape), grid)
        for r in lr_sm.rows
    ]
    return SystemMatrix(grid, tuple(rows), provenance="recovered")


def _interp_axis_coords(hr_n: int, ratio: int) -> np.ndarray:
    return np.arange(hr_n, dtype=np.float64) / ratio


def baseline_interpolate(lr_sm: SystemMatrix, ratio: int,
                         method: str = "trilinear") -> SystemMatrix:
    """Channel-wise spatial interpolation of real and imaginary parts.

    'nearest' rounds HR index / ratio to the closest LR sample;
    'zero-order' repeats each LR voxel ratio times (floor indexing);
    'trilinear' / 'tricubic' are order-1 / order-3 spline interpolation
    with edge clamping.
    """
    if method not in BASELINES:
        raise DomainError(f"unknown interpolation method {method!r}")
    grid = _hr_grid(lr_sm.grid, ratio)
    spatial = [d for d in range(3) if lr_sm.grid.shape[d] > 1]

    def interp(vals: np.ndarray) -> np.ndarray:
        sq = np.squeeze(vals)
        nd = sq.ndim
        if method == "zero-order":
            out = sq
            for ax in range(nd):
                out = np.repeat(out, ratio, axis=ax)
            return out.reshape(grid.shape)
        if method == "nearest":
            out = sq
            for ax in range(nd):
                n_lr = sq.shape[ax]
                idx = np.clip(np.round(_interp_axis_coords(n_lr * ratio, ratio)).astype(int),
                              0, n_lr - 1)
                out = np.take(out, idx, axis=ax)
            return out.reshape(grid.shape)
        order = 1 if method == "trilinear" else 3
        axes = [_interp_axis_coords(sq.shape[ax] * ratio, ratio) for ax in range(nd)]
        mesh = np.meshgrid(*axes, indexing="ij")
        coords = np.stack([m.ravel() for m in mesh])
        re = map_coordinates(sq.real, coords, order=order, mode="nearest")
        im = map_coordinates(sq.imag, coords, order=order, mode="nearest")
        hr_shape = tuple(sq.shape[ax] * ratio for ax in range(nd))
        return (re + 1j * im).reshape(hr_shape).reshape(grid.shape)

    rows = [r.with_values(interp(r.values), grid) for r in lr_sm.rows]
    return SystemMatrix(grid, tuple(rows), provenance="recovered")


# --- checkpoint format -------------------------------------------------

_CKPT_MAGIC = b"SRM1"
_CKPT_VERSION = 1


def save_checkpoint(path, model: SRModel) -> None:
    """Versioned binary checkpoint: header + float64 LE parameter array."""
    cfg = model.cfg
    header = struct.pack(
        "<4sHBBBBHHHHdd",
        _CKPT_MAGIC, _CKPT_VERSION,
        MODES.index(cfg.mode), cfg.ndim, cfg.ratio, UPSAMPLES.index(cfg.upsample),
        cfg.blocks, cfg.dense_stages, cfg.channels, cfg.growth,
        cfg.res_scale, cfg.negative_slope,
    )
    params = np.concatenate(
        [p.detach().numpy().astype("<f8").ravel() for p in model.parameters()]
    ) if model.parameter_count() else np.empty(0, dtype="<f8")
    with open(path, "wb") as f:
        f.write(header)
        f.write(struct.pack("<Q", params.size))
        f.write(params.tobytes())


def load_checkpoint(path) -> SRModel:
    with open(path, "rb") as f:
        head = f.read(struct.calcsize("<4sHBBBBHHHHdd"))
        (magic, version, mode_i, ndim, ratio, up_i,
         blocks, dense, channels, growth, res_scale, slope) = struct.unpack(
            "<4sHBBBBHHHHdd", head)
        if magic != _CKPT_MAGIC or version != _CKPT_VERSION:
            raise DomainError("not a recognized model checkpoint")
        count, = struct.unpack("<Q", f.read(8))
        params = np.frombuffer(f.read(count * 8), dtype="<f8").copy()
    cfg = SRConfig(mode=MODES[mode_i], ratio=ratio, ndim=ndim, blocks=blocks,
                   dense_stages=dense, channels=channels, growth=growth,
                   res_scale=res_scale, upsample=UPSAMPLES[up_i],
                   negative_slope=slope)
    model = SRModel(cfg)
    if model.parameter_count() != count:
        raise DomainError("checkpoint parameter count mismatch")
    offset = 0
    with torch.no_grad():
        for p in model.parameters():
            n = p.numel()
            p.copy_(torch.as_tensor(params[offset:offset + n].reshape(p.shape)))
            offset += n
    return model
