"""Evaluation metrics: NRMSE, PSNR, SSIM, and benchmark report assembly.

NRMSE normalizes the Frobenius-norm error by the modulus range of the
reference, so complex SM rows and real phantoms share one definition.
PSNR/SSIM use the standard formulas (peak from the reference maximum;
SSIM with a uniform 7-wide window and K1 = 0.01, K2 = 0.03).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter

from .core import DegenerateRangeError, DomainError, Phantom, SMRow

#: sentinel PSNR for an exact match
PSNR_CAP_DB = 99.0


def _field(obj) -> np.ndarray:
    if isinstance(obj, SMRow):
        return obj.values
    if isinstance(obj, Phantom):
        return obj.concentration
    return np.asarray(obj)


def nrmse(estimate, truth) -> float:
    """||estimate - truth||_F / (max|truth| - min|truth|)."""
    est = _field(estimate)
    ref = _field(truth)
    if est.shape != ref.shape:
        raise DomainError(f"shape mismatch {est.shape} vs {ref.shape}")
    mod = np.abs(ref)
    rng = float(mod.max() - mod.min())
    if rng <= 0:
        raise DegenerateRangeError("reference has constant modulus")
    return float(np.linalg.norm(est - ref) / rng)


def psnr(estimate, truth) -> float:
    """10*log10(peak^2 / MSE) in dB, capped at 99 dB for exact matches."""
    est = np.real(_field(estimate)).astype(np.float64)
    ref = np.real(_field(truth)).astype(np.float64)
    if est.shape != ref.shape:
        raise DomainError(f"shape mismatch {est.shape} vs {ref.shape}")
    mse = float(np.mean((est - ref) ** 2))
    peak = float(ref.max())
    if mse <= 0:
        return PSNR_CAP_DB
    val = 10.0 * np.log10(peak**2 / mse)
    return float(min(val, PSNR_CAP_DB))


def ssim(estimate, truth, window: int = 7, k1: float = 0.01, k2: float = 0.03,
         shared_range: bool = False) -> float:
    """Mean local SSIM with a uniform window over the non-singleton axes.

    The dynamic range is max - min of the reference (or of both fields
    when shared_range is set, which makes the metric symmetric).
    """
    est = np.real(_field(estimate)).astype(np.float64)
    ref = np.real(_field(truth)).astype(np.float64)
    if est.shape != ref.shape:
        raise DomainError(f"shape mismatch {est.shape} vs {ref.shape}")
    est = np.squeeze(est)
    ref = np.squeeze(ref)
    if est.ndim == 0 or min(est.shape) < window:
        raise DomainError(f"spatial dims {est.shape} smaller than window {window}")

    if shared_range:
        lo = min(est.min(), ref.min())
        hi = max(est.max(), ref.max())
    else:
        lo, hi = ref.min(), ref.max()
    drange = hi - lo
    if drange <= 0:
        raise DegenerateRangeError("reference has zero dynamic range")
    c1 = (k1 * drange) ** 2
    c2 = (k2 * drange) ** 2

    def mean(a):
        return uniform_filter(a, size=window, mode="reflect")

    mu_e, mu_r = mean(est), mean(ref)
    var_e = mean(est * est) - mu_e**2
    var_r = mean(ref * ref) - mu_r**2
    cov = mean(est * ref) - mu_e * mu_r
    num = (2 * mu_e * mu_r + c1) * (2 * cov + c2)
    den = (mu_e**2 + mu_r**2 + c1) * (var_e + var_r + c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class MetricReport:
    """Metrics for one (method, ratio) benchmark entry."""

    method: str
    ratio: int
    seed: int
    per_row_nrmse: tuple[float, ...] = ()
    mean_nrmse: float = float("nan")
    psnr_db: float = float("nan")
    ssim: float = float("nan")
    truth_id: str = ""

    def __post_init__(self):
        if self.per_row_nrmse:
            object.__setattr__(self, "mean_nrmse", float(np.mean(self.per_row_nrmse)))


def sm_nrmse_report(method: str, ratio: int, seed: int,
                    estimate_rows, truth_rows) -> MetricReport:
    """Per-row NRMSE of an estimated SM against ground truth."""
    est = list(estimate_rows)
    ref = list(truth_rows)
    if len(est) != len(ref):
        raise DomainError("row counts differ")
    vals = tuple(nrmse(e, t) for e, t in zip(est, ref))
    return MetricReport(method, ratio, seed, per_row_nrmse=vals)


def benchmark_report(reports) -> str:
    """CSV table, one row per (method, ratio), sorted by (ratio, method)."""
    reports = list(reports)
    truths = {r.truth_id for r in reports}
    if len(truths) > 1:
        raise DomainError(f"mixed truths in one report: {sorted(truths)}")
    lines = ["method,ratio,seed,mean_nrmse,psnr_db,ssim"]
    for r in sorted(reports, key=lambda r: (r.ratio, r.method, r.seed)):
        lines.append(
            f"{r.method},{r.ratio},{r.seed},{r.mean_nrmse:.8g},{r.psnr_db:.8g},{r.ssim:.8g}"
        )
    return "\n".join(lines) + "\n"
