"""Reflection parity of SM rows and the mirror-completion recovery.

Simulated rows are exactly even or odd (possibly after complex
conjugation) under per-axis index reversal of the cell-centered grid.
This module turns those relations into descriptors, measurable residuals,
and a measurement-saving completion: sample a fundamental domain (half a
line, a quadrant of a plane) and fill in the rest from mirror partners.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .core import (
    AXIS_TO_DIM,
    DomainError,
    Grid3,
    IncompleteDomainError,
    SMRow,
)

#: residual denominator guard so the zero row scores 0
EPS_NORM = 1e-30

EVEN = "even"
ODD = "odd"
CONJ_EVEN = "conj-even"
CONJ_ODD = "conj-odd"

_RULE_SIGN = {EVEN: 1.0, ODD: -1.0, CONJ_EVEN: 1.0, CONJ_ODD: -1.0}
_RULE_CONJ = {EVEN: False, ODD: False, CONJ_EVEN: True, CONJ_ODD: True}


@dataclass(frozen=True)
class ParityDescriptor:
    """Per-axis reflection rules for one SM row.

    ``axis_rules`` maps axis name ('x', 'y', 'z') to one of the rule
    constants; axes without a known rule are absent. ``derivation``
    records where the rules come from ('1D-rule', '2D-rule',
    'unknown-3D', 'unknown').
    """

    axis_rules: dict[str, str] = field(default_factory=dict)
    derivation: str = "unknown"

    def __post_init__(self):
        for axis, rule in self.axis_rules.items():
            if axis not in AXIS_TO_DIM:
                raise DomainError(f"unknown axis {axis!r}")
            if rule not in _RULE_SIGN:
                raise DomainError(f"unknown rule {rule!r}")

    def __hash__(self):
        return hash((tuple(sorted(self.axis_rules.items())), self.derivation))


def _sign_rule(sign: int, conj: bool) -> str:
    if conj:
        return CONJ_EVEN if sign > 0 else CONJ_ODD
    return EVEN if sign > 0 else ODD


def premise_holds(cycles: tuple[int, int, int]) -> bool:
    """True when the 2D drive has an odd cycle count on x and even on y,
    the premise under which the 2D reflection rules are derived."""
    return cycles[0] % 2 == 1 and cycles[1] % 2 == 0


def expected_parity(channel: str, k: int, dimensionality: int,
                    cycles: tuple[int, int, int] | None = None) -> ParityDescriptor:
    """Reflection rules for row (channel, k) of a 1D or 2D sequence.

    ``cycles`` are the per-axis drive cycle counts; when given for a 2D
    sequence they are checked against the derivation premise (odd on x,
    even on y) and a descriptor with no rules is returned if it fails.
    3D requests return an empty 'unknown-3D' descriptor.
    """
    if dimensionality == 3:
        return ParityDescriptor({}, derivation="unknown-3D")
    if dimensionality not in (1, 2):
        raise DomainError(f"unsupported dimensionality {dimensionality}")
    if k < 0:
        raise DomainError("freq_index must be >= 0")

    sgn_k = 1 if k % 2 == 0 else -1  # (-1)^k
    if dimensionality == 1:
        if channel != "x":
            return ParityDescriptor({}, derivation="unknown")
        # m(-r) = (-1)^(k+1) m(r): even about the origin for odd k
        return ParityDescriptor({"x": _sign_rule(-sgn_k, False)}, derivation="1D-rule")

    if cycles is not None and not premise_holds(cycles):
        return ParityDescriptor({}, derivation="unknown")
    if channel == "x":
        rules = {
            "x": _sign_rule(-sgn_k, False),   # (-1)^(k+1)
            "y": _sign_rule(-sgn_k, True),    # (-1)^(k+1), conjugated
        }
    elif channel == "y":
        rules = {
            "x": _sign_rule(sgn_k, False),    # (-1)^k
            "y": _sign_rule(sgn_k, True),     # (-1)^k, conjugated
        }
    else:
        return ParityDescriptor({}, derivation="unknown")
    return ParityDescriptor(rules, derivation="2D-rule")


def reflect_row(row: SMRow, axis: str) -> SMRow:
    """Index-reverse the row values along one axis (an involution)."""
    return row.with_values(np.flip(row.values, axis=AXIS_TO_DIM[axis]))


def _apply_rule(values: np.ndarray, axis: str, rule: str) -> np.ndarray:
    out = np.flip(values, axis=AXIS_TO_DIM[axis])
    if _RULE_CONJ[rule]:
        out = np.conj(out)
    return _RULE_SIGN[rule] * out


def symmetry_residual(row: SMRow, desc: ParityDescriptor) -> dict[str, float]:
    """Per-axis relative defect ||row - rule(reflect(row))|| / ||row||."""
    if not desc.axis_rules:
        raise DomainError("descriptor carries no axis rules")
    norm = max(np.linalg.norm(row.values), EPS_NORM)
    return {
        axis: float(np.linalg.norm(row.values - _apply_rule(row.values, axis, rule)) / norm)
        for axis, rule in desc.axis_rules.items()
    }


def fundamental_domain_mask(grid: Grid3, desc: ParityDescriptor) -> np.ndarray:
    """Boolean mask of a minimal voxel set from which mirror completion
    can rebuild the full row: the lower half along every ruled axis,
    including the symmetry-axis voxels for odd counts.

    On an n x n 2D grid with both axes ruled and n odd, the mask has
    ((n+1)/2)^2 entries.
    """
    if not desc.axis_rules:
        raise DomainError("descriptor carries no axis rules")
    mask = np.ones(grid.shape, dtype=bool)
    for axis in desc.axis_rules:
        dim = AXIS_TO_DIM[axis]
        n = grid.shape[dim]
        keep = np.arange(n) < (n + 1) // 2
        shape = [1, 1, 1]
        shape[dim] = n
        mask &= keep.reshape(shape)
    return mask


def measurement_count(grid: Grid3, desc: ParityDescriptor) -> int:
    """Number of samples needed for the fundamental domain."""
    return int(fundamental_domain_mask(grid, desc).sum())


def mirror_complete(partial: SMRow, known_mask: np.ndarray,
                    desc: ParityDescriptor) -> SMRow:
    """Fill unknown voxels by applying the axis rules to known mirror
    partners.

    Voxels reachable through several reflection paths are averaged,
    which keeps the completion well-defined on noisy (imperfectly
    symmetric) input. Raises IncompleteDomainError when some voxel has
    neither a measurement nor any known mirror partner.
    """
    if not desc.axis_rules:
        raise DomainError("descriptor carries no axis rules")
    known_mask = np.asarray(known_mask, dtype=bool)
    if known_mask.shape != partial.values.shape:
        raise DomainError("mask shape must match row shape")

    values = np.where(known_mask, partial.values, 0.0 + 0.0j)
    total = np.where(known_mask, partial.values, 0.0 + 0.0j)
    count = known_mask.astype(np.int64).copy()

    axes = sorted(desc.axis_rules)
    for r in range(1, len(axes) + 1):
        for combo in combinations(axes, r):
            img = values
            img_mask = known_mask
            for axis in combo:
                img = _apply_rule(img, axis, desc.axis_rules[axis])
                img_mask = np.flip(img_mask, axis=AXIS_TO_DIM[axis])
            add = img_mask & ~known_mask
            total[add] += img[add]
            count[add] += 1

    if np.any(count == 0):
        raise IncompleteDomainError("mask does not cover a fundamental domain")
    filled = total / count
    filled[known_mask] = partial.values[known_mask]
    return partial.with_values(filled)
