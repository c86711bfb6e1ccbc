"""Explanation-quality metrics against ground-truth masks and boxes.

Definitions (all parameters are echoed in the report so runs stay
comparable): EBPG is the share of positive attribution energy inside the
mask; mIoU and F1 binarize the attribution map by keeping as many top
pixels as the mask has positives; Bbox keeps as many top pixels as the box
has area and reports the fraction landing inside; AUC is the rank
probability that a mask-positive pixel outranks a mask-negative one; AOPC
removes the highest-attributed pixels first and averages the score drop.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.stats import rankdata

from .errors import InvalidInputError
from .games import EvalCache, MaskedImageGame, full_mask, mask_from_indices

CSV_FIELDS = ("ebpg", "miou", "bbox", "f1", "auc", "aopc")


@dataclass
class MetricsReport:
    ebpg: float = float("nan")
    miou: float = float("nan")
    bbox: float = float("nan")
    f1: float = float("nan")
    auc: float = float("nan")
    aopc: float = float("nan")
    parameters: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out = {k: getattr(self, k) for k in CSV_FIELDS}
        out["parameters"] = self.parameters
        return out

    def to_csv_row(self) -> str:
        return ",".join(f"{getattr(self, k):.10g}" for k in CSV_FIELDS)

    @staticmethod
    def csv_header() -> str:
        return ",".join(CSV_FIELDS)


def _check_shapes(attr: np.ndarray, mask: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    attr = np.asarray(attr, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if attr.shape != mask.shape:
        raise InvalidInputError(f"shape mismatch: attr {attr.shape} vs mask {mask.shape}")
    return attr, mask


def _top_k_selection(attr: np.ndarray, k: int) -> np.ndarray:
    """Boolean selection of the k highest-attribution pixels; ties at the
    cut break by scan order (stable sort)."""
    flat = attr.ravel()
    order = np.argsort(-flat, kind="stable")
    sel = np.zeros(flat.size, dtype=bool)
    sel[order[:k]] = True
    return sel.reshape(attr.shape)


def ebpg(attr: np.ndarray, mask: np.ndarray) -> float:
    """Positive attribution energy inside the mask over total positive energy."""
    attr, mask = _check_shapes(attr, mask)
    pos = np.clip(attr, 0.0, None)
    total = pos.sum()
    if total <= 0.0:
        return 0.0
    return float(pos[mask].sum() / total)


def miou(attr: np.ndarray, mask: np.ndarray) -> float:
    """Intersection-over-union of the area-matched binarization with the mask."""
    attr, mask = _check_shapes(attr, mask)
    k = int(mask.sum())
    if k == 0:
        raise InvalidInputError("ground-truth mask has no positive pixels")
    pred = _top_k_selection(attr, k)
    inter = (pred & mask).sum()
    union = (pred | mask).sum()
    return float(inter / union)


def bbox_score(attr: np.ndarray, bbox: Tuple[int, int, int, int]) -> float:
    """Fraction of the top-(box area) attribution pixels inside the box.

    The box is (x0, y0, x1, y1), inclusive corners.
    """
    attr = np.asarray(attr, dtype=float)
    x0, y0, x1, y1 = bbox
    h, w = attr.shape
    if not (0 <= x0 <= x1 < w and 0 <= y0 <= y1 < h):
        raise InvalidInputError(f"degenerate or out-of-bounds bbox {bbox} for {attr.shape}")
    inside = np.zeros(attr.shape, dtype=bool)
    inside[y0 : y1 + 1, x0 : x1 + 1] = True
    n = int(inside.sum())
    pred = _top_k_selection(attr, n)
    return float((pred & inside).sum() / n)


def f1_and_auc(attr: np.ndarray, mask: np.ndarray) -> Tuple[float, float]:
    """F1 of the area-matched binarization and the rank AUC (ties count 1/2)."""
    attr, mask = _check_shapes(attr, mask)
    k = int(mask.sum())
    neg = mask.size - k
    if k == 0 or neg == 0:
        raise InvalidInputError("mask must contain both classes")
    pred = _top_k_selection(attr, k)
    tp = int((pred & mask).sum())
    f1 = 2.0 * tp / (pred.sum() + k)
    ranks = rankdata(attr.ravel())
    auc = (ranks[mask.ravel()].sum() - k * (k + 1) / 2.0) / (k * neg)
    return float(f1), float(auc)


def aopc(
    game: MaskedImageGame,
    attr: np.ndarray,
    max_fraction: float = 0.1,
    steps: int = 10,
    cache: Optional[EvalCache] = None,
) -> float:
    """Mean score drop when masking the most relevant pixels first.

    Step k removes the top round(k/steps * max_fraction * pixels)
    attribution pixels (to the game's own baseline) and compares against
    the unperturbed score.
    """
    if steps < 1:
        raise InvalidInputError(f"steps must be >= 1, got {steps}")
    attr = np.asarray(attr, dtype=float)
    n = game.n
    if attr.size != n:
        raise InvalidInputError(f"attribution size {attr.size} != game arity {n}")
    cache = cache if cache is not None else EvalCache()
    order = np.argsort(-attr.ravel(), kind="stable")
    everything = full_mask(n)
    base = cache.evaluate(game, everything)
    masks = []
    for k in range(1, steps + 1):
        removed = int(round(k / steps * max_fraction * n))
        drop = mask_from_indices((int(i) for i in order[:removed]), n)
        masks.append(everything & ~drop)
    values = cache.evaluate_many(game, masks)
    return float(np.mean(base - values))


def evaluate_all(
    attr: np.ndarray,
    mask: Optional[np.ndarray] = None,
    bbox: Optional[Tuple[int, int, int, int]] = None,
    game: Optional[MaskedImageGame] = None,
    max_fraction: float = 0.1,
    steps: int = 10,
) -> MetricsReport:
    """Compute every applicable metric and record the parameters used."""
    report = MetricsReport(
        parameters={
            "binarization": "area_matched_top_k",
            "max_fraction": max_fraction,
            "steps": steps,
        }
    )
    if mask is not None:
        report.ebpg = ebpg(attr, mask)
        report.miou = miou(attr, mask)
        report.f1, report.auc = f1_and_auc(attr, mask)
    if bbox is not None:
        report.bbox = bbox_score(attr, bbox)
        report.parameters["bbox"] = list(bbox)
    if game is not None:
        report.aopc = aopc(game, attr, max_fraction, steps)
    return report
