"""Edge-driven hierarchical segmentation.

Pipeline: Gaussian smoothing, Sobel gradients, non-maximum suppression,
percentile double thresholding with hysteresis, edge dilation, connected
components, then greedy agglomerative merging of a score-weighted region
adjacency graph into a partition hierarchy whose leaves are single pixels.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError
from .games import EvalCache, ValueFunction, to_grayscale
from .hierarchy import HierarchyNode, PartitionHierarchy


@dataclass
class SegmentationConfig:
    sigma: float = 1.0
    gaussian_ksize: int = 5
    pct_lower: float = 75.0
    pct_upper: float = 90.0
    dilate_ksize: int = 2
    min_segment_size: int = 16
    fanout_target: int = 5
    max_depth: int = 6
    epsilon: Union[str, float] = "median"  # "median" or a fixed threshold
    rescore_on_merge: bool = True
    refine: bool = False  # split segments down to small groups before the pixel leaves
    refine_fanout: int = 2


@dataclass
class EdgeMap:
    edges: np.ndarray  # bool (H, W)
    t_lower: float = 0.0
    t_upper: float = 0.0
    pct_lower: float = 75.0
    pct_upper: float = 90.0


@dataclass
class Segment:
    id: int
    pixels: np.ndarray  # bool (H, W)
    score: Optional[float] = None

    def feature_mask(self) -> int:
        return _bool_to_int(self.pixels.ravel())


@dataclass
class SegmentGraph:
    scores: Dict[int, float]
    edges: Dict[Tuple[int, int], float]  # keyed by (min id, max id)


def _bool_to_int(flat: np.ndarray) -> int:
    packed = np.packbits(flat.astype(np.uint8), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def _shift(a: np.ndarray, dr: int, dc: int, fill):
    out = np.full_like(a, fill)
    h, w = a.shape
    rs, re = max(dr, 0), h + min(dr, 0)
    cs, ce = max(dc, 0), w + min(dc, 0)
    out[rs:re, cs:ce] = a[rs - dr : re - dr, cs - dc : ce - dc]
    return out


# --- Canny stages --------------------------------------------------------


def gaussian_kernel(sigma: float, ksize: int) -> np.ndarray:
    if ksize % 2 == 0 or ksize < 1:
        raise InvalidInputError(f"gaussian ksize must be odd, got {ksize}")
    if sigma <= 0:
        raise InvalidInputError(f"sigma must be positive, got {sigma}")
    x = np.arange(ksize, dtype=float) - (ksize - 1) / 2.0
    k = np.exp(-(x**2) / (2.0 * sigma**2))
    return k / k.sum()


def gaussian_smooth(img: np.ndarray, sigma: float = 1.0, ksize: int = 5) -> np.ndarray:
    """Separable Gaussian blur with edge-replicate padding."""
    k = gaussian_kernel(sigma, ksize)
    img = np.asarray(img, dtype=float)
    out = ndimage.correlate1d(img, k, axis=0, mode="nearest")
    return ndimage.correlate1d(out, k, axis=1, mode="nearest")


SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T


def sobel_gradients(img: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel magnitude and orientation (radians in [0, pi))."""
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise InvalidInputError("sobel_gradients expects a grayscale image")
    gx = ndimage.correlate(img, SOBEL_X, mode="nearest")
    gy = ndimage.correlate(img, SOBEL_Y, mode="nearest")
    mag = np.hypot(gx, gy)
    direction = np.mod(np.arctan2(gy, gx), np.pi)
    return mag, direction


_NMS_OFFSETS = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}


def non_max_suppression(mag: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Zero out pixels that are not local maxima along their gradient line.

    Directions are quantized to 4 bins (0, 45, 90, 135 degrees); ridge
    survivors are one pixel wide across the gradient.
    """
    if mag.shape != direction.shape:
        raise InvalidInputError("magnitude and direction grids differ in shape")
    deg = np.degrees(direction) % 180.0
    bins = np.zeros(mag.shape, dtype=np.int8)
    bins[(deg >= 22.5) & (deg < 67.5)] = 1
    bins[(deg >= 67.5) & (deg < 112.5)] = 2
    bins[(deg >= 112.5) & (deg < 157.5)] = 3
    keep = np.zeros(mag.shape, dtype=bool)
    for b, (dr, dc) in _NMS_OFFSETS.items():
        fwd = _shift(mag, -dr, -dc, 0.0)
        back = _shift(mag, dr, dc, 0.0)
        sel = bins == b
        keep |= sel & (mag >= fwd) & (mag >= back)
    out = np.where(keep & (mag > 0), mag, 0.0)
    return out


def double_threshold_hysteresis(
    thinned: np.ndarray,
    pct_lower: float = 75.0,
    pct_upper: float = 90.0,
    reference: Optional[np.ndarray] = None,
) -> EdgeMap:
    """Percentile double threshold plus 8-connected hysteresis tracking.

    Thresholds are percentiles of the nonzero magnitudes of ``reference``
    (the pre-thinning gradient magnitude when available, otherwise the
    thinned map itself); weak pixels survive only when chained to a strong
    pixel.  Thinning concentrates the survivors near the distribution's
    top, so thresholding against the full magnitude spread keeps ridge
    lines whole instead of puncturing them.
    """
    if not 0 <= pct_lower < pct_upper <= 100:
        raise InvalidInputError(
            f"need 0 <= pct_lower < pct_upper <= 100, got {pct_lower}/{pct_upper}"
        )
    if reference is None:
        reference = thinned
    # magnitudes below the relative floor are rounding residue from flat
    # regions, not ridges; drop them before taking percentiles
    floor = 1e-9 * float(reference.max(initial=0.0))
    nonzero = reference[reference > floor]
    if nonzero.size == 0:
        return EdgeMap(np.zeros(thinned.shape, dtype=bool), 0.0, 0.0, pct_lower, pct_upper)
    t_lower = float(np.percentile(nonzero, pct_lower))
    t_upper = float(np.percentile(nonzero, pct_upper))
    # relative slack so that magnitudes equal up to summation rounding are
    # thresholded identically (mirror-image gradients differ by ~1e-13)
    slack = 1e-9 * float(nonzero.max())
    thinned_floor = 1e-9 * float(thinned.max(initial=0.0))
    strong = thinned >= max(t_upper - slack, thinned_floor)
    weak = thinned >= max(t_lower - slack, thinned_floor)
    labels, k = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    keep_ids = np.unique(labels[strong & (labels > 0)])
    edges = np.isin(labels, keep_ids) & weak
    return EdgeMap(edges, t_lower, t_upper, pct_lower, pct_upper)


def dilate_edges(edge_map: EdgeMap, ksize: int = 2) -> EdgeMap:
    """Morphological dilation with a ksize x ksize element anchored top-left."""
    if ksize < 1:
        raise InvalidInputError(f"dilation ksize must be >= 1, got {ksize}")
    edges = edge_map.edges
    out = np.zeros_like(edges)
    for dr in range(ksize):
        for dc in range(ksize):
            out |= _shift(edges, dr, dc, False)
    return replace(edge_map, edges=out)


# --- components and region graph ----------------------------------------


def connected_components(
    edge_map: EdgeMap, image: np.ndarray, min_size: int = 16
) -> np.ndarray:
    """Label array of edge-delimited segments covering the whole image.

    4-connected components of non-edge pixels seed the segments; edge
    pixels are absorbed into the 4-adjacent segment with the nearest mean
    intensity, and components smaller than ``min_size`` are merged into
    their most-adjacent neighbor.  Labels are renumbered in scan order.
    """
    image = to_grayscale(image)
    edges = edge_map.edges
    h, w = edges.shape
    raw, k = ndimage.label(~edges, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]))
    if k == 0:
        return np.zeros((h, w), dtype=np.int64)
    labels = raw.astype(np.int64) - 1  # edge pixels become -1
    means = ndimage.mean(image, raw, index=np.arange(1, k + 1))

    # Absorb edge pixels by priority flood: always commit the globally best
    # pixel/segment match next, so a wavefront with a poor intensity match
    # cannot claim a pixel before a better-matching segment reaches it.
    steps = ((-1, 0), (1, 0), (0, -1), (0, 1))
    heap = []
    for r in range(h):
        for c in range(w):
            if labels[r, c] < 0:
                continue
            for dr, dc in steps:
                nr, nc = r + dr, c + dc
                if 0 <= nr < h and 0 <= nc < w and labels[nr, nc] < 0:
                    lab = int(labels[r, c])
                    heapq.heappush(
                        heap,
                        (abs(float(image[nr, nc]) - means[lab]), nr * w + nc, lab),
                    )
    while heap:
        diff, pix, lab = heapq.heappop(heap)
        r, c = divmod(pix, w)
        if labels[r, c] >= 0:
            continue
        labels[r, c] = lab
        for dr, dc in steps:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and labels[nr, nc] < 0:
                heapq.heappush(
                    heap,
                    (abs(float(image[nr, nc]) - means[lab]), nr * w + nc, lab),
                )
    if (labels < 0).any():
        # isolated edge-only region untouched by any wavefront
        labels[labels < 0] = 0

    labels = _merge_small(labels, min_size)
    return _renumber(labels)


def _renumber(labels: np.ndarray) -> np.ndarray:
    order = []
    seen = set()
    for v in labels.ravel():
        if v not in seen:
            seen.add(v)
            order.append(v)
    remap = {old: new for new, old in enumerate(order)}
    out = np.empty_like(labels)
    for old, new in remap.items():
        out[labels == old] = new
    return out


def _adjacency_counts(labels: np.ndarray) -> Dict[Tuple[int, int], int]:
    counts: Dict[Tuple[int, int], int] = {}
    for dr, dc in ((0, 1), (1, 0)):
        a = labels[: labels.shape[0] - dr, : labels.shape[1] - dc]
        b = labels[dr:, dc:]
        diff = a != b
        for x, y in zip(a[diff].ravel(), b[diff].ravel()):
            key = (int(min(x, y)), int(max(x, y)))
            counts[key] = counts.get(key, 0) + 1
    return counts


def _merge_small(labels: np.ndarray, min_size: int) -> np.ndarray:
    labels = labels.copy()
    while True:
        ids, counts = np.unique(labels, return_counts=True)
        if len(ids) <= 1:
            return labels
        small = [(c, i) for i, c in zip(ids, counts) if c < min_size]
        if not small:
            return labels
        small.sort()
        _, victim = small[0]
        adj = _adjacency_counts(labels)
        neighbors = [
            (cnt, -min(a, b), (a if b == victim else b))
            for (a, b), cnt in adj.items()
            if victim in (a, b)
        ]
        if not neighbors:
            return labels
        neighbors.sort(reverse=True)  # longest shared boundary, then smaller id
        target = neighbors[0][2]
        labels[labels == victim] = target


def segments_from_labels(labels: np.ndarray) -> List[Segment]:
    return [Segment(int(i), labels == i) for i in np.unique(labels)]


def score_segments(
    labels: np.ndarray, vf: ValueFunction, cache: Optional[EvalCache] = None
) -> Dict[int, float]:
    """Model score per segment: only that segment's pixels are retained."""
    cache = cache if cache is not None else EvalCache()
    ids = [int(i) for i in np.unique(labels)]
    masks = [_bool_to_int((labels == i).ravel()) for i in ids]
    values = cache.evaluate_many(vf, masks)
    return {i: float(v) for i, v in zip(ids, values)}


def build_adjacency_graph(labels: np.ndarray, scores: Dict[int, float]) -> SegmentGraph:
    """Region adjacency graph; edges join segments whose pixel sets touch
    within an 8-neighborhood, weighted by absolute score difference."""
    edges: Dict[Tuple[int, int], float] = {}
    h, w = labels.shape
    for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
        rs = slice(0, h - dr)
        cs = slice(max(-dc, 0), w - max(dc, 0))
        a = labels[rs, cs]
        b = labels[dr : h, slice(max(dc, 0), w - max(-dc, 0))]
        diff = a != b
        for x, y in zip(a[diff].ravel(), b[diff].ravel()):
            key = (int(min(x, y)), int(max(x, y)))
            if key not in edges:
                edges[key] = abs(scores[key[0]] - scores[key[1]])
    return SegmentGraph(dict(scores), edges)


def merge_level(
    labels: np.ndarray,
    scores: Dict[int, float],
    vf: Optional[ValueFunction] = None,
    cache: Optional[EvalCache] = None,
    epsilon: float = math.inf,
    target_count: int = 1,
    rescore: bool = True,
) -> Tuple[np.ndarray, Dict[int, float], int]:
    """One greedy agglomeration pass over the region adjacency graph.

    Repeatedly merges the minimum-weight edge while its weight stays within
    ``epsilon`` and more than ``target_count`` segments remain; ties break
    on the (min id, max id) pair.  Merged segments keep the smaller id and
    are rescored through ``vf`` unless ``rescore`` is off, in which case
    the area-weighted mean is inherited.  Returns the coarser label array,
    its scores, and the number of merges performed.
    """
    if epsilon < 0:
        raise InvalidInputError("epsilon must be nonnegative")
    if target_count < 1:
        raise InvalidInputError("target_count must be >= 1")
    labels = labels.copy()
    scores = dict(scores)
    cache = cache if cache is not None else EvalCache()
    merges = 0
    while True:
        ids = np.unique(labels)
        if len(ids) <= target_count:
            break
        graph = build_adjacency_graph(labels, scores)
        if not graph.edges:
            break
        (a, b), weight = min(graph.edges.items(), key=lambda kv: (kv[1], kv[0]))
        if weight > epsilon:
            break
        size_a = int((labels == a).sum())
        size_b = int((labels == b).sum())
        labels[labels == b] = a
        if rescore:
            if vf is None:
                raise InvalidInputError("rescore requires a value function")
            mask = _bool_to_int((labels == a).ravel())
            scores[a] = float(cache.evaluate_many(vf, [mask])[0])
        else:
            scores[a] = (size_a * scores[a] + size_b * scores[b]) / (size_a + size_b)
        del scores[b]
        merges += 1
    return labels, scores, merges


# --- hierarchy assembly --------------------------------------------------


@dataclass
class BuildResult:
    hierarchy: PartitionHierarchy
    level_labels: List[np.ndarray]  # coarse to fine, excluding root and pixels
    edge_map: EdgeMap
    config: SegmentationConfig
    cache_stats: dict = field(default_factory=dict)

    @property
    def metadata(self) -> dict:
        return {
            "pct_lower": self.edge_map.pct_lower,
            "pct_upper": self.edge_map.pct_upper,
            "t_lower": self.edge_map.t_lower,
            "t_upper": self.edge_map.t_upper,
            "dilate_ksize": self.config.dilate_ksize,
            "levels": len(self.level_labels),
        }


def canny_edges(image: np.ndarray, config: SegmentationConfig) -> EdgeMap:
    gray = to_grayscale(image)
    smoothed = gaussian_smooth(gray, config.sigma, config.gaussian_ksize)
    mag, direction = sobel_gradients(smoothed)
    thinned = non_max_suppression(mag, direction)
    em = double_threshold_hysteresis(
        thinned, config.pct_lower, config.pct_upper, reference=mag
    )
    return dilate_edges(em, config.dilate_ksize)


def _refine_pixels(pixels: List[int], width: int, fanout: int) -> HierarchyNode:
    """Split a segment's pixel list into a balanced spatial tree whose
    leaves are single pixels; keeps sibling families small enough for the
    attribution engines."""
    if len(pixels) == 1:
        return HierarchyNode(1 << pixels[0])
    rows = [p // width for p in pixels]
    cols = [p % width for p in pixels]
    if max(rows) - min(rows) >= max(cols) - min(cols):
        order = sorted(pixels, key=lambda p: (p // width, p % width))
    else:
        order = sorted(pixels, key=lambda p: (p % width, p // width))
    parts = min(fanout, len(order))
    chunk = [order[(len(order) * k) // parts : (len(order) * (k + 1)) // parts] for k in range(parts)]
    children = [_refine_pixels(c, width, fanout) for c in chunk if c]
    members = 0
    for c in children:
        members |= c.members
    return HierarchyNode(members, children)


def build_hierarchy(
    image: np.ndarray,
    vf: ValueFunction,
    config: Optional[SegmentationConfig] = None,
    cache: Optional[EvalCache] = None,
) -> BuildResult:
    """Full pipeline: edge-defined segments, attribution-weighted merging
    level by level, then a partition hierarchy down to pixel leaves.

    Per level the merge threshold defaults to the median of the current
    edge weights and merging also stops once the segment count reaches the
    configured fan-out target relative to the next level.
    """
    config = config or SegmentationConfig()
    image = np.asarray(image, dtype=float)
    if image.size == 0:
        raise InvalidInputError("zero-sized image")
    h, w = image.shape[:2]
    if vf.n != h * w:
        raise InvalidInputError(f"value function arity {vf.n} != pixel count {h * w}")
    cache = cache if cache is not None else EvalCache()

    em = canny_edges(image, config)
    labels = connected_components(em, image, config.min_segment_size)
    scores = score_segments(labels, vf, cache)

    level_labels = [labels]
    for _ in range(config.max_depth):
        count = len(np.unique(labels))
        if count <= 1:
            break
        graph = build_adjacency_graph(labels, scores)
        if not graph.edges:
            break
        if config.epsilon == "median":
            eps = float(np.median(sorted(graph.edges.values())))
        else:
            eps = float(config.epsilon)
        target = max(1, math.ceil(count / config.fanout_target))
        labels, scores, merges = merge_level(
            labels, scores, vf, cache, eps, target, config.rescore_on_merge
        )
        if merges == 0:
            break
        level_labels.insert(0, labels)

    hierarchy = _assemble(level_labels, image.shape[:2], config)
    return BuildResult(hierarchy, level_labels, em, config, cache.stats())


def _assemble(
    level_labels: List[np.ndarray], shape: Tuple[int, int], config: SegmentationConfig
) -> PartitionHierarchy:
    h, w = shape
    n = h * w

    def segment_node(labels_fine_chain: List[np.ndarray], seg_id: int, mask: np.ndarray) -> HierarchyNode:
        pixels = [int(p) for p in np.flatnonzero(mask.ravel())]
        members = 0
        for p in pixels:
            members |= 1 << p
        if labels_fine_chain:
            finer = labels_fine_chain[0]
            child_ids = sorted(int(i) for i in np.unique(finer[mask]))
            if len(child_ids) == 1 and (finer[mask] == child_ids[0]).all():
                same = (finer == child_ids[0])
                if (same == mask).all():
                    # identical segment one level down: skip the duplicate
                    return segment_node(labels_fine_chain[1:], child_ids[0], mask)
            children = [
                segment_node(labels_fine_chain[1:], cid, mask & (finer == cid))
                for cid in child_ids
            ]
            return HierarchyNode(members, children)
        if config.refine and len(pixels) > 1:
            return _refine_pixels(pixels, w, config.refine_fanout)
        return HierarchyNode(members, [HierarchyNode(1 << p) for p in pixels])

    coarsest = level_labels[0]
    finer_chain = level_labels[1:]
    top_ids = sorted(int(i) for i in np.unique(coarsest))
    full = (1 << n) - 1
    if len(top_ids) == 1:
        root = segment_node(finer_chain, top_ids[0], np.ones((h, w), dtype=bool))
        if root.members != full:
            raise InvalidInputError("segmentation does not cover the image")
        hierarchy = PartitionHierarchy(n, root)
    else:
        children = [
            segment_node(finer_chain, i, coarsest == i) for i in top_ids
        ]
        hierarchy = PartitionHierarchy(n, HierarchyNode(full, children))
    return PartitionHierarchy(n, hierarchy.normalized().root)
