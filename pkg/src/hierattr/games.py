"""Coalition masks, value functions and the memoizing evaluation layer.

A coalition over ``n`` features is a plain Python int used as a bit vector:
bit ``i`` set means feature ``i`` is retained.  Value functions map such a
mask to a float and are required to be pure and deterministic; every engine
in this package talks to models exclusively through this interface.
"""

from __future__ import annotations

import threading
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import InvalidInputError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def full_mask(n: int) -> int:
    """Mask with all ``n`` features retained."""
    return (1 << n) - 1


def mask_from_indices(indices: Iterable[int], n: int) -> int:
    mask = 0
    for i in indices:
        if not 0 <= i < n:
            raise InvalidInputError(f"feature index {i} out of range [0, {n})")
        mask |= 1 << i
    return mask


def indices_from_mask(mask: int) -> list[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def popcount(mask: int) -> int:
    return int(mask).bit_count()


def mask_to_bool(mask: int, n: int) -> np.ndarray:
    """Expand a bitmask into a boolean vector of length ``n``."""
    nbytes = (n + 7) // 8
    raw = int(mask).to_bytes(nbytes, "little")
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
    return bits[:n].astype(bool)


def masks_to_bool(masks: Sequence[int], n: int) -> np.ndarray:
    """Expand many bitmasks into a (len(masks), n) boolean matrix."""
    nbytes = (n + 7) // 8
    raw = b"".join(int(m).to_bytes(nbytes, "little") for m in masks)
    bits = np.unpackbits(
        np.frombuffer(raw, dtype=np.uint8).reshape(len(masks), nbytes),
        axis=1,
        bitorder="little",
    )
    return bits[:, :n].astype(bool)


class ValueFunction:
    """Deterministic pure mapping from coalition mask to a 64-bit real.

    ``fn`` receives an int bitmask.  ``batch_fn``, when given, receives a
    list of masks and returns a float array; engines use it to amortize
    evaluation cost, and it must agree with ``fn`` bit for bit.

    Stochastic scorers are rejected by contract: callers must only wrap
    deterministic functions here, this is not detected at runtime.
    """

    def __init__(
        self,
        n: int,
        fn: Callable[[int], float],
        batch_fn: Optional[Callable[[Sequence[int]], np.ndarray]] = None,
    ):
        if n < 1:
            raise InvalidInputError(f"need at least one feature, got n={n}")
        self.n = n
        self._fn = fn
        self._batch_fn = batch_fn

    def _check(self, mask: int) -> None:
        if not 0 <= mask < (1 << self.n):
            raise InvalidInputError(
                f"mask {mask:#x} does not fit a {self.n}-feature game"
            )

    def __call__(self, mask: int) -> float:
        self._check(mask)
        return float(self._fn(mask))

    def evaluate_many(self, masks: Sequence[int]) -> np.ndarray:
        for m in masks:
            self._check(m)
        if self._batch_fn is not None:
            return np.asarray(self._batch_fn(masks), dtype=float)
        return np.array([float(self._fn(m)) for m in masks], dtype=float)


class EvalCache:
    """Memo table over coalition masks with instrumentation counters.

    The cache key is the raw mask bit pattern.  Counters: ``total_requests``
    counts every lookup, ``distinct_calls`` counts unique masks actually
    evaluated.  Safe for concurrent use; a single lock serializes access,
    which is enough to keep each distinct mask evaluated exactly once.
    """

    def __init__(self):
        self._values: dict[int, float] = {}
        self.total_requests = 0
        self._lock = threading.Lock()

    @property
    def distinct_calls(self) -> int:
        return len(self._values)

    def stats(self) -> dict:
        return {
            "distinct_calls": self.distinct_calls,
            "total_requests": self.total_requests,
        }

    def evaluate(self, vf: ValueFunction, mask: int) -> float:
        with self._lock:
            self.total_requests += 1
            try:
                return self._values[mask]
            except KeyError:
                pass
            value = vf(mask)
            self._values[mask] = value
            return value

    def evaluate_many(self, vf: ValueFunction, masks: Sequence[int]) -> np.ndarray:
        """Vectorized lookup; missing masks are evaluated in one batch."""
        with self._lock:
            self.total_requests += len(masks)
            missing, seen = [], set()
            for m in masks:
                if m not in self._values and m not in seen:
                    seen.add(m)
                    missing.append(m)
            if missing:
                values = vf.evaluate_many(missing)
                for m, v in zip(missing, values):
                    self._values[m] = float(v)
            return np.array([self._values[m] for m in masks], dtype=float)


def cached_evaluate(vf: ValueFunction, cache: EvalCache, mask: int) -> float:
    """Evaluate ``vf`` on ``mask`` through ``cache``."""
    return cache.evaluate(vf, mask)


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Collapse an (H, W, 3) image to (H, W) with standard luma weights."""
    image = np.asarray(image, dtype=float)
    if image.ndim == 2:
        return image
    if image.ndim == 3 and image.shape[2] == 3:
        r, g, b = LUMA_WEIGHTS
        return r * image[..., 0] + g * image[..., 1] + b * image[..., 2]
    if image.ndim == 3 and image.shape[2] == 1:
        return image[..., 0]
    raise InvalidInputError(f"unsupported image shape {image.shape}")


class MaskedImageGame(ValueFunction):
    """Image game: pixels outside the coalition are replaced by a baseline.

    Features are pixels in row-major order (index = row * W + col); for
    multi-channel images all channels of a pixel are masked together.  The
    baseline is the per-channel image mean or zero.
    """

    def __init__(self, image: np.ndarray, baseline_mode: str, scorer: Callable):
        image = np.asarray(image, dtype=float)
        if image.size == 0:
            raise InvalidInputError("zero-sized image")
        if image.ndim not in (2, 3):
            raise InvalidInputError(f"expected 2D or 3D image, got shape {image.shape}")
        if baseline_mode == "mean":
            if image.ndim == 2:
                baseline = np.full((), image.mean())
            else:
                baseline = image.mean(axis=(0, 1))
        elif baseline_mode == "zero":
            baseline = np.zeros(() if image.ndim == 2 else image.shape[2])
        else:
            raise InvalidInputError(f"unknown baseline mode {baseline_mode!r}")

        self.image = image
        self.baseline = baseline
        self.baseline_mode = baseline_mode
        self.scorer = scorer
        h, w = image.shape[:2]
        self.height, self.width = h, w
        self._flat = image.reshape(h * w, -1)  # (n, channels) view
        super().__init__(h * w, self._evaluate, self._evaluate_many)

    def masked_image(self, mask: int) -> np.ndarray:
        keep = mask_to_bool(mask, self.n)[:, None]
        flat = np.where(keep, self._flat, np.atleast_1d(self.baseline)[None, :])
        return flat.reshape(self.image.shape)

    def _evaluate(self, mask: int) -> float:
        out = np.asarray(self.scorer(self.masked_image(mask)), dtype=float)
        if out.size != 1:
            raise InvalidInputError("scorer must return a scalar for a single image")
        return float(out.ravel()[0])

    def _evaluate_many(self, masks: Sequence[int]) -> np.ndarray:
        keep = masks_to_bool(masks, self.n)[:, :, None]
        flat = np.where(keep, self._flat[None], np.atleast_1d(self.baseline)[None, None, :])
        batch = flat.reshape((len(masks),) + self.image.shape)
        try:
            scores = np.asarray(self.scorer(batch), dtype=float)
            if scores.shape == (len(masks),):
                return scores
        except Exception:
            pass
        # scorer does not understand batches; fall back to one call per mask
        return np.array(
            [float(np.asarray(self.scorer(b), dtype=float).ravel()[0]) for b in batch],
            dtype=float,
        )


def make_masked_image_game(
    image: np.ndarray, baseline_mode: str = "mean", scorer: Callable = None
) -> MaskedImageGame:
    """Build the pixel-masking value function for ``image``.

    ``scorer`` maps a full image array (or a batch with a leading axis) to a
    real score.  ``baseline_mode`` is ``"mean"`` (per-channel image mean,
    the default) or ``"zero"``.
    """
    if scorer is None:
        raise InvalidInputError("scorer is required")
    return MaskedImageGame(image, baseline_mode, scorer)
