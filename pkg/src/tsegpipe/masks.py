"""Run-length encoded binary masks.

Wire format: row-major scan, alternating run counts starting with the
zero run (so a mask whose first pixel is set encodes a leading 0).
Counts must sum to width*height.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MaskError(ValueError):
    pass


def rle_encode(mask: np.ndarray) -> list[int]:
    """Encode a 2-D boolean mask; inverse of :func:`rle_decode`."""
    flat = np.asarray(mask).astype(bool).ravel()
    if flat.size == 0:
        return []
    changes = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate([[0], changes, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs = [0] + runs
    return [int(r) for r in runs]


def rle_decode(rle: list[int], width: int, height: int) -> np.ndarray:
    """Decode to a (height, width) boolean array."""
    total = width * height
    runs = np.asarray(rle, dtype=np.int64)
    if runs.size and runs.min() < 0:
        raise MaskError("negative run length")
    if int(runs.sum()) != total:
        raise MaskError(f"RLE sums to {int(runs.sum())}, expected {total}")
    flat = np.zeros(total, dtype=bool)
    pos = 0
    val = False
    for r in runs:
        if val:
            flat[pos:pos + r] = True
        pos += r
        val = not val
    return flat.reshape(height, width)


@dataclass(frozen=True)
class MaskProposal:
    """One 2-D instance mask proposed for one rendered view."""

    view_tag: str
    rle: tuple
    width: int
    height: int
    score: float

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise MaskError(f"score {self.score} outside [0, 1]")
        object.__setattr__(self, "rle", tuple(int(r) for r in self.rle))
        if sum(self.rle) != self.width * self.height:
            raise MaskError("RLE does not cover width*height")

    @staticmethod
    def from_mask(view_tag: str, mask: np.ndarray, score: float) -> "MaskProposal":
        h, w = mask.shape
        return MaskProposal(view_tag=view_tag, rle=tuple(rle_encode(mask)),
                            width=w, height=h, score=score)

    def decode(self) -> np.ndarray:
        return rle_decode(list(self.rle), self.width, self.height)

    def sort_key(self):
        # canonical client-side order: score descending, then RLE ascending
        return (-self.score, self.rle)


def canonical_order(proposals) -> list[MaskProposal]:
    """Service responses are normalized to this order so downstream fusion
    never depends on service nondeterminism."""
    return sorted(proposals, key=MaskProposal.sort_key)
