"""3x3 overlapping tiling, nuclei-count ranking and random patch selection."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .errors import ImageTooSmall, OutOfBounds
from .imaging import RgbImage

GRID = 3
OVERLAP = 0.2


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class Patch:
    index: int
    x: int
    y: int
    width: int
    height: int

    @property
    def row(self) -> int:
        return self.index // GRID

    @property
    def col(self) -> int:
        return self.index % GRID

    def contains(self, px: float, py: float) -> bool:
        return self.x <= px < self.x + self.width and self.y <= py < self.y + self.height


@dataclass(frozen=True)
class RankedPatch:
    patch: Patch
    nuclei_count: int
    rank: int

    def to_dict(self) -> dict:
        p = self.patch
        return {"index": p.index, "x": p.x, "y": p.y, "w": p.width, "h": p.height,
                "nuclei_count": self.nuclei_count, "rank": self.rank}


def axis_layout(length: int) -> tuple[int, list[int]]:
    """Patch extent and the three offsets along one axis.

    Three patches of extent ``e`` with 20% pairwise overlap span
    ``3e - 2 * 0.2e = 2.6e``, so ``e = round(L / 2.6)``; offsets are spread
    symmetrically so the last patch ends at ``L``.
    """
    extent = _round_half_up(length / (GRID - (GRID - 1) * OVERLAP))
    extent = max(1, min(extent, length))
    offsets = [_round_half_up(i * (length - extent) / (GRID - 1)) for i in range(GRID)]
    return extent, offsets


def tile_patches(width: int, height: int) -> list[Patch]:
    if width < GRID or height < GRID:
        raise ImageTooSmall(f"{width}x{height} image; both sides must be >= {GRID}")
    ex, xs = axis_layout(width)
    ey, ys = axis_layout(height)
    return [
        Patch(r * GRID + c, xs[c], ys[r], ex, ey) for r in range(GRID) for c in range(GRID)
    ]


def count_nuclei_in_patch(patch: Patch, nuclei) -> int:
    """Centroids inside the half-open rectangle ``[x, x+w) x [y, y+h)``."""
    return sum(1 for n in nuclei if patch.contains(n.centroid_x, n.centroid_y))


def rank_patches(patches, nuclei, top_k: int) -> list[RankedPatch]:
    if not 0 <= top_k <= len(patches):
        raise ValueError(f"top_k must be in [0, {len(patches)}]")
    nuclei = list(nuclei)
    counted = [(count_nuclei_in_patch(p, nuclei), p) for p in patches]
    counted.sort(key=lambda cp: (-cp[0], cp[1].index))
    return [RankedPatch(p, c, rank) for rank, (c, p) in enumerate(counted[:top_k])]


def random_patches(patches, top_k: int, seed: int) -> list[Patch]:
    """Draw ``top_k`` distinct patches with a seeded partial Fisher-Yates shuffle."""
    patches = list(patches)
    if not 0 <= top_k <= len(patches):
        raise ValueError(f"top_k must be in [0, {len(patches)}]")
    rng = random.Random(seed)
    order = list(range(len(patches)))
    for i in range(top_k):
        j = rng.randrange(i, len(order))
        order[i], order[j] = order[j], order[i]
    return [patches[i] for i in order[:top_k]]


def crop(image: RgbImage, patch: Patch) -> RgbImage:
    if (patch.x < 0 or patch.y < 0 or patch.width < 1 or patch.height < 1
            or patch.x + patch.width > image.width or patch.y + patch.height > image.height):
        raise OutOfBounds(f"patch {patch} outside {image.width}x{image.height} image")
    px = image.pixels[patch.y:patch.y + patch.height, patch.x:patch.x + patch.width]
    return RgbImage(np.array(px))
