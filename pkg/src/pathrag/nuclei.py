"""Classical nuclei detection on the hematoxylin channel and the H&E gate."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels
from .imaging import RgbImage
from .stain import StainMatrix, compute_concentrations

# Ruifrok & Johnston H&E deconvolution vectors
DETECTION_BASIS = StainMatrix.from_vectors((0.650, 0.704, 0.286), (0.072, 0.990, 0.105))


@dataclass(frozen=True)
class DetectionParams:
    min_area: int = 10
    max_area: int = 5000
    pathology_threshold: int = 5

    def __post_init__(self):
        if self.min_area < 1 or self.max_area < self.min_area:
            raise ValueError("need 1 <= min_area <= max_area")
        if self.pathology_threshold < 0:
            raise ValueError("pathology_threshold must be non-negative")


@dataclass(frozen=True)
class Nucleus:
    centroid_x: float
    centroid_y: float
    area: int
    mean_h_od: float
    eccentricity: float = 0.0

    @property
    def feature(self) -> tuple[float, float, float]:
        return (float(self.area), self.mean_h_od, self.eccentricity)


class ImageLabel(str, enum.Enum):
    HE_PATHOLOGY = "HePathology"
    NON_PATHOLOGY = "NonPathology"


@dataclass(frozen=True)
class ImageClass:
    label: ImageLabel
    nuclei_count: int

    @property
    def is_pathology(self) -> bool:
        return self.label is ImageLabel.HE_PATHOLOGY

    def to_dict(self) -> dict:
        return {"label": self.label.value, "nuclei_count": self.nuclei_count}


def hematoxylin_channel(image) -> np.ndarray:
    """Per-pixel hematoxylin concentration under the fixed detection basis."""
    return compute_concentrations(image, DETECTION_BASIS)[..., 0]


def otsu_threshold(values: np.ndarray) -> int | None:
    """Otsu threshold of an 8-bit field; foreground is ``values > t``.

    Uses exact integer arithmetic so ties resolve deterministically toward
    the lower threshold. Returns None when the field has a single level.
    """
    hist = np.bincount(np.asarray(values, dtype=np.uint8).reshape(-1), minlength=256)
    counts = [int(c) for c in hist]
    total = sum(counts)
    total_sum = sum(i * c for i, c in enumerate(counts))
    best_t, best_num, best_den = None, 0, 1
    n0 = s0 = 0
    for t in range(255):
        n0 += counts[t]
        s0 += t * counts[t]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        num = (total * s0 - total_sum * n0) ** 2
        den = n0 * n1
        if best_t is None or num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def _scale_to_byte(field: np.ndarray) -> np.ndarray | None:
    peak = float(field.max()) if field.size else 0.0
    if peak <= 0.0:
        return None
    return np.floor(field / peak * 255.0 + 0.5).astype(np.uint8)


def detect_nuclei(image: RgbImage, params: DetectionParams | None = None) -> list[Nucleus]:
    """Detect nuclei as area-filtered 8-connected blobs of high hematoxylin.

    Pipeline: Otsu threshold on the byte-scaled hematoxylin field, one binary
    opening with a 3x3 cross, connected components, area window. The result
    is sorted by ``(centroid_y, centroid_x)``.
    """
    params = params or DetectionParams()
    h_field = hematoxylin_channel(image)
    scaled = _scale_to_byte(h_field)
    if scaled is None:
        return []
    t = otsu_threshold(scaled)
    if t is None:
        return []
    mask = kernels.binary_open_cross(scaled > t)
    stats = kernels.label_components(mask, h_field)

    nuclei = []
    for q in range(stats["area"].shape[0]):
        area = int(stats["area"][q])
        if area < params.min_area or area > params.max_area:
            continue
        mx = stats["sum_x"][q] / area
        my = stats["sum_y"][q] / area
        vxx = max(stats["sum_xx"][q] / area - mx * mx, 0.0)
        vyy = max(stats["sum_yy"][q] / area - my * my, 0.0)
        vxy = stats["sum_xy"][q] / area - mx * my
        spread = np.sqrt(((vxx - vyy) / 2.0) ** 2 + vxy * vxy)
        major = (vxx + vyy) / 2.0 + spread
        minor = max((vxx + vyy) / 2.0 - spread, 0.0)
        ecc = float(np.sqrt(max(1.0 - minor / major, 0.0))) if major > 0 else 0.0
        nuclei.append(
            Nucleus(float(mx), float(my), area, float(stats["sum_v"][q] / area), ecc)
        )
    nuclei.sort(key=lambda n: (n.centroid_y, n.centroid_x))
    return nuclei


def classify_nuclei(nuclei: list[Nucleus], threshold: int = 5) -> ImageClass:
    count = len(nuclei)
    label = ImageLabel.HE_PATHOLOGY if count >= threshold else ImageLabel.NON_PATHOLOGY
    return ImageClass(label, count)


def classify_image(image: RgbImage, params: DetectionParams | None = None) -> ImageClass:
    """H&E gate: pathology iff at least ``pathology_threshold`` nuclei are detected."""
    params = params or DetectionParams()
    return classify_nuclei(detect_nuclei(image, params), params.pathology_threshold)
