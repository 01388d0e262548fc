"""Macenko stain-basis estimation, colour unmixing and stain normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCovariance, InsufficientTissue
from .imaging import OD_CEILING, OdImage, RgbImage, od_to_intensity, rgb_to_od

MIN_TISSUE_PIXELS = 100


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(3)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("stain vector must be non-zero")
    return v / norm


@dataclass(frozen=True, eq=False)
class StainMatrix:
    """Two unit, non-negative OD-space stain vectors."""

    hematoxylin: np.ndarray
    eosin: np.ndarray

    def __post_init__(self):
        for name in ("hematoxylin", "eosin"):
            v = np.asarray(getattr(self, name), dtype=np.float64).reshape(3)
            if abs(np.linalg.norm(v) - 1.0) > 1e-6:
                raise ValueError(f"{name} vector must have unit norm")
            if np.any(v < 0):
                raise ValueError(f"{name} vector must be non-negative")
            v = v.copy()
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def from_vectors(cls, hematoxylin, eosin) -> "StainMatrix":
        """Build from arbitrary positive vectors, normalizing each to unit length."""
        return cls(_unit(hematoxylin), _unit(eosin))

    @property
    def matrix(self) -> np.ndarray:
        """3x2 array with hematoxylin in column 0 and eosin in column 1."""
        return np.stack([self.hematoxylin, self.eosin], axis=1)

    def to_dict(self) -> dict:
        return {"hematoxylin": self.hematoxylin.tolist(), "eosin": self.eosin.tolist()}


@dataclass(frozen=True)
class StainReference:
    matrix: StainMatrix
    max_concentrations: tuple[float, float]

    def __post_init__(self):
        mc = tuple(float(c) for c in self.max_concentrations)
        if len(mc) != 2 or min(mc) <= 0:
            raise ValueError("max_concentrations must be two positive values")
        object.__setattr__(self, "max_concentrations", mc)

    @classmethod
    def from_config(cls, cfg: dict | None) -> "StainReference":
        cfg = cfg or {}
        return cls(
            StainMatrix.from_vectors(
                cfg.get("hematoxylin", DEFAULT_H), cfg.get("eosin", DEFAULT_E)
            ),
            tuple(cfg.get("max_concentrations", DEFAULT_MAX_CONCENTRATIONS)),
        )


DEFAULT_H = (0.5626, 0.7201, 0.4062)
DEFAULT_E = (0.2159, 0.8012, 0.5581)
DEFAULT_MAX_CONCENTRATIONS = (1.9705, 1.0308)
DEFAULT_REFERENCE = StainReference(
    StainMatrix.from_vectors(DEFAULT_H, DEFAULT_E), DEFAULT_MAX_CONCENTRATIONS
)


def _od_pixels(image) -> np.ndarray:
    if isinstance(image, RgbImage):
        return rgb_to_od(image).values.reshape(-1, 3)
    if isinstance(image, OdImage):
        return image.values.reshape(-1, 3)
    raise TypeError(f"expected RgbImage or OdImage, got {type(image).__name__}")


def _orient(v: np.ndarray) -> np.ndarray:
    if v.sum() < 0:
        v = -v
    return _unit(np.clip(v, 0.0, None)) if np.any(v > 0) else _unit(np.abs(v))


def _order(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # hematoxylin absorbs more red than eosin
    if a[0] != b[0]:
        return (a, b) if a[0] > b[0] else (b, a)
    return (a, b) if tuple(a) >= tuple(b) else (b, a)


def estimate_stain_matrix(image, od_threshold: float = 0.15,
                          alpha_percentile: float = 1.0) -> StainMatrix:
    """Estimate the H&E basis of ``image`` with the Macenko percentile-angle method.

    Tissue pixels are those whose largest channel OD exceeds ``od_threshold``.
    Their OD cloud is projected on the plane of its two leading covariance
    eigenvectors, and the robust extreme angles (``alpha_percentile`` and
    ``100 - alpha_percentile``) are mapped back to stain vectors.

    Raises:
        InsufficientTissue: fewer than 100 tissue pixels.
        DegenerateCovariance: the tissue OD cloud has rank below 2.
    """
    od = _od_pixels(image)
    tissue = od[od.max(axis=1) > od_threshold]
    if tissue.shape[0] < MIN_TISSUE_PIXELS:
        raise InsufficientTissue(
            f"{tissue.shape[0]} pixels above OD {od_threshold}; need {MIN_TISSUE_PIXELS}"
        )
    eigvals, eigvecs = np.linalg.eigh(np.cov(tissue, rowvar=False))
    top = eigvals[2]
    if top <= 1e-12 or eigvals[1] <= 1e-8 * top:
        raise DegenerateCovariance("tissue optical densities span fewer than two directions")

    plane = eigvecs[:, [2, 1]].copy()
    for col in range(2):
        if plane[:, col].sum() < 0:
            plane[:, col] = -plane[:, col]
    proj = tissue @ plane
    angles = np.arctan2(proj[:, 1], proj[:, 0])
    lo, hi = np.percentile(angles, [alpha_percentile, 100.0 - alpha_percentile])
    v_lo = _orient(plane @ np.array([np.cos(lo), np.sin(lo)]))
    v_hi = _orient(plane @ np.array([np.cos(hi), np.sin(hi)]))
    h, e = _order(v_lo, v_hi)
    return StainMatrix(h, e)


def compute_concentrations(image, matrix: StainMatrix) -> np.ndarray:
    """Least-squares unmixing; returns an ``(H, W, 2)`` non-negative concentration field.

    Accepts an :class:`RgbImage` or an :class:`OdImage` (the latter skips
    8-bit quantization, which matters for exact synthetic checks).
    """
    od = _od_pixels(image)
    conc = od @ np.linalg.pinv(matrix.matrix).T
    np.clip(conc, 0.0, None, out=conc)
    return conc.reshape(image.height, image.width, 2)


def normalize_stains(image: RgbImage, reference: StainReference = DEFAULT_REFERENCE,
                     od_threshold: float = 0.15, alpha_percentile: float = 1.0) -> RgbImage:
    """Re-render ``image`` in the reference stain basis and concentration scale."""
    source = estimate_stain_matrix(image, od_threshold, alpha_percentile)
    conc = compute_concentrations(image, source).reshape(-1, 2)
    source_max = np.percentile(conc, 99, axis=0)
    target_max = np.asarray(reference.max_concentrations)
    scale = np.where(source_max > 1e-12, target_max / np.maximum(source_max, 1e-12), 1.0)
    od = (conc * scale) @ reference.matrix.matrix.T
    np.clip(od, 0.0, OD_CEILING, out=od)
    return RgbImage(od_to_intensity(od).reshape(image.height, image.width, 3))
