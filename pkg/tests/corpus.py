"""Small deterministic image/question corpus for end-to-end runs."""

import json
from pathlib import Path

import numpy as np

from pathrag.imaging import RgbImage, od_to_intensity, save_image
from synth import REF_E, REF_H, spaced_centers


def tissue_image(seed, size, n_nuclei, radius=6):
    """Eosin-stained field with ``n_nuclei`` hematoxylin-dense disks and mild noise."""
    rng = np.random.default_rng(seed)
    w, h = size
    centers = spaced_centers(n_nuclei, rng, size)
    yy, xx = np.mgrid[0:h, 0:w]
    ce = rng.uniform(0.2, 0.5, size=(h, w))
    ch = rng.uniform(0.0, 0.1, size=(h, w))
    for cx, cy in centers:
        inside = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2
        ch[inside] = rng.uniform(0.9, 1.2, size=int(inside.sum()))
        ce[inside] = 0.1
    od = ch[..., None] * REF_H + ce[..., None] * REF_E
    return RgbImage(od_to_intensity(od)), centers


def gray_image(size):
    """Unstained grayscale gradient, the kind of figure the gate must send around."""
    w, h = size
    ramp = (60 + 150 * np.arange(w) / (w - 1)).astype(np.uint8)
    return RgbImage(np.repeat(np.tile(ramp, (h, 1))[..., None], 3, axis=2))


IMAGES = {
    "tissue_a.png": lambda: tissue_image(11, (256, 256), 12)[0],
    "figure_b.png": lambda: gray_image((240, 180)),
    "tissue_c.png": lambda: tissue_image(12, (300, 200), 9)[0],
}

QUESTIONS = [
    ("a1", "tissue_a.png", "what is cut in cross-section?", "image glands 256x256"),
    ("a2", "tissue_a.png", "what are the dark structures?", "reason over answers"),
    ("b1", "figure_b.png", "what does this figure show?", "image 240x180"),
    ("b2", "figure_b.png", "where is the lesion?", "description of the lesion"),
    ("c1", "tissue_c.png", "what is present in the stroma?", "nuclei from image"),
    ("c2", "tissue_c.png", "what pattern do the cells form?", "answers over cells"),
]


def build_corpus(directory) -> Path:
    """Write the images and ``dataset.jsonl`` into ``directory``; return the dataset path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, make in IMAGES.items():
        save_image(make(), directory / name)
    dataset = directory / "dataset.jsonl"
    with open(dataset, "w", encoding="utf-8") as fh:
        for sid, image, question, answer in QUESTIONS:
            fh.write(json.dumps({"id": sid, "image": image, "question": question,
                                 "answer": answer}) + "\n")
    return dataset
