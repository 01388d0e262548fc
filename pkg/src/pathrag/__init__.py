"""Nuclei-guided patch retrieval for open-ended pathology VQA.

Stages: stain normalization, classical nuclei detection and the H&E gate,
KNN cell graph, 3x3 overlapping tiling with nuclei-count ranking, per-patch
queries to a multimodal answerer, text-reasoner aggregation, and recall
evaluation with paired bootstrap.
"""

__version__ = "0.1.0"
