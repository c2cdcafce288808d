"""Feature persistence, manifests and the synthetic generator."""

from .codec import (
    decode_features,
    encode_features,
    read_features,
    read_gt,
    write_features,
    write_gt,
)
from .manifest import load_dataset, parse_manifest, read_categories, write_manifest
from .models import NORMAL, Dataset, DatasetManifest, FeatureSequence, ManifestEntry
from .synthetic import (
    MANIFEST_FILE,
    generate_synthetic_dataset,
    nearest_centroid_scores,
    synthesize,
)

__all__ = [
    "NORMAL",
    "Dataset",
    "DatasetManifest",
    "FeatureSequence",
    "ManifestEntry",
    "MANIFEST_FILE",
    "encode_features",
    "decode_features",
    "read_features",
    "write_features",
    "read_gt",
    "write_gt",
    "load_dataset",
    "parse_manifest",
    "read_categories",
    "write_manifest",
    "generate_synthetic_dataset",
    "nearest_centroid_scores",
    "synthesize",
]
