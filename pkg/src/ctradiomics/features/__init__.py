from .discretize import DiscretizationConfig, GrayImage, discretize
from .extract import (
    PUBLISHED_TOTALS,
    ExtractionConfig,
    FeatureVector,
    expected_feature_count,
    extract_all,
    feature_keys,
    image_features,
)
from .firstorder import first_order
from .registry import CLASSES, feature_key, split_key
from .shape import shape_features
from .table import FeatureTable, read_csv, write_csv
from .texture import (
    glcm_features,
    gldm_features,
    glrlm_features,
    glszm_features,
    ngtdm_features,
)

__all__ = [
    "CLASSES", "PUBLISHED_TOTALS", "DiscretizationConfig", "ExtractionConfig",
    "FeatureTable", "FeatureVector", "GrayImage", "discretize", "expected_feature_count",
    "extract_all", "feature_key", "feature_keys", "first_order", "glcm_features",
    "gldm_features", "glrlm_features", "glszm_features", "image_features", "ngtdm_features",
    "read_csv", "shape_features", "split_key", "write_csv",
]
