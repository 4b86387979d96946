"""featexport: run a small conv stereo backbone and write FMAP tensors.

Bridges CNN-style learned features into any consumer of the FMAP format;
the only contract with the matching pipeline is the file format itself.
"""
from .backbone import (Backbone, create_checkpoint, forward, load_backbone,
                       FEATURE_LAYER, MODEL_NAME)
from .export import ExportManifest, export_features, l2_normalize
from .fmapio import write_fmap

__version__ = "0.1.0"
