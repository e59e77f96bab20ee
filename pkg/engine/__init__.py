from engine.manifest import AtlasRecord, CaseRecord, DatasetManifest, load_manifest, save_manifest
from engine.splitting import DatasetSplit, split_sizes, split_dataset, precompute_band
from engine.direct import DirectResult, optimize_direct
from engine.training import TrainConfig, TrainingResult, train_amortized
from engine.inference import register_case, segment_case, save_segmentation

__all__ = [
    "AtlasRecord",
    "CaseRecord",
    "DatasetManifest",
    "load_manifest",
    "save_manifest",

    "DatasetSplit",
    "split_sizes",
    "split_dataset",
    "precompute_band",

    "DirectResult",
    "optimize_direct",

    "TrainConfig",
    "TrainingResult",
    "train_amortized",

    "register_case",
    "segment_case",
    "save_segmentation",
]
