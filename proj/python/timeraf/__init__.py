"""Retrieval-augmented zero-shot time-series forecasting."""

from ._timeraf import (
    Backbone,
    BackboneDims,
    ConfigError,
    DataError,
    EvalReport,
    KbEntry,
    KnowledgeBase,
    NormStats,
    NumericError,
    Pipeline,
    PretrainConfig,
    Series,
    SplitSpec,
    SyntheticSpec,
    TrainConfig,
    TrainingLog,
    WindowPair,
    build_kb,
    build_kb_pooled,
    collect_pairs,
    default_synthetic_spec,
    denormalize,
    eligible_candidates,
    evaluate,
    evaluate_backbone,
    gen_series,
    instance_normalize,
    kl_divergence,
    load_backbone,
    load_kb,
    load_manifest,
    make_backbone,
    make_pipeline,
    mse,
    patchify,
    predict_raf,
    pretrain,
    save_backbone,
    save_kb,
    sliding_windows,
    softmax,
    subsample,
    train,
    write_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "Backbone",
    "BackboneDims",
    "ConfigError",
    "DataError",
    "EvalReport",
    "KbEntry",
    "KnowledgeBase",
    "NormStats",
    "NumericError",
    "Pipeline",
    "PretrainConfig",
    "Series",
    "SplitSpec",
    "SyntheticSpec",
    "TrainConfig",
    "TrainingLog",
    "WindowPair",
    "build_kb",
    "build_kb_pooled",
    "collect_pairs",
    "default_synthetic_spec",
    "denormalize",
    "eligible_candidates",
    "evaluate",
    "evaluate_backbone",
    "gen_series",
    "instance_normalize",
    "kl_divergence",
    "load_backbone",
    "load_kb",
    "load_manifest",
    "make_backbone",
    "make_pipeline",
    "mse",
    "patchify",
    "predict_raf",
    "pretrain",
    "save_backbone",
    "save_kb",
    "sliding_windows",
    "softmax",
    "subsample",
    "train",
    "write_dataset",
]
