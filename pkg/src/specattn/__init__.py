"""Adaptive spectral filtering for univariate time-series classification.

A trainable per-frequency mask applied in the orthonormal cosine-transform
domain (optionally on tumbling-window segments) in front of a small
from-scratch CNN, plus the training harness, datasets, and experiment CLI.
"""

from .data import (
    FREQ_PRESETS,
    LabeledDataset,
    SplitSpec,
    add_noise,
    batches,
    gen_phase_dataset,
    gen_synthetic,
    load_ucr,
    save_ucr,
    split_dataset,
    znormalize,
)
from .layers import (
    BatchNorm1d,
    Conv1d,
    Dense,
    GlobalAvgPool,
    Parameter,
    ReLU,
    SegmentedSpectrumAttention,
    SpectrumAttention,
    softmax_cross_entropy,
)
from .model import (
    DivergenceError,
    ModelConfig,
    Network,
    build_ssam_cnn,
    load_checkpoint,
    save_checkpoint,
    sgd_step,
)
from .training import (
    KSearchResult,
    TrainConfig,
    TrainHistory,
    evaluate,
    noise_sweep,
    search_k,
    train,
)
from .transform import dct, dct_batch, dct_matrix, idct, idct_batch

__version__ = "0.1.0"
