"""Seeded weight-store construction and codec-aware loading.

Refinement and offset nets are zero-initialized (so the untrained model
reduces to classical lifting plus plain convolution); all other kernels
draw small-uniform values from one seeded generator in registry order,
making the file bytes a pure function of (seed, config).
"""

import math

import numpy as np

from .codec import CodecConfig, param_registry, required_names
from .entropy import gaussian_table
from .store import WeightStore, read_weights

FACTORIZED_SIGMA_RANGE = (0.5, 4.0)


def make_weights(seed: int, cfg: CodecConfig) -> WeightStore:
    rng = np.random.default_rng(seed)
    tensors = {}
    for pd in param_registry(cfg):
        if pd.init == "uniform":
            fan_in = int(np.prod(pd.shape[1:]))
            a = 1.0 / math.sqrt(fan_in)
            tensors[pd.name] = rng.uniform(-a, a, pd.shape).astype(np.float32)
        else:
            tensors[pd.name] = np.zeros(pd.shape, dtype=np.float32)
    lo, hi = FACTORIZED_SIGMA_RANGE
    sigmas = np.exp(rng.uniform(math.log(lo), math.log(hi), cfg.hidden))
    factorized = [gaussian_table(float(s)) for s in sigmas]
    return WeightStore(config=cfg, tensors=tensors, factorized=factorized)


def load_weights(path) -> WeightStore:
    """Read a weight file and check it carries every tensor the configured
    architecture needs."""
    store = read_weights(path)
    store.require(required_names(store.config))
    return store
