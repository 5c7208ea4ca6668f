"""
Various utility functions used by multiple modules.
"""

import math
import os
import tempfile
from contextlib import contextmanager

import numpy as np
from config import config

# Seeds are plain 64-bit unsigned integers. A Generator may be passed wherever a Seed is accepted,
# allowing a single stream to be threaded through a chain of operations.
Seed = int

RNG_ALGORITHMS = {"PCG64": np.random.PCG64, "Philox": np.random.Philox}
SEED_MASK = (1 << 64) - 1


def rng_algorithm() -> str:
    """Name of the bit generator pinned in config (default PCG64)"""
    return config.get("analysis", "rng", fallback="PCG64")


def make_rng(seed: Seed | np.random.Generator, algorithm: str | None = None) -> np.random.Generator:
    """Return a Generator for seed. Generators are passed through untouched.

    algorithm names the bit generator, default from config. Worker processes do not see the
    parsed config, so callers running there pass it explicitly.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or int(seed) < 0 or int(seed) > SEED_MASK:
        raise ValueError(f"Seed must be an unsigned 64-bit integer, got {seed}")
    algorithm = algorithm if algorithm is not None else rng_algorithm()
    bit_generator = RNG_ALGORITHMS.get(algorithm)
    if bit_generator is None:
        raise ValueError(f"Unknown rng algorithm {algorithm}. Known: {', '.join(RNG_ALGORITHMS)}")
    return np.random.Generator(bit_generator(np.random.SeedSequence(int(seed))))


def derive_seed(base_seed: Seed, *coordinates: int) -> Seed:
    """Derive a child seed from a base seed and integer coordinates (e.g. channel, noise index, trial).

    Identical inputs always give the same child seed, regardless of execution order.
    """
    seq = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(c) for c in coordinates))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def complex_gaussian(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    """Complex white Gaussian samples. Real and imaginary parts independent N(0, std^2)."""
    return rng.normal(0.0, std, size=shape) + 1j * rng.normal(0.0, std, size=shape)


def db_str(value: float) -> str:
    """Formats a dB value with 3 decimals. -inf (failed detection) is kept as '-inf'"""
    if value == -math.inf:
        return "-inf"
    if value == math.inf:
        return "inf"
    return f"{value:.3f}"


def parse_db(value: str) -> float:
    """Inverse of db_str"""
    return float(value)


@contextmanager
def atomic_write(path: str, mode: str = "w", newline: str | None = None):
    """Open a temporary file next to path and rename it onto path when the block completes.

    If the block raises, the temporary file is removed and path is left untouched.
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        kwargs = {} if "b" in mode else {"encoding": "utf-8", "newline": newline}
        with os.fdopen(fd, mode, **kwargs) as file:
            yield file
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
