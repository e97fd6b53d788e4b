"""Counter-based random streams.

Every random draw in the package comes from a Philox4x64 generator whose
128-bit key is ``(seed, purpose << 48 | index)``.  ``purpose`` separates the
consumers (dataset sampling, oracle chunks, bootstrap attempts, ...) and
``index`` numbers chunks or resamples, so any chunk can be regenerated on its
own and results do not depend on how work is split across workers.

Normal variates are produced by inverse-CDF transformation of open-interval
uniforms, which keeps them bit-stable across platforms.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

SAMPLE = 1
ORACLE = 2
BOOTSTRAP = 3
TRI_ORACLE = 4
ORACLE_THETA = 5

_MASK64 = (1 << 64) - 1
_HALF_ULP = 2.0 ** -54


def stream(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    if index < 0 or index >= 1 << 48:
        raise ValueError("stream index out of range")
    key = np.array([int(seed) & _MASK64, (int(purpose) << 48) | int(index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def uniforms(gen: np.random.Generator, shape) -> np.ndarray:
    # random() lies on the 2**-53 grid in [0, 1); shifting by half a step gives (0, 1)
    return gen.random(shape) + _HALF_ULP


def std_normals(gen: np.random.Generator, shape) -> np.ndarray:
    return ndtri(uniforms(gen, shape))


def chunk_sizes(n: int, chunk: int):
    """Yield ``(index, size)`` pairs covering ``n`` draws in fixed-size chunks."""
    full, rest = divmod(n, chunk)
    for i in range(full):
        yield i, chunk
    if rest:
        yield full, rest
