"""Counter-based uniform streams, one independent substream per Monte Carlo path.

The k-th uniform of path p is a pure function of ``(seed, p, k)``, so results
do not depend on how paths are split across workers. The bit mixer is the
SplitMix64 finaliser: a SplitMix64 generator with state ``s`` returns
``mix64(s + (k + 1) * GOLDEN)`` as its k-th output, which is exactly what
:func:`uniforms` evaluates with ``s`` set to the path key.
"""

from __future__ import annotations

import numpy as np

__all__ = ["GOLDEN", "mix64", "splitmix64_sequence", "path_keys", "uniforms", "EPS_U"]

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(k) for k in (30, 27, 31, 11))
EPS_U = 1e-15
_TO_UNIT = 2.0 ** -53


def mix64(z) -> np.ndarray:
    """SplitMix64 output function on uint64 arrays (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def splitmix64_sequence(state: int, n: int) -> np.ndarray:
    """First ``n`` outputs of a SplitMix64 generator started at ``state``."""
    k = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(np.uint64(state % 2 ** 64) + k * GOLDEN)


def path_keys(seed: int, paths) -> np.ndarray:
    """Stream key of each path: output ``p`` of SplitMix64 seeded with ``mix64(seed)``."""
    paths = np.asarray(paths, dtype=np.uint64)
    base = mix64(np.uint64(int(seed) % 2 ** 64))
    with np.errstate(over="ignore"):
        return mix64(base + (paths + np.uint64(1)) * GOLDEN)


def uniforms(keys, counters, eps: float = EPS_U) -> np.ndarray:
    """Uniform in ``[eps, 1 - eps]`` at position ``counters`` of each stream.

    ``keys`` and ``counters`` broadcast against each other; the 53 top bits
    of the mixed word give a double on the grid ``k 2^-53``.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = mix64(keys + (counters + np.uint64(1)) * GOLDEN)
    u = (z >> _S11).astype(np.float64) * _TO_UNIT
    return np.clip(u, eps, 1.0 - eps)
