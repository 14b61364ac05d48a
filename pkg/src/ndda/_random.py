"""Seeded random streams.

Every random quantity is drawn from its own Philox-4x64 stream whose 128-bit
key packs ``(stream_id << 64) | seed``. Uniforms are the generator's native
53-bit doubles in [0, 1); Gaussians use the Marsaglia polar method applied to
consecutive uniform pairs, so the output depends only on the stream and not on
how many values are requested per call.
"""

import numpy as np

# Stream identifiers.
GRAPH = 0
SUPPORT = 1
SIGNAL = 2
NOISE = 3
START_VECTOR = 4
MATRIX_BASE = 1 << 16  # stream for A_i is MATRIX_BASE + i (0-based i)

_MASK64 = (1 << 64) - 1


def stream(seed, stream_id):
    """Return an independent generator for ``(seed, stream_id)``."""
    seed = int(seed)
    if not 0 <= seed <= _MASK64:
        raise ValueError(f"seed must fit in 64 bits, got {seed}")
    return np.random.Generator(np.random.Philox(key=(int(stream_id) << 64) | seed))


def uniforms(gen, size):
    return gen.random(size)


def normals(gen, size):
    """Standard normals by the polar method.

    Pairs ``(v1, v2) = 2u - 1`` are drawn in stream order; a pair is accepted
    when ``0 < s = v1**2 + v2**2 < 1`` and yields ``v1*f, v2*f`` with
    ``f = sqrt(-2 ln s / s)``. Surplus values from the last pair are dropped.
    """
    size = int(size)
    out = np.empty(size)
    have = 0
    while have < size:
        need_pairs = (size - have + 1) // 2
        batch = int(need_pairs / 0.78) + 8
        v = 2.0 * gen.random(2 * batch) - 1.0
        v1, v2 = v[0::2], v[1::2]
        s = v1 * v1 + v2 * v2
        ok = (s > 0.0) & (s < 1.0)
        v1, v2, s = v1[ok], v2[ok], s[ok]
        f = np.sqrt(-2.0 * np.log(s) / s)
        z = np.empty(2 * s.size)
        z[0::2] = v1 * f
        z[1::2] = v2 * f
        take = min(z.size, size - have)
        out[have:have + take] = z[:take]
        have += take
    return out
