"""Reference implementation of the averaging merge, for tests only.

Written with plain Python floats and lists, sharing no code with the kernels.
Every similarity is computed, the first (lowest-index) maximum wins, and the
merged slot is rounded to float32 exactly once.
"""
import math
import struct

from .errors import ZeroNormInput

_F32 = struct.Struct("<f")


def _round_f32(x: float) -> float:
    return _F32.unpack(_F32.pack(x))[0]


def _cos(u: list[float], w: list[float]) -> float:
    uw = uu = ww = 0.0
    for i in range(len(u)):
        uw += u[i] * w[i]
    for i in range(len(u)):
        uu += u[i] * u[i]
    for i in range(len(w)):
        ww += w[i] * w[i]
    if uu == 0.0 or ww == 0.0:
        return 0.0
    s = uw / (math.sqrt(uu) * math.sqrt(ww))
    return min(1.0, max(-1.0, s))


def oracle_update(slots, feature) -> tuple[int, list[float]]:
    """Return ``(slot_index, new_slot)`` for merging ``feature`` into full ``slots``."""
    f = [float(x) for x in feature]
    if sum(x * x for x in f) == 0.0:
        raise ZeroNormInput("zero-norm feature rejected")
    rows = [[float(x) for x in s] for s in slots]
    sims = [_cos(f, r) for r in rows]
    best = 0
    for m in range(1, len(sims)):
        if sims[m] > sims[best]:
            best = m
    new_slot = [_round_f32((rows[best][i] + f[i]) * 0.5) for i in range(len(f))]
    return best, new_slot
