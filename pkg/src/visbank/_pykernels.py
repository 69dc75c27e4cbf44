"""Numpy implementations of the bank kernels.

Same signatures and semantics as the compiled ``_kernels`` module. Used when
the extension is not built, and as the comparison target in the benchmark.
"""
import numpy as np

FILLED, MERGED, REPLACED = 0, 1, 2


def _cos_rows(rows, feature):
    rows = rows.astype(np.float64)
    f = feature.astype(np.float64)
    num = rows @ f
    den = np.sqrt(np.einsum("ij,ij->i", rows, rows)) * np.sqrt(f @ f)
    out = np.zeros(len(rows), dtype=np.float64)
    ok = den > 0.0
    out[ok] = num[ok] / den[ok]
    return np.clip(out, -1.0, 1.0)


def cosine(a, b):
    return float(_cos_rows(a[None, :], b)[0])


def slot_similarities(slots, count, feature):
    return _cos_rows(slots[:count], feature)


def select_slot(slots, count, feature):
    # np.argmax returns the first maximum, which is the lowest-index tie break
    return int(np.argmax(_cos_rows(slots[:count], feature)))


def _merge(slot, feature):
    slot[:] = ((slot.astype(np.float64) + feature.astype(np.float64)) * 0.5).astype(np.float32)


def insert_average(slots, occupancy, feature):
    if occupancy < slots.shape[0]:
        slots[occupancy] = feature
        return occupancy, FILLED
    k = select_slot(slots, occupancy, feature)
    _merge(slots[k], feature)
    return k, MERGED


def insert_fifo(slots, occupancy, cursor, feature):
    if occupancy < slots.shape[0]:
        slots[occupancy] = feature
        return occupancy, FILLED
    slots[cursor] = feature
    return cursor, REPLACED


def insert_stream(slots, occupancy, cursor, categories, features, fifo):
    n = slots.shape[1]
    indices = np.empty(len(categories), dtype=np.int64)
    actions = np.empty(len(categories), dtype=np.int8)
    for t, c in enumerate(categories):
        if fifo:
            index, action = insert_fifo(slots[c], occupancy[c], cursor[c], features[t])
            if action == FILLED:
                occupancy[c] += 1
            else:
                cursor[c] = (cursor[c] + 1) % n
        else:
            index, action = insert_average(slots[c], occupancy[c], features[t])
            if action == FILLED:
                occupancy[c] += 1
        indices[t] = index
        actions[t] = action
    return indices, actions
