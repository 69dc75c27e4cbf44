# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled bank kernels.

Mirrors ``visbank._pykernels`` function for function. Inputs are assumed
validated by the caller (``visbank.bank``); nothing here raises on bad data.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

DEF FILLED = 0
DEF MERGED = 1
DEF REPLACED = 2


cdef inline double _dot(const float[::1] a, const float[::1] b) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(a.shape[0]):
        acc += <double>a[i] * <double>b[i]
    return acc


cdef inline double _cos(const float[::1] a, const float[::1] b) noexcept nogil:
    cdef double num = _dot(a, b)
    cdef double na = sqrt(_dot(a, a))
    cdef double nb = sqrt(_dot(b, b))
    cdef double s
    if na == 0.0 or nb == 0.0:
        return 0.0
    s = num / (na * nb)
    if s > 1.0:
        return 1.0
    if s < -1.0:
        return -1.0
    return s


def cosine(const float[::1] a, const float[::1] b):
    return _cos(a, b)


def slot_similarities(const float[:, ::1] slots, Py_ssize_t count, const float[::1] feature):
    cdef Py_ssize_t m
    out = np.empty(count, dtype=np.float64)
    cdef double[::1] view = out
    for m in range(count):
        view[m] = _cos(slots[m], feature)
    return out


cdef inline Py_ssize_t _select(const float[:, ::1] slots, Py_ssize_t count,
                               const float[::1] feature) noexcept nogil:
    cdef Py_ssize_t m, best = 0
    cdef double s, best_s = _cos(slots[0], feature)
    for m in range(1, count):
        s = _cos(slots[m], feature)
        if s > best_s:
            best_s = s
            best = m
    return best


def select_slot(const float[:, ::1] slots, Py_ssize_t count, const float[::1] feature):
    return _select(slots, count, feature)


cdef inline void _merge(float[::1] slot, const float[::1] feature) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(slot.shape[0]):
        slot[i] = <float>((<double>slot[i] + <double>feature[i]) * 0.5)


cdef inline void _copy(float[::1] slot, const float[::1] feature) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(slot.shape[0]):
        slot[i] = feature[i]


cdef inline int _insert_average(float[:, ::1] slots, Py_ssize_t occupancy,
                                const float[::1] feature, Py_ssize_t* index) noexcept nogil:
    cdef Py_ssize_t k
    if occupancy < slots.shape[0]:
        _copy(slots[occupancy], feature)
        index[0] = occupancy
        return FILLED
    k = _select(slots, occupancy, feature)
    _merge(slots[k], feature)
    index[0] = k
    return MERGED


cdef inline int _insert_fifo(float[:, ::1] slots, Py_ssize_t occupancy, Py_ssize_t cursor,
                             const float[::1] feature, Py_ssize_t* index) noexcept nogil:
    if occupancy < slots.shape[0]:
        _copy(slots[occupancy], feature)
        index[0] = occupancy
        return FILLED
    _copy(slots[cursor], feature)
    index[0] = cursor
    return REPLACED


def insert_average(float[:, ::1] slots, Py_ssize_t occupancy, const float[::1] feature):
    cdef Py_ssize_t index = 0
    cdef int action = _insert_average(slots, occupancy, feature, &index)
    return index, action


def insert_fifo(float[:, ::1] slots, Py_ssize_t occupancy, Py_ssize_t cursor,
                const float[::1] feature):
    cdef Py_ssize_t index = 0
    cdef int action = _insert_fifo(slots, occupancy, cursor, feature, &index)
    return index, action


def insert_stream(float[:, :, ::1] slots, cnp.int64_t[::1] occupancy, cnp.int64_t[::1] cursor,
                  const cnp.int64_t[::1] categories, const float[:, ::1] features, int fifo):
    """Apply a whole prompt stream; returns per-item (slot index, action) arrays."""
    cdef Py_ssize_t t, c, n = slots.shape[1], count = categories.shape[0]
    cdef Py_ssize_t index = 0
    indices = np.empty(count, dtype=np.int64)
    actions = np.empty(count, dtype=np.int8)
    cdef cnp.int64_t[::1] idx_view = indices
    cdef cnp.int8_t[::1] act_view = actions
    cdef int action
    with nogil:
        for t in range(count):
            c = categories[t]
            if fifo:
                action = _insert_fifo(slots[c], occupancy[c], cursor[c], features[t], &index)
                if action == FILLED:
                    occupancy[c] += 1
                else:
                    cursor[c] = (cursor[c] + 1) % n
            else:
                action = _insert_average(slots[c], occupancy[c], features[t], &index)
                if action == FILLED:
                    occupancy[c] += 1
            idx_view[t] = index
            act_view[t] = action
    return indices, actions
