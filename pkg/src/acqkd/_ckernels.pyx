# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled hot kernels. Semantics are defined by ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, uint8_t
from libcpp.vector cimport vector
from libcpp.algorithm cimport nth_element

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t M1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t M2 = 0x94D049BB133111EBULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0
cdef uint64_t NLAB = 8


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * M1
    z = (z ^ (z >> 27)) * M2
    return z ^ (z >> 31)


cdef inline uint64_t draw(uint64_t key, uint64_t counter) noexcept nogil:
    return mix64(key + GOLDEN * (counter + 1))


cdef inline double unit(uint64_t h) noexcept nogil:
    return <double>(h >> 11) * TWO_M53


def sample_pulses(key, start, Py_ssize_t n, ptable):
    cdef uint64_t k = <uint64_t>(int(key) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t s = <uint64_t>start
    cdef double[:, :, :, ::1] p = np.ascontiguousarray(ptable, dtype=np.float64)
    ab_arr = np.empty(n, dtype=np.uint8)
    ak_arr = np.empty(n, dtype=np.uint8)
    bb_arr = np.empty(n, dtype=np.uint8)
    oc_arr = np.empty(n, dtype=np.uint8)
    cdef uint8_t[::1] ab = ab_arr
    cdef uint8_t[::1] ak = ak_arr
    cdef uint8_t[::1] bb = bb_arr
    cdef uint8_t[::1] oc = oc_arr
    cdef Py_ssize_t i
    cdef uint64_t base
    cdef uint8_t a, b, c, o
    with nogil:
        for i in range(n):
            base = (s + <uint64_t>i) * NLAB
            a = <uint8_t>(draw(k, base + 0) >> 63)
            b = <uint8_t>(draw(k, base + 1) >> 63)
            c = <uint8_t>(draw(k, base + 2) >> 63)
            o = 0
            if unit(draw(k, base + 3)) < p[a, b, c, 0]:
                o = 1
            if unit(draw(k, base + 4)) < p[a, b, c, 1]:
                o = o | 2
            ab[i] = a
            ak[i] = b
            bb[i] = c
            oc[i] = o
    return ab_arr, ak_arr, bb_arr, oc_arr


cdef enum:
    NBUCKET = 4096


cdef uint64_t _threshold(uint64_t key, Py_ssize_t n, Py_ssize_t kk,
                         vector[uint64_t]& h, vector[uint64_t]& scratch) noexcept nogil:
    # Value of the kk-th smallest hash (1-based). The hashes are uniform, so a
    # histogram of the top 12 bits leaves only ~n/4096 candidates to select from.
    cdef Py_ssize_t counts[NBUCKET]
    cdef Py_ssize_t i, bkt = 0, before = 0, c = 0
    for i in range(NBUCKET):
        counts[i] = 0
    for i in range(n):
        h[i] = draw(key, <uint64_t>i)
        counts[h[i] >> 52] += 1
    while before + counts[bkt] < kk:
        before += counts[bkt]
        bkt += 1
    for i in range(n):
        if <Py_ssize_t>(h[i] >> 52) == bkt:
            scratch[c] = h[i]
            c += 1
    nth_element(scratch.begin(), scratch.begin() + (kk - 1 - before), scratch.begin() + c)
    return scratch[kk - 1 - before]


cdef uint8_t _subset_parity(uint64_t key, const uint8_t[::1] bits, Py_ssize_t n,
                            vector[uint64_t]& h, vector[uint64_t]& scratch) noexcept nogil:
    cdef Py_ssize_t kk = n // 2
    cdef Py_ssize_t i, below = 0
    cdef uint64_t t
    cdef uint8_t par = 0, lt
    if kk == 0:
        return 0
    t = _threshold(key, n, kk, h, scratch)
    for i in range(n):
        # branch-free: membership is a coin flip, so a branch mispredicts half the time
        lt = h[i] < t
        below += lt
        par ^= bits[i] & lt
    # ties at the threshold: lowest indices first
    for i in range(n):
        if below >= kk:
            break
        if h[i] == t:
            below += 1
            par ^= bits[i]
    return par & 1


def half_subset(key, Py_ssize_t n):
    cdef uint64_t k = <uint64_t>(int(key) & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t kk = n // 2
    if kk == 0:
        return np.empty(0, dtype=np.intp)
    cdef vector[uint64_t] h
    cdef vector[uint64_t] scratch
    h.resize(n)
    scratch.resize(n)
    cdef Py_ssize_t i, below = 0
    cdef uint64_t t = _threshold(k, n, kk, h, scratch)
    out_arr = np.empty(kk, dtype=np.intp)
    cdef Py_ssize_t[::1] out = out_arr
    for i in range(n):
        if h[i] < t:
            out[below] = i
            below += 1
    if below < kk:
        # ties at the threshold join in index order; merge keeps output sorted
        ties = [i for i in range(n) if h[i] == t][:kk - below]
        return np.sort(np.concatenate([out_arr[:below], np.array(ties, dtype=np.intp)]))
    return out_arr


def subset_parities(bits, key, Py_ssize_t m):
    cdef const uint8_t[::1] b = np.ascontiguousarray(bits, dtype=np.uint8)
    cdef Py_ssize_t n = b.shape[0]
    cdef uint64_t k = <uint64_t>(int(key) & 0xFFFFFFFFFFFFFFFF)
    out_arr = np.empty(m, dtype=np.uint8)
    cdef uint8_t[::1] out = out_arr
    cdef vector[uint64_t] h
    cdef vector[uint64_t] scratch
    h.resize(n if n > 0 else 1)
    scratch.resize(n if n > 0 else 1)
    cdef Py_ssize_t j
    with nogil:
        for j in range(m):
            out[j] = _subset_parity(draw(k, <uint64_t>j), b, n, h, scratch)
    return out_arr
