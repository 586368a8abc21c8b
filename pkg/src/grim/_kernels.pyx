# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot loops for the sparse executor.

One call handles a worker's share of rows: a list of (run, row range)
chunks in reordered row space. Per output element the accumulation order
is fixed by the config alone, so results are bitwise identical however
rows are distributed over threads.

The reduction runs in float32 partial accumulators (one per unroll lane,
combined in float64 at the end); unroll widths collapse to {1, 2, 4, 8}
so each variant has compile-time-constant inner loops the C compiler can
vectorize. With lre enabled the shared input elements of a run are
gathered once per (chunk, tile) and reused by every row of the run.
"""

from libc.stdint cimport int64_t, uint32_t

cdef extern from "_simd.h" nogil:
    double grim_dot_one(const float* w, const float* x, const uint32_t* cols, size_t s)
    void grim_dot_pair(
        const float* w0, const float* w1, const float* x,
        const uint32_t* cols, size_t s, double* out0, double* out1
    )
    double grim_dot_shared(const float* w, const float* xg, size_t s)

NAME = "ext"


cdef inline int _lanes(int unroll) nogil:
    if unroll >= 8:
        return 8
    if unroll >= 4:
        return 4
    if unroll >= 2:
        return 2
    return 1


cdef inline double _dot1(const float* w, const float* v, Py_ssize_t s) nogil:
    cdef float a0 = 0.0
    cdef Py_ssize_t i
    for i in range(s):
        a0 = a0 + w[i] * v[i]
    return <double> a0


cdef inline double _dot2(const float* w, const float* v, Py_ssize_t s) nogil:
    cdef float a0 = 0.0, a1 = 0.0
    cdef Py_ssize_t i = 0
    while i + 2 <= s:
        a0 = a0 + w[i] * v[i]
        a1 = a1 + w[i + 1] * v[i + 1]
        i += 2
    while i < s:
        a0 = a0 + w[i] * v[i]
        i += 1
    return (<double> a0) + (<double> a1)


cdef inline double _dot4(const float* w, const float* v, Py_ssize_t s) nogil:
    cdef float a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0
    cdef Py_ssize_t i = 0
    while i + 4 <= s:
        a0 = a0 + w[i] * v[i]
        a1 = a1 + w[i + 1] * v[i + 1]
        a2 = a2 + w[i + 2] * v[i + 2]
        a3 = a3 + w[i + 3] * v[i + 3]
        i += 4
    while i < s:
        a0 = a0 + w[i] * v[i]
        i += 1
    return (<double> a0) + (<double> a1) + (<double> a2) + (<double> a3)


cdef inline double _dot8(const float* w, const float* v, Py_ssize_t s) nogil:
    cdef float a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0
    cdef float a4 = 0.0, a5 = 0.0, a6 = 0.0, a7 = 0.0
    cdef Py_ssize_t i = 0
    while i + 8 <= s:
        a0 = a0 + w[i] * v[i]
        a1 = a1 + w[i + 1] * v[i + 1]
        a2 = a2 + w[i + 2] * v[i + 2]
        a3 = a3 + w[i + 3] * v[i + 3]
        a4 = a4 + w[i + 4] * v[i + 4]
        a5 = a5 + w[i + 5] * v[i + 5]
        a6 = a6 + w[i + 6] * v[i + 6]
        a7 = a7 + w[i + 7] * v[i + 7]
        i += 8
    while i < s:
        a0 = a0 + w[i] * v[i]
        i += 1
    return (
        (<double> a0) + (<double> a1) + (<double> a2) + (<double> a3)
        + (<double> a4) + (<double> a5) + (<double> a6) + (<double> a7)
    )


cdef inline double _dot(const float* w, const float* v, Py_ssize_t s, int lanes) nogil:
    if lanes == 8:
        return _dot8(w, v, s)
    if lanes == 4:
        return _dot4(w, v, s)
    if lanes == 2:
        return _dot2(w, v, s)
    return _dot1(w, v, s)


cdef inline double _dot_idx(
    const float* w,
    const float* x,
    const uint32_t* cols,
    Py_ssize_t s,
    int lanes,
) nogil:
    # non-reused path: read x through the column indices every row
    cdef float a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0
    cdef Py_ssize_t i = 0
    if lanes >= 4:
        while i + 4 <= s:
            a0 = a0 + w[i] * x[cols[i]]
            a1 = a1 + w[i + 1] * x[cols[i + 1]]
            a2 = a2 + w[i + 2] * x[cols[i + 2]]
            a3 = a3 + w[i + 3] * x[cols[i + 3]]
            i += 4
    elif lanes == 2:
        while i + 2 <= s:
            a0 = a0 + w[i] * x[cols[i]]
            a1 = a1 + w[i + 1] * x[cols[i + 1]]
            i += 2
    while i < s:
        a0 = a0 + w[i] * x[cols[i]]
        i += 1
    return (<double> a0) + (<double> a1) + (<double> a2) + (<double> a3)


cdef inline void _dot_idx2(
    const float* w0,
    const float* w1,
    const float* x,
    const uint32_t* cols,
    Py_ssize_t s,
    int lanes,
    double* out0,
    double* out1,
) nogil:
    # register-level load reuse: each gathered x element feeds two rows
    cdef float a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0
    cdef float b0 = 0.0, b1 = 0.0, b2 = 0.0, b3 = 0.0
    cdef float v0, v1, v2, v3
    cdef Py_ssize_t i = 0
    if lanes >= 4:
        while i + 4 <= s:
            v0 = x[cols[i]]
            v1 = x[cols[i + 1]]
            v2 = x[cols[i + 2]]
            v3 = x[cols[i + 3]]
            a0 = a0 + w0[i] * v0
            a1 = a1 + w0[i + 1] * v1
            a2 = a2 + w0[i + 2] * v2
            a3 = a3 + w0[i + 3] * v3
            b0 = b0 + w1[i] * v0
            b1 = b1 + w1[i + 1] * v1
            b2 = b2 + w1[i + 2] * v2
            b3 = b3 + w1[i + 3] * v3
            i += 4
    elif lanes == 2:
        while i + 2 <= s:
            v0 = x[cols[i]]
            v1 = x[cols[i + 1]]
            a0 = a0 + w0[i] * v0
            a1 = a1 + w0[i + 1] * v1
            b0 = b0 + w1[i] * v0
            b1 = b1 + w1[i + 1] * v1
            i += 2
    while i < s:
        v0 = x[cols[i]]
        a0 = a0 + w0[i] * v0
        b0 = b0 + w1[i] * v0
        i += 1
    out0[0] = (<double> a0) + (<double> a1) + (<double> a2) + (<double> a3)
    out1[0] = (<double> b0) + (<double> b1) + (<double> b2) + (<double> b3)


def gemv_chunks(
    uint32_t[::1] row_offset,
    uint32_t[::1] occurrence,
    uint32_t[::1] column_stride,
    uint32_t[::1] compact_column,
    float[::1] weights,
    float[::1] x,
    float[::1] y,
    int64_t[::1] chunk_run,
    int64_t[::1] chunk_r0,
    int64_t[::1] chunk_r1,
    int unroll,
    bint lre,
    float[::1] scratch,
):
    cdef Py_ssize_t k, g, r, i, s, c0, r0, r1, span
    cdef int lanes = _lanes(unroll)
    cdef double o0, o1
    with nogil:
        for k in range(chunk_run.shape[0]):
            g = chunk_run[k]
            c0 = column_stride[g]
            s = column_stride[g + 1] - c0
            r0 = chunk_r0[k]
            r1 = chunk_r1[k]
            if s == 0:
                for r in range(r0, r1):
                    y[r] = 0.0
                continue
            # reuse strategy keys on the run span (thread-independent):
            # long runs amortize a scratch gather, short runs pair rows so
            # each gathered element feeds two accumulator sets. unroll >= 8
            # selects the wide helpers (hardware gather + FMA when built
            # with AVX2).
            span = <Py_ssize_t> occurrence[g + 1] - <Py_ssize_t> occurrence[g]
            if lre and span >= 4:
                for i in range(s):
                    scratch[i] = x[compact_column[c0 + i]]
                if lanes == 8:
                    for r in range(r0, r1):
                        y[r] = <float> grim_dot_shared(
                            &weights[row_offset[r]], &scratch[0], s
                        )
                else:
                    for r in range(r0, r1):
                        y[r] = <float> _dot(
                            &weights[row_offset[r]], &scratch[0], s, lanes
                        )
            elif lre:
                r = r0
                while r + 2 <= r1:
                    if lanes == 8:
                        grim_dot_pair(
                            &weights[row_offset[r]],
                            &weights[row_offset[r + 1]],
                            &x[0],
                            &compact_column[c0],
                            s,
                            &o0,
                            &o1,
                        )
                    else:
                        _dot_idx2(
                            &weights[row_offset[r]],
                            &weights[row_offset[r + 1]],
                            &x[0],
                            &compact_column[c0],
                            s,
                            lanes,
                            &o0,
                            &o1,
                        )
                    y[r] = <float> o0
                    y[r + 1] = <float> o1
                    r += 2
                if r < r1:
                    if lanes == 8:
                        y[r] = <float> grim_dot_one(
                            &weights[row_offset[r]], &x[0], &compact_column[c0], s
                        )
                    else:
                        y[r] = <float> _dot_idx(
                            &weights[row_offset[r]],
                            &x[0],
                            &compact_column[c0],
                            s,
                            lanes,
                        )
            else:
                if lanes == 8:
                    for r in range(r0, r1):
                        y[r] = <float> grim_dot_one(
                            &weights[row_offset[r]], &x[0], &compact_column[c0], s
                        )
                else:
                    for r in range(r0, r1):
                        y[r] = <float> _dot_idx(
                            &weights[row_offset[r]],
                            &x[0],
                            &compact_column[c0],
                            s,
                            lanes,
                        )


def gemm_chunks(
    uint32_t[::1] row_offset,
    uint32_t[::1] column_stride,
    uint32_t[::1] compact_column,
    float[::1] weights,
    float[:, ::1] x,
    float[:, ::1] y,
    int64_t[::1] chunk_run,
    int64_t[::1] chunk_r0,
    int64_t[::1] chunk_r1,
    int tile_cols,
    int unroll,
    bint lre,
    float[::1] xg,
    double[::1] acc,
):
    cdef Py_ssize_t k, g, r, i, s, base, c0, r0, r1, j, t0, tw, col
    cdef Py_ssize_t ncols = x.shape[1]
    cdef double wv
    with nogil:
        t0 = 0
        while t0 < ncols:
            tw = tile_cols
            if t0 + tw > ncols:
                tw = ncols - t0
            for k in range(chunk_run.shape[0]):
                g = chunk_run[k]
                c0 = column_stride[g]
                s = column_stride[g + 1] - c0
                r0 = chunk_r0[k]
                r1 = chunk_r1[k]
                if s == 0:
                    for r in range(r0, r1):
                        for j in range(tw):
                            y[r, t0 + j] = 0.0
                    continue
                if lre:
                    # shared gather: one read of the input tile per run chunk
                    for i in range(s):
                        col = compact_column[c0 + i]
                        for j in range(tw):
                            xg[i * tile_cols + j] = x[col, t0 + j]
                    for r in range(r0, r1):
                        base = row_offset[r]
                        for j in range(tw):
                            acc[j] = 0.0
                        for i in range(s):
                            wv = <double> weights[base + i]
                            for j in range(tw):
                                acc[j] += wv * (<double> xg[i * tile_cols + j])
                        for j in range(tw):
                            y[r, t0 + j] = <float> acc[j]
                else:
                    for r in range(r0, r1):
                        base = row_offset[r]
                        for j in range(tw):
                            acc[j] = 0.0
                        for i in range(s):
                            wv = <double> weights[base + i]
                            col = compact_column[c0 + i]
                            for j in range(tw):
                                acc[j] += wv * (<double> x[col, t0 + j])
                        for j in range(tw):
                            y[r, t0 + j] = <float> acc[j]
            t0 += tile_cols
