/* Vectorized gather-dot helpers for the sparse GEMV kernel.
 *
 * Each function computes dot products of weight rows against x gathered
 * through a shared column-index list. The AVX2 path uses hardware
 * gathers and FMA; the fallback is the same arithmetic with scalar
 * lane accumulators. Within one build the evaluation order is fixed,
 * so results are reproducible run to run and across thread counts.
 */
#ifndef GRIM_SIMD_H
#define GRIM_SIMD_H

#include <stddef.h>
#include <stdint.h>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

static double grim_dot_one(const float *w, const float *x,
                           const uint32_t *cols, size_t s) {
    __m256 acc = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= s; i += 8) {
        __m256i idx = _mm256_loadu_si256((const __m256i *)(cols + i));
        __m256 xv = _mm256_i32gather_ps(x, idx, 4);
        __m256 wv = _mm256_loadu_ps(w + i);
        acc = _mm256_fmadd_ps(wv, xv, acc);
    }
    float lanes[8];
    _mm256_storeu_ps(lanes, acc);
    double total = 0.0;
    for (int t = 0; t < 8; t++)
        total += (double)lanes[t];
    for (; i < s; i++)
        total += (double)(w[i] * x[cols[i]]);
    return total;
}

static void grim_dot_pair(const float *w0, const float *w1, const float *x,
                          const uint32_t *cols, size_t s, double *out0,
                          double *out1) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= s; i += 8) {
        __m256i idx = _mm256_loadu_si256((const __m256i *)(cols + i));
        __m256 xv = _mm256_i32gather_ps(x, idx, 4);
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(w0 + i), xv, acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(w1 + i), xv, acc1);
    }
    float l0[8], l1[8];
    _mm256_storeu_ps(l0, acc0);
    _mm256_storeu_ps(l1, acc1);
    double t0 = 0.0, t1 = 0.0;
    for (int t = 0; t < 8; t++) {
        t0 += (double)l0[t];
        t1 += (double)l1[t];
    }
    for (; i < s; i++) {
        float xv = x[cols[i]];
        t0 += (double)(w0[i] * xv);
        t1 += (double)(w1[i] * xv);
    }
    *out0 = t0;
    *out1 = t1;
}

static double grim_dot_shared(const float *w, const float *xg, size_t s) {
    __m256 acc = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= s; i += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(w + i), _mm256_loadu_ps(xg + i),
                              acc);
    float lanes[8];
    _mm256_storeu_ps(lanes, acc);
    double total = 0.0;
    for (int t = 0; t < 8; t++)
        total += (double)lanes[t];
    for (; i < s; i++)
        total += (double)(w[i] * xg[i]);
    return total;
}

#else /* portable fallback: same lane structure, scalar ops */

static double grim_dot_one(const float *w, const float *x,
                           const uint32_t *cols, size_t s) {
    float a[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    size_t i = 0;
    for (; i + 8 <= s; i += 8)
        for (int t = 0; t < 8; t++)
            a[t] += w[i + t] * x[cols[i + t]];
    double total = 0.0;
    for (int t = 0; t < 8; t++)
        total += (double)a[t];
    for (; i < s; i++)
        total += (double)(w[i] * x[cols[i]]);
    return total;
}

static void grim_dot_pair(const float *w0, const float *w1, const float *x,
                          const uint32_t *cols, size_t s, double *out0,
                          double *out1) {
    float a[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    float b[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    size_t i = 0;
    for (; i + 8 <= s; i += 8)
        for (int t = 0; t < 8; t++) {
            float xv = x[cols[i + t]];
            a[t] += w0[i + t] * xv;
            b[t] += w1[i + t] * xv;
        }
    double t0 = 0.0, t1 = 0.0;
    for (int t = 0; t < 8; t++) {
        t0 += (double)a[t];
        t1 += (double)b[t];
    }
    for (; i < s; i++) {
        float xv = x[cols[i]];
        t0 += (double)(w0[i] * xv);
        t1 += (double)(w1[i] * xv);
    }
    *out0 = t0;
    *out1 = t1;
}

static double grim_dot_shared(const float *w, const float *xg, size_t s) {
    float a[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    size_t i = 0;
    for (; i + 8 <= s; i += 8)
        for (int t = 0; t < 8; t++)
            a[t] += w[i + t] * xg[i + t];
    double total = 0.0;
    for (int t = 0; t < 8; t++)
        total += (double)a[t];
    for (; i < s; i++)
        total += (double)(w[i] * xg[i]);
    return total;
}

#endif
#endif /* GRIM_SIMD_H */
