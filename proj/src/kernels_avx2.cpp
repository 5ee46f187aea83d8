// AVX2 backend. This translation unit is the only one compiled with
// -mavx2 -mfma; everything else stays at the base ISA so the binary still
// runs on machines without AVX2 (the dispatcher checks at runtime before
// handing out this backend).

#include "grouplift/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace grouplift::kern {

namespace {

double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

// Reductions run two accumulators with FMA. They reassociate, so they are
// equivalence-tested against the scalar kernels with a tolerance, not
// bit-for-bit.

double v_dot(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i),
                               _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                               _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i),
                               _mm256_loadu_pd(y + i), acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double v_sqdist(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i),
                                   _mm256_loadu_pd(y + i));
        __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(x + i + 4),
                                   _mm256_loadu_pd(y + i + 4));
        acc0 = _mm256_fmadd_pd(d0, d0, acc0);
        acc1 = _mm256_fmadd_pd(d1, d1, acc1);
    }
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i),
                                  _mm256_loadu_pd(y + i));
        acc0 = _mm256_fmadd_pd(d, d, acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

double v_sum(const double* x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i];
    return acc;
}

// Elementwise kernels deliberately avoid FMA: separate multiply and add
// round exactly like the scalar loops, keeping results bit-identical
// whichever backend is active.

void v_axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void v_diff_axpy(double a, const double* x, const double* y, double* acc,
                 std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i),
                                  _mm256_loadu_pd(y + i));
        __m256d prod = _mm256_mul_pd(va, d);
        _mm256_storeu_pd(acc + i,
                         _mm256_add_pd(_mm256_loadu_pd(acc + i), prod));
    }
    for (; i < n; ++i) acc[i] += a * (x[i] - y[i]);
}

void v_relu(const double* z, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(z + i), zero));
    }
    for (; i < n; ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
}

void v_relu_backward(const double* act, const double* dout, double* dz,
                     std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(act + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(dz + i,
                         _mm256_and_pd(mask, _mm256_loadu_pd(dout + i)));
    }
    for (; i < n; ++i) dz[i] = act[i] > 0.0 ? dout[i] : 0.0;
}

void v_sgd_update(double* w, const double* g, double lr, std::size_t n) {
    const __m256d vlr = _mm256_set1_pd(lr);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d step = _mm256_mul_pd(vlr, _mm256_loadu_pd(g + i));
        _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), step));
    }
    for (; i < n; ++i) w[i] -= lr * g[i];
}

}  // namespace

const Backend* avx2_backend_or_null() {
    static const Backend b = {
        "avx2",      v_dot,  v_sqdist,        v_sum,        v_axpy,
        v_diff_axpy, v_relu, v_relu_backward, v_sgd_update,
    };
    return &b;
}

}  // namespace grouplift::kern

#else  // compiler lacks AVX2/FMA support for this TU

namespace grouplift::kern {
const Backend* avx2_backend_or_null() { return nullptr; }
}  // namespace grouplift::kern

#endif
