// NEON backend for aarch64. Mirrors the AVX2 unit: fused multiply-add in
// the reductions only, plain multiply/add in the elementwise kernels so
// they stay bit-identical with the scalar reference.

#include "grouplift/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace grouplift::kern {

namespace {

double v_dot(const double* x, const double* y, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
    }
    for (; i + 2 <= n; i += 2) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
    }
    double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double v_sqdist(const double* x, const double* y, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t d = vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i));
        acc0 = vfmaq_f64(acc0, d, d);
    }
    double acc = vaddvq_f64(acc0);
    for (; i < n; ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

double v_sum(const double* x, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc0 = vaddq_f64(acc0, vld1q_f64(x + i));
    double acc = vaddvq_f64(acc0);
    for (; i < n; ++i) acc += x[i];
    return acc;
}

void v_axpy(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t prod = vmulq_f64(va, vld1q_f64(x + i));
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void v_diff_axpy(double a, const double* x, const double* y, double* acc,
                 std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t d = vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i));
        float64x2_t prod = vmulq_f64(va, d);
        vst1q_f64(acc + i, vaddq_f64(vld1q_f64(acc + i), prod));
    }
    for (; i < n; ++i) acc[i] += a * (x[i] - y[i]);
}

void v_relu(const double* z, double* out, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(out + i, vmaxq_f64(vld1q_f64(z + i), zero));
    }
    for (; i < n; ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
}

void v_relu_backward(const double* act, const double* dout, double* dz,
                     std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        uint64x2_t mask = vcgtq_f64(vld1q_f64(act + i), zero);
        uint64x2_t kept = vandq_u64(mask, vreinterpretq_u64_f64(vld1q_f64(dout + i)));
        vst1q_f64(dz + i, vreinterpretq_f64_u64(kept));
    }
    for (; i < n; ++i) dz[i] = act[i] > 0.0 ? dout[i] : 0.0;
}

void v_sgd_update(double* w, const double* g, double lr, std::size_t n) {
    const float64x2_t vlr = vdupq_n_f64(lr);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t step = vmulq_f64(vlr, vld1q_f64(g + i));
        vst1q_f64(w + i, vsubq_f64(vld1q_f64(w + i), step));
    }
    for (; i < n; ++i) w[i] -= lr * g[i];
}

}  // namespace

const Backend* neon_backend_or_null() {
    static const Backend b = {
        "neon",      v_dot,  v_sqdist,        v_sum,        v_axpy,
        v_diff_axpy, v_relu, v_relu_backward, v_sgd_update,
    };
    return &b;
}

}  // namespace grouplift::kern

#else  // not aarch64

namespace grouplift::kern {
const Backend* neon_backend_or_null() { return nullptr; }
}  // namespace grouplift::kern

#endif
