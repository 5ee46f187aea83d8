#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace grouplift::kern {

// =====================================================================
// Vector kernels
//
// Every kernel has a scalar reference implementation plus optional SIMD
// variants (AVX2 on x86-64, NEON on aarch64) compiled into their own
// translation units. A backend is a bundle of function pointers; the
// active one is picked once per process, at first use, from runtime CPU
// detection, and can be pinned with the GROUPLIFT_KERNELS environment
// variable or select().
//
// Contract kept by all backends:
//   * elementwise kernels (axpy, diff_axpy, relu, relu_backward,
//     sgd_update) produce bit-identical results to the scalar reference,
//     so training runs do not depend on which backend is active;
//   * reduction kernels (dot, sqdist, sum) may reassociate and are only
//     required to agree within small relative error.
// =====================================================================

struct Backend {
    const char* name;

    // sum_i x[i] * y[i]
    double (*dot)(const double* x, const double* y, std::size_t n);
    // sum_i (x[i] - y[i])^2
    double (*sqdist)(const double* x, const double* y, std::size_t n);
    // sum_i x[i]
    double (*sum)(const double* x, std::size_t n);
    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // acc[i] += a * (x[i] - y[i])
    void (*diff_axpy)(double a, const double* x, const double* y,
                      double* acc, std::size_t n);
    // out[i] = max(z[i], 0)
    void (*relu)(const double* z, double* out, std::size_t n);
    // dz[i] = act[i] > 0 ? dout[i] : 0   (act is the post-ReLU value)
    void (*relu_backward)(const double* act, const double* dout, double* dz,
                          std::size_t n);
    // w[i] -= lr * g[i]
    void (*sgd_update)(double* w, const double* g, double lr, std::size_t n);
};

// The reference implementation; always present.
const Backend& scalar_backend();

// All backends usable on this machine, scalar first.
const std::vector<const Backend*>& available_backends();

// The backend used by the rest of the library. First call resolves the
// GROUPLIFT_KERNELS environment variable ("scalar", "avx2", "neon",
// "auto" or unset); unknown or unavailable names throw argument_error.
const Backend& active_backend();

// Pin a backend by name ("auto" re-runs detection). Throws argument_error
// for names that are unknown or not usable on this machine.
void select_backend(std::string_view name);

}  // namespace grouplift::kern
