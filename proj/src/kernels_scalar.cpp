#include "grouplift/kernels.hpp"

namespace grouplift::kern {

namespace {

double s_dot(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double s_sqdist(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

double s_sum(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

void s_axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void s_diff_axpy(double a, const double* x, const double* y, double* acc,
                 std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += a * (x[i] - y[i]);
}

void s_relu(const double* z, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
}

void s_relu_backward(const double* act, const double* dout, double* dz,
                     std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dz[i] = act[i] > 0.0 ? dout[i] : 0.0;
}

void s_sgd_update(double* w, const double* g, double lr, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) w[i] -= lr * g[i];
}

}  // namespace

const Backend& scalar_backend() {
    static const Backend b = {
        "scalar",  s_dot,  s_sqdist,        s_sum,        s_axpy,
        s_diff_axpy, s_relu, s_relu_backward, s_sgd_update,
    };
    return b;
}

}  // namespace grouplift::kern
