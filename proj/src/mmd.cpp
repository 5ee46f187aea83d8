#include "grouplift/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "grouplift/errors.hpp"
#include "grouplift/kernels.hpp"

namespace grouplift {

void validate(const KernelFamily& family) {
    if (family.bandwidths.empty()) {
        throw argument_error("kernel family is empty");
    }
    if (family.bandwidths.size() != family.coefficients.size()) {
        throw argument_error("bandwidth and coefficient counts differ");
    }
    double sum = 0.0;
    for (std::size_t u = 0; u < family.bandwidths.size(); ++u) {
        if (!(family.bandwidths[u] > 0.0)) {
            throw argument_error("bandwidths must be positive");
        }
        if (!(family.coefficients[u] >= 0.0)) {
            throw argument_error("kernel coefficients must be non-negative");
        }
        sum += family.coefficients[u];
    }
    if (std::fabs(sum - 1.0) > 1e-12) {
        throw argument_error("kernel coefficients must sum to 1");
    }
}

const std::vector<double>& default_kernel_scales() {
    static const std::vector<double> scales = {0.25, 0.5, 1.0, 2.0, 4.0};
    return scales;
}

KernelFamily median_bandwidths(const Matrix& a, const Matrix& b,
                               const std::vector<double>& scales) {
    if (scales.empty()) throw argument_error("empty scale ladder");
    for (double s : scales) {
        if (!(s > 0.0)) throw argument_error("scales must be positive");
    }
    if (a.cols() != b.cols()) {
        throw shape_error("pooled samples differ in feature width");
    }
    const std::size_t n = a.rows() + b.rows();
    if (n < 2) throw data_error("median heuristic needs at least two points");

    const auto& k = kern::active_backend();
    auto row = [&](std::size_t i) {
        return i < a.rows() ? a.row(i) : b.row(i - a.rows());
    };
    std::vector<double> dist;
    dist.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            dist.push_back(std::sqrt(k.sqdist(row(i), row(j), a.cols())));
        }
    }
    std::sort(dist.begin(), dist.end());
    const std::size_t m = dist.size();
    const double median = (m % 2 == 1)
                              ? dist[m / 2]
                              : 0.5 * (dist[m / 2 - 1] + dist[m / 2]);
    if (!(median > 0.0)) {
        throw data_error("median pairwise distance is zero; "
                         "samples are degenerate");
    }

    KernelFamily family;
    for (double s : scales) family.bandwidths.push_back(s * median);
    family.coefficients.assign(scales.size(),
                               1.0 / static_cast<double>(scales.size()));
    return family;
}

double gaussian_kernel(const double* x, const double* y, std::size_t dim,
                       double sigma) {
    const double d2 = kern::active_backend().sqdist(x, y, dim);
    return std::exp(-d2 / (2.0 * sigma * sigma));
}

namespace {

// One within- or cross-domain block. Walks every row pair once, adds
// exp(-d2 / (2 sigma_u^2)) into per-kernel sums (optionally without the
// diagonal) and, when mix is non-null, stores the pair's gradient weight
//   sum_u beta_u k_u / sigma_u^2
// for the backward pass, so the exponentials are computed a single time.
void kernel_block(const Matrix& a, const Matrix& b,
                  const std::vector<double>& inv_two_s2,
                  const std::vector<double>& beta_over_s2, bool skip_diag,
                  std::vector<double>& sums, Matrix* mix) {
    const auto& k = kern::active_backend();
    const std::size_t nu = inv_two_s2.size();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double d2 = k.sqdist(a.row(i), b.row(j), a.cols());
            double w = 0.0;
            for (std::size_t u = 0; u < nu; ++u) {
                const double e = std::exp(-d2 * inv_two_s2[u]);
                if (!(skip_diag && i == j)) sums[u] += e;
                w += beta_over_s2[u] * e;
            }
            if (mix) (*mix)(i, j) = w;
        }
    }
}

}  // namespace

MmdResult mmd_squared(const Matrix& source, const Matrix& target,
                      const KernelFamily& family, MmdEstimator estimator,
                      MmdGrads* grads) {
    validate(family);
    if (source.cols() != target.cols()) {
        throw shape_error("source and target feature widths differ");
    }
    const std::size_t m = source.rows();
    const std::size_t n = target.rows();
    const bool unbiased = estimator == MmdEstimator::Unbiased;
    if (m == 0 || n == 0) {
        throw argument_error("discrepancy needs at least one sample per side");
    }
    if (unbiased && (m < 2 || n < 2)) {
        throw argument_error("the unbiased estimator needs at least two "
                             "samples per side");
    }

    const std::size_t nu = family.bandwidths.size();
    std::vector<double> inv_two_s2(nu), beta_over_s2(nu);
    for (std::size_t u = 0; u < nu; ++u) {
        const double s2 = family.bandwidths[u] * family.bandwidths[u];
        inv_two_s2[u] = 1.0 / (2.0 * s2);
        beta_over_s2[u] = family.coefficients[u] / s2;
    }

    Matrix mix_ss, mix_st, mix_tt;
    Matrix* p_ss = nullptr;
    Matrix* p_st = nullptr;
    Matrix* p_tt = nullptr;
    if (grads) {
        mix_ss = Matrix(m, m);
        mix_st = Matrix(m, n);
        mix_tt = Matrix(n, n);
        p_ss = &mix_ss;
        p_st = &mix_st;
        p_tt = &mix_tt;
    }

    std::vector<double> s_ss(nu, 0.0), s_st(nu, 0.0), s_tt(nu, 0.0);
    kernel_block(source, source, inv_two_s2, beta_over_s2, unbiased, s_ss, p_ss);
    kernel_block(source, target, inv_two_s2, beta_over_s2, false, s_st, p_st);
    kernel_block(target, target, inv_two_s2, beta_over_s2, unbiased, s_tt, p_tt);

    const double fm = static_cast<double>(m);
    const double fn = static_cast<double>(n);
    const double ss_norm = unbiased ? 1.0 / (fm * (fm - 1.0)) : 1.0 / (fm * fm);
    const double tt_norm = unbiased ? 1.0 / (fn * (fn - 1.0)) : 1.0 / (fn * fn);
    const double st_norm = 2.0 / (fm * fn);

    MmdResult result;
    result.estimator = estimator;
    result.per_kernel.resize(nu);
    for (std::size_t u = 0; u < nu; ++u) {
        result.per_kernel[u] =
            ss_norm * s_ss[u] - st_norm * s_st[u] + tt_norm * s_tt[u];
        result.value += family.coefficients[u] * result.per_kernel[u];
    }

    if (grads) {
        const auto& k = kern::active_backend();
        grads->source = Matrix(m, source.cols());
        grads->target = Matrix(n, target.cols());

        // d k_u(x, y) / d x = -(k_u / sigma_u^2) (x - y); same-index pairs
        // contribute nothing since x - x = 0.
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                k.diff_axpy(-2.0 * ss_norm * mix_ss(i, j), source.row(i),
                            source.row(j), grads->source.row(i), source.cols());
            }
            for (std::size_t j = 0; j < n; ++j) {
                k.diff_axpy(st_norm * mix_st(i, j), source.row(i),
                            target.row(j), grads->source.row(i), source.cols());
            }
        }
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                k.diff_axpy(-2.0 * tt_norm * mix_tt(j, i), target.row(j),
                            target.row(i), grads->target.row(j), target.cols());
            }
            for (std::size_t i = 0; i < m; ++i) {
                k.diff_axpy(st_norm * mix_st(i, j), target.row(j),
                            source.row(i), grads->target.row(j), target.cols());
            }
        }
    }
    return result;
}

}  // namespace grouplift
