#pragma once

#include <vector>

#include "grouplift/matrix.hpp"

namespace grouplift {

// Convex mixture of Gaussian kernels: k(x, y) = sum_u beta_u *
// exp(-|x - y|^2 / (2 sigma_u^2)).
struct KernelFamily {
    std::vector<double> bandwidths;    // sigma_u > 0
    std::vector<double> coefficients;  // beta_u >= 0, summing to 1
};

// Throws argument_error unless sizes match, bandwidths are positive and
// the coefficients form a convex combination (sum within 1e-12 of 1).
void validate(const KernelFamily& family);

// Uniform coefficients over scale * median pairwise Euclidean distance of
// the pooled rows of a and b. Throws data_error when fewer than two pooled
// rows exist or the median distance is zero.
KernelFamily median_bandwidths(const Matrix& a, const Matrix& b,
                               const std::vector<double>& scales);

// The default scale ladder around the median.
const std::vector<double>& default_kernel_scales();

double gaussian_kernel(const double* x, const double* y, std::size_t dim,
                       double sigma);

enum class MmdEstimator { Biased, Unbiased };

struct MmdResult {
    double value = 0.0;               // coefficient-weighted estimate
    std::vector<double> per_kernel;   // one estimate per bandwidth
    MmdEstimator estimator = MmdEstimator::Biased;
};

struct MmdGrads {
    Matrix source;  // d(value)/d(source rows)
    Matrix target;
};

// Squared maximum mean discrepancy between the row samples of source and
// target. Biased: the V-statistic with all pairs, never meaningfully
// negative. Unbiased: the U-statistic that drops same-index pairs in the
// within-domain sums (needs at least two rows per side). When grads is
// non-null it receives the exact derivative of value w.r.t. every sample.
MmdResult mmd_squared(const Matrix& source, const Matrix& target,
                      const KernelFamily& family, MmdEstimator estimator,
                      MmdGrads* grads = nullptr);

}  // namespace grouplift
