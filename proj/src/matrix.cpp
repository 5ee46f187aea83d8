#include "grouplift/matrix.hpp"

#include <cmath>
#include <string>

#include "grouplift/errors.hpp"
#include "grouplift/kernels.hpp"
#include "grouplift/rng.hpp"

namespace grouplift {

namespace {

void check(bool ok, const char* what) {
    if (!ok) throw shape_error(std::string("matmul shape mismatch: ") + what);
}

}  // namespace

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    check(a.cols() == b.cols(), "A*B^T needs A.cols == B.cols");
    const auto& k = kern::active_backend();
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
            c(i, j) = k.dot(a.row(i), b.row(j), a.cols());
        }
    }
    return c;
}

Matrix matmul_nn(const Matrix& a, const Matrix& b) {
    check(a.cols() == b.rows(), "A*B needs A.cols == B.rows");
    const auto& k = kern::active_backend();
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t p = 0; p < a.cols(); ++p) {
            k.axpy(a(i, p), b.row(p), c.row(i), b.cols());
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    check(a.rows() == b.rows(), "A^T*B needs A.rows == B.rows");
    const auto& k = kern::active_backend();
    Matrix c(a.cols(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t i = 0; i < a.cols(); ++i) {
            k.axpy(a(r, i), b.row(r), c.row(i), b.cols());
        }
    }
    return c;
}

void add_row_vector(Matrix& m, const std::vector<double>& bias) {
    check(m.cols() == bias.size(), "row vector length must match cols");
    const auto& k = kern::active_backend();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        k.axpy(1.0, bias.data(), m.row(r), m.cols());
    }
}

std::vector<double> column_sums(const Matrix& m) {
    const auto& k = kern::active_backend();
    std::vector<double> out(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        k.axpy(1.0, m.row(r), out.data(), m.cols());
    }
    return out;
}

bool all_finite(const Matrix& m) { return all_finite(m.storage()); }

bool all_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

Matrix random_normal(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

}  // namespace grouplift
