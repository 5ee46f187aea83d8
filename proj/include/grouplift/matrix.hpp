#pragma once

#include <cstddef>
#include <vector>

namespace grouplift {

class Rng;

// Dense row-major matrix of doubles. Deliberately minimal: the library
// needs exactly the operations below, all with fixed accumulation order
// so results are reproducible run to run.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) {
        return data_[r * cols_ + c];
    }
    double operator()(std::size_t r, std::size_t c) const {
        return data_[r * cols_ + c];
    }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    void fill(double v) { data_.assign(data_.size(), v); }

    bool same_shape(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// C = A * B^T  with A: m x k, B: n x k  ->  C: m x n
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// C = A * B    with A: m x k, B: k x n  ->  C: m x n
Matrix matmul_nn(const Matrix& a, const Matrix& b);

// C = A^T * B  with A: n x m, B: n x k  ->  C: m x k
Matrix matmul_tn(const Matrix& a, const Matrix& b);

// out[r] = row r of m plus bias (bias.size() == cols)
void add_row_vector(Matrix& m, const std::vector<double>& bias);

// Column sums of m, length cols.
std::vector<double> column_sums(const Matrix& m);

// All entries finite?
bool all_finite(const Matrix& m);
bool all_finite(const std::vector<double>& v);

// i.i.d. standard normal entries, filled row-major.
Matrix random_normal(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace grouplift
