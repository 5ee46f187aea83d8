#pragma once

#include <stdexcept>
#include <string>

namespace grouplift {

// Error taxonomy, mapped to CLI exit codes:
//   argument_error -> 1 (usage/config), data-layer errors -> 2,
//   numeric/training errors -> 3.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad caller-supplied value (out-of-range count, unknown name, bad fractions).
struct argument_error : error {
    using error::error;
};

// Dimension mismatch between matrices, networks, or batches.
struct shape_error : error {
    using error::error;
};

// Malformed input file; message carries the line number where known.
struct parse_error : error {
    using error::error;
};

// Degenerate or infeasible data (constant label column, identical points,
// unreachable correlation targets).
struct data_error : error {
    using error::error;
};

// Non-finite values where finite ones are required.
struct numeric_error : error {
    using error::error;
};

// Divergence or non-finite gradients during optimisation; message names
// the epoch or layer.
struct training_error : numeric_error {
    using numeric_error::numeric_error;
};

}  // namespace grouplift
