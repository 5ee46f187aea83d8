#pragma once

#include <cstdint>
#include <string>

#include "grouplift/multilabel.hpp"

namespace grouplift {

struct Checkpoint {
    MultiLabelModel model;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
};

// Text format, one tagged line per scalar field, parameters with 17
// significant digits: save -> load -> save is byte-identical and the loaded
// model is bit-identical to the saved one. Non-finite parameters are
// refused (numeric_error).
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

// Throws data_error when the file cannot be opened, parse_error on any
// malformed or version-mismatched content.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace grouplift
