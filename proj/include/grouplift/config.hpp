#pragma once

#include <cstdint>
#include <string>

namespace grouplift {

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double learning_rate = 0.05;
    std::uint64_t seed = 0;
};

// Canonical text form, also the input to config_hash.
std::string canonical_string(const TrainConfig& cfg);

// FNV-1a over the canonical string; stored in checkpoints so a resumed or
// compared run can detect configuration drift.
std::uint64_t config_hash(const TrainConfig& cfg);

}  // namespace grouplift
