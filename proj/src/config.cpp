#include "grouplift/config.hpp"

#include <cstdio>

namespace grouplift {

std::string canonical_string(const TrainConfig& cfg) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epochs=%zu;batch=%zu;lr=%.17g;seed=%llu",
                  cfg.epochs, cfg.batch_size, cfg.learning_rate,
                  static_cast<unsigned long long>(cfg.seed));
    return buf;
}

std::uint64_t config_hash(const TrainConfig& cfg) {
    const std::string s = canonical_string(cfg);
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace grouplift
