#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace grouplift {

struct GradCheckItem {
    std::string component;
    std::size_t trials = 0;
    double worst_rel_err = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckItem> items;
    double tolerance = 0.0;

    bool all_pass() const {
        for (const auto& item : items) {
            if (!item.pass) return false;
        }
        return !items.empty();
    }
};

// Compares every analytic gradient against central finite differences
// (step 1e-5) on seeded tiny instances: the plain dense backward pass, the
// single-attribute softmax loss, the weighted multi-attribute loss, the
// discrepancy estimators (input gradients, biased and unbiased), and the
// full adaptation objective. Instances whose pre-activations sit too close
// to the ReLU kink for finite differences to be meaningful are redrawn.
GradCheckReport run_gradient_checks(std::uint64_t seed, std::size_t trials,
                                    double tolerance);

}  // namespace grouplift
