#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grouplift/grouping.hpp"
#include "grouplift/matrix.hpp"
#include "grouplift/multilabel.hpp"

namespace grouplift {

// Synthetic multi-attribute data with a planted group structure. Features
// are standard normal. Each group g owns a latent direction u_g; an
// attribute in that group labels a sample by the sign of u_g . x plus
// attribute-specific noise. The noise level and the overlap between the
// u_g are calibrated so the label correlation is rho_in within a group and
// rho_out across groups (both as expected values).
//
// The target domain draws fresh samples, computes their labels, and only
// then distorts the features: a rotation in the (0, 1) feature plane
// followed by a mean shift on the first shift_dims coordinates. The labels
// therefore describe the undistorted data and are carried separately as
// evaluation-only truth.
struct SyntheticSpec {
    std::size_t feature_dim = 8;
    std::vector<std::size_t> group_sizes = {2, 3, 1};
    double rho_in = 0.8;
    double rho_out = 0.05;
    // Per-group multiplier on the label noise; empty means one for every
    // group. Values above one give that group weaker labels per sample,
    // values below one stronger ones, zero noise-free labels. Non-unit
    // values deliberately leave the rho_in calibration behind for the
    // groups they touch.
    std::vector<double> group_noise;
    std::size_t source_samples = 2000;
    std::size_t target_samples = 1000;
    double shift = 0.0;
    std::size_t shift_dims = kHalfDims;  // default: first half of the dims
    double rotation_deg = 0.0;
    std::uint64_t seed = 1;

    static constexpr std::size_t kHalfDims = static_cast<std::size_t>(-1);

    std::size_t attribute_count() const {
        std::size_t n = 0;
        for (std::size_t s : group_sizes) n += s;
        return n;
    }
};

struct LabeledDomain {
    Matrix features;
    LabelMatrix labels;
    std::vector<std::string> attribute_names;
};

struct UnlabeledDomain {
    Matrix features;
    LabelMatrix eval_labels;  // ground truth, for scoring only
    std::vector<std::string> attribute_names;
};

struct SyntheticData {
    LabeledDomain source;
    UnlabeledDomain target;
    AttributeGrouping planted;
    Matrix group_directions;  // one unit row per group, for diagnostics
};

// Deterministic in the spec (including the seed). Throws argument_error on
// contradictory settings and data_error when the correlation targets are
// infeasible.
SyntheticData generate(const SyntheticSpec& spec);

// CSV with a header line. Feature columns come first (any name), label
// columns carry an "attr:" prefix and hold +1 / -1.
void save_csv(const std::string& path, const Matrix& features,
              const LabelMatrix* labels,
              const std::vector<std::string>* attribute_names);

struct LoadedCsv {
    Matrix features;
    LabelMatrix labels;                        // attributes == 0 when absent
    std::vector<std::string> attribute_names;

    bool has_labels() const { return labels.attributes > 0; }
};

LoadedCsv load_csv(const std::string& path);

// Disjoint random partition by row. Fractions must be positive and sum to
// one; each part must come out non-empty.
std::vector<LabeledDomain> split(const LabeledDomain& domain,
                                 const std::vector<double>& fractions,
                                 std::uint64_t seed);

}  // namespace grouplift
