#pragma once

#include <optional>
#include <string>
#include <vector>

#include "grouplift/matrix.hpp"
#include "grouplift/multilabel.hpp"

namespace grouplift {

// Pearson correlation between attribute label columns mapped to +-1 (the
// phi coefficient for binary labels). Result is attributes x attributes,
// symmetric, unit diagonal. Constant columns throw data_error.
Matrix label_correlation(const LabelMatrix& labels);

struct AttributeGrouping {
    std::size_t group_count = 0;
    std::vector<std::size_t> assignment;              // attribute -> group
    std::vector<std::vector<std::size_t>> members;    // group -> attributes

    std::size_t attribute_count() const { return assignment.size(); }
    std::size_t group_size(std::size_t g) const { return members[g].size(); }
};

// Build a grouping directly from an assignment vector (group ids must be
// 0..G-1 with every group non-empty).
AttributeGrouping grouping_from_assignment(const std::vector<std::size_t>& assignment);

// Agglomerative average-linkage clustering into exactly `groups` clusters,
// on the distance 1 - |corr|. Merges are deterministic: among equally good
// pairs the one earliest in (smallest member, smallest member) order wins.
// Groups are numbered by their smallest attribute index.
AttributeGrouping cluster_attributes(const Matrix& correlation, std::size_t groups);

// Per-attribute loss weights 1 / (group_count * size of own group): every
// group contributes the same total weight and the weights sum to one.
std::vector<double> group_loss_weights(const AttributeGrouping& grouping);

// All-ones weights, the unweighted baseline.
std::vector<double> equal_loss_weights(std::size_t attributes);

// One group kept at weight 1, every other attribute down-weighted; the
// single-task-emphasis baseline.
std::vector<double> emphasized_loss_weights(const AttributeGrouping& grouping,
                                            std::size_t focus_group,
                                            double off_weight);

struct LoadedGrouping {
    AttributeGrouping grouping;
    std::optional<std::vector<double>> weights;
};

// Text format: one line per group with comma-separated attribute names,
// then an optional "# weights" section of "name value" lines. Other lines
// starting with '#' are comments.
void save_grouping(const std::string& path, const AttributeGrouping& grouping,
                   const std::vector<std::string>& attribute_names,
                   const std::vector<double>* weights);

// Names in the file are resolved against attribute_names; every attribute
// must appear exactly once in the group lines.
LoadedGrouping load_grouping(const std::string& path,
                             const std::vector<std::string>& attribute_names);

}  // namespace grouplift
