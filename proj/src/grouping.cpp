#include "grouplift/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "grouplift/errors.hpp"

namespace grouplift {

Matrix label_correlation(const LabelMatrix& labels) {
    const std::size_t n = labels.samples;
    const std::size_t d = labels.attributes;
    if (n < 2) throw data_error("correlation needs at least two samples");

    // With values in {-1, +1}: mean = p+ - p-, variance = 1 - mean^2.
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        long sum = 0;
        for (std::size_t r = 0; r < n; ++r) {
            sum += labels.at(r, i) == 0 ? 1 : -1;
        }
        mean[i] = static_cast<double>(sum) / static_cast<double>(n);
    }
    std::vector<double> sd(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double var = 1.0 - mean[i] * mean[i];
        if (var <= 0.0) {
            throw data_error("attribute " + std::to_string(i) +
                             " has constant labels; correlation is undefined");
        }
        sd[i] = std::sqrt(var);
    }

    Matrix corr(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        corr(i, i) = 1.0;
        for (std::size_t j = i + 1; j < d; ++j) {
            double cov = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                const double a = (labels.at(r, i) == 0 ? 1.0 : -1.0) - mean[i];
                const double b = (labels.at(r, j) == 0 ? 1.0 : -1.0) - mean[j];
                cov += a * b;
            }
            cov /= static_cast<double>(n);
            double r = cov / (sd[i] * sd[j]);
            r = std::clamp(r, -1.0, 1.0);
            corr(i, j) = r;
            corr(j, i) = r;
        }
    }
    return corr;
}

AttributeGrouping grouping_from_assignment(const std::vector<std::size_t>& assignment) {
    if (assignment.empty()) throw argument_error("empty group assignment");
    const std::size_t groups =
        1 + *std::max_element(assignment.begin(), assignment.end());
    AttributeGrouping g;
    g.group_count = groups;
    g.assignment = assignment;
    g.members.resize(groups);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        g.members[assignment[i]].push_back(i);
    }
    for (std::size_t gi = 0; gi < groups; ++gi) {
        if (g.members[gi].empty()) {
            throw argument_error("group " + std::to_string(gi) + " is empty");
        }
    }
    return g;
}

AttributeGrouping cluster_attributes(const Matrix& correlation, std::size_t groups) {
    const std::size_t d = correlation.rows();
    if (correlation.cols() != d) throw shape_error("correlation must be square");
    if (groups == 0 || groups > d) {
        throw argument_error("group count must be in [1, attribute count]");
    }

    // Clusters stay ordered by smallest member so tie-breaking is just
    // "first pair found".
    std::vector<std::vector<std::size_t>> clusters(d);
    for (std::size_t i = 0; i < d; ++i) clusters[i] = {i};

    auto linkage = [&](const std::vector<std::size_t>& a,
                       const std::vector<std::size_t>& b) {
        double total = 0.0;
        for (std::size_t i : a) {
            for (std::size_t j : b) {
                total += 1.0 - std::fabs(correlation(i, j));
            }
        }
        return total / static_cast<double>(a.size() * b.size());
    };

    while (clusters.size() > groups) {
        std::size_t best_p = 0, best_q = 1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < clusters.size(); ++p) {
            for (std::size_t q = p + 1; q < clusters.size(); ++q) {
                const double dpq = linkage(clusters[p], clusters[q]);
                if (dpq < best) {
                    best = dpq;
                    best_p = p;
                    best_q = q;
                }
            }
        }
        auto& dst = clusters[best_p];
        auto& src = clusters[best_q];
        dst.insert(dst.end(), src.begin(), src.end());
        std::sort(dst.begin(), dst.end());
        clusters.erase(clusters.begin() +
                       static_cast<std::ptrdiff_t>(best_q));
    }

    std::sort(clusters.begin(), clusters.end());
    AttributeGrouping g;
    g.group_count = clusters.size();
    g.assignment.assign(d, 0);
    g.members = std::move(clusters);
    for (std::size_t gi = 0; gi < g.members.size(); ++gi) {
        for (std::size_t i : g.members[gi]) g.assignment[i] = gi;
    }
    return g;
}

std::vector<double> group_loss_weights(const AttributeGrouping& grouping) {
    const double gcount = static_cast<double>(grouping.group_count);
    std::vector<double> w(grouping.attribute_count());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double gsize =
            static_cast<double>(grouping.group_size(grouping.assignment[i]));
        w[i] = 1.0 / (gcount * gsize);
    }
    return w;
}

std::vector<double> equal_loss_weights(std::size_t attributes) {
    return std::vector<double>(attributes, 1.0);
}

std::vector<double> emphasized_loss_weights(const AttributeGrouping& grouping,
                                            std::size_t focus_group,
                                            double off_weight) {
    if (focus_group >= grouping.group_count) {
        throw argument_error("focus group out of range");
    }
    std::vector<double> w(grouping.attribute_count(), off_weight);
    for (std::size_t i : grouping.members[focus_group]) w[i] = 1.0;
    return w;
}

void save_grouping(const std::string& path, const AttributeGrouping& grouping,
                   const std::vector<std::string>& attribute_names,
                   const std::vector<double>* weights) {
    if (attribute_names.size() != grouping.attribute_count()) {
        throw shape_error("attribute name count does not match grouping");
    }
    if (weights && weights->size() != grouping.attribute_count()) {
        throw shape_error("weight count does not match grouping");
    }
    std::ofstream out(path);
    if (!out) throw data_error("cannot write grouping file '" + path + "'");
    out << "# attribute groups\n";
    for (const auto& group : grouping.members) {
        for (std::size_t k = 0; k < group.size(); ++k) {
            if (k) out << ',';
            out << attribute_names[group[k]];
        }
        out << '\n';
    }
    if (weights) {
        out << "# weights\n";
        char buf[64];
        for (std::size_t i = 0; i < weights->size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", (*weights)[i]);
            out << attribute_names[i] << ' ' << buf << '\n';
        }
    }
    if (!out) throw data_error("failed writing grouping file '" + path + "'");
}

namespace {

std::string strip(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

LoadedGrouping load_grouping(const std::string& path,
                             const std::vector<std::string>& attribute_names) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open grouping file '" + path + "'");

    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < attribute_names.size(); ++i) {
        index[attribute_names[i]] = i;
    }

    std::vector<std::size_t> assignment(attribute_names.size(), 0);
    std::vector<bool> seen(attribute_names.size(), false);
    std::vector<double> weights(attribute_names.size(), 0.0);
    std::vector<bool> weight_seen(attribute_names.size(), false);
    bool in_weights = false;
    bool any_weight = false;
    std::size_t group = 0;
    std::string line;
    std::size_t lineno = 0;

    auto fail = [&](const std::string& msg) {
        throw parse_error(path + ":" + std::to_string(lineno) + ": " + msg);
    };

    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = strip(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            if (t == "# weights") in_weights = true;
            continue;
        }
        if (!in_weights) {
            std::stringstream ss(t);
            std::string name;
            bool empty = true;
            while (std::getline(ss, name, ',')) {
                name = strip(name);
                if (name.empty()) fail("empty attribute name");
                auto it = index.find(name);
                if (it == index.end()) fail("unknown attribute '" + name + "'");
                if (seen[it->second]) fail("attribute '" + name + "' listed twice");
                seen[it->second] = true;
                assignment[it->second] = group;
                empty = false;
            }
            if (empty) fail("empty group line");
            ++group;
        } else {
            std::stringstream ss(t);
            std::string name;
            double value = 0.0;
            if (!(ss >> name >> value)) fail("expected 'name value'");
            auto it = index.find(name);
            if (it == index.end()) fail("unknown attribute '" + name + "'");
            if (weight_seen[it->second]) fail("duplicate weight for '" + name + "'");
            if (!std::isfinite(value) || value <= 0.0) {
                fail("weight must be a positive finite number");
            }
            weight_seen[it->second] = true;
            weights[it->second] = value;
            any_weight = true;
        }
    }

    for (std::size_t i = 0; i < attribute_names.size(); ++i) {
        if (!seen[i]) {
            throw parse_error(path + ": attribute '" + attribute_names[i] +
                              "' missing from group lines");
        }
        if (any_weight && !weight_seen[i]) {
            throw parse_error(path + ": weight for '" + attribute_names[i] +
                              "' missing");
        }
    }
    if (group == 0) throw parse_error(path + ": no groups found");

    LoadedGrouping out;
    out.grouping = grouping_from_assignment(assignment);
    if (any_weight) out.weights = std::move(weights);
    return out;
}

}  // namespace grouplift
