#include "grouplift/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "grouplift/errors.hpp"
#include "grouplift/kernels.hpp"
#include "grouplift/rng.hpp"

namespace grouplift {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Random orthonormal rows via Gram-Schmidt on Gaussian draws.
Matrix orthonormal_rows(std::size_t count, std::size_t dim, Rng& rng) {
    Matrix v(count, dim);
    const auto& k = kern::active_backend();
    for (std::size_t r = 0; r < count; ++r) {
        for (std::size_t c = 0; c < dim; ++c) v(r, c) = rng.normal();
        for (std::size_t p = 0; p < r; ++p) {
            const double proj = k.dot(v.row(r), v.row(p), dim);
            k.axpy(-proj, v.row(p), v.row(r), dim);
        }
        const double norm = std::sqrt(k.dot(v.row(r), v.row(r), dim));
        if (norm < 1e-8) {
            throw data_error("degenerate latent directions; retry with "
                             "another seed");
        }
        for (std::size_t c = 0; c < dim; ++c) v(r, c) /= norm;
    }
    return v;
}

void fill_labels(const Matrix& x, const Matrix& directions,
                 const AttributeGrouping& grouping,
                 const std::vector<double>& noise, LabelMatrix& out,
                 Rng& rng) {
    const auto& k = kern::active_backend();
    for (std::size_t n = 0; n < x.rows(); ++n) {
        for (std::size_t g = 0; g < grouping.group_count; ++g) {
            const double z = k.dot(x.row(n), directions.row(g), x.cols());
            for (std::size_t i : grouping.members[g]) {
                const double s = z + noise[g] * rng.normal();
                out.at(n, i) = s >= 0.0 ? 0 : 1;
            }
        }
    }
}

}  // namespace

SyntheticData generate(const SyntheticSpec& spec) {
    const std::size_t d = spec.feature_dim;
    const std::size_t groups = spec.group_sizes.size();
    const std::size_t attrs = spec.attribute_count();
    if (groups == 0 || attrs == 0) {
        throw argument_error("at least one non-empty group is required");
    }
    for (std::size_t s : spec.group_sizes) {
        if (s == 0) throw argument_error("group sizes must be positive");
    }
    if (spec.source_samples == 0 || spec.target_samples == 0) {
        throw argument_error("sample counts must be positive");
    }
    if (!(spec.rho_in > 0.0) || spec.rho_in > 1.0 || spec.rho_out < 0.0 ||
        spec.rho_out >= spec.rho_in) {
        throw argument_error("need 0 <= rho_out < rho_in <= 1");
    }
    if (!spec.group_noise.empty() && spec.group_noise.size() != groups) {
        throw argument_error("group_noise needs one value per group");
    }
    for (double v : spec.group_noise) {
        if (!(v >= 0.0)) {
            throw argument_error("group_noise values must be non-negative");
        }
    }
    const bool overlap = spec.rho_out > 0.0;
    const std::size_t needed = groups + (overlap ? 1 : 0);
    if (d < needed) {
        throw argument_error("feature_dim must be at least " +
                             std::to_string(needed) +
                             " for this group structure");
    }
    if (spec.rotation_deg != 0.0 && d < 2) {
        throw argument_error("rotation needs at least two feature dims");
    }
    const std::size_t shift_dims = spec.shift_dims == SyntheticSpec::kHalfDims
                                       ? (d + 1) / 2
                                       : spec.shift_dims;
    if (shift_dims > d) {
        throw argument_error("shift_dims exceeds feature_dim");
    }

    // sign-correlation calibration: for jointly Gaussian scores with
    // correlation r, corr(sign a, sign b) = (2 / pi) asin(r). Within a
    // group the scores share u_g . x and differ by noise, so
    // r = 1 / (1 + noise^2); across groups r is the direction overlap
    // scaled by the same factor.
    const double r_in = std::sin(spec.rho_in * kPi / 2.0);
    const double noise_sq = 1.0 / r_in - 1.0;
    const double noise = std::sqrt(std::max(noise_sq, 0.0));
    std::vector<double> group_noise(groups, noise);
    for (std::size_t g = 0; g < spec.group_noise.size(); ++g) {
        group_noise[g] = noise * spec.group_noise[g];
    }
    double overlap_sq = 0.0;
    if (overlap) {
        overlap_sq = std::sin(spec.rho_out * kPi / 2.0) * (1.0 + noise_sq);
        if (overlap_sq >= 0.99) {
            throw data_error("rho_out is infeasible given rho_in");
        }
    }

    Rng rng(spec.seed);
    const Matrix basis = orthonormal_rows(needed, d, rng);
    Matrix directions(groups, d);
    const auto& k = kern::active_backend();
    for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t own = overlap ? g + 1 : g;
        if (overlap) {
            k.axpy(std::sqrt(overlap_sq), basis.row(0), directions.row(g), d);
        }
        k.axpy(std::sqrt(1.0 - overlap_sq), basis.row(own), directions.row(g),
               d);
    }

    std::vector<std::size_t> assignment;
    for (std::size_t g = 0; g < groups; ++g) {
        assignment.insert(assignment.end(), spec.group_sizes[g], g);
    }
    AttributeGrouping planted = grouping_from_assignment(assignment);

    std::vector<std::string> names;
    names.reserve(attrs);
    for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t a = 0; a < spec.group_sizes[g]; ++a) {
            names.push_back("g" + std::to_string(g) + "a" + std::to_string(a));
        }
    }

    SyntheticData data;
    data.planted = planted;
    data.group_directions = directions;
    data.source.attribute_names = names;
    data.target.attribute_names = names;

    data.source.features = random_normal(spec.source_samples, d, rng);
    data.source.labels = LabelMatrix(spec.source_samples, attrs);
    fill_labels(data.source.features, directions, planted, group_noise,
                data.source.labels, rng);

    Matrix clean = random_normal(spec.target_samples, d, rng);
    data.target.eval_labels = LabelMatrix(spec.target_samples, attrs);
    fill_labels(clean, directions, planted, group_noise,
                data.target.eval_labels, rng);

    // Distort features only after labelling: the shift and rotation model a
    // covariate change, not a change of the labelling rule.
    const double theta = spec.rotation_deg * kPi / 180.0;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    data.target.features = std::move(clean);
    Matrix& tf = data.target.features;
    if (spec.rotation_deg != 0.0) {
        for (std::size_t n = 0; n < tf.rows(); ++n) {
            const double x0 = tf(n, 0);
            const double x1 = tf(n, 1);
            tf(n, 0) = c * x0 - s * x1;
            tf(n, 1) = s * x0 + c * x1;
        }
    }
    if (spec.shift != 0.0) {
        for (std::size_t n = 0; n < tf.rows(); ++n) {
            for (std::size_t j = 0; j < shift_dims; ++j) {
                tf(n, j) += spec.shift;
            }
        }
    }
    return data;
}

void save_csv(const std::string& path, const Matrix& features,
              const LabelMatrix* labels,
              const std::vector<std::string>* attribute_names) {
    if (labels) {
        if (!attribute_names || attribute_names->size() != labels->attributes) {
            throw shape_error("attribute names do not match label columns");
        }
        if (labels->samples != features.rows()) {
            throw shape_error("feature and label row counts differ");
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write '" + path + "'");

    for (std::size_t c = 0; c < features.cols(); ++c) {
        if (c) out << ',';
        out << 'f' << c;
    }
    if (labels) {
        for (const std::string& name : *attribute_names) {
            out << ",attr:" << name;
        }
    }
    out << '\n';

    char buf[40];
    for (std::size_t r = 0; r < features.rows(); ++r) {
        for (std::size_t c = 0; c < features.cols(); ++c) {
            if (c) out << ',';
            std::snprintf(buf, sizeof buf, "%.17g", features(r, c));
            out << buf;
        }
        if (labels) {
            for (std::size_t i = 0; i < labels->attributes; ++i) {
                out << (labels->at(r, i) == 0 ? ",+1" : ",-1");
            }
        }
        out << '\n';
    }
    if (!out) throw data_error("failed writing '" + path + "'");
}

LoadedCsv load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open '" + path + "'");

    auto fail = [&](std::size_t lineno, const std::string& msg) {
        throw parse_error(path + ":" + std::to_string(lineno) + ": " + msg);
    };

    std::string line;
    if (!std::getline(in, line)) fail(1, "empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) header.push_back(tok);
    }
    if (header.empty()) fail(1, "empty header");

    std::size_t feature_cols = 0;
    LoadedCsv out;
    bool in_labels = false;
    for (const std::string& h : header) {
        if (h.rfind("attr:", 0) == 0) {
            in_labels = true;
            const std::string name = h.substr(5);
            if (name.empty()) fail(1, "empty attribute name in header");
            out.attribute_names.push_back(name);
        } else {
            if (in_labels) {
                fail(1, "feature column '" + h + "' after label columns");
            }
            ++feature_cols;
        }
    }
    if (feature_cols == 0) fail(1, "no feature columns");

    std::vector<double> values;
    std::vector<std::uint8_t> classes;
    std::size_t rows = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::size_t col = 0;
        while (std::getline(ss, tok, ',')) {
            if (col >= header.size()) fail(lineno, "too many columns");
            if (col < feature_cols) {
                try {
                    std::size_t used = 0;
                    values.push_back(std::stod(tok, &used));
                    if (used != tok.size()) throw std::invalid_argument(tok);
                } catch (const std::exception&) {
                    fail(lineno, "bad feature value '" + tok + "'");
                }
            } else {
                if (tok == "+1" || tok == "1") {
                    classes.push_back(0);
                } else if (tok == "-1") {
                    classes.push_back(1);
                } else {
                    fail(lineno, "label must be +1 or -1, got '" + tok + "'");
                }
            }
            ++col;
        }
        if (col != header.size()) fail(lineno, "too few columns");
        ++rows;
    }
    if (rows == 0) fail(lineno, "no data rows");

    out.features = Matrix(rows, feature_cols);
    std::copy(values.begin(), values.end(), out.features.data());
    out.labels = LabelMatrix(rows, out.attribute_names.size());
    out.labels.classes = std::move(classes);
    return out;
}

std::vector<LabeledDomain> split(const LabeledDomain& domain,
                                 const std::vector<double>& fractions,
                                 std::uint64_t seed) {
    if (fractions.empty()) throw argument_error("no split fractions");
    double sum = 0.0;
    for (double f : fractions) {
        if (!(f > 0.0)) throw argument_error("split fractions must be positive");
        sum += f;
    }
    if (std::fabs(sum - 1.0) > 1e-9) {
        throw argument_error("split fractions must sum to 1");
    }
    const std::size_t n = domain.features.rows();
    if (domain.labels.samples != n) {
        throw shape_error("domain features and labels differ in size");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<std::size_t> bounds;
    double cum = 0.0;
    for (std::size_t p = 0; p + 1 < fractions.size(); ++p) {
        cum += fractions[p];
        bounds.push_back(static_cast<std::size_t>(
            std::llround(cum * static_cast<double>(n))));
    }
    bounds.push_back(n);

    std::vector<LabeledDomain> parts;
    std::size_t begin = 0;
    for (std::size_t b : bounds) {
        if (b <= begin || b > n) {
            throw argument_error("split produces an empty part; "
                                 "use coarser fractions or more rows");
        }
        LabeledDomain part;
        part.attribute_names = domain.attribute_names;
        part.features = Matrix(b - begin, domain.features.cols());
        part.labels = LabelMatrix(b - begin, domain.labels.attributes);
        for (std::size_t r = begin; r < b; ++r) {
            const std::size_t src = order[r];
            std::copy(domain.features.row(src),
                      domain.features.row(src) + domain.features.cols(),
                      part.features.row(r - begin));
            for (std::size_t i = 0; i < domain.labels.attributes; ++i) {
                part.labels.at(r - begin, i) = domain.labels.at(src, i);
            }
        }
        parts.push_back(std::move(part));
        begin = b;
    }
    return parts;
}

}  // namespace grouplift
