#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "grouplift/data.hpp"
#include "grouplift/errors.hpp"
#include "grouplift/grouping.hpp"
#include "grouplift/kernels.hpp"
#include "testutil.hpp"

using namespace grouplift;

TEST_CASE("generate produces the requested shapes and planted grouping") {
    SyntheticSpec spec;
    spec.feature_dim = 8;
    spec.group_sizes = {2, 3, 1};
    spec.source_samples = 50;
    spec.target_samples = 30;
    const SyntheticData data = generate(spec);

    CHECK(data.source.features.rows() == 50);
    CHECK(data.source.features.cols() == 8);
    CHECK(data.source.labels.samples == 50);
    CHECK(data.source.labels.attributes == 6);
    CHECK(data.target.features.rows() == 30);
    CHECK(data.target.eval_labels.samples == 30);
    CHECK(data.source.attribute_names.size() == 6);
    CHECK(data.planted.group_count == 3);
    CHECK(data.planted.members[1] == std::vector<std::size_t>{2, 3, 4});
    CHECK(data.group_directions.rows() == 3);

    // Latent directions are unit length.
    const auto& k = kern::active_backend();
    for (std::size_t g = 0; g < 3; ++g) {
        const double norm = k.dot(data.group_directions.row(g),
                                  data.group_directions.row(g), 8);
        CHECK(norm == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("generation is deterministic in the spec seed") {
    SyntheticSpec spec;
    spec.source_samples = 40;
    spec.target_samples = 20;
    spec.shift = 0.7;
    spec.rotation_deg = 10.0;
    const SyntheticData a = generate(spec);
    const SyntheticData b = generate(spec);
    CHECK(a.source.features.storage() == b.source.features.storage());
    CHECK(a.source.labels.classes == b.source.labels.classes);
    CHECK(a.target.features.storage() == b.target.features.storage());
    CHECK(a.target.eval_labels.classes == b.target.eval_labels.classes);

    SyntheticSpec other = spec;
    other.seed = spec.seed + 1;
    const SyntheticData c = generate(other);
    CHECK(a.source.features.storage() != c.source.features.storage());
}

TEST_CASE("label correlations land near the requested targets") {
    SyntheticSpec spec;
    spec.feature_dim = 8;
    spec.group_sizes = {2, 3, 1};
    spec.rho_in = 0.8;
    spec.rho_out = 0.05;
    spec.source_samples = 4000;
    spec.target_samples = 10;
    spec.seed = 11;
    const SyntheticData data = generate(spec);
    const Matrix corr = label_correlation(data.source.labels);
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = i + 1; j < 6; ++j) {
            const bool same =
                data.planted.assignment[i] == data.planted.assignment[j];
            const double expect = same ? spec.rho_in : spec.rho_out;
            CHECK(std::fabs(corr(i, j) - expect) < 0.1);
        }
    }
}

TEST_CASE("group noise multipliers weaken exactly the groups they name") {
    SyntheticSpec spec;
    spec.feature_dim = 8;
    spec.group_sizes = {2, 2};
    spec.rho_in = 0.9;
    spec.rho_out = 0.0;
    spec.source_samples = 3000;
    spec.target_samples = 10;
    spec.seed = 5;

    SUBCASE("all-ones multipliers reproduce the default bit for bit") {
        const SyntheticData plain = generate(spec);
        spec.group_noise = {1.0, 1.0};
        const SyntheticData scaled = generate(spec);
        CHECK(plain.source.features.storage() ==
              scaled.source.features.storage());
        CHECK(plain.source.labels.classes == scaled.source.labels.classes);
        CHECK(plain.target.eval_labels.classes ==
              scaled.target.eval_labels.classes);
    }

    SUBCASE("agreement with the latent rule drops as the multiplier grows") {
        // Oracle: score each group by how often its labels match the sign
        // of the clean direction score. More noise must mean less often.
        auto agreement = [](const SyntheticData& data, std::size_t group) {
            const auto& k = kern::active_backend();
            double hits = 0.0, total = 0.0;
            for (std::size_t n = 0; n < data.source.features.rows(); ++n) {
                const double z =
                    k.dot(data.source.features.row(n),
                          data.group_directions.row(group),
                          data.source.features.cols());
                for (std::size_t i : data.planted.members[group]) {
                    const std::uint8_t want = z >= 0.0 ? 0 : 1;
                    hits += data.source.labels.at(n, i) == want ? 1.0 : 0.0;
                    total += 1.0;
                }
            }
            return hits / total;
        };
        spec.group_noise = {1.0, 4.0};
        const SyntheticData data = generate(spec);
        CHECK(agreement(data, 0) > agreement(data, 1) + 0.05);

        spec.group_noise = {0.0, 4.0};
        const SyntheticData clean = generate(spec);
        CHECK(agreement(clean, 0) == 1.0);
    }
}

TEST_CASE("target labels describe the undistorted features") {
    SyntheticSpec spec;
    spec.feature_dim = 6;
    spec.group_sizes = {2, 1};
    spec.rho_in = 1.0;  // no label noise: the rule is exactly sign(u . x)
    spec.rho_out = 0.0;
    spec.source_samples = 5;
    spec.target_samples = 200;
    spec.shift = 5.0;
    spec.shift_dims = 3;
    spec.rotation_deg = 30.0;
    spec.seed = 21;
    const SyntheticData data = generate(spec);

    // Undo the distortion and recompute the labels from the latent
    // directions; they must agree exactly.
    const double theta = 30.0 * 3.14159265358979323846 / 180.0;
    const double c = std::cos(theta), s = std::sin(theta);
    const auto& k = kern::active_backend();
    for (std::size_t n = 0; n < 200; ++n) {
        std::vector<double> x(6);
        for (std::size_t j = 0; j < 6; ++j) {
            x[j] = data.target.features(n, j) - (j < 3 ? 5.0 : 0.0);
        }
        const double x0 = c * x[0] + s * x[1];
        const double x1 = -s * x[0] + c * x[1];
        x[0] = x0;
        x[1] = x1;
        for (std::size_t i = 0; i < 3; ++i) {
            const std::size_t g = data.planted.assignment[i];
            const double z = k.dot(x.data(), data.group_directions.row(g), 6);
            CHECK(data.target.eval_labels.at(n, i) == (z >= 0.0 ? 0 : 1));
        }
    }

    // Sanity: labels computed from the shifted features instead would be
    // heavily one-sided; the stored ones stay near balance.
    for (std::size_t i = 0; i < 3; ++i) {
        double mean = 0.0;
        for (std::size_t n = 0; n < 200; ++n) {
            mean += data.target.eval_labels.at(n, i) == 0 ? 1.0 : -1.0;
        }
        CHECK(std::fabs(mean / 200.0) < 0.25);
    }
}

TEST_CASE("infeasible or contradictory specs are rejected") {
    SyntheticSpec spec;
    spec.group_sizes = {2, 2};
    spec.source_samples = 10;
    spec.target_samples = 10;

    SUBCASE("rho ordering") {
        spec.rho_out = 0.9;
        spec.rho_in = 0.8;
        CHECK_THROWS_AS(generate(spec), argument_error);
    }
    SUBCASE("rho_in zero") {
        spec.rho_in = 0.0;
        spec.rho_out = 0.0;
        CHECK_THROWS_AS(generate(spec), argument_error);
    }
    SUBCASE("not enough dims for the groups") {
        spec.feature_dim = 2;
        spec.rho_out = 0.1;
        CHECK_THROWS_AS(generate(spec), argument_error);
    }
    SUBCASE("near-coincident correlation targets are infeasible") {
        spec.rho_in = 0.9;
        spec.rho_out = 0.895;
        CHECK_THROWS_AS(generate(spec), data_error);
    }
    SUBCASE("empty group") {
        spec.group_sizes = {2, 0};
        CHECK_THROWS_AS(generate(spec), argument_error);
    }
    SUBCASE("shift dims out of range") {
        spec.shift_dims = 9;
        spec.shift = 1.0;
        CHECK_THROWS_AS(generate(spec), argument_error);
    }
    SUBCASE("group noise count mismatch") {
        spec.group_noise = {1.0};
        CHECK_THROWS_AS(generate(spec), argument_error);
    }
    SUBCASE("negative group noise") {
        spec.group_noise = {1.0, -0.5};
        CHECK_THROWS_AS(generate(spec), argument_error);
    }
}

TEST_CASE("csv files round-trip byte for byte") {
    testutil::TempDir dir;
    SyntheticSpec spec;
    spec.source_samples = 12;
    spec.target_samples = 5;
    const SyntheticData data = generate(spec);

    const std::string p1 = dir.file("a.csv");
    save_csv(p1, data.source.features, &data.source.labels,
             &data.source.attribute_names);
    const LoadedCsv loaded = load_csv(p1);
    CHECK(loaded.features.storage() == data.source.features.storage());
    CHECK(loaded.labels.classes == data.source.labels.classes);
    CHECK(loaded.attribute_names == data.source.attribute_names);

    const std::string p2 = dir.file("b.csv");
    save_csv(p2, loaded.features, &loaded.labels, &loaded.attribute_names);
    CHECK(testutil::read_file(p1) == testutil::read_file(p2));
}

TEST_CASE("csv without attribute columns loads as unlabeled") {
    testutil::TempDir dir;
    Matrix m(2, 3);
    m(0, 0) = 1.5;
    m(1, 2) = -2.25;
    const std::string p = dir.file("plain.csv");
    save_csv(p, m, nullptr, nullptr);
    const LoadedCsv loaded = load_csv(p);
    CHECK(!loaded.has_labels());
    CHECK(loaded.features.storage() == m.storage());
}

TEST_CASE("csv parser accepts bare 1 and reports malformed lines") {
    testutil::TempDir dir;
    auto write = [&](const std::string& name, const std::string& body) {
        const std::string p = dir.file(name);
        FILE* f = std::fopen(p.c_str(), "w");
        std::fputs(body.c_str(), f);
        std::fclose(f);
        return p;
    };

    const LoadedCsv ok =
        load_csv(write("ok.csv", "f0,attr:x\n0.5,1\n-1.25,-1\n"));
    CHECK(ok.labels.at(0, 0) == 0);
    CHECK(ok.labels.at(1, 0) == 1);

    CHECK_THROWS_AS(load_csv(dir.file("absent.csv")), data_error);
    CHECK_THROWS_WITH_AS(
        load_csv(write("badlabel.csv", "f0,attr:x\n0.5,2\n")),
        doctest::Contains(":2:"), parse_error);
    CHECK_THROWS_WITH_AS(
        load_csv(write("badfloat.csv", "f0,attr:x\n0.5,+1\nzz,+1\n")),
        doctest::Contains(":3:"), parse_error);
    CHECK_THROWS_AS(load_csv(write("short.csv", "f0,f1,attr:x\n0.5,+1\n")),
                    parse_error);
    CHECK_THROWS_AS(load_csv(write("order.csv", "attr:x,f0\n+1,0.5\n")),
                    parse_error);
    CHECK_THROWS_AS(load_csv(write("empty.csv", "")), parse_error);
    CHECK_THROWS_AS(load_csv(write("norows.csv", "f0,attr:x\n")), parse_error);
    CHECK_THROWS_AS(load_csv(write("nofeat.csv", "attr:x\n+1\n")), parse_error);
}

TEST_CASE("split partitions rows without loss or overlap") {
    SyntheticSpec spec;
    spec.source_samples = 20;
    spec.target_samples = 5;
    const SyntheticData data = generate(spec);

    const auto parts = split(data.source, {0.5, 0.25, 0.25}, 9);
    REQUIRE(parts.size() == 3);
    CHECK(parts[0].features.rows() == 10);
    CHECK(parts[1].features.rows() == 5);
    CHECK(parts[2].features.rows() == 5);

    // Multiset of first-column values must be preserved.
    std::vector<double> original, scattered;
    for (std::size_t r = 0; r < 20; ++r) {
        original.push_back(data.source.features(r, 0));
    }
    for (const auto& part : parts) {
        for (std::size_t r = 0; r < part.features.rows(); ++r) {
            scattered.push_back(part.features(r, 0));
        }
    }
    std::sort(original.begin(), original.end());
    std::sort(scattered.begin(), scattered.end());
    CHECK(original == scattered);

    const auto again = split(data.source, {0.5, 0.25, 0.25}, 9);
    CHECK(again[1].features.storage() == parts[1].features.storage());
    const auto reseeded = split(data.source, {0.5, 0.25, 0.25}, 10);
    CHECK(reseeded[1].features.storage() != parts[1].features.storage());
}

TEST_CASE("split validates its fractions") {
    SyntheticSpec spec;
    spec.source_samples = 10;
    spec.target_samples = 5;
    const SyntheticData data = generate(spec);
    CHECK_THROWS_AS(split(data.source, {}, 1), argument_error);
    CHECK_THROWS_AS(split(data.source, {0.5, 0.4}, 1), argument_error);
    CHECK_THROWS_AS(split(data.source, {1.0, -0.0}, 1), argument_error);
    CHECK_THROWS_AS(split(data.source, {0.999, 0.001}, 1), argument_error);
}
