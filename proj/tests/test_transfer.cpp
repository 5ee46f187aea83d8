#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "grouplift/errors.hpp"
#include "grouplift/rng.hpp"
#include "grouplift/transfer.hpp"
#include "testutil.hpp"

using namespace grouplift;

namespace {

MultiLabelModel demo_model(Rng& rng) {
    return make_multilabel_model(4, {6, 5}, {4, 3},
                                 {"one", "two", "three"}, rng);
}

KernelFamily fixed_family() {
    KernelFamily f;
    f.bandwidths = {0.5, 1.0, 2.0};
    f.coefficients = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    return f;
}

bool networks_identical(const DenseNetwork& a, const DenseNetwork& b) {
    if (a.input_dim != b.input_dim || a.layers.size() != b.layers.size()) {
        return false;
    }
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].weights.storage() != b.layers[l].weights.storage() ||
            a.layers[l].bias != b.layers[l].bias ||
            a.layers[l].activation != b.layers[l].activation) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("combined network reproduces trunk plus head exactly") {
    Rng rng(401);
    const MultiLabelModel model = demo_model(rng);
    const SingleAttributeNetwork combined = single_attribute_network(model, 1);
    CHECK(combined.trunk_depth == 2);
    CHECK(combined.net.layers.size() == 5);

    const Matrix x = random_normal(7, 4, rng);
    const ForwardTrace whole = forward(combined.net, x);
    const ForwardTrace trunk = forward(model.trunk, x);
    const ForwardTrace head = forward(model.heads[1].net, trunk.output());
    CHECK(whole.output().storage() == head.output().storage());

    CHECK_THROWS_AS(single_attribute_network(model, 3), argument_error);
}

TEST_CASE("combined network splits back into an identical model") {
    Rng rng(403);
    const MultiLabelModel model = demo_model(rng);
    const SingleAttributeNetwork combined = single_attribute_network(model, 2);
    const MultiLabelModel back = to_single_head_model(combined, "three");
    CHECK(networks_identical(back.trunk, model.trunk));
    CHECK(networks_identical(back.heads[0].net, model.heads[2].net));
    CHECK(back.attribute_names[0] == "three");
    CHECK(back.loss_weights == std::vector<double>{1.0});
}

TEST_CASE("default discrepancy taps cover trunk output and head hiddens") {
    Rng rng(405);
    const MultiLabelModel model = demo_model(rng);
    const SingleAttributeNetwork combined = single_attribute_network(model, 0);
    CHECK(default_mmd_layers(combined) ==
          std::vector<std::size_t>{2, 3, 4});
}

TEST_CASE("the alpha policy is exactly 1.0 same-group, 0.1 cross-group") {
    const AttributeGrouping g = grouping_from_assignment({0, 0, 1, 1, 1, 2});
    CHECK(alpha_for_groups(g, 0, 1) == 1.0);
    CHECK(alpha_for_groups(g, 2, 4) == 1.0);
    CHECK(alpha_for_groups(g, 5, 5) == 1.0);
    CHECK(alpha_for_groups(g, 0, 2) == 0.1);
    CHECK(alpha_for_groups(g, 5, 0) == 0.1);
    CHECK_THROWS_AS(alpha_for_groups(g, 6, 0), argument_error);
}

TEST_CASE("transfer loss decomposes into its reported parts") {
    Rng rng(407);
    const MultiLabelModel model = demo_model(rng);
    const SingleAttributeNetwork combined = single_attribute_network(model, 0);
    const Matrix sb = random_normal(6, 4, rng);
    const Matrix tb = random_normal(5, 4, rng);
    const LabelMatrix sl = testutil::random_labels(6, 1, rng);
    const auto layers = default_mmd_layers(combined);
    const std::vector<KernelFamily> fams(layers.size(), fixed_family());
    const std::vector<double> w(layers.size(), 1.0);

    const TransferLoss loss =
        transfer_loss(combined.net, sb, sl, tb, layers, fams, w, 0.7,
                      MmdEstimator::Biased, nullptr);
    REQUIRE(loss.mmd_terms.size() == 3);
    double expect = 0.0;
    for (std::size_t t = 0; t < loss.mmd_terms.size(); ++t) {
        CHECK(loss.mmd_terms[t] >= -1e-12);
        expect += w[t] * loss.mmd_terms[t];
    }
    expect += 0.7 * loss.source_loss;
    CHECK(loss.total == expect);
}

TEST_CASE("transfer gradients match central differences") {
    Rng rng(409);
    for (const auto est : {MmdEstimator::Biased, MmdEstimator::Unbiased}) {
        for (int trial = 0; trial < 5; ++trial) {
            MultiLabelModel model = demo_model(rng);
            SingleAttributeNetwork combined = single_attribute_network(model, 0);
            Matrix sb = random_normal(4, 4, rng);
            Matrix tb = random_normal(3, 4, rng);
            while (std::min(testutil::min_relu_margin(combined.net, sb),
                            testutil::min_relu_margin(combined.net, tb)) <
                   testutil::kKinkMargin) {
                model = demo_model(rng);
                combined = single_attribute_network(model, 0);
                sb = random_normal(4, 4, rng);
                tb = random_normal(3, 4, rng);
            }
            const LabelMatrix sl = testutil::random_labels(4, 1, rng);
            const auto layers = default_mmd_layers(combined);
            const std::vector<KernelFamily> fams(layers.size(), fixed_family());
            const std::vector<double> w = {1.0, 0.5, 2.0};
            const double alpha = 0.6;

            std::vector<LayerGrads> grads;
            transfer_loss(combined.net, sb, sl, tb, layers, fams, w, alpha, est,
                          &grads);
            const auto analytic = testutil::flatten(grads);

            testutil::ParamView view;
            view.add(combined.net);
            const auto numeric = testutil::fd_gradient(view, [&] {
                return transfer_loss(combined.net, sb, sl, tb, layers, fams, w,
                                     alpha, est, nullptr)
                    .total;
            });
            CHECK(testutil::max_rel_err(analytic, numeric) < 1e-5);
        }
    }
}

TEST_CASE("a discrepancy tap on the logits merges with the source loss") {
    Rng rng(411);
    MultiLabelModel model = demo_model(rng);
    SingleAttributeNetwork combined = single_attribute_network(model, 1);
    Matrix sb = random_normal(4, 4, rng);
    Matrix tb = random_normal(4, 4, rng);
    while (std::min(testutil::min_relu_margin(combined.net, sb),
                    testutil::min_relu_margin(combined.net, tb)) <
           testutil::kKinkMargin) {
        model = demo_model(rng);
        combined = single_attribute_network(model, 1);
        sb = random_normal(4, 4, rng);
        tb = random_normal(4, 4, rng);
    }
    const LabelMatrix sl = testutil::random_labels(4, 1, rng);
    const std::vector<std::size_t> layers = {combined.net.layers.size()};
    const std::vector<KernelFamily> fams = {fixed_family()};
    const std::vector<double> w = {1.5};

    std::vector<LayerGrads> grads;
    transfer_loss(combined.net, sb, sl, tb, layers, fams, w, 0.9,
                  MmdEstimator::Biased, &grads);
    const auto analytic = testutil::flatten(grads);

    testutil::ParamView view;
    view.add(combined.net);
    const auto numeric = testutil::fd_gradient(view, [&] {
        return transfer_loss(combined.net, sb, sl, tb, layers, fams, w, 0.9,
                             MmdEstimator::Biased, nullptr)
            .total;
    });
    CHECK(testutil::max_rel_err(analytic, numeric) < 1e-5);
}

TEST_CASE("duplicate or out-of-range taps are rejected") {
    Rng rng(413);
    const MultiLabelModel model = demo_model(rng);
    const SingleAttributeNetwork combined = single_attribute_network(model, 0);
    const Matrix sb = random_normal(3, 4, rng);
    const Matrix tb = random_normal(3, 4, rng);
    const LabelMatrix sl = testutil::random_labels(3, 1, rng);
    const std::vector<KernelFamily> fams2(2, fixed_family());
    const std::vector<double> w2 = {1.0, 1.0};
    CHECK_THROWS_AS(
        transfer_loss(combined.net, sb, sl, tb, {2, 2}, fams2, w2, 1.0,
                      MmdEstimator::Biased, nullptr),
        argument_error);
    CHECK_THROWS_AS(
        transfer_loss(combined.net, sb, sl, tb, {0, 1}, fams2, w2, 1.0,
                      MmdEstimator::Biased, nullptr),
        argument_error);
    CHECK_THROWS_AS(
        transfer_loss(combined.net, sb, sl, tb, {1, 99}, fams2, w2, 1.0,
                      MmdEstimator::Biased, nullptr),
        argument_error);
}

TEST_CASE("zero adaptation epochs reproduce the source model bitwise") {
    Rng rng(417);
    const MultiLabelModel model = demo_model(rng);
    TransferTask task;
    task.source_features = random_normal(20, 4, rng);
    task.source_labels = testutil::random_labels(20, 1, rng);
    task.target_features = random_normal(15, 4, rng);
    TrainConfig cfg;
    cfg.epochs = 0;

    const TransferOutcome out = train_tnet(model, 1, task, cfg);
    const SingleAttributeNetwork fresh = single_attribute_network(model, 1);
    CHECK(networks_identical(out.adapted.net, fresh.net));
    CHECK(out.adapted.trunk_depth == fresh.trunk_depth);
    CHECK(out.history.empty());
    CHECK(out.mmd_layers == std::vector<std::size_t>{2, 3, 4});
    CHECK(out.families.size() == 3);
}

TEST_CASE("adaptation is deterministic and freezes the requested prefix") {
    Rng rng(419);
    const MultiLabelModel model = demo_model(rng);
    TransferTask task;
    task.source_features = random_normal(30, 4, rng);
    LabelMatrix sl(30, 1);
    for (std::size_t r = 0; r < 30; ++r) {
        sl.at(r, 0) = task.source_features(r, 0) >= 0 ? 0 : 1;
    }
    task.source_labels = sl;
    task.target_features = random_normal(25, 4, rng);
    for (std::size_t i = 0; i < task.target_features.size(); ++i) {
        task.target_features.data()[i] += 0.8;
    }
    task.freeze_depth = 1;
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.learning_rate = 0.05;
    cfg.seed = 77;

    const TransferOutcome a = train_tnet(model, 0, task, cfg);
    const TransferOutcome b = train_tnet(model, 0, task, cfg);
    CHECK(networks_identical(a.adapted.net, b.adapted.net));
    REQUIRE(a.history.size() == 3);
    for (std::size_t e = 0; e < 3; ++e) {
        CHECK(a.history[e].total == b.history[e].total);
    }

    // Frozen prefix untouched, the rest adapted.
    CHECK(a.adapted.net.layers[0].weights.storage() ==
          model.trunk.layers[0].weights.storage());
    CHECK(a.adapted.net.layers[1].weights.storage() !=
          model.trunk.layers[1].weights.storage());
}

TEST_CASE("adaptation drives the measured discrepancy down") {
    Rng rng(421);
    const MultiLabelModel model = demo_model(rng);
    TransferTask task;
    task.source_features = random_normal(60, 4, rng);
    LabelMatrix sl(60, 1);
    for (std::size_t r = 0; r < 60; ++r) {
        sl.at(r, 0) = task.source_features(r, 0) >= 0 ? 0 : 1;
    }
    task.source_labels = sl;
    task.target_features = random_normal(50, 4, rng);
    for (std::size_t i = 0; i < task.target_features.size(); ++i) {
        task.target_features.data()[i] += 1.0;
    }
    TrainConfig cfg;
    cfg.epochs = 15;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.05;
    cfg.seed = 5;

    const TransferOutcome out = train_tnet(model, 0, task, cfg);
    double first = 0.0, last = 0.0;
    for (std::size_t t = 0; t < out.mmd_layers.size(); ++t) {
        first += out.history.front().mmd_terms[t];
        last += out.history.back().mmd_terms[t];
    }
    CHECK(last < first);
}

TEST_CASE("the epoch observer sees every epoch without disturbing training") {
    Rng rng(427);
    const MultiLabelModel model = demo_model(rng);
    TransferTask task;
    task.source_features = random_normal(20, 4, rng);
    task.source_labels = testutil::random_labels(20, 1, rng);
    task.target_features = random_normal(15, 4, rng);
    task.kernels = fixed_family();
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 8;
    cfg.seed = 3;

    std::vector<std::size_t> seen;
    const TransferOutcome plain = train_tnet(model, 0, task, cfg);
    const TransferOutcome watched = train_tnet(
        model, 0, task, cfg,
        [&](const TransferEpoch& em, const DenseNetwork& net) {
            seen.push_back(em.epoch);
            CHECK(net.layers.size() == 5);
        });
    CHECK(seen == std::vector<std::size_t>{1, 2, 3, 4});
    CHECK(networks_identical(plain.adapted.net, watched.adapted.net));
}

TEST_CASE("custom kernel scales change the resolved median families") {
    Rng rng(429);
    const MultiLabelModel model = demo_model(rng);
    TransferTask task;
    task.source_features = random_normal(20, 4, rng);
    task.source_labels = testutil::random_labels(20, 1, rng);
    task.target_features = random_normal(15, 4, rng);
    TrainConfig cfg;
    cfg.epochs = 0;

    TransferTask doubled = task;
    doubled.kernel_scales = {2.0};
    const TransferOutcome base = train_tnet(model, 0, task, cfg);
    const TransferOutcome wide = train_tnet(model, 0, doubled, cfg);
    REQUIRE(base.families.size() == wide.families.size());
    CHECK(base.families[0].bandwidths.size() ==
          default_kernel_scales().size());
    for (std::size_t t = 0; t < wide.families.size(); ++t) {
        REQUIRE(wide.families[t].bandwidths.size() == 1);
        // Scale 1 sits in the middle of the default ladder {.25,.5,1,2,4}.
        CHECK(wide.families[t].bandwidths[0] ==
              2.0 * base.families[t].bandwidths[2]);
    }
}

TEST_CASE("the no-adaptation baseline scores the source head on the target") {
    Rng rng(431);
    const MultiLabelModel model = demo_model(rng);
    const Matrix x = random_normal(30, 4, rng);
    const SingleAttributeNetwork combined = single_attribute_network(model, 2);
    const LabelMatrix pred = predict_binary(combined.net, x);
    LabelMatrix truth(30, 2);
    for (std::size_t r = 0; r < 30; ++r) {
        truth.at(r, 0) = 1 - pred.at(r, 0);
        truth.at(r, 1) = pred.at(r, 0);
    }
    CHECK(direct_transfer_accuracy(model, 2, x, truth, 1) == 1.0);
    CHECK(direct_transfer_accuracy(model, 2, x, truth, 0) == 0.0);
}

TEST_CASE("binary accuracy scores a two-logit network") {
    Rng rng(423);
    const MultiLabelModel model = demo_model(rng);
    const SingleAttributeNetwork combined = single_attribute_network(model, 0);
    const Matrix x = random_normal(40, 4, rng);
    const LabelMatrix pred = predict_binary(combined.net, x);
    LabelMatrix truth(40, 1);
    for (std::size_t r = 0; r < 40; ++r) truth.at(r, 0) = pred.at(r, 0);
    CHECK(binary_accuracy(combined.net, x, truth, 0) == 1.0);
    for (std::size_t r = 0; r < 40; ++r) {
        truth.at(r, 0) = 1 - truth.at(r, 0);
    }
    CHECK(binary_accuracy(combined.net, x, truth, 0) == 0.0);
}
