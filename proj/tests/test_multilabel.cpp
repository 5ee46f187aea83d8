#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "grouplift/errors.hpp"
#include "grouplift/multilabel.hpp"
#include "grouplift/rng.hpp"
#include "testutil.hpp"

using namespace grouplift;

namespace {

MultiLabelModel tiny_model(Rng& rng, std::size_t attrs = 3) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < attrs; ++i) {
        names.push_back("a" + std::to_string(i));
    }
    return make_multilabel_model(4, {6, 5}, {4}, names, rng);
}

}  // namespace

TEST_CASE("softmax matches the direct exponential formula") {
    Rng rng(61);
    for (int trial = 0; trial < 50; ++trial) {
        double z[2] = {rng.normal(), rng.normal()};
        const auto p = softmax(z, 2);
        const double e0 = std::exp(z[0]);
        const double e1 = std::exp(z[1]);
        CHECK(p[0] == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-12));
        CHECK(p[1] == doctest::Approx(e1 / (e0 + e1)).epsilon(1e-12));
        CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("softmax is stable under large logits") {
    double z[2] = {1000.0, -1000.0};
    const auto p = softmax(z, 2);
    CHECK(p[0] == 1.0);
    CHECK(p[1] == 0.0);
}

TEST_CASE("softmax_loss equals the mean negative log-likelihood") {
    Rng rng(67);
    const std::size_t n = 13;
    Matrix logits = random_normal(n, 2, rng);
    LabelMatrix labels = testutil::random_labels(n, 1, rng);

    double expect = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double e0 = std::exp(logits(r, 0));
        const double e1 = std::exp(logits(r, 1));
        const double p =
            (labels.at(r, 0) == 0 ? e0 : e1) / (e0 + e1);
        expect -= std::log(p);
    }
    expect /= static_cast<double>(n);
    CHECK(softmax_loss(logits, labels, 0) ==
          doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("softmax_loss_grad matches central differences on the logits") {
    Rng rng(71);
    Matrix logits = random_normal(9, 2, rng);
    LabelMatrix labels = testutil::random_labels(9, 1, rng);
    const double scale = 0.7;

    const Matrix grad = softmax_loss_grad(logits, labels, 0, scale);
    const double eps = 1e-6;
    std::vector<double> numeric(logits.size()), analytic(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double saved = logits.data()[i];
        logits.data()[i] = saved + eps;
        const double up = scale * softmax_loss(logits, labels, 0);
        logits.data()[i] = saved - eps;
        const double down = scale * softmax_loss(logits, labels, 0);
        logits.data()[i] = saved;
        numeric[i] = (up - down) / (2.0 * eps);
        analytic[i] = grad.data()[i];
    }
    CHECK(testutil::max_rel_err(analytic, numeric) < 1e-6);
}

TEST_CASE("multilabel loss is the weighted sum of per-head losses") {
    Rng rng(73);
    MultiLabelModel model = tiny_model(rng);
    model.loss_weights = {0.5, 0.3, 0.2};
    const Matrix batch = random_normal(11, 4, rng);
    const LabelMatrix labels = testutil::random_labels(11, 3, rng);

    const LossBreakdown got = multilabel_loss(model, batch, labels);

    // Independent assembly: run each head on the trunk features and apply
    // the closed-form loss.
    const ForwardTrace trunk = forward(model.trunk, batch);
    double expect = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const ForwardTrace head = forward(model.heads[i].net, trunk.output());
        LabelMatrix single(labels.samples, 1);
        for (std::size_t r = 0; r < labels.samples; ++r) {
            single.at(r, 0) = labels.at(r, i);
        }
        const double li = softmax_loss(head.output(), single, 0);
        CHECK(got.per_attribute[i] == doctest::Approx(li).epsilon(1e-12));
        expect += model.loss_weights[i] * li;
    }
    CHECK(got.total == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("doubling all loss weights doubles the total exactly") {
    Rng rng(79);
    MultiLabelModel model = tiny_model(rng);
    model.loss_weights = {0.25, 0.5, 0.125};
    const Matrix batch = random_normal(8, 4, rng);
    const LabelMatrix labels = testutil::random_labels(8, 3, rng);
    const double total1 = multilabel_loss(model, batch, labels).total;
    for (double& w : model.loss_weights) w *= 2.0;
    const double total2 = multilabel_loss(model, batch, labels).total;
    CHECK(total2 == 2.0 * total1);
}

TEST_CASE("total loss is invariant under attribute permutation") {
    Rng rng(83);
    MultiLabelModel model = tiny_model(rng);
    model.loss_weights = {0.6, 0.1, 0.3};
    const Matrix batch = random_normal(10, 4, rng);
    const LabelMatrix labels = testutil::random_labels(10, 3, rng);
    const double base = multilabel_loss(model, batch, labels).total;

    const std::vector<std::size_t> perm = {2, 0, 1};
    MultiLabelModel shuffled = model;
    LabelMatrix plabels(labels.samples, labels.attributes);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        shuffled.heads[i] = model.heads[perm[i]];
        shuffled.loss_weights[i] = model.loss_weights[perm[i]];
        shuffled.attribute_names[i] = model.attribute_names[perm[i]];
        for (std::size_t r = 0; r < labels.samples; ++r) {
            plabels.at(r, i) = labels.at(r, perm[i]);
        }
    }
    const double permuted = multilabel_loss(shuffled, batch, plabels).total;
    CHECK(permuted == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("multilabel gradients match central differences") {
    Rng rng(89);
    for (int trial = 0; trial < 10; ++trial) {
        MultiLabelModel model = tiny_model(rng);
        Matrix batch = random_normal(5, 4, rng);
        while (testutil::min_relu_margin(model, batch) < testutil::kKinkMargin) {
            model = tiny_model(rng);
            batch = random_normal(5, 4, rng);
        }
        model.loss_weights = {rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0),
                              rng.uniform(0.1, 1.0)};
        const LabelMatrix labels = testutil::random_labels(5, 3, rng);

        ModelGrads grads;
        multilabel_grads(model, batch, labels, grads);
        const auto analytic = testutil::flatten(grads);

        testutil::ParamView view;
        view.add(model);
        const auto numeric = testutil::fd_gradient(view, [&] {
            return multilabel_loss(model, batch, labels).total;
        });
        CHECK(testutil::max_rel_err(analytic, numeric) < 1e-5);
    }
}

TEST_CASE("training is deterministic in the seed and improves the loss") {
    Rng gen(97);
    // Linearly separable attribute: sign of x0, plus a correlated copy.
    const std::size_t n = 120;
    Matrix x = random_normal(n, 4, gen);
    LabelMatrix y(n, 2);
    for (std::size_t r = 0; r < n; ++r) {
        y.at(r, 0) = x(r, 0) >= 0.0 ? 0 : 1;
        y.at(r, 1) = x(r, 0) + 0.1 * x(r, 1) >= 0.0 ? 0 : 1;
    }

    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.1;
    cfg.seed = 5;

    Rng m1(123), m2(123);
    MultiLabelModel a =
        make_multilabel_model(4, {8}, {6}, {"p", "q"}, m1);
    MultiLabelModel b =
        make_multilabel_model(4, {8}, {6}, {"p", "q"}, m2);

    const double before = multilabel_loss(a, x, y).total;
    const auto hist_a = train_mnet(a, x, y, cfg);
    const auto hist_b = train_mnet(b, x, y, cfg);

    REQUIRE(hist_a.size() == cfg.epochs);
    CHECK(hist_a.back().total_loss < before);
    CHECK(hist_a.back().accuracy[0] > 0.9);

    CHECK(a.trunk.layers[0].weights.storage() ==
          b.trunk.layers[0].weights.storage());
    for (std::size_t i = 0; i < a.heads.size(); ++i) {
        for (std::size_t l = 0; l < a.heads[i].net.layers.size(); ++l) {
            CHECK(a.heads[i].net.layers[l].weights.storage() ==
                  b.heads[i].net.layers[l].weights.storage());
        }
    }
    for (std::size_t e = 0; e < hist_a.size(); ++e) {
        CHECK(hist_a[e].total_loss == hist_b[e].total_loss);
    }
}

TEST_CASE("zero training epochs leave the model untouched") {
    Rng rng(101);
    MultiLabelModel model = tiny_model(rng);
    const Matrix x = random_normal(10, 4, rng);
    const LabelMatrix y = testutil::random_labels(10, 3, rng);
    const MultiLabelModel before = model;

    TrainConfig cfg;
    cfg.epochs = 0;
    const auto hist = train_mnet(model, x, y, cfg);
    CHECK(hist.empty());
    CHECK(model.trunk.layers[0].weights.storage() ==
          before.trunk.layers[0].weights.storage());
    CHECK(model.heads[2].net.layers[1].weights.storage() ==
          before.heads[2].net.layers[1].weights.storage());
}

TEST_CASE("absurd learning rates raise a training error") {
    Rng rng(103);
    MultiLabelModel model = tiny_model(rng);
    const Matrix x = random_normal(40, 4, rng);
    const LabelMatrix y = testutil::random_labels(40, 3, rng);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.batch_size = 8;
    // Big enough that the parameters overflow within a few steps.
    cfg.learning_rate = 1e155;
    CHECK_THROWS_AS(train_mnet(model, x, y, cfg), training_error);
}

TEST_CASE("prediction breaks exact ties toward the positive class") {
    Rng rng(107);
    MultiLabelModel model = tiny_model(rng, 1);
    // Zero out the logit layer: every sample scores (0, 0).
    DenseLayer& logit = model.heads[0].net.layers.back();
    logit.weights.fill(0.0);
    std::fill(logit.bias.begin(), logit.bias.end(), 0.0);
    const Matrix x = random_normal(6, 4, rng);
    const Prediction pred = predict(model, x);
    for (std::size_t r = 0; r < 6; ++r) {
        CHECK(pred.classes.at(r, 0) == 0);
        CHECK(pred.positive_prob(r, 0) == doctest::Approx(0.5));
    }
}

TEST_CASE("per-attribute accuracy counts exact matches") {
    Prediction pred;
    pred.classes = LabelMatrix(4, 2);
    LabelMatrix truth(4, 2);
    // attribute 0: 3/4 match; attribute 1: 1/4 match.
    pred.classes.at(0, 0) = 0; truth.at(0, 0) = 0;
    pred.classes.at(1, 0) = 1; truth.at(1, 0) = 1;
    pred.classes.at(2, 0) = 0; truth.at(2, 0) = 0;
    pred.classes.at(3, 0) = 1; truth.at(3, 0) = 0;
    pred.classes.at(0, 1) = 0; truth.at(0, 1) = 1;
    pred.classes.at(1, 1) = 0; truth.at(1, 1) = 1;
    pred.classes.at(2, 1) = 1; truth.at(2, 1) = 1;
    pred.classes.at(3, 1) = 0; truth.at(3, 1) = 1;
    const auto acc = per_attribute_accuracy(pred, truth);
    CHECK(acc[0] == doctest::Approx(0.75));
    CHECK(acc[1] == doctest::Approx(0.25));
}

TEST_CASE("model validation catches structural mistakes") {
    Rng rng(109);
    MultiLabelModel model = tiny_model(rng);
    SUBCASE("missing weight") {
        model.loss_weights.pop_back();
        CHECK_THROWS_AS(validate(model), shape_error);
    }
    SUBCASE("head width") {
        model.heads[1].net.layers.back().weights = Matrix(3, 4);
        model.heads[1].net.layers.back().bias.assign(3, 0.0);
        CHECK_THROWS_AS(validate(model), shape_error);
    }
    SUBCASE("head input") {
        model.heads[0].net.input_dim = 7;
        CHECK_THROWS_AS(validate(model), shape_error);
    }
    SUBCASE("label attribute mismatch") {
        const Matrix x = random_normal(5, 4, rng);
        const LabelMatrix y = testutil::random_labels(5, 2, rng);
        CHECK_THROWS_AS(multilabel_loss(model, x, y), shape_error);
    }
}
