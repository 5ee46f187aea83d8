#include "grouplift/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "grouplift/errors.hpp"
#include "grouplift/matrix.hpp"
#include "grouplift/mmd.hpp"
#include "grouplift/multilabel.hpp"
#include "grouplift/rng.hpp"
#include "grouplift/transfer.hpp"

namespace grouplift {

namespace {

constexpr double kStep = 1e-5;
constexpr double kKinkMargin = 1e-2;

std::vector<double*> param_slots(DenseNetwork& net) {
    std::vector<double*> slots;
    for (auto& layer : net.layers) {
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            slots.push_back(layer.weights.data() + i);
        }
        for (double& b : layer.bias) slots.push_back(&b);
    }
    return slots;
}

std::vector<double*> param_slots(MultiLabelModel& model) {
    std::vector<double*> slots = param_slots(model.trunk);
    for (auto& head : model.heads) {
        const auto more = param_slots(head.net);
        slots.insert(slots.end(), more.begin(), more.end());
    }
    return slots;
}

void append_grads(std::vector<double>& flat, const std::vector<LayerGrads>& g) {
    for (const auto& layer : g) {
        flat.insert(flat.end(), layer.weights.data(),
                    layer.weights.data() + layer.weights.size());
        flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
    }
}

double worst_rel_err(const std::vector<double*>& slots,
                     const std::function<double()>& f,
                     const std::vector<double>& analytic) {
    double worst = 0.0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const double saved = *slots[i];
        *slots[i] = saved + kStep;
        const double up = f();
        *slots[i] = saved - kStep;
        const double down = f();
        *slots[i] = saved;
        const double numeric = (up - down) / (2.0 * kStep);
        const double denom =
            std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-6});
        worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
    }
    return worst;
}

// Smallest |pre-activation| at any ReLU unit; instances below the margin
// are rejected because the loss is not differentiable at the kink.
double relu_margin(const DenseNetwork& net, const Matrix& batch) {
    double margin = std::numeric_limits<double>::infinity();
    Matrix act = batch;
    for (const auto& layer : net.layers) {
        Matrix z = matmul_nt(act, layer.weights);
        add_row_vector(z, layer.bias);
        if (layer.activation == Activation::ReLU) {
            for (std::size_t i = 0; i < z.size(); ++i) {
                margin = std::min(margin, std::fabs(z.data()[i]));
                z.data()[i] = std::max(z.data()[i], 0.0);
            }
        }
        act = std::move(z);
    }
    return margin;
}

double relu_margin(const MultiLabelModel& model, const Matrix& batch) {
    double margin = relu_margin(model.trunk, batch);
    const Matrix feats = forward(model.trunk, batch).output();
    for (const auto& head : model.heads) {
        margin = std::min(margin, relu_margin(head.net, feats));
    }
    return margin;
}

LabelMatrix draw_labels(std::size_t samples, std::size_t attributes, Rng& rng) {
    LabelMatrix lm(samples, attributes);
    for (auto& c : lm.classes) c = rng.uniform() < 0.5 ? 0 : 1;
    return lm;
}

double check_dense_backward(Rng& rng) {
    DenseNetwork net = make_mlp(5, {6, 4, 3}, true, rng);
    Matrix batch = random_normal(4, 5, rng);
    while (relu_margin(net, batch) < kKinkMargin) {
        net = make_mlp(5, {6, 4, 3}, true, rng);
        batch = random_normal(4, 5, rng);
    }
    const Matrix weight = random_normal(4, 3, rng);

    const ForwardTrace trace = forward(net, batch);
    const BackwardResult back = backward(net, trace, weight);
    std::vector<double> analytic;
    append_grads(analytic, back.layers);

    const auto slots = param_slots(net);
    return worst_rel_err(slots, [&] {
        const ForwardTrace t = forward(net, batch);
        double acc = 0.0;
        for (std::size_t i = 0; i < weight.size(); ++i) {
            acc += weight.data()[i] * t.output().data()[i];
        }
        return acc;
    }, analytic);
}

double check_multilabel(Rng& rng, bool single_attribute) {
    const std::vector<std::string> names =
        single_attribute ? std::vector<std::string>{"a"}
                         : std::vector<std::string>{"a", "b", "c"};
    MultiLabelModel model = make_multilabel_model(4, {6, 5}, {4}, names, rng);
    Matrix batch = random_normal(5, 4, rng);
    while (relu_margin(model, batch) < kKinkMargin) {
        model = make_multilabel_model(4, {6, 5}, {4}, names, rng);
        batch = random_normal(5, 4, rng);
    }
    if (!single_attribute) {
        for (double& w : model.loss_weights) w = rng.uniform(0.1, 1.0);
    }
    const LabelMatrix labels = draw_labels(5, names.size(), rng);

    ModelGrads grads;
    multilabel_grads(model, batch, labels, grads);
    std::vector<double> analytic;
    append_grads(analytic, grads.trunk);
    for (const auto& h : grads.heads) append_grads(analytic, h);

    const auto slots = param_slots(model);
    return worst_rel_err(slots, [&] {
        return multilabel_loss(model, batch, labels).total;
    }, analytic);
}

double check_mmd(Rng& rng, MmdEstimator estimator) {
    const std::size_t dim = 3 + rng.uniform_index(3);
    Matrix source = random_normal(2 + rng.uniform_index(4), dim, rng);
    Matrix target = random_normal(2 + rng.uniform_index(4), dim, rng);
    KernelFamily family;
    family.bandwidths = {0.5, 1.0, 2.0};
    family.coefficients = {0.2, 0.5, 0.3};

    MmdGrads grads;
    mmd_squared(source, target, family, estimator, &grads);
    std::vector<double> analytic;
    analytic.insert(analytic.end(), grads.source.data(),
                    grads.source.data() + grads.source.size());
    analytic.insert(analytic.end(), grads.target.data(),
                    grads.target.data() + grads.target.size());

    std::vector<double*> slots;
    for (std::size_t i = 0; i < source.size(); ++i) {
        slots.push_back(source.data() + i);
    }
    for (std::size_t i = 0; i < target.size(); ++i) {
        slots.push_back(target.data() + i);
    }
    return worst_rel_err(slots, [&] {
        return mmd_squared(source, target, family, estimator, nullptr).value;
    }, analytic);
}

double check_transfer(Rng& rng) {
    MultiLabelModel model =
        make_multilabel_model(4, {6, 5}, {4, 3}, {"a", "b"}, rng);
    SingleAttributeNetwork combined = single_attribute_network(model, 0);
    Matrix sb = random_normal(4, 4, rng);
    Matrix tb = random_normal(3, 4, rng);
    while (std::min(relu_margin(combined.net, sb),
                    relu_margin(combined.net, tb)) < kKinkMargin) {
        model = make_multilabel_model(4, {6, 5}, {4, 3}, {"a", "b"}, rng);
        combined = single_attribute_network(model, 0);
        sb = random_normal(4, 4, rng);
        tb = random_normal(3, 4, rng);
    }
    const LabelMatrix sl = draw_labels(4, 1, rng);
    const std::vector<std::size_t> layers = default_mmd_layers(combined);
    KernelFamily family;
    family.bandwidths = {0.5, 1.0, 2.0};
    family.coefficients = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    const std::vector<KernelFamily> fams(layers.size(), family);
    const std::vector<double> w = {1.0, 0.5, 2.0};
    const double alpha = rng.uniform(0.1, 1.0);

    std::vector<LayerGrads> grads;
    transfer_loss(combined.net, sb, sl, tb, layers, fams, w, alpha,
                  MmdEstimator::Biased, &grads);
    std::vector<double> analytic;
    append_grads(analytic, grads);

    const auto slots = param_slots(combined.net);
    return worst_rel_err(slots, [&] {
        return transfer_loss(combined.net, sb, sl, tb, layers, fams, w, alpha,
                             MmdEstimator::Biased, nullptr)
            .total;
    }, analytic);
}

GradCheckItem run_component(const std::string& name, std::size_t trials,
                            double tolerance,
                            const std::function<double(Rng&)>& one, Rng& rng) {
    GradCheckItem item;
    item.component = name;
    item.trials = trials;
    for (std::size_t t = 0; t < trials; ++t) {
        item.worst_rel_err = std::max(item.worst_rel_err, one(rng));
    }
    item.pass = item.worst_rel_err < tolerance;
    return item;
}

}  // namespace

GradCheckReport run_gradient_checks(std::uint64_t seed, std::size_t trials,
                                    double tolerance) {
    if (trials == 0) throw argument_error("gradcheck needs at least one trial");
    if (!(tolerance > 0.0)) {
        throw argument_error("gradcheck tolerance must be positive");
    }
    Rng rng(seed);
    GradCheckReport report;
    report.tolerance = tolerance;
    report.items.push_back(run_component(
        "dense-backward", trials, tolerance,
        [](Rng& r) { return check_dense_backward(r); }, rng));
    report.items.push_back(run_component(
        "attribute-loss", trials, tolerance,
        [](Rng& r) { return check_multilabel(r, true); }, rng));
    report.items.push_back(run_component(
        "weighted-multilabel-loss", trials, tolerance,
        [](Rng& r) { return check_multilabel(r, false); }, rng));
    report.items.push_back(run_component(
        "discrepancy-biased", trials, tolerance,
        [](Rng& r) { return check_mmd(r, MmdEstimator::Biased); }, rng));
    report.items.push_back(run_component(
        "discrepancy-unbiased", trials, tolerance,
        [](Rng& r) { return check_mmd(r, MmdEstimator::Unbiased); }, rng));
    report.items.push_back(run_component(
        "adaptation-objective", trials, tolerance,
        [](Rng& r) { return check_transfer(r); }, rng));
    return report;
}

}  // namespace grouplift
