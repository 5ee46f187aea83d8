#include "grouplift/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "grouplift/errors.hpp"
#include "grouplift/kernels.hpp"
#include "grouplift/rng.hpp"

namespace grouplift {

SingleAttributeNetwork single_attribute_network(const MultiLabelModel& model,
                                                std::size_t attribute) {
    validate(model);
    if (attribute >= model.attribute_count()) {
        throw argument_error("attribute index out of range");
    }
    SingleAttributeNetwork combined;
    combined.net.input_dim = model.trunk.input_dim;
    combined.net.layers = model.trunk.layers;
    const DenseNetwork& head = model.heads[attribute].net;
    combined.net.layers.insert(combined.net.layers.end(), head.layers.begin(),
                               head.layers.end());
    combined.trunk_depth = model.trunk.layers.size();
    validate(combined.net);
    return combined;
}

MultiLabelModel to_single_head_model(const SingleAttributeNetwork& combined,
                                     const std::string& attribute_name) {
    if (combined.trunk_depth == 0 ||
        combined.trunk_depth >= combined.net.layers.size()) {
        throw argument_error("combined network has no trunk/head split");
    }
    MultiLabelModel model;
    model.trunk.input_dim = combined.net.input_dim;
    model.trunk.layers.assign(
        combined.net.layers.begin(),
        combined.net.layers.begin() +
            static_cast<std::ptrdiff_t>(combined.trunk_depth));
    AttributeHead head;
    head.net.input_dim = model.trunk.output_dim();
    head.net.layers.assign(combined.net.layers.begin() +
                               static_cast<std::ptrdiff_t>(combined.trunk_depth),
                           combined.net.layers.end());
    model.heads.push_back(std::move(head));
    model.loss_weights = {1.0};
    model.attribute_names = {attribute_name};
    validate(model);
    return model;
}

std::vector<std::size_t> default_mmd_layers(const SingleAttributeNetwork& combined) {
    std::vector<std::size_t> taps;
    for (std::size_t idx = combined.trunk_depth;
         idx < combined.net.layers.size(); ++idx) {
        taps.push_back(idx);
    }
    return taps;
}

double alpha_for_groups(const AttributeGrouping& grouping,
                        std::size_t source_attribute,
                        std::size_t target_attribute) {
    if (source_attribute >= grouping.attribute_count() ||
        target_attribute >= grouping.attribute_count()) {
        throw argument_error("attribute index out of range for the grouping");
    }
    return grouping.assignment[source_attribute] ==
                   grouping.assignment[target_attribute]
               ? kSameGroupAlpha
               : kCrossGroupAlpha;
}

TransferLoss transfer_loss(const DenseNetwork& net, const Matrix& source_batch,
                           const LabelMatrix& source_labels,
                           const Matrix& target_batch,
                           const std::vector<std::size_t>& mmd_layers,
                           const std::vector<KernelFamily>& families,
                           const std::vector<double>& term_weights, double alpha,
                           MmdEstimator estimator,
                           std::vector<LayerGrads>* grads) {
    if (source_labels.attributes != 1 ||
        source_labels.samples != source_batch.rows()) {
        throw shape_error("source labels must be one column per source row");
    }
    if (net.output_dim() != 2) {
        throw shape_error("transfer expects a two-logit network");
    }
    if (families.size() != mmd_layers.size() ||
        term_weights.size() != mmd_layers.size()) {
        throw shape_error("per-layer kernel families and weights must match "
                          "the tapped layers");
    }
    for (std::size_t t = 0; t < mmd_layers.size(); ++t) {
        if (mmd_layers[t] == 0 || mmd_layers[t] > net.layers.size()) {
            throw argument_error("tapped layer index out of range");
        }
        for (std::size_t u = t + 1; u < mmd_layers.size(); ++u) {
            if (mmd_layers[t] == mmd_layers[u]) {
                throw argument_error("duplicate tapped layer index");
            }
        }
    }

    const auto& k = kern::active_backend();
    const ForwardTrace src = forward(net, source_batch);
    const ForwardTrace tgt = forward(net, target_batch);

    TransferLoss loss;
    loss.mmd_terms.resize(mmd_layers.size());
    ActivationTaps src_taps, tgt_taps;
    for (std::size_t t = 0; t < mmd_layers.size(); ++t) {
        const std::size_t idx = mmd_layers[t];
        MmdGrads mg;
        const MmdResult r =
            mmd_squared(src.activations[idx], tgt.activations[idx],
                        families[t], estimator, grads ? &mg : nullptr);
        loss.mmd_terms[t] = r.value;
        loss.total += term_weights[t] * r.value;
        if (grads) {
            auto scale_into = [&](ActivationTaps& taps, Matrix&& g) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g.data()[i] *= term_weights[t];
                }
                auto [it, fresh] = taps.try_emplace(idx, std::move(g));
                if (!fresh) {
                    k.axpy(1.0, g.data(), it->second.data(), g.size());
                }
            };
            scale_into(src_taps, std::move(mg.source));
            scale_into(tgt_taps, std::move(mg.target));
        }
    }

    loss.source_loss = softmax_loss(src.output(), source_labels, 0);
    loss.total += alpha * loss.source_loss;

    if (grads) {
        Matrix dlogits = softmax_loss_grad(src.output(), source_labels, 0, alpha);
        auto [it, fresh] =
            src_taps.try_emplace(net.layers.size(), std::move(dlogits));
        if (!fresh) {
            k.axpy(1.0, dlogits.data(), it->second.data(), dlogits.size());
        }
        BackwardResult src_back = backward(net, src, src_taps);
        *grads = std::move(src_back.layers);
        if (!tgt_taps.empty()) {
            BackwardResult tgt_back = backward(net, tgt, tgt_taps);
            accumulate_grads(*grads, tgt_back.layers);
        }
    }
    return loss;
}

namespace {

Matrix take_rows(const Matrix& src, const std::vector<std::size_t>& idx,
                 std::size_t begin, std::size_t end) {
    Matrix out(end - begin, src.cols());
    for (std::size_t r = begin; r < end; ++r) {
        const double* from = src.row(idx[r]);
        std::copy(from, from + src.cols(), out.row(r - begin));
    }
    return out;
}

}  // namespace

TransferOutcome train_tnet(const MultiLabelModel& model,
                           std::size_t source_attribute,
                           const TransferTask& task, const TrainConfig& config,
                           const EpochObserver& observer) {
    if (task.source_features.rows() != task.source_labels.samples ||
        task.source_labels.attributes != 1) {
        throw shape_error("task needs single-attribute source labels matching "
                          "the source rows");
    }
    if (task.source_features.cols() != task.target_features.cols()) {
        throw shape_error("source and target feature widths differ");
    }
    if (task.target_features.rows() == 0) {
        throw argument_error("no target samples");
    }
    if (config.batch_size == 0) {
        throw argument_error("batch size must be positive");
    }
    if (!(task.alpha >= 0.0)) {
        throw argument_error("alpha must be non-negative");
    }

    TransferOutcome out;
    out.adapted = single_attribute_network(model, source_attribute);
    DenseNetwork& net = out.adapted.net;
    freeze_prefix(net, task.freeze_depth);

    out.mmd_layers =
        task.mmd_layers.empty() ? default_mmd_layers(out.adapted) : task.mmd_layers;
    std::vector<double> term_weights = task.mmd_term_weights;
    if (term_weights.empty()) {
        term_weights.assign(out.mmd_layers.size(), 1.0);
    } else if (term_weights.size() != out.mmd_layers.size()) {
        throw shape_error("one discrepancy weight per tapped layer required");
    }

    if (!task.kernels.bandwidths.empty()) {
        validate(task.kernels);
        out.families.assign(out.mmd_layers.size(), task.kernels);
    } else {
        // Bandwidths follow the scale of the activations they compare, so
        // each tapped layer gets its own family, fixed before training.
        const std::vector<double>& scales = task.kernel_scales.empty()
                                                ? default_kernel_scales()
                                                : task.kernel_scales;
        const ForwardTrace src = forward(net, task.source_features);
        const ForwardTrace tgt = forward(net, task.target_features);
        for (std::size_t idx : out.mmd_layers) {
            if (idx == 0 || idx > net.layers.size()) {
                throw argument_error("tapped layer index out of range");
            }
            out.families.push_back(median_bandwidths(
                src.activations[idx], tgt.activations[idx], scales));
        }
    }

    Rng rng(config.seed);
    const std::size_t ns = task.source_features.rows();
    const std::size_t nt = task.target_features.rows();
    std::vector<std::size_t> src_order(ns);
    std::iota(src_order.begin(), src_order.end(), std::size_t{0});
    std::vector<std::size_t> tgt_stream(nt);
    std::iota(tgt_stream.begin(), tgt_stream.end(), std::size_t{0});
    std::size_t tgt_cursor = nt;  // forces a shuffle before first use

    auto next_target_batch = [&](std::size_t want) {
        Matrix batch(std::min(want, nt), task.target_features.cols());
        for (std::size_t r = 0; r < batch.rows(); ++r) {
            if (tgt_cursor == nt) {
                rng.shuffle(tgt_stream);
                tgt_cursor = 0;
            }
            const double* from = task.target_features.row(tgt_stream[tgt_cursor++]);
            std::copy(from, from + batch.cols(), batch.row(r));
        }
        return batch;
    };

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(src_order);
        TransferEpoch em;
        em.epoch = epoch;
        em.mmd_terms.assign(out.mmd_layers.size(), 0.0);
        std::size_t steps = 0;
        for (std::size_t begin = 0; begin < ns; begin += config.batch_size) {
            const std::size_t end = std::min(begin + config.batch_size, ns);
            Matrix xb = take_rows(task.source_features, src_order, begin, end);
            LabelMatrix yb(end - begin, 1);
            for (std::size_t r = begin; r < end; ++r) {
                yb.at(r - begin, 0) = task.source_labels.at(src_order[r], 0);
            }
            Matrix tb = next_target_batch(end - begin);

            std::vector<LayerGrads> grads;
            TransferLoss loss = transfer_loss(net, xb, yb, tb, out.mmd_layers,
                                              out.families, term_weights,
                                              task.alpha, task.estimator, &grads);
            if (!std::isfinite(loss.total)) {
                throw training_error("transfer loss diverged at epoch " +
                                     std::to_string(epoch));
            }
            sgd_step(net, grads, config.learning_rate);

            em.total += loss.total;
            em.source_loss += loss.source_loss;
            for (std::size_t t = 0; t < loss.mmd_terms.size(); ++t) {
                em.mmd_terms[t] += loss.mmd_terms[t];
            }
            ++steps;
        }
        const double inv = 1.0 / static_cast<double>(steps);
        em.total *= inv;
        em.source_loss *= inv;
        for (double& v : em.mmd_terms) v *= inv;
        out.history.push_back(std::move(em));
        if (observer) observer(out.history.back(), net);
    }
    return out;
}

double direct_transfer_accuracy(const MultiLabelModel& model,
                                std::size_t source_attribute,
                                const Matrix& target_features,
                                const LabelMatrix& truth,
                                std::size_t target_attribute) {
    const SingleAttributeNetwork combined =
        single_attribute_network(model, source_attribute);
    return binary_accuracy(combined.net, target_features, truth,
                           target_attribute);
}

LabelMatrix predict_binary(const DenseNetwork& net, const Matrix& features) {
    if (net.output_dim() != 2) {
        throw shape_error("expected a two-logit network");
    }
    const ForwardTrace trace = forward(net, features);
    const Matrix& logits = trace.output();
    LabelMatrix pred(features.rows(), 1);
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        pred.at(r, 0) = logits(r, 0) >= logits(r, 1) ? 0 : 1;
    }
    return pred;
}

double binary_accuracy(const DenseNetwork& net, const Matrix& features,
                       const LabelMatrix& truth, std::size_t attribute) {
    if (attribute >= truth.attributes) {
        throw argument_error("attribute index out of range");
    }
    if (truth.samples != features.rows()) {
        throw shape_error("feature rows and label rows differ");
    }
    const LabelMatrix pred = predict_binary(net, features);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < truth.samples; ++r) {
        hits += pred.at(r, 0) == truth.at(r, attribute) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(truth.samples);
}

}  // namespace grouplift
