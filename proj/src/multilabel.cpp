#include "grouplift/multilabel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "grouplift/errors.hpp"
#include "grouplift/kernels.hpp"
#include "grouplift/rng.hpp"

namespace grouplift {

void validate(const MultiLabelModel& model) {
    validate(model.trunk);
    if (model.heads.empty()) {
        throw shape_error("model has no attribute heads");
    }
    if (model.loss_weights.size() != model.heads.size()) {
        throw shape_error("loss weight count does not match head count");
    }
    if (model.attribute_names.size() != model.heads.size()) {
        throw shape_error("attribute name count does not match head count");
    }
    for (std::size_t i = 0; i < model.heads.size(); ++i) {
        validate(model.heads[i].net);
        if (model.heads[i].net.input_dim != model.trunk.output_dim()) {
            throw shape_error("head " + std::to_string(i) +
                              " does not accept the trunk output width");
        }
        if (model.heads[i].class_count() != 2) {
            throw shape_error("head " + std::to_string(i) +
                              " must have exactly two classes");
        }
    }
}

MultiLabelModel make_multilabel_model(std::size_t input_dim,
                                      const std::vector<std::size_t>& trunk_widths,
                                      const std::vector<std::size_t>& head_widths,
                                      const std::vector<std::string>& attribute_names,
                                      Rng& rng) {
    if (attribute_names.empty()) {
        throw argument_error("model needs at least one attribute");
    }
    MultiLabelModel model;
    model.trunk = make_mlp(input_dim, trunk_widths, false, rng);
    std::vector<std::size_t> head_shape = head_widths;
    head_shape.push_back(2);
    for (std::size_t i = 0; i < attribute_names.size(); ++i) {
        AttributeHead head;
        head.net = make_mlp(model.trunk.output_dim(), head_shape, true, rng);
        model.heads.push_back(std::move(head));
    }
    model.loss_weights.assign(attribute_names.size(), 1.0);
    model.attribute_names = attribute_names;
    validate(model);
    return model;
}

std::vector<double> softmax(const double* logits, std::size_t n) {
    const double zmax = *std::max_element(logits, logits + n);
    std::vector<double> p(n);
    double denom = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        p[c] = std::exp(logits[c] - zmax);
        denom += p[c];
    }
    for (double& v : p) v /= denom;
    return p;
}

namespace {

void check_logit_batch(const Matrix& logits, const LabelMatrix& labels,
                       std::size_t attribute) {
    if (attribute >= labels.attributes) {
        throw argument_error("attribute index out of range");
    }
    if (logits.rows() != labels.samples) {
        throw shape_error("logit batch and label batch differ in size");
    }
    if (logits.cols() != 2) {
        throw shape_error("expected two-class logits");
    }
}

// log softmax(z)[y] without forming the probabilities.
double log_prob_of(const double* z, std::size_t n, std::size_t y) {
    const double zmax = *std::max_element(z, z + n);
    double denom = 0.0;
    for (std::size_t c = 0; c < n; ++c) denom += std::exp(z[c] - zmax);
    return z[y] - zmax - std::log(denom);
}

}  // namespace

double softmax_loss(const Matrix& logits, const LabelMatrix& labels,
                    std::size_t attribute) {
    check_logit_batch(logits, labels, attribute);
    const std::size_t n = logits.rows();
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        acc += log_prob_of(logits.row(r), logits.cols(),
                           labels.at(r, attribute));
    }
    return -acc / static_cast<double>(n);
}

Matrix softmax_loss_grad(const Matrix& logits, const LabelMatrix& labels,
                         std::size_t attribute, double scale) {
    check_logit_batch(logits, labels, attribute);
    const std::size_t n = logits.rows();
    const double a = scale / static_cast<double>(n);
    Matrix grad(n, logits.cols());
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<double> p = softmax(logits.row(r), logits.cols());
        for (std::size_t c = 0; c < logits.cols(); ++c) {
            grad(r, c) = a * (p[c] - (labels.at(r, attribute) == c ? 1.0 : 0.0));
        }
    }
    return grad;
}

namespace {

void check_batch(const MultiLabelModel& model, const Matrix& batch,
                 const LabelMatrix& labels) {
    if (batch.rows() != labels.samples) {
        throw shape_error("feature batch and label batch differ in size");
    }
    if (labels.attributes != model.attribute_count()) {
        throw shape_error("label batch has " + std::to_string(labels.attributes) +
                          " attributes, model has " +
                          std::to_string(model.attribute_count()));
    }
    if (batch.rows() == 0) {
        throw argument_error("empty batch");
    }
}

LossBreakdown loss_impl(const MultiLabelModel& model, const Matrix& batch,
                        const LabelMatrix& labels, ModelGrads* out) {
    check_batch(model, batch, labels);
    const auto& k = kern::active_backend();

    ForwardTrace trunk_trace = forward(model.trunk, batch);
    const Matrix& features = trunk_trace.output();

    LossBreakdown breakdown;
    breakdown.per_attribute.resize(model.attribute_count());
    Matrix dfeatures(features.rows(), features.cols());

    if (out) {
        out->heads.resize(model.attribute_count());
    }
    for (std::size_t i = 0; i < model.attribute_count(); ++i) {
        ForwardTrace head_trace = forward(model.heads[i].net, features);
        breakdown.per_attribute[i] = softmax_loss(head_trace.output(), labels, i);
        breakdown.total += model.loss_weights[i] * breakdown.per_attribute[i];
        if (out) {
            Matrix dlogits = softmax_loss_grad(head_trace.output(), labels, i,
                                               model.loss_weights[i]);
            BackwardResult head_back =
                backward(model.heads[i].net, head_trace, dlogits);
            out->heads[i] = std::move(head_back.layers);
            k.axpy(1.0, head_back.input_grad.data(), dfeatures.data(),
                   dfeatures.size());
        }
    }
    if (out) {
        BackwardResult trunk_back = backward(model.trunk, trunk_trace, dfeatures);
        out->trunk = std::move(trunk_back.layers);
    }
    return breakdown;
}

}  // namespace

LossBreakdown multilabel_loss(const MultiLabelModel& model, const Matrix& batch,
                              const LabelMatrix& labels) {
    return loss_impl(model, batch, labels, nullptr);
}

LossBreakdown multilabel_grads(const MultiLabelModel& model, const Matrix& batch,
                               const LabelMatrix& labels, ModelGrads& out) {
    return loss_impl(model, batch, labels, &out);
}

namespace {

Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx,
                   std::size_t begin, std::size_t end) {
    Matrix out(end - begin, src.cols());
    for (std::size_t r = begin; r < end; ++r) {
        const double* from = src.row(idx[r]);
        std::copy(from, from + src.cols(), out.row(r - begin));
    }
    return out;
}

LabelMatrix gather_labels(const LabelMatrix& src, const std::vector<std::size_t>& idx,
                          std::size_t begin, std::size_t end) {
    LabelMatrix out(end - begin, src.attributes);
    for (std::size_t r = begin; r < end; ++r) {
        for (std::size_t i = 0; i < src.attributes; ++i) {
            out.at(r - begin, i) = src.at(idx[r], i);
        }
    }
    return out;
}

}  // namespace

std::vector<EpochMetrics> train_mnet(MultiLabelModel& model, const Matrix& features,
                                     const LabelMatrix& labels,
                                     const TrainConfig& config) {
    validate(model);
    check_batch(model, features, labels);
    if (features.cols() != model.trunk.input_dim) {
        throw shape_error("feature width does not match the trunk input");
    }
    if (config.batch_size == 0) {
        throw argument_error("batch size must be positive");
    }

    Rng rng(config.seed);
    std::vector<std::size_t> order(features.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<EpochMetrics> history;
    history.reserve(config.epochs);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t begin = 0; begin < order.size();
             begin += config.batch_size) {
            const std::size_t end =
                std::min(begin + config.batch_size, order.size());
            Matrix xb = gather_rows(features, order, begin, end);
            LabelMatrix yb = gather_labels(labels, order, begin, end);

            ModelGrads grads;
            LossBreakdown loss = multilabel_grads(model, xb, yb, grads);
            if (!std::isfinite(loss.total)) {
                throw training_error("loss diverged at epoch " +
                                     std::to_string(epoch));
            }
            sgd_step(model.trunk, grads.trunk, config.learning_rate);
            for (std::size_t i = 0; i < model.heads.size(); ++i) {
                sgd_step(model.heads[i].net, grads.heads[i],
                         config.learning_rate);
            }
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.total_loss = multilabel_loss(model, features, labels).total;
        m.accuracy = per_attribute_accuracy(predict(model, features), labels);
        history.push_back(std::move(m));
    }
    return history;
}

Prediction predict(const MultiLabelModel& model, const Matrix& batch) {
    validate(model);
    if (batch.rows() == 0) throw argument_error("empty batch");
    ForwardTrace trunk_trace = forward(model.trunk, batch);
    const Matrix& features = trunk_trace.output();

    Prediction pred;
    pred.classes = LabelMatrix(batch.rows(), model.attribute_count());
    pred.positive_prob = Matrix(batch.rows(), model.attribute_count());
    for (std::size_t i = 0; i < model.attribute_count(); ++i) {
        ForwardTrace head_trace = forward(model.heads[i].net, features);
        const Matrix& logits = head_trace.output();
        for (std::size_t r = 0; r < logits.rows(); ++r) {
            std::vector<double> p = softmax(logits.row(r), logits.cols());
            pred.positive_prob(r, i) = p[0];
            pred.classes.at(r, i) = p[0] >= p[1] ? 0 : 1;
        }
    }
    return pred;
}

std::vector<double> per_attribute_accuracy(const Prediction& pred,
                                           const LabelMatrix& truth) {
    if (pred.classes.samples != truth.samples ||
        pred.classes.attributes != truth.attributes) {
        throw shape_error("prediction and truth shapes differ");
    }
    std::vector<double> acc(truth.attributes, 0.0);
    for (std::size_t i = 0; i < truth.attributes; ++i) {
        std::size_t hits = 0;
        for (std::size_t n = 0; n < truth.samples; ++n) {
            hits += pred.classes.at(n, i) == truth.at(n, i) ? 1 : 0;
        }
        acc[i] = static_cast<double>(hits) / static_cast<double>(truth.samples);
    }
    return acc;
}

}  // namespace grouplift
