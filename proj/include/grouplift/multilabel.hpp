#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grouplift/config.hpp"
#include "grouplift/nn.hpp"

namespace grouplift {

// Binary attribute labels for a batch, stored as class indices:
// class 0 is the positive label (+1 on disk), class 1 the negative (-1).
struct LabelMatrix {
    std::size_t samples = 0;
    std::size_t attributes = 0;
    std::vector<std::uint8_t> classes;

    LabelMatrix() = default;
    LabelMatrix(std::size_t n, std::size_t i)
        : samples(n), attributes(i), classes(n * i, 0) {}

    std::uint8_t& at(std::size_t n, std::size_t i) {
        return classes[n * attributes + i];
    }
    std::uint8_t at(std::size_t n, std::size_t i) const {
        return classes[n * attributes + i];
    }
};

// One classification head per attribute. The class count is carried by the
// head's output width; only two-class heads are supported for now, and
// validate() enforces that.
struct AttributeHead {
    DenseNetwork net;

    std::size_t class_count() const { return net.output_dim(); }
};

struct MultiLabelModel {
    DenseNetwork trunk;
    std::vector<AttributeHead> heads;
    std::vector<double> loss_weights;          // one per head
    std::vector<std::string> attribute_names;  // one per head

    std::size_t attribute_count() const { return heads.size(); }
};

void validate(const MultiLabelModel& model);

// Shared ReLU trunk plus identical per-attribute heads: hidden ReLU layers
// of the given widths followed by a two-logit identity layer. All loss
// weights start at 1.
MultiLabelModel make_multilabel_model(std::size_t input_dim,
                                      const std::vector<std::size_t>& trunk_widths,
                                      const std::vector<std::size_t>& head_widths,
                                      const std::vector<std::string>& attribute_names,
                                      Rng& rng);

// Numerically stable softmax of one logit row.
std::vector<double> softmax(const double* logits, std::size_t n);

// Mean negative log-likelihood of the true class over the batch:
//   -(1/N) sum_n log softmax(logits_n)[label_n]
double softmax_loss(const Matrix& logits, const LabelMatrix& labels,
                    std::size_t attribute);

// Gradient of scale * softmax_loss w.r.t. the logits:
//   (scale / N) * (softmax(logits_n) - onehot(label_n))
Matrix softmax_loss_grad(const Matrix& logits, const LabelMatrix& labels,
                         std::size_t attribute, double scale);

struct LossBreakdown {
    double total = 0.0;                  // sum_i weight_i * per_attribute_i
    std::vector<double> per_attribute;   // unweighted per-head losses
};

// Forward pass plus the weighted multi-attribute loss.
LossBreakdown multilabel_loss(const MultiLabelModel& model, const Matrix& batch,
                              const LabelMatrix& labels);

struct ModelGrads {
    std::vector<LayerGrads> trunk;
    std::vector<std::vector<LayerGrads>> heads;
};

// Loss and exact gradients of the weighted total for one batch. The trunk
// gradient aggregates every head's contribution through the shared features.
LossBreakdown multilabel_grads(const MultiLabelModel& model, const Matrix& batch,
                               const LabelMatrix& labels, ModelGrads& out);

struct EpochMetrics {
    std::size_t epoch = 0;               // 1-based
    double total_loss = 0.0;             // weighted loss on the full dataset
    std::vector<double> accuracy;        // per attribute, on the full dataset
};

// Minibatch SGD with a per-epoch reshuffle drawn from config.seed. Zero
// epochs performs no updates. Throws training_error on divergence.
std::vector<EpochMetrics> train_mnet(MultiLabelModel& model, const Matrix& features,
                                     const LabelMatrix& labels,
                                     const TrainConfig& config);

struct Prediction {
    LabelMatrix classes;
    Matrix positive_prob;                // N x attributes, P(class 0)
};

// Ties in the two-class softmax resolve to the positive class.
Prediction predict(const MultiLabelModel& model, const Matrix& batch);

// Fraction of samples where the predicted class matches, per attribute.
std::vector<double> per_attribute_accuracy(const Prediction& pred,
                                           const LabelMatrix& truth);

}  // namespace grouplift
