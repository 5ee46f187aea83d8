#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "grouplift/config.hpp"
#include "grouplift/grouping.hpp"
#include "grouplift/mmd.hpp"
#include "grouplift/multilabel.hpp"

namespace grouplift {

// The trunk and one attribute head flattened into a single network, with
// the split point remembered so the result can be turned back into a
// checkpointable model.
struct SingleAttributeNetwork {
    DenseNetwork net;
    std::size_t trunk_depth = 0;
};

SingleAttributeNetwork single_attribute_network(const MultiLabelModel& model,
                                                std::size_t attribute);

MultiLabelModel to_single_head_model(const SingleAttributeNetwork& combined,
                                     const std::string& attribute_name);

// Activation indices where domain discrepancy is measured by default: the
// trunk output and every head activation before the logits.
std::vector<std::size_t> default_mmd_layers(const SingleAttributeNetwork& combined);

// Adaptation weight on the source supervision: full weight when source and
// target attribute share a group, strongly damped otherwise.
double alpha_for_groups(const AttributeGrouping& grouping,
                        std::size_t source_attribute,
                        std::size_t target_attribute);

constexpr double kSameGroupAlpha = 1.0;
constexpr double kCrossGroupAlpha = 0.1;

struct TransferTask {
    Matrix source_features;
    LabelMatrix source_labels;             // exactly one attribute column
    Matrix target_features;                // never any labels
    std::vector<std::size_t> mmd_layers;   // empty -> default taps
    double alpha = kSameGroupAlpha;
    KernelFamily kernels;                  // empty -> per-tap median heuristic
    std::vector<double> kernel_scales;     // median ladder; empty -> default
    std::vector<double> mmd_term_weights;  // empty -> all ones
    std::size_t freeze_depth = 0;
    MmdEstimator estimator = MmdEstimator::Biased;
};

struct TransferLoss {
    double total = 0.0;
    std::vector<double> mmd_terms;  // per tapped layer, already unweighted
    double source_loss = 0.0;       // softmax loss on the source batch

    // total == sum(term_weights * mmd_terms) + alpha * source_loss
};

// Joint objective for one source/target batch pair: discrepancy at every
// tapped activation plus alpha times the source classification loss. When
// grads is non-null it receives the exact parameter gradient, source and
// target contributions summed.
TransferLoss transfer_loss(const DenseNetwork& net, const Matrix& source_batch,
                           const LabelMatrix& source_labels,
                           const Matrix& target_batch,
                           const std::vector<std::size_t>& mmd_layers,
                           const std::vector<KernelFamily>& families,
                           const std::vector<double>& term_weights, double alpha,
                           MmdEstimator estimator,
                           std::vector<LayerGrads>* grads);

struct TransferEpoch {
    std::size_t epoch = 0;              // 1-based
    double total = 0.0;                 // batch means over the epoch
    double source_loss = 0.0;
    std::vector<double> mmd_terms;
};

struct TransferOutcome {
    SingleAttributeNetwork adapted;
    std::vector<TransferEpoch> history;
    std::vector<std::size_t> mmd_layers;   // as resolved
    std::vector<KernelFamily> families;    // one per tapped layer
};

// Called after each epoch with the metrics just logged and the current
// network state; purely observational, for evaluation-side reporting.
using EpochObserver =
    std::function<void(const TransferEpoch&, const DenseNetwork&)>;

// Unsupervised adaptation: starts from the given model's trunk plus the
// chosen attribute head, freezes the requested prefix, then runs minibatch
// SGD on transfer_loss. Source batches sweep the source set once per
// epoch; target batches come from an endless reshuffled stream. Target
// rows are used through their features only. Zero epochs returns the
// combined network bit-identical to the input model.
TransferOutcome train_tnet(const MultiLabelModel& model,
                           std::size_t source_attribute,
                           const TransferTask& task, const TrainConfig& config,
                           const EpochObserver& observer = {});

// No-adaptation baseline: the source-trained head applied to the target
// features as-is, scored against held-out truth.
double direct_transfer_accuracy(const MultiLabelModel& model,
                                std::size_t source_attribute,
                                const Matrix& target_features,
                                const LabelMatrix& truth,
                                std::size_t target_attribute);

// Argmax class of a two-logit network, ties to the positive class.
LabelMatrix predict_binary(const DenseNetwork& net, const Matrix& features);

double binary_accuracy(const DenseNetwork& net, const Matrix& features,
                       const LabelMatrix& truth, std::size_t attribute);

}  // namespace grouplift
