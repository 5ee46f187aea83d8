#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "grouplift/matrix.hpp"

namespace grouplift {

class Rng;

enum class Activation { Identity, ReLU };

struct DenseLayer {
    Matrix weights;             // out x in
    std::vector<double> bias;   // out
    Activation activation = Activation::ReLU;
    bool frozen = false;

    std::size_t in_dim() const { return weights.cols(); }
    std::size_t out_dim() const { return weights.rows(); }
};

// Fully connected feed-forward network. Batches are row-major (one sample
// per row) throughout.
struct DenseNetwork {
    std::size_t input_dim = 0;
    std::vector<DenseLayer> layers;

    std::size_t output_dim() const {
        return layers.empty() ? input_dim : layers.back().out_dim();
    }
};

// Throws shape_error unless consecutive layer dimensions chain and every
// weight/bias pair agrees.
void validate(const DenseNetwork& net);

// activations[0] is the input batch, activations[i + 1] the post-activation
// output of layer i; the last entry is the network output.
struct ForwardTrace {
    std::vector<Matrix> activations;

    const Matrix& output() const { return activations.back(); }
};

ForwardTrace forward(const DenseNetwork& net, const Matrix& batch);

struct LayerGrads {
    Matrix weights;             // same shape as the layer's weights
    std::vector<double> bias;
};

struct BackwardResult {
    std::vector<LayerGrads> layers;
    Matrix input_grad;          // batch-shaped gradient w.r.t. the input
};

// Gradients with respect to intermediate activations, keyed by activation
// index: taps[i] has the shape of trace.activations[i] and is added to the
// backpropagated gradient at that point. A gradient at the network output
// is a tap at index layers.size(). Indices 1 .. layers.size() are valid.
using ActivationTaps = std::map<std::size_t, Matrix>;

// Exact reverse-mode gradients for sum-over-samples objectives: any 1/N
// normalisation belongs in the tap values. Frozen layers still pass
// gradients through but report zero parameter gradients.
BackwardResult backward(const DenseNetwork& net, const ForwardTrace& trace,
                        const ActivationTaps& taps);

// Common case: the only gradient source is the network output.
BackwardResult backward(const DenseNetwork& net, const ForwardTrace& trace,
                        const Matrix& output_grad);

// w -= lr * g on every non-frozen layer. Throws training_error when any
// gradient entry is non-finite; lr == 0 leaves the network bit-identical.
void sgd_step(DenseNetwork& net, const std::vector<LayerGrads>& grads,
              double lr);

// Marks layers [0, count) frozen. count can be 0; beyond the layer count
// throws argument_error.
void freeze_prefix(DenseNetwork& net, std::size_t count);

// Glorot-uniform weights (+-sqrt(6 / (fan_in + fan_out))), zero biases.
// Hidden layers get ReLU; the last layer gets identity when last_identity
// is set (the usual choice for logit outputs).
DenseNetwork make_mlp(std::size_t input_dim, const std::vector<std::size_t>& widths,
                      bool last_identity, Rng& rng);

// Element count across all weights and biases.
std::size_t parameter_count(const DenseNetwork& net);

// Zero-filled gradient set shaped like the network's parameters.
std::vector<LayerGrads> zero_grads(const DenseNetwork& net);

// acc += g, elementwise across all layers. Shapes must match.
void accumulate_grads(std::vector<LayerGrads>& acc,
                      const std::vector<LayerGrads>& g);

}  // namespace grouplift
