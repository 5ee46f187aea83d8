#include "grouplift/nn.hpp"

#include <cmath>
#include <string>

#include "grouplift/errors.hpp"
#include "grouplift/kernels.hpp"
#include "grouplift/rng.hpp"

namespace grouplift {

void validate(const DenseNetwork& net) {
    std::size_t prev = net.input_dim;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const DenseLayer& layer = net.layers[l];
        if (layer.in_dim() != prev) {
            throw shape_error("layer " + std::to_string(l) + " expects input " +
                              std::to_string(layer.in_dim()) + ", got " +
                              std::to_string(prev));
        }
        if (layer.bias.size() != layer.out_dim()) {
            throw shape_error("layer " + std::to_string(l) +
                              " bias length does not match output width");
        }
        prev = layer.out_dim();
    }
}

ForwardTrace forward(const DenseNetwork& net, const Matrix& batch) {
    if (batch.cols() != net.input_dim) {
        throw shape_error("batch has " + std::to_string(batch.cols()) +
                          " features, network expects " +
                          std::to_string(net.input_dim));
    }
    const auto& k = kern::active_backend();
    ForwardTrace trace;
    trace.activations.reserve(net.layers.size() + 1);
    trace.activations.push_back(batch);
    for (const DenseLayer& layer : net.layers) {
        Matrix z = matmul_nt(trace.activations.back(), layer.weights);
        add_row_vector(z, layer.bias);
        if (layer.activation == Activation::ReLU) {
            k.relu(z.data(), z.data(), z.size());
        }
        trace.activations.push_back(std::move(z));
    }
    return trace;
}

BackwardResult backward(const DenseNetwork& net, const ForwardTrace& trace,
                        const ActivationTaps& taps) {
    if (trace.activations.size() != net.layers.size() + 1) {
        throw shape_error("forward trace does not match network depth");
    }
    for (const auto& [idx, grad] : taps) {
        if (idx == 0 || idx > net.layers.size()) {
            throw argument_error("activation tap index " + std::to_string(idx) +
                                 " out of range");
        }
        if (!grad.same_shape(trace.activations[idx])) {
            throw shape_error("activation tap " + std::to_string(idx) +
                              " has the wrong shape");
        }
    }

    const auto& k = kern::active_backend();
    BackwardResult result;
    result.layers.resize(net.layers.size());

    Matrix dact(trace.activations.back().rows(),
                trace.activations.back().cols());
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        if (auto it = taps.find(l + 1); it != taps.end()) {
            k.axpy(1.0, it->second.data(), dact.data(), dact.size());
        }
        const DenseLayer& layer = net.layers[l];
        const Matrix& act = trace.activations[l + 1];

        // dz: gradient at the pre-activation values. The stored activation
        // is enough to recover the ReLU mask (post > 0 iff pre > 0), and
        // the subgradient at exactly zero is taken as zero.
        Matrix dz = std::move(dact);
        if (layer.activation == Activation::ReLU) {
            k.relu_backward(act.data(), dz.data(), dz.data(), dz.size());
        }

        if (layer.frozen) {
            result.layers[l].weights = Matrix(layer.out_dim(), layer.in_dim());
            result.layers[l].bias.assign(layer.out_dim(), 0.0);
        } else {
            result.layers[l].weights = matmul_tn(dz, trace.activations[l]);
            result.layers[l].bias = column_sums(dz);
        }
        dact = matmul_nn(dz, layer.weights);
    }
    result.input_grad = std::move(dact);
    return result;
}

BackwardResult backward(const DenseNetwork& net, const ForwardTrace& trace,
                        const Matrix& output_grad) {
    ActivationTaps taps;
    taps.emplace(net.layers.size(), output_grad);
    return backward(net, trace, taps);
}

void sgd_step(DenseNetwork& net, const std::vector<LayerGrads>& grads,
              double lr) {
    if (grads.size() != net.layers.size()) {
        throw shape_error("gradient set does not match network depth");
    }
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (!grads[l].weights.same_shape(net.layers[l].weights) ||
            grads[l].bias.size() != net.layers[l].bias.size()) {
            throw shape_error("gradient shape mismatch at layer " +
                              std::to_string(l));
        }
        if (!all_finite(grads[l].weights) || !all_finite(grads[l].bias)) {
            throw training_error("non-finite gradient at layer " +
                                 std::to_string(l));
        }
    }
    const auto& k = kern::active_backend();
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        DenseLayer& layer = net.layers[l];
        if (layer.frozen) continue;
        k.sgd_update(layer.weights.data(), grads[l].weights.data(), lr,
                     layer.weights.size());
        k.sgd_update(layer.bias.data(), grads[l].bias.data(), lr,
                     layer.bias.size());
    }
}

void freeze_prefix(DenseNetwork& net, std::size_t count) {
    if (count > net.layers.size()) {
        throw argument_error("cannot freeze " + std::to_string(count) +
                             " layers of a depth-" +
                             std::to_string(net.layers.size()) + " network");
    }
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        net.layers[l].frozen = l < count;
    }
}

DenseNetwork make_mlp(std::size_t input_dim, const std::vector<std::size_t>& widths,
                      bool last_identity, Rng& rng) {
    if (input_dim == 0) throw argument_error("input_dim must be positive");
    if (widths.empty()) throw argument_error("network needs at least one layer");
    DenseNetwork net;
    net.input_dim = input_dim;
    std::size_t fan_in = input_dim;
    for (std::size_t l = 0; l < widths.size(); ++l) {
        const std::size_t fan_out = widths[l];
        if (fan_out == 0) throw argument_error("layer width must be positive");
        DenseLayer layer;
        layer.weights = Matrix(fan_out, fan_in);
        const double bound =
            std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            layer.weights.data()[i] = rng.uniform(-bound, bound);
        }
        layer.bias.assign(fan_out, 0.0);
        layer.activation = (last_identity && l + 1 == widths.size())
                               ? Activation::Identity
                               : Activation::ReLU;
        net.layers.push_back(std::move(layer));
        fan_in = fan_out;
    }
    return net;
}

std::size_t parameter_count(const DenseNetwork& net) {
    std::size_t n = 0;
    for (const DenseLayer& layer : net.layers) {
        n += layer.weights.size() + layer.bias.size();
    }
    return n;
}

std::vector<LayerGrads> zero_grads(const DenseNetwork& net) {
    std::vector<LayerGrads> grads(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        grads[l].weights =
            Matrix(net.layers[l].out_dim(), net.layers[l].in_dim());
        grads[l].bias.assign(net.layers[l].out_dim(), 0.0);
    }
    return grads;
}

void accumulate_grads(std::vector<LayerGrads>& acc,
                      const std::vector<LayerGrads>& g) {
    if (acc.size() != g.size()) {
        throw shape_error("gradient sets differ in depth");
    }
    const auto& k = kern::active_backend();
    for (std::size_t l = 0; l < acc.size(); ++l) {
        if (!acc[l].weights.same_shape(g[l].weights) ||
            acc[l].bias.size() != g[l].bias.size()) {
            throw shape_error("gradient accumulation shape mismatch at layer " +
                              std::to_string(l));
        }
        k.axpy(1.0, g[l].weights.data(), acc[l].weights.data(),
               g[l].weights.size());
        k.axpy(1.0, g[l].bias.data(), acc[l].bias.data(), g[l].bias.size());
    }
}

}  // namespace grouplift
