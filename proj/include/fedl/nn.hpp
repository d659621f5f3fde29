#pragma once

// Dense feed-forward regression network: tanh hidden layers, optional
// inverted dropout, sum-of-squared-error loss, exact reverse-mode gradients
// and the adaptive-moment (Adam) update.
//
// Layout conventions: sample matrices are (samples x features); layer l owns
// a weight matrix of shape (output_width x input_width) and a bias vector of
// length output_width, so a layer computes a(X * G^T + 1 h^T).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fedl/label_scale.hpp"

namespace fedl::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { Tanh, Identity };
enum class Mode { Train, Infer };

struct LayerSpec {
    std::size_t input_width = 1;
    std::size_t output_width = 1;
    Activation activation = Activation::Tanh;
    /// Dropout fraction applied to this layer's activations in Train mode.
    std::optional<double> dropout_after;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Per-layer weights and biases. Shared by the model and its gradients.
struct ParameterSet {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    static ParameterSet zeros_like(const ParameterSet& other);

    std::size_t count() const noexcept;
    bool same_shape(const ParameterSet& other) const noexcept;

    ParameterSet& operator+=(const ParameterSet& other);
    ParameterSet& operator*=(double factor);

    /// Layer by layer: weights in row-major order, then the bias.
    std::vector<double> flatten() const;
    void assign_flat(std::span<const double> values);
};

/// d(loss)/d(parameter), shape-identical to the network it was taken from.
struct Gradient : ParameterSet {
    Gradient() = default;
    explicit Gradient(ParameterSet values) : ParameterSet(std::move(values)) {}
};

struct Network {
    std::vector<LayerSpec> layers;
    ParameterSet params;

    std::size_t input_width() const { return layers.front().input_width; }
    std::size_t output_width() const { return layers.back().output_width; }
    std::size_t parameter_count() const noexcept { return params.count(); }
};

/// Throws ShapeError unless widths are positive, chain, and dropout is in [0, 1).
void validate_specs(std::span<const LayerSpec> specs);

/// Hidden tanh layers, dropout after the last hidden one, identity output.
std::vector<LayerSpec> regression_architecture(std::size_t input_width,
                                               std::span<const std::size_t> hidden,
                                               double dropout);

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
Network init_network(std::span<const LayerSpec> specs, std::uint64_t seed);

Matrix tanh_activation(const Matrix& x);

/// Cached intermediates of a forward pass, consumed by backward().
struct Tape {
    std::vector<Matrix> inputs;       // X^l, one per layer
    std::vector<Matrix> activations;  // a(Z^l) before dropout
    std::vector<Matrix> masks;        // 0 or 1/(1-f) per unit; empty when inactive
    Matrix output;
    std::size_t parameter_count = 0;
};

struct ForwardResult {
    Matrix output;
    Tape tape;
};

/// Dropout masks are keyed by (seed, layer, sample id, unit), so a sample
/// receives the same mask no matter which batch or worker it is evaluated
/// in. When `sample_ids` is empty, row r has id r.
Matrix dense_forward(std::size_t layer, const Network& network, const Matrix& x, Mode mode,
                     std::uint64_t seed, std::span<const std::uint64_t> sample_ids = {});

ForwardResult forward(const Network& network, const Matrix& x, Mode mode, std::uint64_t seed,
                      std::span<const std::uint64_t> sample_ids = {});

double sse_loss(const Vector& predicted, const Vector& target);

Gradient backward(const Network& network, const Tape& tape, const Vector& target);

struct AdamConfig {
    double step_size = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    ParameterSet eta;    // first moment
    ParameterSet delta;  // second moment
    AdamConfig config;
    std::uint64_t phi = 0;

    static AdamState for_network(const Network& network, AdamConfig config = {});
};

/// One bias-corrected step:
///   eta   <- b1 eta + (1-b1) g
///   delta <- b2 delta + (1-b2) g^2
///   step  =  lambda sqrt(1-b2^(phi+1)) / (1-b1^(phi+1))
///   theta <- theta - step * eta / (sqrt(delta) + eps)
void adam_step(AdamState& state, Network& network, const Gradient& grad);

/// Inference-mode outputs in kWh.
Vector predict(const Network& network, const Matrix& x, const LabelScale& scale);

}  // namespace fedl::nn
