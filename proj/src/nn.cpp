#include "fedl/nn.hpp"

#include <cmath>
#include <string>

#include "fedl/error.hpp"
#include "fedl/rng.hpp"

namespace fedl::nn {

namespace {

std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

std::uint64_t sample_id(std::span<const std::uint64_t> ids, Eigen::Index row) {
    return ids.empty() ? static_cast<std::uint64_t>(row) : ids[static_cast<std::size_t>(row)];
}

// Scaled keep-mask: entries are 0 (dropped) or 1/(1-f).
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double fraction, std::uint64_t seed,
                    std::size_t layer, std::span<const std::uint64_t> ids) {
    const double keep_scale = 1.0 / (1.0 - fraction);
    const std::uint64_t layer_seed = mix_seed(seed, layer);
    Matrix mask(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::uint64_t row_key = mix_seed(layer_seed, sample_id(ids, r));
        for (Eigen::Index c = 0; c < cols; ++c) {
            const double u = bits_to_unit(splitmix64(row_key + static_cast<std::uint64_t>(c)));
            mask(r, c) = u < fraction ? 0.0 : keep_scale;
        }
    }
    return mask;
}

struct LayerOutput {
    Matrix activation;  // before dropout
    Matrix mask;        // empty when dropout is inactive
    Matrix output;
};

LayerOutput run_layer(std::size_t l, const Network& network, const Matrix& x, Mode mode,
                      std::uint64_t seed, std::span<const std::uint64_t> ids) {
    if (l >= network.layers.size()) {
        throw ShapeError("layer index " + std::to_string(l) + " out of range");
    }
    const LayerSpec& spec = network.layers[l];
    const Matrix& w = network.params.weights[l];
    if (static_cast<std::size_t>(x.cols()) != spec.input_width) {
        throw ShapeError("layer " + std::to_string(l) + " expects " +
                         std::to_string(spec.input_width) + " input columns, got " +
                         shape_str(x.rows(), x.cols()));
    }
    if (!ids.empty() && ids.size() != static_cast<std::size_t>(x.rows())) {
        throw ShapeError("sample id count does not match batch rows");
    }

    LayerOutput out;
    Matrix z = x * w.transpose();
    z.rowwise() += network.params.biases[l].transpose();
    out.activation = spec.activation == Activation::Tanh ? tanh_activation(z) : std::move(z);

    const double f = spec.dropout_after.value_or(0.0);
    if (mode == Mode::Train && f > 0.0) {
        out.mask = dropout_mask(out.activation.rows(), out.activation.cols(), f, seed, l, ids);
        out.output = out.activation.cwiseProduct(out.mask);
    } else {
        out.output = out.activation;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// ParameterSet

ParameterSet ParameterSet::zeros_like(const ParameterSet& other) {
    ParameterSet z;
    z.weights.reserve(other.weights.size());
    z.biases.reserve(other.biases.size());
    for (const auto& w : other.weights) z.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
    for (const auto& b : other.biases) z.biases.push_back(Vector::Zero(b.size()));
    return z;
}

std::size_t ParameterSet::count() const noexcept {
    std::size_t n = 0;
    for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
    for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
    return n;
}

bool ParameterSet::same_shape(const ParameterSet& other) const noexcept {
    if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) {
        return false;
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != other.weights[l].rows() ||
            weights[l].cols() != other.weights[l].cols()) {
            return false;
        }
    }
    for (std::size_t l = 0; l < biases.size(); ++l) {
        if (biases[l].size() != other.biases[l].size()) return false;
    }
    return true;
}

ParameterSet& ParameterSet::operator+=(const ParameterSet& other) {
    if (!same_shape(other)) throw ShapeError("parameter sets differ in shape");
    for (std::size_t l = 0; l < weights.size(); ++l) weights[l] += other.weights[l];
    for (std::size_t l = 0; l < biases.size(); ++l) biases[l] += other.biases[l];
    return *this;
}

ParameterSet& ParameterSet::operator*=(double factor) {
    for (auto& w : weights) w *= factor;
    for (auto& b : biases) b *= factor;
    return *this;
}

std::vector<double> ParameterSet::flatten() const {
    std::vector<double> flat;
    flat.reserve(count());
    for (std::size_t l = 0; l < weights.size(); ++l) {
        const Matrix& w = weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
        const Vector& b = biases[l];
        flat.insert(flat.end(), b.data(), b.data() + b.size());
    }
    return flat;
}

void ParameterSet::assign_flat(std::span<const double> values) {
    if (values.size() != count()) {
        throw ShapeError("flat parameter array has " + std::to_string(values.size()) +
                         " values, expected " + std::to_string(count()));
    }
    std::size_t i = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        Matrix& w = weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = values[i++];
        Vector& b = biases[l];
        for (Eigen::Index k = 0; k < b.size(); ++k) b(k) = values[i++];
    }
}

// ---------------------------------------------------------------------------
// Construction

void validate_specs(std::span<const LayerSpec> specs) {
    if (specs.empty()) throw ShapeError("network needs at least one layer");
    for (std::size_t l = 0; l < specs.size(); ++l) {
        const LayerSpec& s = specs[l];
        if (s.input_width < 1 || s.output_width < 1) {
            throw ShapeError("layer " + std::to_string(l) + " has zero width");
        }
        if (s.dropout_after && !(*s.dropout_after >= 0.0 && *s.dropout_after < 1.0)) {
            throw ShapeError("layer " + std::to_string(l) + " dropout fraction outside [0,1)");
        }
        if (l > 0 && specs[l - 1].output_width != s.input_width) {
            throw ShapeError("layer " + std::to_string(l) + " input width " +
                             std::to_string(s.input_width) + " does not chain with previous output " +
                             std::to_string(specs[l - 1].output_width));
        }
    }
}

std::vector<LayerSpec> regression_architecture(std::size_t input_width,
                                               std::span<const std::size_t> hidden,
                                               double dropout) {
    std::vector<LayerSpec> specs;
    std::size_t width = input_width;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        LayerSpec s{width, hidden[i], Activation::Tanh, std::nullopt};
        if (i + 1 == hidden.size() && dropout > 0.0) s.dropout_after = dropout;
        specs.push_back(s);
        width = hidden[i];
    }
    specs.push_back(LayerSpec{width, 1, Activation::Identity, std::nullopt});
    validate_specs(specs);
    return specs;
}

Network init_network(std::span<const LayerSpec> specs, std::uint64_t seed) {
    validate_specs(specs);
    Network net;
    net.layers.assign(specs.begin(), specs.end());
    Rng rng(mix_seed(seed, 0x696e6974));  // "init"
    for (const LayerSpec& s : specs) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(s.input_width));
        Matrix w(static_cast<Eigen::Index>(s.output_width), static_cast<Eigen::Index>(s.input_width));
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
        net.params.weights.push_back(std::move(w));
        net.params.biases.push_back(Vector::Zero(static_cast<Eigen::Index>(s.output_width)));
    }
    return net;
}

// ---------------------------------------------------------------------------
// Forward / loss / backward

Matrix tanh_activation(const Matrix& x) {
    return x.unaryExpr([](double v) { return std::tanh(v); });
}

Matrix dense_forward(std::size_t layer, const Network& network, const Matrix& x, Mode mode,
                     std::uint64_t seed, std::span<const std::uint64_t> sample_ids) {
    return run_layer(layer, network, x, mode, seed, sample_ids).output;
}

ForwardResult forward(const Network& network, const Matrix& x, Mode mode, std::uint64_t seed,
                      std::span<const std::uint64_t> sample_ids) {
    ForwardResult result;
    Tape& tape = result.tape;
    tape.parameter_count = network.parameter_count();
    tape.inputs.reserve(network.layers.size());

    Matrix current = x;
    for (std::size_t l = 0; l < network.layers.size(); ++l) {
        LayerOutput out = run_layer(l, network, current, mode, seed, sample_ids);
        tape.inputs.push_back(std::move(current));
        tape.activations.push_back(std::move(out.activation));
        tape.masks.push_back(std::move(out.mask));
        current = std::move(out.output);
    }
    tape.output = current;
    result.output = std::move(current);
    return result;
}

double sse_loss(const Vector& predicted, const Vector& target) {
    if (predicted.size() != target.size()) {
        throw ShapeError("sse_loss: " + std::to_string(predicted.size()) + " predictions vs " +
                         std::to_string(target.size()) + " targets");
    }
    return (predicted - target).squaredNorm();
}

Gradient backward(const Network& network, const Tape& tape, const Vector& target) {
    const std::size_t depth = network.layers.size();
    if (tape.inputs.size() != depth || tape.parameter_count != network.parameter_count()) {
        throw ShapeError("tape was not produced by this network");
    }
    if (tape.output.cols() != 1 || tape.output.rows() != target.size()) {
        throw ShapeError("backward: target length " + std::to_string(target.size()) +
                         " does not match output " + shape_str(tape.output.rows(), tape.output.cols()));
    }

    Gradient grad(ParameterSet::zeros_like(network.params));
    // d(sum (y - t)^2)/dy
    Matrix upstream = 2.0 * (tape.output.col(0) - target);
    for (std::size_t l = depth; l-- > 0;) {
        if (tape.masks[l].size() != 0) upstream = upstream.cwiseProduct(tape.masks[l]);
        Matrix dz;
        if (network.layers[l].activation == Activation::Tanh) {
            const Matrix& a = tape.activations[l];
            dz = upstream.cwiseProduct((1.0 - a.array().square()).matrix());
        } else {
            dz = std::move(upstream);
        }
        grad.weights[l].noalias() = dz.transpose() * tape.inputs[l];
        grad.biases[l] = dz.colwise().sum().transpose();
        if (l > 0) upstream = dz * network.params.weights[l];
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Optimizer

AdamState AdamState::for_network(const Network& network, AdamConfig config) {
    AdamState s;
    s.eta = ParameterSet::zeros_like(network.params);
    s.delta = ParameterSet::zeros_like(network.params);
    s.config = config;
    return s;
}

void adam_step(AdamState& state, Network& network, const Gradient& grad) {
    if (!grad.same_shape(network.params) || !state.eta.same_shape(network.params) ||
        !state.delta.same_shape(network.params)) {
        throw ShapeError("adam_step: gradient, optimizer state and network differ in shape");
    }
    const AdamConfig& c = state.config;
    const double t = static_cast<double>(state.phi + 1);
    const double step = c.step_size * std::sqrt(1.0 - std::pow(c.beta2, t)) /
                        (1.0 - std::pow(c.beta1, t));

    auto update = [&](auto& param, auto& eta, auto& delta, const auto& g) {
        eta = c.beta1 * eta + (1.0 - c.beta1) * g;
        delta = c.beta2 * delta + (1.0 - c.beta2) * g.cwiseProduct(g);
        param.array() -= step * eta.array() / (delta.array().sqrt() + c.epsilon);
    };
    for (std::size_t l = 0; l < network.params.weights.size(); ++l) {
        update(network.params.weights[l], state.eta.weights[l], state.delta.weights[l],
               grad.weights[l]);
        update(network.params.biases[l], state.eta.biases[l], state.delta.biases[l],
               grad.biases[l]);
    }
    ++state.phi;
}

Vector predict(const Network& network, const Matrix& x, const LabelScale& scale) {
    if (network.output_width() != 1) throw ShapeError("predict expects a single-output network");
    const ForwardResult fr = forward(network, x, Mode::Infer, 0);
    Vector out = fr.output.col(0);
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = scale.destandardize(out(i));
    return out;
}

}  // namespace fedl::nn
