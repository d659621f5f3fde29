#include "fedl/model_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fedl/error.hpp"

namespace fedl::io {

namespace {

template <typename U>
void put_le(std::ostream& out, U value) {
    std::array<char, sizeof(U)> buf{};
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

template <typename U>
U get_le(std::istream& in, const char* what) {
    std::array<unsigned char, sizeof(U)> buf{};
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
        throw DataError(std::string("truncated model file while reading ") + what);
    }
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(buf[i]) << (8 * i);
    return value;
}

void put_f64(std::ostream& out, double v) { put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v)); }

double get_f64(std::istream& in, const char* what) {
    return std::bit_cast<double>(get_le<std::uint64_t>(in, what));
}

}  // namespace

void save_model(std::ostream& out, const nn::Network& network) {
    out.write(kModelMagic, sizeof kModelMagic);
    put_le<std::uint32_t>(out, kModelFormatVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(network.layers.size()));
    for (const auto& l : network.layers) {
        put_le<std::uint64_t>(out, l.input_width);
        put_le<std::uint64_t>(out, l.output_width);
        put_le<std::uint8_t>(out, l.activation == nn::Activation::Tanh ? 0 : 1);
        put_le<std::uint8_t>(out, l.dropout_after ? 1 : 0);
        put_f64(out, l.dropout_after.value_or(0.0));
    }
    const auto flat = network.params.flatten();
    put_le<std::uint64_t>(out, flat.size());
    for (double v : flat) put_f64(out, v);
    if (!out) throw DataError("failed to write model container");
}

nn::Network load_model(std::istream& in) {
    char magic[4];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kModelMagic, sizeof magic) != 0) {
        throw DataError("not a model container (bad magic bytes)");
    }
    const auto version = get_le<std::uint32_t>(in, "format version");
    if (version != kModelFormatVersion) {
        throw DataError("unsupported model format version " + std::to_string(version));
    }
    const auto n_layers = get_le<std::uint32_t>(in, "layer count");
    if (n_layers == 0 || n_layers > 4096) throw DataError("implausible layer count in model file");

    std::vector<nn::LayerSpec> specs;
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        nn::LayerSpec s;
        s.input_width = get_le<std::uint64_t>(in, "layer input width");
        s.output_width = get_le<std::uint64_t>(in, "layer output width");
        const auto act = get_le<std::uint8_t>(in, "activation");
        if (act > 1) throw DataError("unknown activation code in model file");
        s.activation = act == 0 ? nn::Activation::Tanh : nn::Activation::Identity;
        const auto has_dropout = get_le<std::uint8_t>(in, "dropout flag");
        const double f = get_f64(in, "dropout fraction");
        if (has_dropout) s.dropout_after = f;
        specs.push_back(s);
    }
    try {
        nn::validate_specs(specs);
    } catch (const ShapeError& e) {
        throw DataError(std::string("model file has invalid layers: ") + e.what());
    }

    nn::Network net = nn::init_network(specs, 0);
    const auto count = get_le<std::uint64_t>(in, "parameter count");
    if (count != net.parameter_count()) {
        throw DataError("model parameter count " + std::to_string(count) + " does not match its layers (" +
                        std::to_string(net.parameter_count()) + ")");
    }
    std::vector<double> flat(count);
    for (auto& v : flat) v = get_f64(in, "parameters");
    net.params.assign_flat(flat);
    return net;
}

void save_model(const std::filesystem::path& path, const nn::Network& network) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    save_model(out, network);
}

nn::Network load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file " + path.string());
    return load_model(in);
}

std::string model_bytes(const nn::Network& network) {
    std::ostringstream out(std::ios::binary);
    save_model(out, network);
    return out.str();
}

}  // namespace fedl::io
