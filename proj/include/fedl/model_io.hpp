#pragma once

// Versioned binary model container, all integers and doubles little-endian:
//
//   "FEDL"                    4 bytes magic
//   u32 format_version        currently 1
//   u32 layer_count
//   per layer:
//     u64 input_width, u64 output_width
//     u8  activation          0 = tanh, 1 = identity
//     u8  has_dropout
//     f64 dropout_fraction    0 when has_dropout = 0
//   u64 parameter_count
//   f64 parameters[...]       ParameterSet::flatten() order

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>

#include "fedl/nn.hpp"

namespace fedl::io {

inline constexpr char kModelMagic[4] = {'F', 'E', 'D', 'L'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(std::ostream& out, const nn::Network& network);
nn::Network load_model(std::istream& in);

void save_model(const std::filesystem::path& path, const nn::Network& network);
nn::Network load_model(const std::filesystem::path& path);

std::string model_bytes(const nn::Network& network);

}  // namespace fedl::io
