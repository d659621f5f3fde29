#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedl/clustering.hpp"
#include "fedl/fed_sim.hpp"

namespace fedl::cli {

/// Everything a command needs. Defaults follow the reference experiment:
/// two hidden layers of 64 tanh units, dropout 0.15 after the second, Adam
/// step 0.01, K = 2 balanced clusters, 80% training ratio.
struct RunConfig {
    std::filesystem::path transactions;
    std::filesystem::path stations;
    std::filesystem::path out_dir = "out";

    fed::TrainConfig train;
    bool clustering = false;
    cluster::ClusterConfig cluster;
    bool include_transaction_id = true;
    double ratio = 0.8;
    std::vector<double> sweep_ratios{0.8, 0.7, 0.6, 0.5};
    std::size_t knn_k = 5;
    std::uint64_t seed = 2020;

    RunConfig();

    /// Pushes the shared seed into the training and clustering configs.
    void sync_seed();

    /// Flat-key JSON; unknown keys throw std::invalid_argument.
    void apply_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

RunConfig load_config_file(const std::filesystem::path& path);

/// 16 hex digits of FNV-1a over the canonical JSON dump.
std::string run_id(const nlohmann::json& canonical);

}  // namespace fedl::cli
