#include "cli/config.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "fedl/error.hpp"

namespace fedl::cli {

RunConfig::RunConfig() { sync_seed(); }

void RunConfig::sync_seed() {
    train.seed = seed;
    cluster.seed = seed;
}

void RunConfig::apply_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config file must hold a flat JSON object");
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "transactions") transactions = value.get<std::string>();
            else if (key == "stations") stations = value.get<std::string>();
            else if (key == "out") out_dir = value.get<std::string>();
            else if (key == "seed") seed = value.get<std::uint64_t>();
            else if (key == "mode") train.mode = fed::mode_from_string(value.get<std::string>());
            else if (key == "clustering") clustering = value.get<bool>();
            else if (key == "epochs") train.epochs = value.get<std::size_t>();
            else if (key == "tolerance") train.tolerance = value.get<double>();
            else if (key == "patience") train.patience = value.get<std::size_t>();
            else if (key == "learning_rate") train.adam.step_size = value.get<double>();
            else if (key == "beta1") train.adam.beta1 = value.get<double>();
            else if (key == "beta2") train.adam.beta2 = value.get<double>();
            else if (key == "epsilon") train.adam.epsilon = value.get<double>();
            else if (key == "dropout") train.dropout = value.get<double>();
            else if (key == "hidden") train.hidden = value.get<std::vector<std::size_t>>();
            else if (key == "workers") train.workers = value.get<std::size_t>();
            else if (key == "partition") train.partition = data::partition_strategy_from_string(value.get<std::string>());
            else if (key == "batch_size") train.batch_size = value.get<std::size_t>();
            else if (key == "threads") train.threads = value.get<std::size_t>();
            else if (key == "k") cluster.k = value.get<std::size_t>();
            else if (key == "theta_low") cluster.theta_low = value.is_array() ? value.get<std::vector<std::size_t>>() : std::vector<std::size_t>{value.get<std::size_t>()};
            else if (key == "theta_high") cluster.theta_high = value.is_array() ? value.get<std::vector<std::size_t>>() : std::vector<std::size_t>{value.get<std::size_t>()};
            else if (key == "max_iterations") cluster.max_iterations = value.get<std::size_t>();
            else if (key == "ratio") ratio = value.get<double>();
            else if (key == "sweep_ratios") sweep_ratios = value.get<std::vector<double>>();
            else if (key == "include_transaction_id") include_transaction_id = value.get<bool>();
            else if (key == "knn_k") knn_k = value.get<std::size_t>();
            else throw std::invalid_argument("unknown config key '" + key + "'");
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument("config key '" + key + "': " + e.what());
        } catch (const DataError& e) {
            throw std::invalid_argument("config key '" + key + "': " + e.what());
        }
    }
    sync_seed();
}

nlohmann::json RunConfig::to_json() const {
    return {{"transactions", transactions.string()},
            {"stations", stations.string()},
            {"out", out_dir.string()},
            {"seed", seed},
            {"mode", fed::to_string(train.mode)},
            {"clustering", clustering},
            {"epochs", train.epochs},
            {"tolerance", train.tolerance},
            {"patience", train.patience},
            {"learning_rate", train.adam.step_size},
            {"beta1", train.adam.beta1},
            {"beta2", train.adam.beta2},
            {"epsilon", train.adam.epsilon},
            {"dropout", train.dropout},
            {"hidden", train.hidden},
            {"workers", train.workers},
            {"partition", data::to_string(train.partition)},
            {"batch_size", train.batch_size},
            {"threads", train.threads},
            {"k", cluster.k},
            {"theta_low", cluster.theta_low},
            {"theta_high", cluster.theta_high},
            {"max_iterations", cluster.max_iterations},
            {"ratio", ratio},
            {"sweep_ratios", sweep_ratios},
            {"include_transaction_id", include_transaction_id},
            {"knn_k", knn_k}};
}

RunConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("config file " + path.string() + ": " + e.what());
    }
    RunConfig cfg;
    cfg.apply_json(j);
    return cfg;
}

std::string run_id(const nlohmann::json& canonical) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : canonical.dump()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace fedl::cli
