#pragma once

// Training pipelines over encoded charging data:
//  - centralized: the provider pools every record and runs full-batch
//    gradient descent with Adam;
//  - federated: workers compute local gradients against the current global
//    model, the provider averages them behind a synchronous barrier and
//    broadcasts the updated model;
//  - clustered: stations are grouped by constrained K-means and each group
//    trains its own model with either of the above.
//
// Round seeds are derived from (config seed, optimizer step), and dropout
// masks are keyed by sample id, so a record sees the same mask whichever
// worker holds it. With one worker the federated trajectory is therefore
// bit-identical to the centralized one.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedl/clustering.hpp"
#include "fedl/data.hpp"
#include "fedl/nn.hpp"
#include "fedl/traffic.hpp"

namespace fedl::fed {

enum class Mode { Centralized, Federated };

std::string to_string(Mode m);
Mode mode_from_string(std::string_view s);

struct TrainConfig {
    std::size_t epochs = 200;
    double tolerance = 1e-6;
    std::size_t patience = 5;
    nn::AdamConfig adam{};
    double dropout = 0.15;
    std::vector<std::size_t> hidden{64, 64};
    Mode mode = Mode::Centralized;
    std::size_t workers = 4;
    data::PartitionStrategy partition = data::PartitionStrategy::ByStation;
    /// Rows per optimizer step; 0 means one full-batch step per epoch.
    std::size_t batch_size = 0;
    /// Worker threads for federated rounds; results are reduced in worker order.
    std::size_t threads = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct RoundReport {
    std::size_t epoch = 0;  // 1-based
    double global_loss = 0.0;
    std::vector<double> worker_losses;
    std::uint64_t staleness = 0;
    std::uint64_t bytes_up = 0;
    std::uint64_t bytes_down = 0;
};

struct TrainResult {
    nn::Network model;
    std::vector<RoundReport> rounds;
    TrafficLog traffic;
    bool converged = false;
};

/// Called after every epoch with the updated global model.
using EpochObserver = std::function<void(const RoundReport&, const nn::Network&)>;

/// Step boundaries shared by both pipelines: B = ceil(n / batch_size)
/// batches of ceil(n / B) rows, so every worker takes the same number of
/// steps per epoch. batch_size 0 yields one batch.
struct BatchRange {
    std::size_t begin;
    std::size_t size;
};
std::vector<BatchRange> make_batches(std::size_t rows, std::size_t batch_count);
std::size_t batch_count_for(std::size_t rows, std::size_t batch_size);

struct WorkerState {
    std::size_t worker_id = 0;
    data::EncodedData data;
    std::vector<BatchRange> batches;
    nn::Network model;               // local copy of the last broadcast
    std::uint64_t model_version = 0;
};

struct ServerState {
    nn::Network model;
    nn::AdamState optimizer;
    std::uint64_t version = 0;  // number of applied updates
};

struct LocalResult {
    nn::Gradient gradient;
    double loss = 0.0;
};

/// Forward and backward over one of the worker's batches with `global_model`.
/// Nothing on the worker is modified.
LocalResult local_epoch(const WorkerState& worker, const nn::Network& global_model,
                        std::uint64_t seed, std::size_t batch = 0);

/// Elementwise mean over workers, summed in ascending worker-id order.
/// `worker_ids` may be empty, meaning the list is already in worker order.
nn::Gradient aggregate_gradients(std::span<const nn::Gradient> grads,
                                 std::span<const std::size_t> worker_ids = {});

struct RoundOutcome {
    std::vector<double> worker_losses;
    std::uint64_t staleness = 0;
    std::uint64_t bytes_up = 0;
    std::uint64_t bytes_down = 0;
};

/// One synchronous round: every worker computes its gradient for the current
/// version, the server aggregates all J once they are present, applies Adam
/// and broadcasts. Throws StalenessError if any worker holds another version.
RoundOutcome run_round(ServerState& server, std::span<WorkerState> workers, std::uint64_t seed,
                       std::size_t batch, std::size_t epoch, TrafficLog& traffic,
                       std::size_t threads = 1);

/// |l_t - l_{t-1}| / max(l_{t-1}, 1e-12) < tolerance for the last `patience`
/// consecutive epochs.
bool convergence_check(std::span<const double> history, double tolerance, std::size_t patience);

TrainResult run_centralized(const data::EncodedData& dataset, const TrainConfig& config,
                            const EpochObserver& observer = {});

TrainResult run_federated(const data::EncodedData& train,
                          std::span<const data::WorkerPartition> partitions,
                          const TrainConfig& config, const EpochObserver& observer = {});

struct ClusterModel {
    std::size_t cluster_id = 0;
    std::vector<std::string> stations;
    std::size_t train_records = 0;
    std::size_t test_records = 0;
    std::optional<TrainResult> result;  // empty when the cluster was skipped
    double test_rmse = 0.0;             // NaN when no test records
};

struct ClusteredResult {
    cluster::ClusterAssignment clusters;
    std::vector<ClusterModel> models;
    std::vector<double> test_predictions;  // kWh, aligned with the test records
    double pooled_rmse = 0.0;
    TrafficLog traffic;
    std::vector<std::string> warnings;
};

/// Clusters the stations, splits both record sets by cluster membership and
/// trains one model per cluster with `inner`. Cluster k uses seed + k.
/// Test records of a skipped cluster are predicted with the training mean.
ClusteredResult run_clustered(std::span<const data::TransactionRecord> train,
                              std::span<const data::TransactionRecord> test,
                              std::span<const data::StationInfo> stations,
                              const data::EncodingSchema& schema,
                              const cluster::ClusterConfig& cluster_config, Mode inner,
                              const TrainConfig& config);

/// Trains with config.mode (partitioning `train` for federated runs).
TrainResult train_pipeline(std::span<const data::TransactionRecord> train,
                           const data::EncodingSchema& schema, const TrainConfig& config,
                           const EpochObserver& observer = {});

}  // namespace fedl::fed
