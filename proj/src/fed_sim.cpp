#include "fedl/fed_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>

#include "fedl/error.hpp"
#include "fedl/metrics.hpp"
#include "fedl/rng.hpp"

namespace fedl::fed {

std::string to_string(Mode m) { return m == Mode::Centralized ? "central" : "federated"; }

Mode mode_from_string(std::string_view s) {
    if (s == "central" || s == "centralized" || s == "edl") return Mode::Centralized;
    if (s == "federated" || s == "fedl") return Mode::Federated;
    throw std::invalid_argument("unknown training mode '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("invalid training config: " + what); };
    if (epochs < 1) fail("epochs must be at least 1");
    if (!(tolerance >= 0.0)) fail("tolerance must be non-negative");
    if (patience < 1) fail("patience must be at least 1");
    if (workers < 1) fail("workers must be at least 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
    if (!(adam.step_size > 0.0)) fail("step size must be positive");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) fail("beta1 must lie in [0, 1)");
    if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) fail("beta2 must lie in [0, 1)");
    if (!(adam.epsilon > 0.0)) fail("epsilon must be positive");
    for (auto h : hidden)
        if (h < 1) fail("hidden layer widths must be positive");
}

std::size_t batch_count_for(std::size_t rows, std::size_t batch_size) {
    if (batch_size == 0 || rows == 0) return 1;
    return std::max<std::size_t>(1, (rows + batch_size - 1) / batch_size);
}

std::vector<BatchRange> make_batches(std::size_t rows, std::size_t batch_count) {
    if (batch_count < 1 || batch_count > std::max<std::size_t>(rows, 1)) {
        throw DataError("cannot split " + std::to_string(rows) + " rows into " +
                        std::to_string(batch_count) + " batches");
    }
    std::vector<BatchRange> out;
    out.reserve(batch_count);
    for (std::size_t b = 0; b < batch_count; ++b) {
        const std::size_t begin = b * rows / batch_count;
        const std::size_t end = (b + 1) * rows / batch_count;
        out.push_back({begin, end - begin});
    }
    return out;
}

namespace {

std::uint64_t round_seed(std::uint64_t seed, std::uint64_t step) {
    return mix_seed(seed, 0x726f756e64ull + step);  // "round"
}

LocalResult gradient_on(const data::EncodedData& d, BatchRange range, const nn::Network& model,
                        std::uint64_t seed) {
    const std::span<const std::uint64_t> ids(d.sample_ids.data() + range.begin, range.size);
    LocalResult r;
    if (range.begin == 0 && range.size == d.rows()) {
        const auto fr = nn::forward(model, d.x, nn::Mode::Train, seed, ids);
        r.loss = nn::sse_loss(fr.output.col(0), d.y);
        r.gradient = nn::backward(model, fr.tape, d.y);
    } else {
        const Eigen::MatrixXd xb = d.x.middleRows(static_cast<Eigen::Index>(range.begin),
                                                  static_cast<Eigen::Index>(range.size));
        const Eigen::VectorXd yb = d.y.segment(static_cast<Eigen::Index>(range.begin),
                                               static_cast<Eigen::Index>(range.size));
        const auto fr = nn::forward(model, xb, nn::Mode::Train, seed, ids);
        r.loss = nn::sse_loss(fr.output.col(0), yb);
        r.gradient = nn::backward(model, fr.tape, yb);
    }
    return r;
}

nn::Network initial_model(std::size_t input_width, const TrainConfig& config) {
    const auto specs = nn::regression_architecture(input_width, config.hidden, config.dropout);
    return nn::init_network(specs, config.seed);
}

data::EncodedData take_rows(const data::EncodedData& d, std::span<const std::size_t> rows) {
    data::EncodedData out;
    const auto n = static_cast<Eigen::Index>(rows.size());
    out.x.resize(n, d.x.cols());
    out.y.resize(n);
    out.sample_ids.reserve(rows.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto src = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
        out.x.row(i) = d.x.row(src);
        out.y(i) = d.y(src);
        out.sample_ids.push_back(d.sample_ids[static_cast<std::size_t>(src)]);
    }
    return out;
}

}  // namespace

LocalResult local_epoch(const WorkerState& worker, const nn::Network& global_model,
                        std::uint64_t seed, std::size_t batch) {
    if (worker.data.rows() == 0) throw DataError("worker " + std::to_string(worker.worker_id) + " has no data");
    if (static_cast<std::size_t>(worker.data.x.cols()) != global_model.input_width()) {
        throw ShapeError("worker " + std::to_string(worker.worker_id) + " feature width does not match the model");
    }
    const BatchRange range = worker.batches.empty() ? BatchRange{0, worker.data.rows()}
                                                    : worker.batches.at(batch);
    return gradient_on(worker.data, range, global_model, seed);
}

nn::Gradient aggregate_gradients(std::span<const nn::Gradient> grads,
                                 std::span<const std::size_t> worker_ids) {
    if (grads.empty()) throw DataError("cannot aggregate an empty gradient list");
    if (!worker_ids.empty() && worker_ids.size() != grads.size()) {
        throw ShapeError("aggregate_gradients: one worker id per gradient required");
    }
    std::vector<std::size_t> order(grads.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (!worker_ids.empty()) {
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return worker_ids[a] < worker_ids[b]; });
    }
    nn::Gradient total = grads[order.front()];
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (!grads[order[i]].same_shape(total)) throw ShapeError("gradients differ in shape");
        total += grads[order[i]];
    }
    if (grads.size() > 1) {
        const double j = static_cast<double>(grads.size());
        for (auto& w : total.weights) w /= j;
        for (auto& b : total.biases) b /= j;
    }
    return total;
}

RoundOutcome run_round(ServerState& server, std::span<WorkerState> workers, std::uint64_t seed,
                       std::size_t batch, std::size_t epoch, TrafficLog& traffic, std::size_t threads) {
    if (workers.empty()) throw DataError("a round needs at least one worker");
    RoundOutcome out;
    for (const auto& w : workers) {
        if (w.model_version != server.version) {
            throw StalenessError("worker " + std::to_string(w.worker_id) + " holds model version " +
                                 std::to_string(w.model_version) + " but the server is at " +
                                 std::to_string(server.version));
        }
    }

    std::vector<LocalResult> results(workers.size());
    const std::size_t n_threads = std::min(std::max<std::size_t>(threads, 1), workers.size());
    if (n_threads <= 1) {
        for (std::size_t j = 0; j < workers.size(); ++j) {
            results[j] = local_epoch(workers[j], workers[j].model, seed, batch);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(workers.size());
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t j = next++; j < workers.size(); j = next++) {
                    try {
                        results[j] = local_epoch(workers[j], workers[j].model, seed, batch);
                    } catch (...) {
                        errors[j] = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    // Barrier: all J gradients for this version are present.
    const std::uint64_t msg = message_bytes(server.model.parameter_count());
    std::vector<nn::Gradient> grads;
    std::vector<std::size_t> ids;
    grads.reserve(workers.size());
    for (std::size_t j = 0; j < workers.size(); ++j) {
        out.staleness = std::max(out.staleness, server.version - workers[j].model_version);
        out.worker_losses.push_back(results[j].loss);
        grads.push_back(std::move(results[j].gradient));
        ids.push_back(workers[j].worker_id);
        traffic.append({epoch, Direction::Up, Payload::Gradient, msg});
        out.bytes_up += msg;
    }
    if (out.staleness != 0) throw StalenessError("stale gradient reached the aggregation barrier");

    const nn::Gradient aggregated = aggregate_gradients(grads, ids);
    nn::adam_step(server.optimizer, server.model, aggregated);
    ++server.version;

    for (auto& w : workers) {
        w.model = server.model;
        w.model_version = server.version;
        traffic.append({epoch, Direction::Down, Payload::Model, msg});
        out.bytes_down += msg;
    }
    return out;
}

bool convergence_check(std::span<const double> history, double tolerance, std::size_t patience) {
    if (history.size() < patience + 1 || !(tolerance > 0.0)) return false;
    for (std::size_t t = history.size() - patience; t < history.size(); ++t) {
        const double prev = history[t - 1];
        const double change = std::abs(history[t] - prev) / std::max(prev, 1e-12);
        if (!(change < tolerance)) return false;
    }
    return true;
}

TrainResult run_centralized(const data::EncodedData& dataset, const TrainConfig& config,
                            const EpochObserver& observer) {
    config.validate();
    if (dataset.rows() == 0) throw DataError("centralized training needs at least one record");

    TrainResult result;
    const auto width = static_cast<std::size_t>(dataset.x.cols());
    result.traffic.append({0, Direction::Up, Payload::Dataset, dataset.rows() * record_bytes(width)});

    nn::Network model = initial_model(width, config);
    nn::AdamState optimizer = nn::AdamState::for_network(model, config.adam);
    const auto batches = make_batches(dataset.rows(), batch_count_for(dataset.rows(), config.batch_size));

    std::vector<double> history;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        RoundReport report;
        report.epoch = epoch;
        for (const auto& range : batches) {
            const auto local = gradient_on(dataset, range, model, round_seed(config.seed, optimizer.phi));
            report.global_loss += local.loss;
            nn::adam_step(optimizer, model, local.gradient);
        }
        if (!std::isfinite(report.global_loss)) {
            throw NumericalError("training loss diverged at epoch " + std::to_string(epoch));
        }
        report.worker_losses = {report.global_loss};
        history.push_back(report.global_loss);
        result.rounds.push_back(report);
        if (observer) observer(report, model);
        if (convergence_check(history, config.tolerance, config.patience)) {
            result.converged = true;
            break;
        }
    }
    result.model = std::move(model);
    return result;
}

TrainResult run_federated(const data::EncodedData& train,
                          std::span<const data::WorkerPartition> partitions,
                          const TrainConfig& config, const EpochObserver& observer) {
    config.validate();
    if (partitions.empty()) throw DataError("federated training needs at least one worker partition");

    // Partitions must be disjoint and cover the training set.
    std::vector<std::uint8_t> seen(train.rows(), 0);
    for (const auto& p : partitions) {
        if (p.record_indices.empty()) {
            throw DataError("worker " + std::to_string(p.worker_id) + " has an empty partition");
        }
        for (auto r : p.record_indices) {
            if (r >= train.rows() || seen[r]++) {
                throw DataError("worker partitions overlap or reference missing records");
            }
        }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
        throw DataError("worker partitions do not cover the training set");
    }

    const auto width = static_cast<std::size_t>(train.x.cols());
    ServerState server;
    server.model = initial_model(width, config);
    server.optimizer = nn::AdamState::for_network(server.model, config.adam);

    std::size_t min_rows = train.rows();
    for (const auto& p : partitions) min_rows = std::min(min_rows, p.record_indices.size());
    const std::size_t steps = batch_count_for(min_rows, config.batch_size);

    std::vector<WorkerState> workers;
    workers.reserve(partitions.size());
    for (const auto& p : partitions) {
        WorkerState w;
        w.worker_id = p.worker_id;
        w.data = take_rows(train, p.record_indices);
        w.batches = make_batches(w.data.rows(), steps);
        w.model = server.model;
        w.model_version = server.version;
        workers.push_back(std::move(w));
    }
    std::sort(workers.begin(), workers.end(),
              [](const WorkerState& a, const WorkerState& b) { return a.worker_id < b.worker_id; });

    TrainResult result;
    std::vector<std::vector<double>> histories(workers.size());
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        RoundReport report;
        report.epoch = epoch;
        report.worker_losses.assign(workers.size(), 0.0);
        for (std::size_t b = 0; b < steps; ++b) {
            const auto outcome = run_round(server, workers, round_seed(config.seed, server.optimizer.phi),
                                           b, epoch, result.traffic, config.threads);
            for (std::size_t j = 0; j < workers.size(); ++j) report.worker_losses[j] += outcome.worker_losses[j];
            report.staleness = std::max(report.staleness, outcome.staleness);
            report.bytes_up += outcome.bytes_up;
            report.bytes_down += outcome.bytes_down;
        }
        for (double l : report.worker_losses) report.global_loss += l;
        if (!std::isfinite(report.global_loss)) {
            throw NumericalError("training loss diverged at epoch " + std::to_string(epoch));
        }
        bool all_converged = true;
        for (std::size_t j = 0; j < workers.size(); ++j) {
            histories[j].push_back(report.worker_losses[j]);
            all_converged = all_converged && convergence_check(histories[j], config.tolerance, config.patience);
        }
        result.rounds.push_back(report);
        if (observer) observer(report, server.model);
        if (all_converged) {
            result.converged = true;
            break;
        }
    }
    result.model = std::move(server.model);
    return result;
}

TrainResult train_pipeline(std::span<const data::TransactionRecord> train,
                           const data::EncodingSchema& schema, const TrainConfig& config,
                           const EpochObserver& observer) {
    const auto encoded = data::encode_features(train, schema);
    if (config.mode == Mode::Centralized) return run_centralized(encoded, config, observer);
    const auto parts = data::partition_workers(train, config.workers, config.partition);
    return run_federated(encoded, parts, config, observer);
}

ClusteredResult run_clustered(std::span<const data::TransactionRecord> train,
                              std::span<const data::TransactionRecord> test,
                              std::span<const data::StationInfo> stations,
                              const data::EncodingSchema& schema,
                              const cluster::ClusterConfig& cluster_config, Mode inner,
                              const TrainConfig& config) {
    std::set<std::string> active;
    for (const auto& r : train) active.insert(r.station_id);
    for (const auto& r : test) active.insert(r.station_id);

    std::map<std::string, data::StationInfo> by_id;
    for (const auto& s : stations) by_id.emplace(s.station_id, s);
    std::vector<data::StationInfo> located;
    for (const auto& id : active) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw DataError("station '" + id + "' has no coordinates in the stations file");
        located.push_back(it->second);
    }

    ClusteredResult out;
    out.clusters = cluster::constrained_kmeans(located, cluster_config);
    if (!out.clusters.converged) {
        out.warnings.push_back("clustering did not reach a fixpoint within " +
                               std::to_string(cluster_config.max_iterations) + " iterations");
    }
    std::map<std::string, std::size_t> cluster_of;
    for (std::size_t i = 0; i < out.clusters.station_ids.size(); ++i) {
        cluster_of[out.clusters.station_ids[i]] = out.clusters.labels[i];
    }

    const std::size_t k = cluster_config.k;
    std::vector<std::vector<std::size_t>> train_rows(k), test_rows(k);
    for (std::size_t r = 0; r < train.size(); ++r) train_rows[cluster_of.at(train[r].station_id)].push_back(r);
    for (std::size_t r = 0; r < test.size(); ++r) test_rows[cluster_of.at(test[r].station_id)].push_back(r);

    out.test_predictions.assign(test.size(), schema.label.mean);
    for (std::size_t c = 0; c < k; ++c) {
        ClusterModel cm;
        cm.cluster_id = c;
        for (std::size_t i = 0; i < out.clusters.labels.size(); ++i) {
            if (out.clusters.labels[i] == c) cm.stations.push_back(out.clusters.station_ids[i]);
        }
        cm.train_records = train_rows[c].size();
        cm.test_records = test_rows[c].size();
        cm.test_rmse = std::numeric_limits<double>::quiet_NaN();

        const auto test_c = data::select(test, test_rows[c]);
        if (train_rows[c].empty()) {
            out.warnings.push_back("cluster " + std::to_string(c) + " has no training transactions; skipped");
            out.models.push_back(std::move(cm));
            continue;
        }

        const auto train_c = data::select(train, train_rows[c]);
        std::vector<std::uint64_t> ids(train_rows[c].begin(), train_rows[c].end());
        const auto encoded = data::encode_features(train_c, schema, ids);

        TrainConfig cfg = config;
        cfg.seed = config.seed + c;
        TrainResult tr;
        if (inner == Mode::Centralized) {
            cfg.mode = Mode::Centralized;
            tr = run_centralized(encoded, cfg);
        } else {
            cfg.mode = Mode::Federated;
            if (cfg.partition == data::PartitionStrategy::ByStation) {
                std::set<std::string> st;
                for (const auto& r : train_c) st.insert(r.station_id);
                if (cfg.workers > st.size()) {
                    out.warnings.push_back("cluster " + std::to_string(c) + ": workers capped at " +
                                           std::to_string(st.size()) + " (one per station)");
                    cfg.workers = st.size();
                }
            }
            cfg.workers = std::min(cfg.workers, train_c.size());
            const auto parts = data::partition_workers(train_c, cfg.workers, cfg.partition);
            tr = run_federated(encoded, parts, cfg);
        }

        if (!test_c.empty()) {
            const auto enc_test = data::encode_features(test_c, schema);
            const Eigen::VectorXd pred = nn::predict(tr.model, enc_test.x, schema.label);
            std::vector<double> p(pred.data(), pred.data() + pred.size());
            for (std::size_t i = 0; i < test_rows[c].size(); ++i) out.test_predictions[test_rows[c][i]] = p[i];
            cm.test_rmse = eval::rmse(data::labels_kwh(test_c), p);
        }
        out.traffic.append(tr.traffic);
        cm.result = std::move(tr);
        out.models.push_back(std::move(cm));
    }

    if (!test.empty()) {
        out.pooled_rmse = eval::rmse(data::labels_kwh(test), out.test_predictions);
    } else {
        out.pooled_rmse = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

}  // namespace fedl::fed
