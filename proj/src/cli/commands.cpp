#include "cli/commands.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "fedl/csv.hpp"
#include "fedl/error.hpp"
#include "fedl/metrics.hpp"
#include "fedl/model_io.hpp"

namespace fedl::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    return out;
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const nlohmann::json& j) { open_output(path) << j.dump(2) << '\n'; }

std::string fixed(double v, int digits = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

std::vector<std::string> station_ids(std::span<const data::TransactionRecord> records) {
    std::set<std::string> ids;
    for (const auto& r : records) ids.insert(r.station_id);
    return {ids.begin(), ids.end()};
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Collects options whose values override the config file when given.
class Overrides {
public:
    template <typename T, typename F>
    CLI::Option* add(CLI::App* app, const std::string& name, const std::string& desc, F apply) {
        auto value = std::make_shared<T>();
        CLI::Option* opt = app->add_option(name, *value, desc);
        items_.push_back({opt, [value, apply](RunConfig& c) { apply(c, *value); }});
        return opt;
    }

    template <typename F>
    CLI::Option* flag(CLI::App* app, const std::string& name, const std::string& desc, F apply) {
        CLI::Option* opt = app->add_flag(name, desc);
        items_.push_back({opt, [apply](RunConfig& c) { apply(c); }});
        return opt;
    }

    void apply(RunConfig& c) const {
        for (const auto& [opt, fn] : items_)
            if (opt->count() > 0) fn(c);
    }

private:
    std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> items_;
};

void add_transactions_option(CLI::App* app, Overrides& ov) {
    ov.add<std::string>(app, "--transactions", "Transactions CSV (station_id,transaction_id,date,time,energy_kwh)",
                        [](RunConfig& c, const std::string& v) { c.transactions = v; });
}

void add_stations_option(CLI::App* app, Overrides& ov) {
    ov.add<std::string>(app, "--stations", "Stations CSV (station_id,latitude,longitude)",
                        [](RunConfig& c, const std::string& v) { c.stations = v; });
}

void add_cluster_options(CLI::App* app, Overrides& ov) {
    ov.add<std::size_t>(app, "-k,--clusters", "Number of clusters K (default 2)",
                        [](RunConfig& c, std::size_t v) { c.cluster.k = v; });
    ov.add<std::vector<std::size_t>>(app, "--theta-low", "Minimum cluster size (one value or one per cluster)",
                                     [](RunConfig& c, const std::vector<std::size_t>& v) { c.cluster.theta_low = v; });
    ov.add<std::vector<std::size_t>>(app, "--theta-high", "Maximum cluster size (one value or one per cluster)",
                                     [](RunConfig& c, const std::vector<std::size_t>& v) { c.cluster.theta_high = v; });
    ov.add<std::size_t>(app, "--max-iterations", "Clustering iteration cap",
                        [](RunConfig& c, std::size_t v) { c.cluster.max_iterations = v; });
}

void add_train_options(CLI::App* app, Overrides& ov) {
    ov.add<std::string>(app, "--mode", "central | federated",
                        [](RunConfig& c, const std::string& v) { c.train.mode = fed::mode_from_string(v); });
    ov.flag(app, "--clustering", "Cluster stations first and train one model per cluster",
            [](RunConfig& c) { c.clustering = true; });
    ov.add<std::size_t>(app, "--workers", "Federated worker count J (default 4)",
                        [](RunConfig& c, std::size_t v) { c.train.workers = v; });
    ov.add<std::string>(app, "--partition", "by_station | round_robin",
                        [](RunConfig& c, const std::string& v) {
                            try {
                                c.train.partition = data::partition_strategy_from_string(v);
                            } catch (const DataError& e) {
                                throw UsageError(e.what());
                            }
                        });
    ov.add<std::size_t>(app, "--epochs", "Maximum epochs T (default 200)",
                        [](RunConfig& c, std::size_t v) { c.train.epochs = v; });
    ov.add<double>(app, "--tolerance", "Relative loss-change tolerance (default 1e-6)",
                   [](RunConfig& c, double v) { c.train.tolerance = v; });
    ov.add<std::size_t>(app, "--patience", "Consecutive converged epochs required (default 5)",
                        [](RunConfig& c, std::size_t v) { c.train.patience = v; });
    ov.add<double>(app, "--lr", "Adam step size (default 0.01)",
                   [](RunConfig& c, double v) { c.train.adam.step_size = v; });
    ov.add<double>(app, "--dropout", "Dropout fraction after the last hidden layer (default 0.15)",
                   [](RunConfig& c, double v) { c.train.dropout = v; });
    ov.add<std::vector<std::size_t>>(app, "--hidden", "Hidden layer widths (default 64 64)",
                                     [](RunConfig& c, const std::vector<std::size_t>& v) { c.train.hidden = v; });
    ov.add<std::size_t>(app, "--batch-size", "Rows per optimizer step, 0 = full batch",
                        [](RunConfig& c, std::size_t v) { c.train.batch_size = v; });
    ov.add<std::size_t>(app, "--threads", "Worker threads for federated rounds",
                        [](RunConfig& c, std::size_t v) { c.train.threads = v; });
    ov.add<double>(app, "--ratio", "Training set ratio (default 0.8)",
                   [](RunConfig& c, double v) { c.ratio = v; });
    ov.flag(app, "--no-transaction-id", "Drop the transaction id feature",
            [](RunConfig& c) { c.include_transaction_id = false; });
    add_cluster_options(app, ov);
}

// ---------------------------------------------------------------------------

int cmd_synth(const RunConfig& cfg, std::size_t n_stations, std::size_t n_records, std::ostream& out) {
    const auto corpus = data::synth_generate(n_stations, n_records, cfg.seed);
    {
        auto f = open_output(cfg.out_dir / "transactions.csv");
        data::write_transactions(f, corpus.records, corpus.dates, corpus.times);
    }
    {
        auto f = open_output(cfg.out_dir / "stations.csv");
        data::write_stations(f, corpus.stations);
    }
    write_json(cfg.out_dir / "synth_model.json", corpus.model.to_json());
    out << "wrote " << corpus.records.size() << " records for " << corpus.stations.size()
        << " stations to " << cfg.out_dir.string() << '\n';
    return kOk;
}

int cmd_ingest(const RunConfig& cfg, std::ostream& out) {
    if (cfg.transactions.empty()) throw UsageError("ingest requires --transactions");
    const auto parsed = load_transactions(cfg.transactions);
    const auto ids = station_ids(parsed.rows);
    if (!parsed.rows.empty()) data::build_schema(parsed.rows, cfg.include_transaction_id);
    {
        auto f = open_output(cfg.out_dir / "rejects.csv");
        data::write_rejects(f, parsed.rejects);
    }
    out << parsed.rows.size() << " records, " << ids.size() << " stations, " << parsed.rejects.size()
        << " rejects\n";
    for (const auto& r : parsed.rejects) out << "  line " << r.line_number << ": " << r.reason << '\n';
    return kOk;
}

int cmd_cluster(const RunConfig& cfg, std::ostream& out) {
    if (cfg.stations.empty()) throw UsageError("cluster requires --stations");
    const auto stations = load_stations(cfg.stations);
    const auto a = cluster::constrained_kmeans(stations, cfg.cluster);
    {
        auto f = open_output(cfg.out_dir / "clusters.csv");
        cluster::write_assignment(f, a);
    }
    out << "objective " << csv::format_double(a.objective) << ", iterations " << a.iterations_used
        << ", converged " << (a.converged ? "yes" : "no") << '\n';
    const auto sizes = a.sizes();
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        out << "  cluster " << k << ": " << sizes[k] << " stations, centroid ("
            << csv::format_double(a.centroids[k][0]) << ", " << csv::format_double(a.centroids[k][1]) << ")\n";
    }
    return kOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    if (cfg.transactions.empty()) throw UsageError("train requires --transactions");
    if (cfg.clustering && cfg.stations.empty()) {
        throw UsageError("--clustering requires --stations (stations CSV with station_id,latitude,longitude)");
    }
    cfg.train.validate();
    const auto parsed = load_transactions(cfg.transactions);
    if (!parsed.rejects.empty()) err << "warning: skipped " << parsed.rejects.size() << " malformed rows\n";
    const auto prep = prepare_split(parsed.rows, cfg, cfg.ratio);
    const auto& train = prep.split.train;
    const auto& test = prep.split.test;

    fs::create_directories(cfg.out_dir);
    write_json(cfg.out_dir / "schema.json", prep.schema.to_json());

    nlohmann::json manifest;
    manifest["config"] = cfg.to_json();
    manifest["run_id"] = run_id(manifest["config"]);
    manifest["seed"] = cfg.seed;
    manifest["pipeline"] = fed::to_string(cfg.train.mode);
    manifest["clustering"] = cfg.clustering;
    manifest["train_records"] = train.size();
    manifest["test_records"] = test.size();
    manifest["schema"] = "schema.json";
    manifest["traffic"] = "traffic.csv";

    TrafficLog traffic;
    double test_rmse = 0.0;
    if (!cfg.clustering) {
        const auto result = fed::train_pipeline(train, prep.schema, cfg.train);
        io::save_model(cfg.out_dir / "model.fedl", result.model);
        {
            auto f = open_output(cfg.out_dir / "metrics.csv");
            write_metrics(f, result.rounds);
        }
        const auto enc = data::encode_features(test, prep.schema);
        test_rmse = eval::rmse(data::labels_kwh(test), to_std(nn::predict(result.model, enc.x, prep.schema.label)));
        traffic = result.traffic;
        manifest["models"] = {{{"cluster", nullptr}, {"file", "model.fedl"}, {"metrics", "metrics.csv"}}};
        manifest["epochs_run"] = result.rounds.size();
        manifest["converged"] = result.converged;
        out << fed::to_string(cfg.train.mode) << ": " << result.rounds.size() << " epochs, final loss "
            << csv::format_double(result.rounds.back().global_loss) << ", test RMSE " << fixed(test_rmse)
            << " kWh\n";
    } else {
        const auto stations = load_stations(cfg.stations);
        const auto res = fed::run_clustered(train, test, stations, prep.schema, cfg.cluster, cfg.train.mode, cfg.train);
        for (const auto& w : res.warnings) err << "warning: " << w << '\n';
        {
            auto f = open_output(cfg.out_dir / "clusters.csv");
            cluster::write_assignment(f, res.clusters);
        }
        manifest["clusters"] = "clusters.csv";
        manifest["models"] = nlohmann::json::array();
        for (const auto& m : res.models) {
            if (!m.result) continue;
            const std::string model_file = "model_cluster" + std::to_string(m.cluster_id) + ".fedl";
            const std::string metrics_file = "metrics_cluster" + std::to_string(m.cluster_id) + ".csv";
            io::save_model(cfg.out_dir / model_file, m.result->model);
            auto f = open_output(cfg.out_dir / metrics_file);
            write_metrics(f, m.result->rounds);
            manifest["models"].push_back({{"cluster", m.cluster_id}, {"file", model_file}, {"metrics", metrics_file}});
            out << "cluster " << m.cluster_id << ": " << m.stations.size() << " stations, " << m.train_records
                << " train / " << m.test_records << " test records, " << m.result->rounds.size()
                << " epochs, test RMSE " << (std::isnan(m.test_rmse) ? std::string("n/a") : fixed(m.test_rmse))
                << " kWh\n";
        }
        test_rmse = res.pooled_rmse;
        traffic = res.traffic;
        out << fed::to_string(cfg.train.mode) << " + clustering (K=" << cfg.cluster.k << "): pooled test RMSE "
            << fixed(test_rmse) << " kWh\n";
    }
    {
        auto f = open_output(cfg.out_dir / "traffic.csv");
        traffic.write_csv(f);
    }
    manifest["test_rmse"] = test_rmse;
    manifest["traffic_bytes"] = traffic.total();
    write_json(cfg.out_dir / "manifest.json", manifest);
    out << "traffic " << traffic.total() << " bytes; outputs in " << cfg.out_dir.string() << '\n';
    return kOk;
}

std::vector<double> predict_from_manifest(const fs::path& dir, const nlohmann::json& manifest,
                                          std::span<const data::TransactionRecord> test,
                                          const data::EncodingSchema& schema) {
    const auto models = manifest.at("models");
    const auto enc = data::encode_features(test, schema);
    auto check = [&](const nn::Network& net, const std::string& file) {
        if (net.input_width() != schema.width()) {
            throw DataError("model/schema mismatch: " + file + " expects " + std::to_string(net.input_width()) +
                            " features, schema encodes " + std::to_string(schema.width()));
        }
    };
    if (!manifest.value("clustering", false)) {
        const std::string file = models.at(0).at("file").get<std::string>();
        const auto net = io::load_model(dir / file);
        check(net, file);
        return to_std(nn::predict(net, enc.x, schema.label));
    }

    std::map<std::string, std::size_t> cluster_of;
    {
        std::ifstream in(dir / manifest.at("clusters").get<std::string>());
        if (!in) throw DataError("cannot open cluster assignment in " + dir.string());
        std::string line;
        csv::read_line(in, line, true);
        while (csv::read_line(in, line)) {
            const auto f = csv::split_line(line);
            if (f.size() == 2) cluster_of[f[0]] = static_cast<std::size_t>(std::stoul(f[1]));
        }
    }
    std::map<std::size_t, nn::Network> nets;
    for (const auto& m : models) {
        const std::string file = m.at("file").get<std::string>();
        auto net = io::load_model(dir / file);
        check(net, file);
        nets.emplace(m.at("cluster").get<std::size_t>(), std::move(net));
    }
    std::vector<double> pred(test.size(), schema.label.mean);
    for (auto& [k, net] : nets) {
        const Eigen::VectorXd all = nn::predict(net, enc.x, schema.label);
        for (std::size_t i = 0; i < test.size(); ++i) {
            const auto it = cluster_of.find(test[i].station_id);
            if (it == cluster_of.end()) throw DataError("station '" + test[i].station_id + "' missing from clusters.csv");
            if (it->second == k) pred[i] = all(static_cast<Eigen::Index>(i));
        }
    }
    return pred;
}

void print_results(std::ostream& out, std::span<const MethodResult> results) {
    for (const auto& r : results) out << "  " << std::left << std::setw(20) << r.method << fixed(r.rmse) << " kWh\n";
}

int cmd_evaluate(RunConfig cfg, const std::string& model_dir, bool baselines_only, bool sweep,
                 const CLI::Option* transactions_opt, std::ostream& out) {
    nlohmann::json report;
    if (sweep) {
        if (cfg.transactions.empty()) throw UsageError("evaluate --sweep requires --transactions");
        const auto parsed = load_transactions(cfg.transactions);
        std::vector<data::StationInfo> stations;
        if (!cfg.stations.empty()) stations = load_stations(cfg.stations);
        const auto table = run_sweep(parsed.rows, stations, cfg);
        {
            auto f = open_output(cfg.out_dir / "table.csv");
            table.write_csv(f);
        }
        table.write_csv(out);
        report["sweep"] = {{"ratios", table.ratios}, {"methods", table.methods}, {"rmse", table.rmse}};
        write_json(cfg.out_dir / "report.json", report);
        return kOk;
    }

    if (!model_dir.empty()) {
        const fs::path dir(model_dir);
        const auto manifest = read_json(dir / "manifest.json");
        const fs::path flag_transactions = cfg.transactions;
        const fs::path out_dir = cfg.out_dir;
        cfg = RunConfig{};
        cfg.apply_json(manifest.at("config"));
        if (transactions_opt->count() > 0) cfg.transactions = flag_transactions;
        cfg.out_dir = out_dir;
    }
    if (cfg.transactions.empty()) throw UsageError("evaluate requires --transactions");
    const auto parsed = load_transactions(cfg.transactions);
    const auto prep = prepare_split(parsed.rows, cfg, cfg.ratio);
    const auto& train = prep.split.train;
    const auto& test = prep.split.test;
    const auto actual = data::labels_kwh(test);

    std::vector<MethodResult> results;
    if (!model_dir.empty()) {
        const fs::path dir(model_dir);
        const auto manifest = read_json(dir / "manifest.json");
        const auto schema = data::EncodingSchema::from_json(read_json(dir / manifest.value("schema", "schema.json")));
        std::string name = manifest.value("pipeline", "central") == "federated" ? "FEDL" : "EDL";
        if (manifest.value("clustering", false)) name += " + Clustering";
        results.push_back({name, eval::rmse(actual, predict_from_manifest(dir, manifest, test, schema)), {}});
    } else if (!baselines_only) {
        throw UsageError("evaluate needs --model-dir, --baselines-only or --sweep");
    }

    const auto train_y = data::labels_kwh(train);
    const auto enc_train = data::encode_features(train, prep.schema);
    const auto enc_test = data::encode_features(test, prep.schema);
    const std::size_t k = std::min(cfg.knn_k, train.size());
    results.push_back({"KNR", eval::rmse(actual, eval::knn_baseline(enc_train.x, train_y, enc_test.x, k)), {}});
    results.push_back({"Mean", eval::rmse(actual, eval::mean_baseline(train_y).predict(test.size())), {}});

    out << "test RMSE at training ratio " << cfg.ratio << " (" << test.size() << " test records):\n";
    print_results(out, results);
    report["ratio"] = cfg.ratio;
    report["test_records"] = test.size();
    const double mean_rmse = results.back().rmse;
    for (const auto& r : results) {
        report["rmse"][r.method] = r.rmse;
        if (r.method != "Mean" && mean_rmse > 0.0) {
            report["improvement_vs_mean"][r.method] = eval::relative_improvement(mean_rmse, r.rmse);
        }
    }
    write_json(cfg.out_dir / "report.json", report);
    return kOk;
}

int cmd_report(const RunConfig& cfg, const std::vector<std::string>& specs, std::ostream& out) {
    if (specs.size() < 2) {
        throw UsageError("report needs at least two traffic logs (baseline first), got " +
                         std::to_string(specs.size()));
    }
    std::vector<std::pair<std::string, TrafficLog>> logs;
    for (const auto& s : specs) {
        const auto eq = s.find('=');
        const fs::path path = eq == std::string::npos ? fs::path(s) : fs::path(s.substr(eq + 1));
        std::string name = eq == std::string::npos ? path.parent_path().filename().string() + "/" + path.stem().string()
                                                   : s.substr(0, eq);
        std::ifstream in(path);
        if (!in) throw DataError("cannot open traffic log " + path.string());
        logs.emplace_back(std::move(name), TrafficLog::read_csv(in));
    }
    const auto report = eval::overhead_report(logs);
    report.print(out);
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        out << report.rows[i].pipeline << " saves " << fixed(report.rows[i].savings * 100.0, 2) << "% vs "
            << report.rows[0].pipeline << '\n';
    }
    write_json(cfg.out_dir / "overhead.json", report.to_json());
    return kOk;
}

}  // namespace

// ---------------------------------------------------------------------------

data::ParseResult<data::TransactionRecord> load_transactions(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open transactions file " + path.string());
    return data::parse_transactions(in);
}

std::vector<data::StationInfo> load_stations(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open stations file " + path.string());
    auto parsed = data::parse_stations(in);
    if (!parsed.rejects.empty()) {
        const auto& r = parsed.rejects.front();
        throw DataError(path.string() + " line " + std::to_string(r.line_number) + ": " + r.reason);
    }
    return std::move(parsed.rows);
}

PreparedSplit prepare_split(std::span<const data::TransactionRecord> records, const RunConfig& cfg, double ratio) {
    PreparedSplit p;
    p.split = data::split_train_test(records, ratio, cfg.seed);
    const auto ids = station_ids(records);
    p.schema = data::build_schema(p.split.train, cfg.include_transaction_id, ids);
    return p;
}

std::vector<MethodResult> evaluate_methods(std::span<const data::TransactionRecord> records,
                                           std::span<const data::StationInfo> stations, const RunConfig& cfg,
                                           double ratio) {
    const auto prep = prepare_split(records, cfg, ratio);
    const auto& train = prep.split.train;
    const auto& test = prep.split.test;
    const auto actual = data::labels_kwh(test);
    const auto enc_test = data::encode_features(test, prep.schema);

    std::vector<MethodResult> results;
    for (const auto mode : {fed::Mode::Centralized, fed::Mode::Federated}) {
        fed::TrainConfig tc = cfg.train;
        tc.mode = mode;
        auto tr = fed::train_pipeline(train, prep.schema, tc);
        const auto pred = to_std(nn::predict(tr.model, enc_test.x, prep.schema.label));
        results.push_back({mode == fed::Mode::Centralized ? "EDL" : "FEDL", eval::rmse(actual, pred),
                           std::move(tr.traffic)});
    }
    if (!stations.empty()) {
        for (const auto mode : {fed::Mode::Centralized, fed::Mode::Federated}) {
            auto res = fed::run_clustered(train, test, stations, prep.schema, cfg.cluster, mode, cfg.train);
            results.push_back({mode == fed::Mode::Centralized ? "EDL + Clustering" : "FEDL + Clustering",
                               res.pooled_rmse, std::move(res.traffic)});
        }
    }
    const auto train_y = data::labels_kwh(train);
    const auto enc_train = data::encode_features(train, prep.schema);
    const std::size_t k = std::min(cfg.knn_k, train.size());
    results.push_back({"KNR", eval::rmse(actual, eval::knn_baseline(enc_train.x, train_y, enc_test.x, k)), {}});
    results.push_back({"Mean", eval::rmse(actual, eval::mean_baseline(train_y).predict(test.size())), {}});
    return results;
}

void SweepTable::write_csv(std::ostream& out) const {
    out << "method";
    for (double r : ratios) out << ',' << std::llround(r * 100.0) << '%';
    out << '\n';
    for (std::size_t m = 0; m < methods.size(); ++m) {
        out << csv::escape(methods[m]);
        for (double v : rmse[m]) out << ',' << fixed(v);
        out << '\n';
    }
}

SweepTable run_sweep(std::span<const data::TransactionRecord> records, std::span<const data::StationInfo> stations,
                     const RunConfig& cfg) {
    SweepTable table;
    table.ratios = cfg.sweep_ratios;
    for (std::size_t i = 0; i < table.ratios.size(); ++i) {
        const auto results = evaluate_methods(records, stations, cfg, table.ratios[i]);
        if (i == 0) {
            for (const auto& r : results) table.methods.push_back(r.method);
            table.rmse.assign(results.size(), std::vector<double>(table.ratios.size(), 0.0));
        }
        for (std::size_t m = 0; m < results.size(); ++m) table.rmse[m][i] = results[m].rmse;
    }
    return table;
}

void write_metrics(std::ostream& out, std::span<const fed::RoundReport> rounds) {
    const std::size_t workers = rounds.empty() ? 0 : rounds.front().worker_losses.size();
    out << "epoch,global_loss";
    for (std::size_t j = 0; j < workers; ++j) out << ",worker_" << j << "_loss";
    out << ",bytes_up,bytes_down,staleness\n";
    for (const auto& r : rounds) {
        out << r.epoch << ',' << csv::format_double(r.global_loss);
        for (double l : r.worker_losses) out << ',' << csv::format_double(l);
        out << ',' << r.bytes_up << ',' << r.bytes_down << ',' << r.staleness << '\n';
    }
}

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Energy-demand learning simulator: centralized, federated and clustered pipelines", "fedl"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    auto* config_opt = app.add_option("--config", config_path, "Flat-key JSON config file");
    auto* seed_opt = app.add_option("--seed", seed, "Seed for every random stream");
    auto* out_opt = app.add_option("--out", out_dir, "Output directory (default ./out)");

    Overrides ov;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with a known generating function");
    std::size_t n_stations = 58, n_records = 5000;
    synth->add_option("--num-stations", n_stations, "Station count (default 58)");
    synth->add_option("--records", n_records, "Transaction count (default 5000)");

    auto* ingest = app.add_subcommand("ingest", "Parse and validate a transactions CSV");
    add_transactions_option(ingest, ov);
    ov.flag(ingest, "--no-transaction-id", "Drop the transaction id feature",
            [](RunConfig& c) { c.include_transaction_id = false; });

    auto* cluster_cmd = app.add_subcommand("cluster", "Size-constrained K-means over station coordinates");
    add_stations_option(cluster_cmd, ov);
    add_cluster_options(cluster_cmd, ov);

    auto* train = app.add_subcommand("train", "Train a model with the selected pipeline");
    add_transactions_option(train, ov);
    add_stations_option(train, ov);
    add_train_options(train, ov);

    auto* evaluate = app.add_subcommand("evaluate", "Test RMSE for a trained model and the baselines");
    // Bound directly so a manifest-driven evaluation can tell whether it was given.
    std::string eval_transactions;
    auto* eval_tx_opt = evaluate->add_option("--transactions", eval_transactions, "Transactions CSV");
    add_stations_option(evaluate, ov);
    add_train_options(evaluate, ov);
    std::string model_dir;
    bool baselines_only = false, sweep = false;
    evaluate->add_option("--model-dir", model_dir, "Directory written by `fedl train`");
    evaluate->add_flag("--baselines-only", baselines_only, "Only the kNN and mean baselines");
    evaluate->add_flag("--sweep", sweep, "All methods across the training ratios; writes table.csv");
    ov.add<std::vector<double>>(evaluate, "--ratios", "Ratios for --sweep (default 0.8 0.7 0.6 0.5)",
                                [](RunConfig& c, const std::vector<double>& v) { c.sweep_ratios = v; });
    ov.add<std::size_t>(evaluate, "--knn-k", "Neighbours for the kNN baseline (default 5)",
                        [](RunConfig& c, std::size_t v) { c.knn_k = v; });

    auto* report = app.add_subcommand("report", "Compare traffic logs; the first is the baseline");
    std::vector<std::string> log_specs;
    report->add_option("logs", log_specs, "Traffic CSVs as path or name=path");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kOk : kUsage;
    }

    try {
        RunConfig cfg;
        if (config_opt->count() > 0) cfg = load_config_file(config_path);
        ov.apply(cfg);
        if (eval_tx_opt->count() > 0) cfg.transactions = eval_transactions;
        if (seed_opt->count() > 0) cfg.seed = seed;
        if (out_opt->count() > 0) cfg.out_dir = out_dir;
        cfg.sync_seed();

        if (synth->parsed()) return cmd_synth(cfg, n_stations, n_records, out);
        if (ingest->parsed()) return cmd_ingest(cfg, out);
        if (cluster_cmd->parsed()) return cmd_cluster(cfg, out);
        if (train->parsed()) return cmd_train(cfg, out, err);
        if (evaluate->parsed()) return cmd_evaluate(cfg, model_dir, baselines_only, sweep, eval_tx_opt, out);
        if (report->parsed()) return cmd_report(cfg, log_specs, out);
        err << "no subcommand given\n";
        return kUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kNumericalError;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
}

}  // namespace fedl::cli
