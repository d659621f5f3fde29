#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fedl/clustering.hpp"
#include "fedl/data.hpp"
#include "fedl/error.hpp"
#include "fedl/fed_sim.hpp"
#include "fedl/metrics.hpp"
#include "fedl/model_io.hpp"
#include "fedl/nn.hpp"
#include "fedl/traffic.hpp"

namespace py = pybind11;
using namespace fedl;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Energy-demand learning simulator core";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DataError>(m, "DataError", base.ptr());
    auto numerical = py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<ShapeError>(m, "ShapeError", numerical.ptr());
    py::register_exception<InfeasibleError>(m, "InfeasibleError", numerical.ptr());
    py::register_exception<StalenessError>(m, "StalenessError", numerical.ptr());

    // data ------------------------------------------------------------------
    py::class_<data::TransactionRecord>(m, "TransactionRecord")
        .def(py::init<>())
        .def(py::init([](std::string s, std::int64_t tx, int day, int hour, double kwh) {
                 return data::TransactionRecord{std::move(s), tx, day, hour, kwh};
             }),
             py::arg("station_id"), py::arg("transaction_id"), py::arg("day_of_week"), py::arg("hour_of_day"),
             py::arg("energy_kwh"))
        .def_readwrite("station_id", &data::TransactionRecord::station_id)
        .def_readwrite("transaction_id", &data::TransactionRecord::transaction_id)
        .def_readwrite("day_of_week", &data::TransactionRecord::day_of_week)
        .def_readwrite("hour_of_day", &data::TransactionRecord::hour_of_day)
        .def_readwrite("energy_kwh", &data::TransactionRecord::energy_kwh)
        .def("__eq__", [](const data::TransactionRecord& a, const data::TransactionRecord& b) { return a == b; })
        .def("__repr__", [](const data::TransactionRecord& r) {
            std::ostringstream s;
            s << "TransactionRecord(" << r.station_id << ", " << r.transaction_id << ", day=" << r.day_of_week
              << ", hour=" << r.hour_of_day << ", " << r.energy_kwh << " kWh)";
            return s.str();
        });

    py::class_<data::StationInfo>(m, "StationInfo")
        .def(py::init([](std::string s, double lat, double lon) { return data::StationInfo{std::move(s), lat, lon}; }),
             py::arg("station_id"), py::arg("latitude"), py::arg("longitude"))
        .def_readwrite("station_id", &data::StationInfo::station_id)
        .def_readwrite("latitude", &data::StationInfo::latitude)
        .def_readwrite("longitude", &data::StationInfo::longitude);

    m.def(
        "parse_transactions",
        [](const std::string& text) {
            std::istringstream in(text);
            auto r = data::parse_transactions(in);
            std::vector<std::pair<std::size_t, std::string>> rejects;
            for (auto& j : r.rejects) rejects.emplace_back(j.line_number, j.reason);
            return py::make_tuple(r.rows, rejects);
        },
        py::arg("csv_text"), "Parse transactions CSV text; returns (records, [(line, reason)]).");
    m.def(
        "parse_stations",
        [](const std::string& text) {
            std::istringstream in(text);
            return data::parse_stations(in).rows;
        },
        py::arg("csv_text"));

    py::class_<data::EncodingSchema>(m, "EncodingSchema")
        .def_readonly("stations", &data::EncodingSchema::stations)
        .def_readonly("include_transaction_id", &data::EncodingSchema::include_transaction_id)
        .def_property_readonly("label_mean", [](const data::EncodingSchema& s) { return s.label.mean; })
        .def_property_readonly("label_stddev", [](const data::EncodingSchema& s) { return s.label.stddev; })
        .def_property_readonly("width", &data::EncodingSchema::width)
        .def("to_json", [](const data::EncodingSchema& s) { return s.to_json().dump(); });

    m.def(
        "build_schema",
        [](const std::vector<data::TransactionRecord>& train, bool include_tx, const std::vector<std::string>& extra) {
            return data::build_schema(train, include_tx, extra);
        },
        py::arg("train"), py::arg("include_transaction_id") = true, py::arg("extra_stations") = std::vector<std::string>{});
    m.def(
        "encode_features",
        [](const std::vector<data::TransactionRecord>& records, const data::EncodingSchema& schema) {
            auto e = data::encode_features(records, schema);
            return py::make_tuple(std::move(e.x), std::move(e.y));
        },
        py::arg("records"), py::arg("schema"), "Returns (X, standardized y).");
    m.def(
        "split_train_test",
        [](const std::vector<data::TransactionRecord>& records, double ratio, std::uint64_t seed) {
            auto s = data::split_train_test(records, ratio, seed);
            return py::make_tuple(std::move(s.train), std::move(s.test));
        },
        py::arg("records"), py::arg("ratio"), py::arg("seed"));
    m.def(
        "synth_generate",
        [](std::size_t n_stations, std::size_t n_records, std::uint64_t seed) {
            auto c = data::synth_generate(n_stations, n_records, seed);
            return py::make_tuple(std::move(c.records), std::move(c.stations), c.model.to_json().dump());
        },
        py::arg("n_stations"), py::arg("n_records"), py::arg("seed"),
        "Returns (records, stations, generating-function JSON).");

    // nn --------------------------------------------------------------------
    py::class_<nn::Network>(m, "Network")
        .def_property_readonly("input_width", &nn::Network::input_width)
        .def_property_readonly("parameter_count", &nn::Network::parameter_count)
        .def_property_readonly("weights", [](const nn::Network& n) { return n.params.weights; })
        .def_property_readonly("biases", [](const nn::Network& n) { return n.params.biases; })
        .def("flatten", [](const nn::Network& n) { return n.params.flatten(); })
        .def("to_bytes", [](const nn::Network& n) { return py::bytes(io::model_bytes(n)); });

    m.def(
        "regression_network",
        [](std::size_t input_width, const std::vector<std::size_t>& hidden, double dropout, std::uint64_t seed) {
            return nn::init_network(nn::regression_architecture(input_width, hidden, dropout), seed);
        },
        py::arg("input_width"), py::arg("hidden") = std::vector<std::size_t>{64, 64}, py::arg("dropout") = 0.15,
        py::arg("seed") = 0);
    m.def(
        "forward",
        [](const nn::Network& n, const Eigen::MatrixXd& x, bool train, std::uint64_t seed) {
            return nn::forward(n, x, train ? nn::Mode::Train : nn::Mode::Infer, seed).output;
        },
        py::arg("network"), py::arg("x"), py::arg("train") = false, py::arg("seed") = 0);
    m.def(
        "loss_and_gradient",
        [](const nn::Network& n, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed) {
            auto fr = nn::forward(n, x, nn::Mode::Train, seed);
            const double loss = nn::sse_loss(fr.output.col(0), y);
            return py::make_tuple(loss, nn::backward(n, fr.tape, y).flatten());
        },
        py::arg("network"), py::arg("x"), py::arg("y"), py::arg("seed") = 0,
        "Sum-of-squares loss and its flattened gradient in Train mode.");
    m.def(
        "load_model", [](py::bytes b) {
            std::istringstream in{static_cast<std::string>(b)};
            return io::load_model(in);
        },
        py::arg("data"));

    // clustering ------------------------------------------------------------
    py::class_<cluster::ClusterAssignment>(m, "ClusterAssignment")
        .def_readonly("station_ids", &cluster::ClusterAssignment::station_ids)
        .def_readonly("labels", &cluster::ClusterAssignment::labels)
        .def_readonly("centroids", &cluster::ClusterAssignment::centroids)
        .def_readonly("iterations_used", &cluster::ClusterAssignment::iterations_used)
        .def_readonly("objective", &cluster::ClusterAssignment::objective)
        .def_readonly("converged", &cluster::ClusterAssignment::converged)
        .def("sizes", &cluster::ClusterAssignment::sizes);

    auto make_cluster_config = [](std::size_t k, std::vector<std::size_t> low, std::vector<std::size_t> high,
                                  std::size_t max_iterations, std::uint64_t seed) {
        cluster::ClusterConfig c;
        c.k = k;
        c.theta_low = std::move(low);
        c.theta_high = std::move(high);
        c.max_iterations = max_iterations;
        c.seed = seed;
        return c;
    };
    m.def(
        "constrained_kmeans",
        [make_cluster_config](const std::vector<data::StationInfo>& stations, std::size_t k,
                              std::vector<std::size_t> low, std::vector<std::size_t> high,
                              std::size_t max_iterations, std::uint64_t seed) {
            return cluster::constrained_kmeans(stations,
                                               make_cluster_config(k, std::move(low), std::move(high), max_iterations, seed));
        },
        py::arg("stations"), py::arg("k") = 2, py::arg("theta_low") = std::vector<std::size_t>{},
        py::arg("theta_high") = std::vector<std::size_t>{}, py::arg("max_iterations") = 100, py::arg("seed") = 0,
        "Empty windows mean balanced clusters.");
    m.def(
        "assign_clusters",
        [make_cluster_config](const std::vector<cluster::Point>& points, const std::vector<cluster::Point>& centroids,
                              std::vector<std::size_t> low, std::vector<std::size_t> high) {
            return cluster::assign_clusters(points, centroids,
                                            make_cluster_config(centroids.size(), std::move(low), std::move(high), 100, 0));
        },
        py::arg("points"), py::arg("centroids"), py::arg("theta_low") = std::vector<std::size_t>{},
        py::arg("theta_high") = std::vector<std::size_t>{});

    // training --------------------------------------------------------------
    py::class_<fed::RoundReport>(m, "RoundReport")
        .def_readonly("epoch", &fed::RoundReport::epoch)
        .def_readonly("global_loss", &fed::RoundReport::global_loss)
        .def_readonly("worker_losses", &fed::RoundReport::worker_losses)
        .def_readonly("staleness", &fed::RoundReport::staleness)
        .def_readonly("bytes_up", &fed::RoundReport::bytes_up)
        .def_readonly("bytes_down", &fed::RoundReport::bytes_down);

    py::class_<fed::TrainResult>(m, "TrainResult")
        .def_readonly("model", &fed::TrainResult::model)
        .def_readonly("rounds", &fed::TrainResult::rounds)
        .def_readonly("converged", &fed::TrainResult::converged)
        .def_property_readonly("traffic_bytes", [](const fed::TrainResult& r) { return r.traffic.total(); });

    m.def(
        "train",
        [](const std::vector<data::TransactionRecord>& train, const data::EncodingSchema& schema,
           const std::string& mode, std::size_t workers, std::size_t epochs, double tolerance, std::size_t patience,
           const std::vector<std::size_t>& hidden, double dropout, double learning_rate, const std::string& partition,
           std::size_t batch_size, std::uint64_t seed) {
            fed::TrainConfig c;
            c.mode = fed::mode_from_string(mode);
            c.workers = workers;
            c.epochs = epochs;
            c.tolerance = tolerance;
            c.patience = patience;
            c.hidden = hidden;
            c.dropout = dropout;
            c.adam.step_size = learning_rate;
            c.partition = data::partition_strategy_from_string(partition);
            c.batch_size = batch_size;
            c.seed = seed;
            py::gil_scoped_release release;
            return fed::train_pipeline(train, schema, c);
        },
        py::arg("train"), py::arg("schema"), py::arg("mode") = "central", py::arg("workers") = 4,
        py::arg("epochs") = 200, py::arg("tolerance") = 1e-6, py::arg("patience") = 5,
        py::arg("hidden") = std::vector<std::size_t>{64, 64}, py::arg("dropout") = 0.15,
        py::arg("learning_rate") = 0.01, py::arg("partition") = "by_station", py::arg("batch_size") = 0,
        py::arg("seed") = 0);
    m.def(
        "predict",
        [](const nn::Network& n, const std::vector<data::TransactionRecord>& records, const data::EncodingSchema& schema) {
            const auto enc = data::encode_features(records, schema);
            return nn::predict(n, enc.x, schema.label);
        },
        py::arg("network"), py::arg("records"), py::arg("schema"), "Predictions in kWh.");

    // metrics ---------------------------------------------------------------
    m.def(
        "rmse", [](const std::vector<double>& a, const std::vector<double>& p) { return eval::rmse(a, p); },
        py::arg("actual"), py::arg("predicted"));
    m.def(
        "knn_baseline",
        [](const Eigen::MatrixXd& train_x, const std::vector<double>& labels, const Eigen::MatrixXd& test_x,
           std::size_t k) { return eval::knn_baseline(train_x, labels, test_x, k); },
        py::arg("train_x"), py::arg("train_labels"), py::arg("test_x"), py::arg("k") = 5);
    m.def("message_bytes", &message_bytes, py::arg("parameter_count"));
    m.def("record_bytes", &record_bytes, py::arg("encoded_width"));
}
