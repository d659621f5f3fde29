#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fedl/traffic.hpp"

namespace fedl::eval {

/// Root mean squared error in the units of the inputs (kWh).
double rmse(std::span<const double> actual, std::span<const double> predicted);

/// Mean label of the k nearest training rows (Euclidean in encoded space).
/// Distance ties go to the lower training-row index.
std::vector<double> knn_baseline(const Eigen::MatrixXd& train_x, std::span<const double> train_labels,
                                 const Eigen::MatrixXd& test_x, std::size_t k);

struct MeanPredictor {
    double value = 0.0;
    std::vector<double> predict(std::size_t n) const { return std::vector<double>(n, value); }
};

MeanPredictor mean_baseline(std::span<const double> train_labels);

/// (baseline - method) / baseline
double relative_improvement(double baseline_rmse, double method_rmse);

struct OverheadRow {
    std::string pipeline;
    std::uint64_t bytes_up = 0;
    std::uint64_t bytes_down = 0;
    std::uint64_t total = 0;
    double savings = 0.0;  // 1 - total / baseline total
};

struct OverheadReport {
    std::vector<OverheadRow> rows;  // rows[0] is the baseline

    nlohmann::json to_json() const;
    void print(std::ostream& out) const;
};

/// The first log is the baseline that every other pipeline is compared with.
OverheadReport overhead_report(std::span<const std::pair<std::string, TrafficLog>> logs);

}  // namespace fedl::eval
