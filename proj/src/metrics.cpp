#include "fedl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>

#include "fedl/error.hpp"

namespace fedl::eval {

double rmse(std::span<const double> actual, std::span<const double> predicted) {
    if (actual.size() != predicted.size()) {
        throw ShapeError("rmse: " + std::to_string(actual.size()) + " actual vs " +
                         std::to_string(predicted.size()) + " predicted values");
    }
    if (actual.empty()) throw DataError("rmse of an empty sample is undefined");
    double ss = 0.0;
    for (std::size_t s = 0; s < actual.size(); ++s) {
        const double d = actual[s] - predicted[s];
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(actual.size()));
}

std::vector<double> knn_baseline(const Eigen::MatrixXd& train_x, std::span<const double> train_labels,
                                 const Eigen::MatrixXd& test_x, std::size_t k) {
    const auto n_train = static_cast<std::size_t>(train_x.rows());
    if (n_train == 0) throw DataError("knn_baseline: empty training set");
    if (train_labels.size() != n_train) throw ShapeError("knn_baseline: label count mismatch");
    if (test_x.cols() != train_x.cols()) throw ShapeError("knn_baseline: feature width mismatch");
    if (k < 1 || k > n_train) {
        throw DataError("knn_baseline: k=" + std::to_string(k) + " outside [1, " +
                        std::to_string(n_train) + "]");
    }
    // Samples as contiguous columns; every distance is evaluated with the
    // same operation order, so identical rows tie exactly.
    const Eigen::MatrixXd train_t = train_x.transpose();
    std::vector<std::pair<double, std::size_t>> dist(n_train);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(test_x.rows()));
    for (Eigen::Index q = 0; q < test_x.rows(); ++q) {
        const Eigen::VectorXd query = test_x.row(q).transpose();
        const Eigen::RowVectorXd d2 = (train_t.colwise() - query).colwise().squaredNorm();
        for (std::size_t i = 0; i < n_train; ++i) dist[i] = {d2(static_cast<Eigen::Index>(i)), i};
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += train_labels[dist[j].second];
        out.push_back(sum / static_cast<double>(k));
    }
    return out;
}

MeanPredictor mean_baseline(std::span<const double> train_labels) {
    if (train_labels.empty()) throw DataError("mean_baseline: no training labels");
    const double sum = std::accumulate(train_labels.begin(), train_labels.end(), 0.0);
    return {sum / static_cast<double>(train_labels.size())};
}

double relative_improvement(double baseline_rmse, double method_rmse) {
    if (!(baseline_rmse > 0.0)) throw NumericalError("baseline RMSE must be positive");
    return (baseline_rmse - method_rmse) / baseline_rmse;
}

OverheadReport overhead_report(std::span<const std::pair<std::string, TrafficLog>> logs) {
    if (logs.size() < 2) {
        throw DataError("overhead report needs at least two pipelines, got " + std::to_string(logs.size()));
    }
    OverheadReport report;
    const std::uint64_t baseline = logs.front().second.total();
    if (baseline == 0) throw DataError("baseline pipeline '" + logs.front().first + "' moved no bytes");
    for (const auto& [name, log] : logs) {
        OverheadRow row;
        row.pipeline = name;
        row.bytes_up = log.total(Direction::Up);
        row.bytes_down = log.total(Direction::Down);
        row.total = log.total();
        row.savings = 1.0 - static_cast<double>(row.total) / static_cast<double>(baseline);
        report.rows.push_back(row);
    }
    return report;
}

nlohmann::json OverheadReport::to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows) {
        rows_json.push_back({{"pipeline", r.pipeline},
                             {"bytes_up", r.bytes_up},
                             {"bytes_down", r.bytes_down},
                             {"total_bytes", r.total},
                             {"savings_vs_baseline", r.savings}});
    }
    return {{"baseline", rows.empty() ? "" : rows.front().pipeline}, {"pipelines", rows_json}};
}

void OverheadReport::print(std::ostream& out) const {
    out << std::left << std::setw(24) << "pipeline" << std::right << std::setw(16) << "bytes_up"
        << std::setw(16) << "bytes_down" << std::setw(16) << "total" << std::setw(12) << "savings"
        << '\n';
    for (const auto& r : rows) {
        out << std::left << std::setw(24) << r.pipeline << std::right << std::setw(16) << r.bytes_up
            << std::setw(16) << r.bytes_down << std::setw(16) << r.total << std::setw(11)
            << std::fixed << std::setprecision(2) << r.savings * 100.0 << "%\n";
        out.unsetf(std::ios::fixed);
    }
}

}  // namespace fedl::eval
