#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cli/config.hpp"
#include "fedl/data.hpp"
#include "fedl/traffic.hpp"

namespace fedl::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericalError = 3 };

/// argv without the program name.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

data::ParseResult<data::TransactionRecord> load_transactions(const std::filesystem::path& path);
std::vector<data::StationInfo> load_stations(const std::filesystem::path& path);

struct PreparedSplit {
    data::Split split;
    data::EncodingSchema schema;
};

/// Seeded split plus a schema fit on the training side; the vocabulary
/// covers every station in `records`.
PreparedSplit prepare_split(std::span<const data::TransactionRecord> records, const RunConfig& cfg,
                            double ratio);

struct MethodResult {
    std::string method;
    double rmse = 0.0;
    TrafficLog traffic;  // empty for baselines
};

/// EDL, FEDL, EDL + Clustering, FEDL + Clustering, KNR and Mean on one split.
/// Clustered rows are omitted when `stations` is empty.
std::vector<MethodResult> evaluate_methods(std::span<const data::TransactionRecord> records,
                                           std::span<const data::StationInfo> stations,
                                           const RunConfig& cfg, double ratio);

struct SweepTable {
    std::vector<double> ratios;
    std::vector<std::string> methods;
    std::vector<std::vector<double>> rmse;  // [method][ratio]

    /// Layout: method,80%,70%,... one row per method.
    void write_csv(std::ostream& out) const;
};

SweepTable run_sweep(std::span<const data::TransactionRecord> records,
                     std::span<const data::StationInfo> stations, const RunConfig& cfg);

void write_metrics(std::ostream& out, std::span<const fed::RoundReport> rounds);

}  // namespace fedl::cli
