#pragma once

// Charging-session ingestion: parsing, categorical encoding, label
// standardization, train/test split, worker partitioning and a synthetic
// corpus generator with a known generating function.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fedl/label_scale.hpp"

namespace fedl::data {

inline constexpr std::size_t kDaysPerWeek = 7;
inline constexpr std::size_t kHoursPerDay = 24;

struct TransactionRecord {
    std::string station_id;
    std::int64_t transaction_id = 0;
    int day_of_week = 1;  // 1 = Monday ... 7 = Sunday
    int hour_of_day = 0;  // 0..23
    double energy_kwh = 0.0;

    friend bool operator==(const TransactionRecord&, const TransactionRecord&) = default;
};

struct StationInfo {
    std::string station_id;
    double latitude = 0.0;
    double longitude = 0.0;

    friend bool operator==(const StationInfo&, const StationInfo&) = default;
};

struct Reject {
    std::size_t line_number = 0;  // 1-based, header is line 1
    std::string reason;
};

template <typename Row>
struct ParseResult {
    std::vector<Row> rows;
    std::vector<Reject> rejects;
};

/// Header: station_id,transaction_id,date,time,energy_kwh with ISO dates and
/// HH:MM times. Bad rows become rejects; a missing header throws DataError.
ParseResult<TransactionRecord> parse_transactions(std::istream& in);

/// Header: station_id,latitude,longitude.
ParseResult<StationInfo> parse_stations(std::istream& in);

/// ISO date -> 1 (Monday) .. 7 (Sunday), or nullopt when invalid.
std::optional<int> iso_weekday(std::string_view date);

void write_rejects(std::ostream& out, std::span<const Reject> rejects);
void write_transactions(std::ostream& out, std::span<const TransactionRecord> records,
                        std::span<const std::string> dates, std::span<const std::string> times);
void write_stations(std::ostream& out, std::span<const StationInfo> stations);

struct EncodingSchema {
    std::vector<std::string> stations;  // sorted, unique
    bool include_transaction_id = true;
    double transaction_min = 0.0;
    double transaction_max = 0.0;
    LabelScale label;

    /// |stations| + 7 + 24 (+ 1 with the transaction id column).
    std::size_t width() const noexcept;
    std::optional<std::size_t> station_index(std::string_view id) const;

    nlohmann::json to_json() const;
    static EncodingSchema from_json(const nlohmann::json& j);
};

/// Label statistics and the transaction-id range come from `train` only.
/// The station vocabulary is the union of ids in `train` and
/// `extra_stations`, so held-out stations remain encodable.
EncodingSchema build_schema(std::span<const TransactionRecord> train, bool include_transaction_id,
                            std::span<const std::string> extra_stations = {});

struct EncodedData {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;  // standardized labels
    std::vector<std::uint64_t> sample_ids;

    std::size_t rows() const noexcept { return static_cast<std::size_t>(x.rows()); }
};

/// One-hot station | one-hot day | one-hot hour | [scaled transaction id].
/// Sample ids default to 0..n-1 when `sample_ids` is empty.
EncodedData encode_features(std::span<const TransactionRecord> records, const EncodingSchema& schema,
                            std::span<const std::uint64_t> sample_ids = {});

std::vector<double> labels_kwh(std::span<const TransactionRecord> records);

struct Split {
    std::vector<TransactionRecord> train;
    std::vector<TransactionRecord> test;
};

/// Seeded shuffle then prefix split with |train| = round(ratio * N).
Split split_train_test(std::span<const TransactionRecord> records, double ratio, std::uint64_t seed);

enum class PartitionStrategy { ByStation, RoundRobin };

std::string to_string(PartitionStrategy s);
PartitionStrategy partition_strategy_from_string(std::string_view s);

struct WorkerPartition {
    std::size_t worker_id = 0;
    std::vector<std::size_t> record_indices;  // ascending, into the training set
    std::vector<std::string> stations;        // sorted: beta_j^i = 1 for these
};

/// ByStation: sorted stations are dealt round-robin to workers and each
/// worker owns every record of its stations. RoundRobin: record r goes to
/// worker r mod J. Both keep records in their original relative order.
std::vector<WorkerPartition> partition_workers(std::span<const TransactionRecord> train,
                                               std::size_t workers, PartitionStrategy strategy);

std::vector<TransactionRecord> select(std::span<const TransactionRecord> records,
                                      std::span<const std::size_t> indices);

/// Known generating function of a synthetic corpus:
///   g(s, d, h) = base[s] + day[d] + amplitude[s] * hour[h]
/// and label = max(0, g + N(0, noise_sd)).
struct SynthModel {
    std::vector<std::string> station_ids;
    std::vector<double> base;
    std::vector<double> amplitude;
    std::vector<double> day_effect;   // indexed by day_of_week - 1
    std::vector<double> hour_effect;  // indexed by hour_of_day
    double noise_sd = 1.0;

    double expected(std::size_t station, int day_of_week, int hour_of_day) const;
    nlohmann::json to_json() const;
};

struct SynthCorpus {
    std::vector<TransactionRecord> records;
    std::vector<std::string> dates;  // ISO date per record
    std::vector<std::string> times;  // HH:MM per record
    std::vector<StationInfo> stations;
    SynthModel model;
};

SynthCorpus synth_generate(std::size_t n_stations, std::size_t n_records, std::uint64_t seed);

}  // namespace fedl::data
