#include "fedl/data.hpp"

#include <algorithm>
#include <chrono>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include "fedl/csv.hpp"
#include "fedl/error.hpp"
#include "fedl/rng.hpp"

namespace fedl::data {

namespace {

template <typename T>
std::optional<T> parse_number(std::string_view s) {
    T value{};
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

// "HH:MM" or "HH:MM:SS" -> hour.
std::optional<int> parse_hour(std::string_view t) {
    const auto colon = t.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    const auto hour = parse_number<int>(t.substr(0, colon));
    std::string_view rest = t.substr(colon + 1);
    const auto colon2 = rest.find(':');
    const auto minute = parse_number<int>(rest.substr(0, colon2));
    if (!hour || !minute || *hour < 0 || *hour > 23 || *minute < 0 || *minute > 59) {
        return std::nullopt;
    }
    if (colon2 != std::string_view::npos) {
        const auto second = parse_number<int>(rest.substr(colon2 + 1));
        if (!second || *second < 0 || *second > 59) return std::nullopt;
    }
    return hour;
}

void require_header(std::istream& in, const std::vector<std::string>& expected) {
    std::string line;
    if (!csv::read_line(in, line, true)) {
        throw DataError("missing header row; expected " + expected.front() + ",...");
    }
    const auto fields = csv::split_line(line);
    if (fields != expected) {
        std::string want;
        for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
        throw DataError("bad header '" + line + "'; expected '" + want + "'");
    }
}

bool blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(),
                       [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

std::string iso_date(std::chrono::sys_days day) {
    const std::chrono::year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

}  // namespace

std::optional<int> iso_weekday(std::string_view date) {
    if (date.size() != 10 || date[4] != '-' || date[7] != '-') return std::nullopt;
    const auto y = parse_number<int>(date.substr(0, 4));
    const auto m = parse_number<unsigned>(date.substr(5, 2));
    const auto d = parse_number<unsigned>(date.substr(8, 2));
    if (!y || !m || !d) return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{*m},
                                          std::chrono::day{*d}};
    if (!ymd.ok()) return std::nullopt;
    return static_cast<int>(std::chrono::weekday{std::chrono::sys_days{ymd}}.iso_encoding());
}

ParseResult<TransactionRecord> parse_transactions(std::istream& in) {
    require_header(in, {"station_id", "transaction_id", "date", "time", "energy_kwh"});
    ParseResult<TransactionRecord> out;
    std::string line;
    std::size_t line_no = 1;
    while (csv::read_line(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        const auto f = csv::split_line(line);
        auto reject = [&](std::string reason) { out.rejects.push_back({line_no, std::move(reason)}); };
        if (f.size() != 5) {
            reject("expected 5 fields, got " + std::to_string(f.size()));
            continue;
        }
        if (f[0].empty()) {
            reject("empty station_id");
            continue;
        }
        const auto tx = parse_number<std::int64_t>(f[1]);
        if (!tx) {
            reject("unparsable transaction_id '" + f[1] + "'");
            continue;
        }
        const auto day = iso_weekday(f[2]);
        if (!day) {
            reject("invalid date '" + f[2] + "'");
            continue;
        }
        const auto hour = parse_hour(f[3]);
        if (!hour) {
            reject("invalid time '" + f[3] + "'");
            continue;
        }
        const auto energy = parse_number<double>(f[4]);
        if (!energy || !std::isfinite(*energy)) {
            reject("unparsable energy_kwh '" + f[4] + "'");
            continue;
        }
        if (*energy < 0.0) {
            reject("negative energy_kwh " + f[4]);
            continue;
        }
        out.rows.push_back({f[0], *tx, *day, *hour, *energy});
    }
    return out;
}

ParseResult<StationInfo> parse_stations(std::istream& in) {
    require_header(in, {"station_id", "latitude", "longitude"});
    ParseResult<StationInfo> out;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 1;
    while (csv::read_line(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        const auto f = csv::split_line(line);
        auto reject = [&](std::string reason) { out.rejects.push_back({line_no, std::move(reason)}); };
        if (f.size() != 3) {
            reject("expected 3 fields, got " + std::to_string(f.size()));
            continue;
        }
        const auto lat = parse_number<double>(f[1]);
        const auto lon = parse_number<double>(f[2]);
        if (f[0].empty()) {
            reject("empty station_id");
        } else if (!lat || !(std::abs(*lat) <= 90.0)) {
            reject("invalid latitude '" + f[1] + "'");
        } else if (!lon || !(std::abs(*lon) <= 180.0)) {
            reject("invalid longitude '" + f[2] + "'");
        } else if (!seen.insert(f[0]).second) {
            reject("duplicate station_id " + f[0]);
        } else {
            out.rows.push_back({f[0], *lat, *lon});
        }
    }
    return out;
}

void write_rejects(std::ostream& out, std::span<const Reject> rejects) {
    out << "line_number,reason\n";
    for (const auto& r : rejects) out << r.line_number << ',' << csv::escape(r.reason) << '\n';
}

void write_transactions(std::ostream& out, std::span<const TransactionRecord> records,
                        std::span<const std::string> dates, std::span<const std::string> times) {
    if (dates.size() != records.size() || times.size() != records.size()) {
        throw DataError("write_transactions: dates/times must accompany every record");
    }
    out << "station_id,transaction_id,date,time,energy_kwh\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        out << csv::escape(r.station_id) << ',' << r.transaction_id << ',' << dates[i] << ','
            << times[i] << ',' << csv::format_double(r.energy_kwh) << '\n';
    }
}

void write_stations(std::ostream& out, std::span<const StationInfo> stations) {
    out << "station_id,latitude,longitude\n";
    for (const auto& s : stations) {
        out << csv::escape(s.station_id) << ',' << csv::format_double(s.latitude) << ','
            << csv::format_double(s.longitude) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Schema and encoding

std::size_t EncodingSchema::width() const noexcept {
    return stations.size() + kDaysPerWeek + kHoursPerDay + (include_transaction_id ? 1 : 0);
}

std::optional<std::size_t> EncodingSchema::station_index(std::string_view id) const {
    const auto it = std::lower_bound(stations.begin(), stations.end(), id);
    if (it == stations.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - stations.begin());
}

nlohmann::json EncodingSchema::to_json() const {
    return {{"stations", stations},
            {"include_transaction_id", include_transaction_id},
            {"transaction_min", transaction_min},
            {"transaction_max", transaction_max},
            {"label_mean", label.mean},
            {"label_stddev", label.stddev}};
}

EncodingSchema EncodingSchema::from_json(const nlohmann::json& j) {
    EncodingSchema s;
    try {
        s.stations = j.at("stations").get<std::vector<std::string>>();
        s.include_transaction_id = j.at("include_transaction_id").get<bool>();
        s.transaction_min = j.at("transaction_min").get<double>();
        s.transaction_max = j.at("transaction_max").get<double>();
        s.label.mean = j.at("label_mean").get<double>();
        s.label.stddev = j.at("label_stddev").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed encoding schema: ") + e.what());
    }
    if (!std::is_sorted(s.stations.begin(), s.stations.end()) ||
        std::adjacent_find(s.stations.begin(), s.stations.end()) != s.stations.end()) {
        throw DataError("encoding schema vocabulary must be sorted and unique");
    }
    if (!(s.label.stddev > 0.0)) throw DataError("encoding schema has non-positive label stddev");
    return s;
}

EncodingSchema build_schema(std::span<const TransactionRecord> train, bool include_transaction_id,
                            std::span<const std::string> extra_stations) {
    if (train.empty()) throw DataError("cannot build an encoding schema from zero records");
    std::set<std::string> vocab(extra_stations.begin(), extra_stations.end());
    double sum = 0.0;
    auto tx_min = train.front().transaction_id;
    auto tx_max = tx_min;
    for (const auto& r : train) {
        vocab.insert(r.station_id);
        sum += r.energy_kwh;
        tx_min = std::min(tx_min, r.transaction_id);
        tx_max = std::max(tx_max, r.transaction_id);
    }
    const double n = static_cast<double>(train.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& r : train) ss += (r.energy_kwh - mean) * (r.energy_kwh - mean);
    const double stddev = std::sqrt(ss / n);
    if (!(stddev > 0.0)) {
        throw DataError("degenerate data: all training labels equal " + csv::format_double(mean));
    }

    EncodingSchema s;
    s.stations.assign(vocab.begin(), vocab.end());
    s.include_transaction_id = include_transaction_id;
    s.transaction_min = static_cast<double>(tx_min);
    s.transaction_max = static_cast<double>(tx_max);
    s.label = {mean, stddev};
    return s;
}

EncodedData encode_features(std::span<const TransactionRecord> records, const EncodingSchema& schema,
                            std::span<const std::uint64_t> sample_ids) {
    if (!sample_ids.empty() && sample_ids.size() != records.size()) {
        throw ShapeError("encode_features: sample id count does not match record count");
    }
    const auto n = static_cast<Eigen::Index>(records.size());
    const std::size_t n_st = schema.stations.size();
    const double tx_range = schema.transaction_max - schema.transaction_min;

    EncodedData out;
    out.x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(schema.width()));
    out.y.resize(n);
    out.sample_ids.resize(records.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = records[static_cast<std::size_t>(i)];
        const auto st = schema.station_index(r.station_id);
        if (!st) throw DataError("unknown station id '" + r.station_id + "'");
        if (r.day_of_week < 1 || r.day_of_week > 7 || r.hour_of_day < 0 || r.hour_of_day > 23) {
            throw DataError("record outside day/hour range for station " + r.station_id);
        }
        out.x(i, static_cast<Eigen::Index>(*st)) = 1.0;
        out.x(i, static_cast<Eigen::Index>(n_st + static_cast<std::size_t>(r.day_of_week - 1))) = 1.0;
        out.x(i, static_cast<Eigen::Index>(n_st + kDaysPerWeek + static_cast<std::size_t>(r.hour_of_day))) = 1.0;
        if (schema.include_transaction_id) {
            const double t = static_cast<double>(r.transaction_id);
            out.x(i, static_cast<Eigen::Index>(schema.width() - 1)) =
                tx_range > 0.0 ? (t - schema.transaction_min) / tx_range : 0.0;
        }
        out.y(i) = schema.label.standardize(r.energy_kwh);
        out.sample_ids[static_cast<std::size_t>(i)] =
            sample_ids.empty() ? static_cast<std::uint64_t>(i) : sample_ids[static_cast<std::size_t>(i)];
    }
    return out;
}

std::vector<double> labels_kwh(std::span<const TransactionRecord> records) {
    std::vector<double> y;
    y.reserve(records.size());
    for (const auto& r : records) y.push_back(r.energy_kwh);
    return y;
}

// ---------------------------------------------------------------------------
// Split and partition

Split split_train_test(std::span<const TransactionRecord> records, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw DataError("train ratio must lie in (0, 1)");
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(seed, 0x73706c6974));  // "split"
    rng.shuffle(std::span<std::size_t>(order));

    const auto n_train =
        static_cast<std::size_t>(std::llround(ratio * static_cast<double>(records.size())));
    if (n_train == 0 || n_train >= records.size()) {
        throw DataError("degenerate split: ratio " + csv::format_double(ratio) + " of " +
                        std::to_string(records.size()) + " records leaves one side empty");
    }
    Split s;
    s.train.reserve(n_train);
    s.test.reserve(records.size() - n_train);
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_train ? s.train : s.test).push_back(records[order[i]]);
    }
    return s;
}

std::string to_string(PartitionStrategy s) {
    return s == PartitionStrategy::ByStation ? "by_station" : "round_robin";
}

PartitionStrategy partition_strategy_from_string(std::string_view s) {
    if (s == "by_station" || s == "bystation" || s == "station") return PartitionStrategy::ByStation;
    if (s == "round_robin" || s == "roundrobin" || s == "record") return PartitionStrategy::RoundRobin;
    throw DataError("unknown partition strategy '" + std::string(s) + "'");
}

std::vector<WorkerPartition> partition_workers(std::span<const TransactionRecord> train,
                                               std::size_t workers, PartitionStrategy strategy) {
    if (workers == 0) throw DataError("worker count must be at least 1");
    if (workers > train.size()) {
        throw DataError("worker count " + std::to_string(workers) + " exceeds record count " +
                        std::to_string(train.size()));
    }
    std::vector<WorkerPartition> parts(workers);
    for (std::size_t j = 0; j < workers; ++j) parts[j].worker_id = j;

    if (strategy == PartitionStrategy::RoundRobin) {
        for (std::size_t r = 0; r < train.size(); ++r) parts[r % workers].record_indices.push_back(r);
    } else {
        std::set<std::string> ids;
        for (const auto& r : train) ids.insert(r.station_id);
        if (workers > ids.size()) {
            throw DataError("worker count " + std::to_string(workers) + " exceeds station count " +
                            std::to_string(ids.size()) + " for by-station partitioning");
        }
        std::map<std::string, std::size_t> owner;
        std::size_t k = 0;
        for (const auto& id : ids) owner[id] = k++ % workers;
        for (std::size_t r = 0; r < train.size(); ++r) {
            parts[owner.at(train[r].station_id)].record_indices.push_back(r);
        }
    }
    for (auto& p : parts) {
        std::set<std::string> st;
        for (auto r : p.record_indices) st.insert(train[r].station_id);
        p.stations.assign(st.begin(), st.end());
    }
    return parts;
}

std::vector<TransactionRecord> select(std::span<const TransactionRecord> records,
                                      std::span<const std::size_t> indices) {
    std::vector<TransactionRecord> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(records[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

double SynthModel::expected(std::size_t station, int day_of_week, int hour_of_day) const {
    return base.at(station) + day_effect.at(static_cast<std::size_t>(day_of_week - 1)) +
           amplitude.at(station) * hour_effect.at(static_cast<std::size_t>(hour_of_day));
}

nlohmann::json SynthModel::to_json() const {
    return {{"formula", "energy = max(0, base[s] + day[d-1] + amplitude[s] * hour[h] + N(0, noise_sd))"},
            {"station_ids", station_ids},
            {"base", base},
            {"amplitude", amplitude},
            {"day", day_effect},
            {"hour", hour_effect},
            {"noise_sd", noise_sd}};
}

SynthCorpus synth_generate(std::size_t n_stations, std::size_t n_records, std::uint64_t seed) {
    if (n_stations < 1) throw DataError("synthetic corpus needs at least one station");
    if (n_records < 1) throw DataError("synthetic corpus needs at least one record");

    SynthCorpus c;
    Rng rng(mix_seed(seed, 0x73796e7468));  // "synth"

    // Bounding box around a mid-sized city; the eastern half draws more energy
    // and has a sharper daily profile, so location carries signal.
    constexpr double kLatLo = 56.44, kLatHi = 56.50, kLonLo = -3.06, kLonHi = -2.90;
    const std::size_t digits = std::max<std::size_t>(2, std::to_string(n_stations).size());
    SynthModel& m = c.model;
    for (std::size_t s = 0; s < n_stations; ++s) {
        const std::string number = std::to_string(s + 1);
        const std::string buf = "CS" + std::string(digits - number.size(), '0') + number;
        const double lat = rng.uniform(kLatLo, kLatHi);
        const double lon = rng.uniform(kLonLo, kLonHi);
        const double east = (lon - kLonLo) / (kLonHi - kLonLo);
        c.stations.push_back({buf, lat, lon});
        m.station_ids.emplace_back(buf);
        m.base.push_back(5.0 + 9.0 * east + rng.uniform(-1.0, 1.0));
        m.amplitude.push_back(east < 0.5 ? 0.5 : 1.5);
    }
    m.day_effect = {0.8, 0.6, 0.4, 0.2, 0.0, -1.2, -1.6};
    for (std::size_t h = 0; h < kHoursPerDay; ++h) {
        const double phase = 6.283185307179586 * (static_cast<double>(h) - 8.0) / 24.0;
        m.hour_effect.push_back(3.0 * std::sin(phase));
    }
    m.noise_sd = 1.0;

    // Diurnal arrival weights: few sessions overnight.
    std::vector<double> hour_weight(kHoursPerDay);
    for (std::size_t h = 0; h < kHoursPerDay; ++h) hour_weight[h] = (h >= 6 && h <= 22) ? 3.0 : 1.0;
    const double weight_total = std::accumulate(hour_weight.begin(), hour_weight.end(), 0.0);

    struct Draw {
        std::int64_t minute_of_span;
        std::size_t station;
    };
    constexpr std::int64_t kSpanDays = 730;
    std::vector<Draw> draws(n_records);
    for (auto& d : draws) {
        d.station = static_cast<std::size_t>(rng.below(n_stations));
        const auto day = static_cast<std::int64_t>(rng.below(kSpanDays));
        double u = rng.uniform() * weight_total;
        std::size_t hour = 0;
        while (hour + 1 < kHoursPerDay && u >= hour_weight[hour]) u -= hour_weight[hour++];
        const auto minute = static_cast<std::int64_t>(rng.below(60));
        d.minute_of_span = day * 1440 + static_cast<std::int64_t>(hour) * 60 + minute;
    }
    std::stable_sort(draws.begin(), draws.end(),
                     [](const Draw& a, const Draw& b) { return a.minute_of_span < b.minute_of_span; });

    const std::chrono::sys_days origin{std::chrono::year{2017} / 1 / 1};
    c.records.reserve(n_records);
    for (std::size_t i = 0; i < draws.size(); ++i) {
        const auto& d = draws[i];
        const std::chrono::sys_days day = origin + std::chrono::days{d.minute_of_span / 1440};
        const int hour = static_cast<int>((d.minute_of_span % 1440) / 60);
        const int minute = static_cast<int>(d.minute_of_span % 60);
        const int weekday = static_cast<int>(std::chrono::weekday{day}.iso_encoding());
        const double energy =
            std::max(0.0, m.expected(d.station, weekday, hour) + rng.normal(0.0, m.noise_sd));
        c.records.push_back({m.station_ids[d.station], static_cast<std::int64_t>(i + 1), weekday,
                             hour, energy});
        c.dates.push_back(iso_date(day));
        char hm[8];
        std::snprintf(hm, sizeof hm, "%02d:%02d", hour, minute);
        c.times.emplace_back(hm);
    }
    return c;
}

}  // namespace fedl::data
