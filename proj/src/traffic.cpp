#include "fedl/traffic.hpp"

#include <charconv>

#include "fedl/csv.hpp"
#include "fedl/error.hpp"

namespace fedl {

namespace {

std::uint64_t parse_u64(const std::string& s, std::size_t line) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw DataError("traffic log line " + std::to_string(line) + ": bad integer '" + s + "'");
    }
    return v;
}

}  // namespace

std::string to_string(Direction d) { return d == Direction::Up ? "up" : "down"; }

std::string to_string(Payload p) {
    switch (p) {
        case Payload::Dataset: return "dataset";
        case Payload::Gradient: return "gradient";
        case Payload::Model: return "model";
    }
    return "unknown";
}

void TrafficLog::append(const TrafficEntry& entry) {
    if (entry.bytes == 0) throw DataError("traffic entries must carry a positive byte count");
    entries_.push_back(entry);
}

void TrafficLog::append(const TrafficLog& other) {
    entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
}

std::uint64_t TrafficLog::total() const noexcept {
    std::uint64_t t = 0;
    for (const auto& e : entries_) t += e.bytes;
    return t;
}

std::uint64_t TrafficLog::total(Direction d) const noexcept {
    std::uint64_t t = 0;
    for (const auto& e : entries_)
        if (e.direction == d) t += e.bytes;
    return t;
}

std::uint64_t TrafficLog::total(Payload p) const noexcept {
    std::uint64_t t = 0;
    for (const auto& e : entries_)
        if (e.payload == p) t += e.bytes;
    return t;
}

std::uint64_t TrafficLog::total_for_epoch(std::uint64_t epoch, Direction d) const noexcept {
    std::uint64_t t = 0;
    for (const auto& e : entries_)
        if (e.epoch == epoch && e.direction == d) t += e.bytes;
    return t;
}

void TrafficLog::write_csv(std::ostream& out) const {
    out << "epoch,direction,payload,bytes\n";
    for (const auto& e : entries_) {
        out << e.epoch << ',' << to_string(e.direction) << ',' << to_string(e.payload) << ','
            << e.bytes << '\n';
    }
}

TrafficLog TrafficLog::read_csv(std::istream& in) {
    std::string line;
    if (!csv::read_line(in, line, true) ||
        csv::split_line(line) != std::vector<std::string>{"epoch", "direction", "payload", "bytes"}) {
        throw DataError("traffic log must start with header epoch,direction,payload,bytes");
    }
    TrafficLog log;
    std::size_t line_no = 1;
    while (csv::read_line(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = csv::split_line(line);
        if (f.size() != 4) throw DataError("traffic log line " + std::to_string(line_no) + ": expected 4 fields");
        TrafficEntry e;
        e.epoch = parse_u64(f[0], line_no);
        if (f[1] == "up") e.direction = Direction::Up;
        else if (f[1] == "down") e.direction = Direction::Down;
        else throw DataError("traffic log line " + std::to_string(line_no) + ": bad direction '" + f[1] + "'");
        if (f[2] == "dataset") e.payload = Payload::Dataset;
        else if (f[2] == "gradient") e.payload = Payload::Gradient;
        else if (f[2] == "model") e.payload = Payload::Model;
        else throw DataError("traffic log line " + std::to_string(line_no) + ": bad payload '" + f[2] + "'");
        e.bytes = parse_u64(f[3], line_no);
        log.append(e);
    }
    return log;
}

}  // namespace fedl
