#pragma once

// Ledger of simulated bytes crossing the station <-> provider link.
//
// Sizing rules (fixed so overhead ratios are reproducible):
//   model or gradient message  = parameter_count * 8 + 64 bytes
//   uploaded transaction record = encoded_width * 8 + 8 bytes

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace fedl {

inline constexpr std::uint64_t kBytesPerValue = 8;
inline constexpr std::uint64_t kMessageHeaderBytes = 64;

constexpr std::uint64_t message_bytes(std::uint64_t parameter_count) noexcept {
    return parameter_count * kBytesPerValue + kMessageHeaderBytes;
}

constexpr std::uint64_t record_bytes(std::uint64_t encoded_width) noexcept {
    return encoded_width * kBytesPerValue + kBytesPerValue;
}

enum class Direction { Up, Down };
enum class Payload { Dataset, Gradient, Model };

std::string to_string(Direction d);
std::string to_string(Payload p);

struct TrafficEntry {
    std::uint64_t epoch = 0;
    Direction direction = Direction::Up;
    Payload payload = Payload::Gradient;
    std::uint64_t bytes = 0;

    friend bool operator==(const TrafficEntry&, const TrafficEntry&) = default;
};

class TrafficLog {
public:
    /// Throws DataError on a zero-byte entry.
    void append(const TrafficEntry& entry);
    void append(const TrafficLog& other);

    std::span<const TrafficEntry> entries() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }

    std::uint64_t total() const noexcept;
    std::uint64_t total(Direction d) const noexcept;
    std::uint64_t total(Payload p) const noexcept;
    std::uint64_t total_for_epoch(std::uint64_t epoch, Direction d) const noexcept;

    /// `epoch,direction,payload,bytes`
    void write_csv(std::ostream& out) const;
    static TrafficLog read_csv(std::istream& in);

private:
    std::vector<TrafficEntry> entries_;
};

}  // namespace fedl
