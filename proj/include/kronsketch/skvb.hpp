#pragma once

// SKVB vector files: "SKVB", version 0x01, dtype (0 = f32, 1 = f64),
// u64 little-endian length, little-endian payload. A file may hold several
// records back to back.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace kronsketch {

enum class SkvbDtype : std::uint8_t { f32 = 0, f64 = 1 };

struct SkvbRecord {
  SkvbDtype dtype = SkvbDtype::f64;
  std::vector<double> values;  // f32 payloads are widened exactly
};

void write_skvb(std::ostream& out, std::span<const double> values, SkvbDtype dtype = SkvbDtype::f64);
void write_skvb(std::ostream& out, std::span<const float> values);
void write_skvb_file(const std::filesystem::path& path, std::span<const std::vector<double>> records,
                     SkvbDtype dtype = SkvbDtype::f64);

/// Reads records until end of stream; malformed or truncated input throws
/// InvalidArgument.
std::vector<SkvbRecord> read_skvb(std::istream& in);
std::vector<SkvbRecord> read_skvb_file(const std::filesystem::path& path);

}  // namespace kronsketch
