#include "kronsketch/skvb.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "kronsketch/errors.hpp"

namespace kronsketch {

using detail::require;

namespace {

constexpr std::array<char, 4> kMagic = {'S', 'K', 'V', 'B'};
constexpr std::uint8_t kVersion = 0x01;

template <typename U>
void put_le(std::ostream& out, U v) {
  std::array<char, sizeof(U)> b;
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b.data(), b.size());
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

void header(std::ostream& out, SkvbDtype dtype, std::uint64_t n) {
  out.write(kMagic.data(), kMagic.size());
  out.put(static_cast<char>(kVersion));
  out.put(static_cast<char>(dtype));
  put_le<std::uint64_t>(out, n);
}

bool read_exact(std::istream& in, void* dst, std::size_t n) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount()) == n;
}

}  // namespace

void write_skvb(std::ostream& out, std::span<const double> values, SkvbDtype dtype) {
  header(out, dtype, values.size());
  for (double v : values) {
    if (dtype == SkvbDtype::f64)
      put_le(out, std::bit_cast<std::uint64_t>(v));
    else
      put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  if (!out) throw InvalidArgument("skvb: write failed");
}

void write_skvb(std::ostream& out, std::span<const float> values) {
  header(out, SkvbDtype::f32, values.size());
  for (float v : values) put_le(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw InvalidArgument("skvb: write failed");
}

void write_skvb_file(const std::filesystem::path& path, std::span<const std::vector<double>> records,
                     SkvbDtype dtype) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "skvb: cannot open " + path.string() + " for writing");
  for (const auto& r : records) write_skvb(out, r, dtype);
}

std::vector<SkvbRecord> read_skvb(std::istream& in) {
  std::vector<SkvbRecord> out;
  for (;;) {
    std::array<unsigned char, 14> h;
    in.read(reinterpret_cast<char*>(h.data()), h.size());
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got == 0) break;
    const std::string where = "skvb record " + std::to_string(out.size());
    require(got == h.size(), where + ": truncated header");
    require(std::memcmp(h.data(), kMagic.data(), 4) == 0, where + ": bad magic");
    require(h[4] == kVersion, where + ": unsupported version " + std::to_string(h[4]));
    require(h[5] <= 1, where + ": unknown dtype " + std::to_string(h[5]));
    SkvbRecord rec;
    rec.dtype = static_cast<SkvbDtype>(h[5]);
    const auto n = get_le<std::uint64_t>(h.data() + 6);
    const std::size_t width = rec.dtype == SkvbDtype::f64 ? 8 : 4;
    require(n <= (std::uint64_t{1} << 40) / width, where + ": implausible length " + std::to_string(n));
    std::vector<unsigned char> payload(static_cast<std::size_t>(n) * width);
    require(read_exact(in, payload.data(), payload.size()), where + ": truncated payload");
    rec.values.resize(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < rec.values.size(); ++i) {
      const unsigned char* p = payload.data() + i * width;
      rec.values[i] = rec.dtype == SkvbDtype::f64 ? std::bit_cast<double>(get_le<std::uint64_t>(p))
                                                  : static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<SkvbRecord> read_skvb_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "skvb: cannot open " + path.string());
  return read_skvb(in);
}

}  // namespace kronsketch
