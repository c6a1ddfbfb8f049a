#include "smoothout/checkpoint.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

namespace smoothout {

namespace {

constexpr std::array<char, 4> kMagic{'S', 'M', 'O', '1'};

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  require(in.gcount() == static_cast<std::streamsize>(bytes.size()), ErrorKind::truncated_file,
          "checkpoint ends early");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ParamVector& params) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.segments().size()));
  for (const Segment& seg : params.segments()) {
    put_le<std::uint32_t>(out, seg.layer_id);
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(seg.role));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(seg.shape.size()));
    for (auto d : seg.shape) put_le<std::uint32_t>(out, d);
  }
  for (Index i = 0; i < params.size(); ++i) {
    put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(params.values[i]));
  }
  require(static_cast<bool>(out), ErrorKind::io, "failed writing checkpoint");
}

ParamVector read_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  require(in.gcount() == 4, ErrorKind::truncated_file, "checkpoint ends early");
  require(magic == kMagic, ErrorKind::bad_magic, "not an SMO1 checkpoint");
  const auto count = get_le<std::uint32_t>(in);
  std::vector<Segment> segments(count);
  for (Segment& seg : segments) {
    seg.layer_id = get_le<std::uint32_t>(in);
    const auto role = get_le<std::uint8_t>(in);
    require(role <= 1, ErrorKind::bad_magic, "unknown parameter role");
    seg.role = static_cast<ParamRole>(role);
    const auto rank = get_le<std::uint8_t>(in);
    seg.shape.resize(rank);
    for (auto& d : seg.shape) d = get_le<std::uint32_t>(in);
  }
  ParamVector params(std::move(segments));
  for (Index i = 0; i < params.size(); ++i) {
    params.values[i] = std::bit_cast<double>(get_le<std::uint64_t>(in));
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ParamVector& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::io, "cannot open " + path.string());
  write_checkpoint(out, params);
}

ParamVector load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace smoothout
