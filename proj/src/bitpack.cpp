#include "flashcomm/bitpack.hpp"

#include <string>

#include "flashcomm/error.hpp"

namespace flashcomm {

namespace {

void check_width(int bitwidth) {
  if (bitwidth < 2 || bitwidth > 8) {
    throw InvalidConfig("bitwidth " + std::to_string(bitwidth) + " outside [2,8]");
  }
}

void check_count(std::size_t count) {
  if (count % 8 != 0) {
    throw InvalidData("code count " + std::to_string(count) + " is not a multiple of 8");
  }
}

// Writes bits [shift, shift+width) of each code into a plane.
void pack_plane(std::span<const std::uint8_t> codes, int shift, int width,
                std::span<std::uint8_t> out) {
  const std::uint8_t mask = static_cast<std::uint8_t>((1u << width) - 1u);
  if (width == 8) {
    for (std::size_t i = 0; i < codes.size(); ++i) out[i] = codes[i];
    return;
  }
  const int per_byte = 8 / width;
  for (std::size_t b = 0; b < out.size(); ++b) {
    std::uint8_t byte = 0;
    for (int j = 0; j < per_byte; ++j) {
      const std::uint8_t slice = (codes[b * per_byte + j] >> shift) & mask;
      byte |= static_cast<std::uint8_t>(slice << (j * width));
    }
    out[b] = byte;
  }
}

void unpack_plane(std::span<const std::uint8_t> in, int shift, int width,
                  std::span<std::uint8_t> codes) {
  const std::uint8_t mask = static_cast<std::uint8_t>((1u << width) - 1u);
  if (width == 8) {
    for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = in[i];
    return;
  }
  const int per_byte = 8 / width;
  for (std::size_t b = 0; b < in.size(); ++b) {
    for (int j = 0; j < per_byte; ++j) {
      const std::uint8_t slice = (in[b] >> (j * width)) & mask;
      codes[b * per_byte + j] |= static_cast<std::uint8_t>(slice << shift);
    }
  }
}

}  // namespace

std::vector<int> bit_split(int bitwidth) {
  check_width(bitwidth);
  std::vector<int> units;
  int rest = bitwidth;
  for (int unit : {8, 4, 2, 1}) {
    if (rest >= unit) {
      units.push_back(unit);
      rest -= unit;
    }
  }
  return units;
}

std::size_t packed_bytes(int bitwidth, std::size_t count) {
  check_width(bitwidth);
  return count * static_cast<std::size_t>(bitwidth) / 8;
}

void pack_codes_into(std::span<const std::uint8_t> codes, int bitwidth,
                     std::span<std::uint8_t> out) {
  check_width(bitwidth);
  check_count(codes.size());
  if (out.size() != packed_bytes(bitwidth, codes.size())) {
    throw InvalidData("pack destination has wrong size");
  }
  const unsigned limit = 1u << bitwidth;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] >= limit) {
      throw EncodeRange("code " + std::to_string(codes[i]) + " at " + std::to_string(i) +
                        " does not fit " + std::to_string(bitwidth) + " bits");
    }
  }
  std::size_t offset = 0;
  int shift = 0;
  for (int unit : bit_split(bitwidth)) {
    const std::size_t len = codes.size() * unit / 8;
    pack_plane(codes, shift, unit, out.subspan(offset, len));
    offset += len;
    shift += unit;
  }
}

std::vector<Plane> pack_codes(std::span<const std::uint8_t> codes, int bitwidth) {
  std::vector<std::uint8_t> flat(packed_bytes(bitwidth, codes.size()));
  pack_codes_into(codes, bitwidth, flat);
  std::vector<Plane> planes;
  std::size_t offset = 0;
  for (int unit : bit_split(bitwidth)) {
    const std::size_t len = codes.size() * unit / 8;
    planes.emplace_back(flat.begin() + offset, flat.begin() + offset + len);
    offset += len;
  }
  return planes;
}

void unpack_codes_from(std::span<const std::uint8_t> in, int bitwidth,
                       std::span<std::uint8_t> codes) {
  check_width(bitwidth);
  check_count(codes.size());
  if (in.size() != packed_bytes(bitwidth, codes.size())) {
    throw DecodeFormat("packed buffer holds " + std::to_string(in.size()) + " bytes, expected " +
                       std::to_string(packed_bytes(bitwidth, codes.size())));
  }
  for (auto& c : codes) c = 0;
  std::size_t offset = 0;
  int shift = 0;
  for (int unit : bit_split(bitwidth)) {
    const std::size_t len = codes.size() * unit / 8;
    unpack_plane(in.subspan(offset, len), shift, unit, codes);
    offset += len;
    shift += unit;
  }
}

std::vector<std::uint8_t> unpack_codes(std::span<const Plane> planes, int bitwidth,
                                       std::size_t count) {
  check_count(count);
  const auto units = bit_split(bitwidth);
  if (planes.size() != units.size()) {
    throw DecodeFormat("expected " + std::to_string(units.size()) + " planes, got " +
                       std::to_string(planes.size()));
  }
  std::vector<std::uint8_t> codes(count, 0);
  int shift = 0;
  for (std::size_t u = 0; u < units.size(); ++u) {
    if (planes[u].size() != count * units[u] / 8) {
      throw DecodeFormat("plane " + std::to_string(u) + " holds " +
                         std::to_string(planes[u].size()) + " bytes, expected " +
                         std::to_string(count * units[u] / 8));
    }
    unpack_plane(planes[u], shift, units[u], codes);
    shift += units[u];
  }
  return codes;
}

}  // namespace flashcomm
