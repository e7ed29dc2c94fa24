#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace flashcomm {

using Plane = std::vector<std::uint8_t>;

// Decomposition of a code width into hardware-regular units. Unit k holds
// the next `units[k]` bits of every code, starting from bit 0, so for INT5
// the 4-bit plane carries bits 0..3 and the extra plane carries bit 4.
//   8->[8] 7->[4,2,1] 6->[4,2] 5->[4,1] 4->[4] 3->[2,1] 2->[2]
std::vector<int> bit_split(int bitwidth);

// Bytes occupied by `count` codes of `bitwidth` across all planes.
std::size_t packed_bytes(int bitwidth, std::size_t count);

// Packs codes into one plane per unit. Within a byte, element i of the byte
// occupies bits [i*w, (i+1)*w). `codes.size()` must be a multiple of 8.
std::vector<Plane> pack_codes(std::span<const std::uint8_t> codes, int bitwidth);

// Same, writing the planes back to back into `out` (size packed_bytes()).
void pack_codes_into(std::span<const std::uint8_t> codes, int bitwidth,
                     std::span<std::uint8_t> out);

std::vector<std::uint8_t> unpack_codes(std::span<const Plane> planes, int bitwidth,
                                       std::size_t count);

// Inverse of pack_codes_into; `in` must hold exactly packed_bytes() bytes.
void unpack_codes_from(std::span<const std::uint8_t> in, int bitwidth,
                       std::span<std::uint8_t> codes);

}  // namespace flashcomm
