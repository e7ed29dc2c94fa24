#pragma once

#include <bit>
#include <cstdint>

namespace flashcomm {

// 16-bit brain float: the upper half of an IEEE-754 binary32.
struct Bf16 {
  std::uint16_t bits = 0;

  // Round-to-nearest-even. NaNs are canonicalised to a quiet NaN with the
  // input's sign.
  static constexpr Bf16 from_float(float f) noexcept {
    const std::uint32_t u = std::bit_cast<std::uint32_t>(f);
    if ((u & 0x7fffffffu) > 0x7f800000u) {
      return Bf16{static_cast<std::uint16_t>((u >> 16) | 0x0040u)};
    }
    const std::uint32_t lsb = (u >> 16) & 1u;
    return Bf16{static_cast<std::uint16_t>((u + 0x7fffu + lsb) >> 16)};
  }

  // Smallest bf16 value >= f (for finite f). Used where a stored quantity
  // must not shrink, e.g. a quantization step that has to cover a range.
  static constexpr Bf16 from_float_ceil(float f) noexcept {
    const std::uint32_t u = std::bit_cast<std::uint32_t>(f);
    Bf16 t{static_cast<std::uint16_t>(u >> 16)};
    if ((u & 0xffffu) == 0 || (u & 0x7fffffffu) >= 0x7f800000u) return t;
    if ((u & 0x80000000u) == 0) ++t.bits;  // truncation moved a positive value down
    return t;
  }

  static constexpr Bf16 from_bits(std::uint16_t b) noexcept { return Bf16{b}; }

  constexpr float to_float() const noexcept {
    return std::bit_cast<float>(static_cast<std::uint32_t>(bits) << 16);
  }

  friend constexpr bool operator==(Bf16, Bf16) = default;
};

inline constexpr float round_to_bf16(float f) noexcept { return Bf16::from_float(f).to_float(); }

}  // namespace flashcomm
