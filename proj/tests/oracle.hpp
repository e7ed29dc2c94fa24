#pragma once

// Reference implementations used as test oracles. They are written against
// the documented formats and formulas, independent of the library code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <vector>

namespace oracle {

// Bit layout: unit k of a code of width b holds bits [off_k, off_k + w_k)
// where off_k is the sum of the earlier unit widths.
inline std::vector<int> units(int bitwidth) {
  std::vector<int> u;
  int left = bitwidth;
  if (left == 8) return {8};
  for (int w : {4, 2, 1}) {
    if (left >= w) {
      u.push_back(w);
      left -= w;
    }
  }
  return u;
}

// Reads codes back one bit at a time from planes laid out little-bit-first.
inline std::vector<unsigned> extract_codes(const std::vector<std::vector<std::uint8_t>>& planes,
                                           int bitwidth, std::size_t count) {
  const auto u = units(bitwidth);
  std::vector<unsigned> codes(count, 0);
  int offset = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    for (std::size_t i = 0; i < count; ++i) {
      for (int b = 0; b < u[k]; ++b) {
        const std::size_t pos = i * static_cast<std::size_t>(u[k]) + static_cast<std::size_t>(b);
        const unsigned bit = (planes[k][pos / 8] >> (pos % 8)) & 1u;
        codes[i] |= bit << (offset + b);
      }
    }
    offset += u[k];
  }
  return codes;
}

// Builds planes bit by bit.
inline std::vector<std::vector<std::uint8_t>> build_planes(const std::vector<unsigned>& codes,
                                                           int bitwidth) {
  const auto u = units(bitwidth);
  std::vector<std::vector<std::uint8_t>> planes;
  int offset = 0;
  for (int w : u) {
    std::vector<std::uint8_t> p(codes.size() * static_cast<std::size_t>(w) / 8, 0);
    for (std::size_t i = 0; i < codes.size(); ++i) {
      for (int b = 0; b < w; ++b) {
        const std::size_t pos = i * static_cast<std::size_t>(w) + static_cast<std::size_t>(b);
        if ((codes[i] >> (offset + b)) & 1u) p[pos / 8] |= static_cast<std::uint8_t>(1u << (pos % 8));
      }
    }
    planes.push_back(std::move(p));
    offset += w;
  }
  return planes;
}

inline float bits_to_float(std::uint32_t u) {
  float f;
  std::memcpy(&f, &u, sizeof f);
  return f;
}

inline std::uint32_t float_to_bits(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, sizeof u);
  return u;
}

// Nearest BF16 by comparing the two truncation neighbours in double
// precision; ties go to the even mantissa.
inline float bf16_nearest(float f) {
  const std::uint32_t u = float_to_bits(f);
  const std::uint32_t lo = u & 0xffff0000u;
  if (lo == u) return f;
  const std::uint32_t hi = lo + 0x10000u;
  const double dlo = std::fabs(static_cast<double>(bits_to_float(lo)) - f);
  const double dhi = std::fabs(static_cast<double>(bits_to_float(hi)) - f);
  if (dlo < dhi) return bits_to_float(lo);
  if (dhi < dlo) return bits_to_float(hi);
  return ((lo >> 16) & 1u) == 0 ? bits_to_float(lo) : bits_to_float(hi);
}

// Best achievable reconstruction error for v on the grid {c*scale + zero},
// found by trying every code.
inline double best_grid_error(double v, double scale, double zero, int bitwidth) {
  double best = std::numeric_limits<double>::infinity();
  for (int c = 0; c < (1 << bitwidth); ++c) {
    best = std::min(best, std::fabs(c * scale + zero - v));
  }
  return best;
}

// Codec error bound for one RTN round over a group with the given range and
// absolute maximum: half a step, BF16 slack on scale and zero, and the final
// float32 rounding of the decoded value.
inline double rtn_bound(double range, double maxabs, int bitwidth) {
  const double scale = range / ((1 << bitwidth) - 1);
  return scale / 2 + scale * 0x1p-8 + maxabs * 0x1p-8 + (maxabs + range) * 0x1p-24;
}

}  // namespace oracle
