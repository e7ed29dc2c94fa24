#pragma once

// Per-element error bounds for the quantized AllReduce variants, derived
// from the one-round RTN bound and propagated through the stages. Groups
// are the aligned runs [k*gs, (k+1)*gs) of the full vector, which every
// stage respects as long as the length is a multiple of 2 * N * gs.

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracle.hpp"

namespace oracle {

struct GroupStats {
  double range = 0.0;
  double maxabs = 0.0;
};

template <typename T>
GroupStats stats(const std::vector<T>& v, std::size_t begin, std::size_t end) {
  double lo = static_cast<double>(v[begin]), hi = lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = std::min(lo, static_cast<double>(v[i]));
    hi = std::max(hi, static_cast<double>(v[i]));
  }
  return {hi - lo, std::max(std::fabs(lo), std::fabs(hi))};
}

// Bound of one RTN round applied to a vector known only up to +/- err
// around `exact` over a group.
inline double perturbed_rtn_bound(const GroupStats& exact, double err, int bitwidth) {
  return rtn_bound(exact.range + 2 * err, exact.maxabs + err, bitwidth);
}

constexpr double kF32 = 0x1p-24;
constexpr double kBf16 = 0x1p-8;

// Stage 1 is the quantized all-to-all reduce (one RTN round per term,
// float accumulation over N terms); stage 2 re-quantizes the reduced shard.
// The result is rounded to BF16.
inline std::vector<double> two_step_bound(const std::vector<std::vector<float>>& ranks,
                                          int bitwidth, std::size_t gs) {
  const std::size_t n = ranks.size();
  const std::size_t len = ranks[0].size();
  std::vector<double> sum(len, 0.0);
  for (const auto& r : ranks) {
    for (std::size_t i = 0; i < len; ++i) sum[i] += r[i];
  }
  std::vector<double> bound(len);
  for (std::size_t g0 = 0; g0 < len; g0 += gs) {
    const std::size_t g1 = g0 + gs;
    double e1 = 0.0;
    std::vector<double> term_err(n);
    for (std::size_t r = 0; r < n; ++r) {
      term_err[r] = rtn_bound(stats(ranks[r], g0, g1).range, stats(ranks[r], g0, g1).maxabs,
                              bitwidth);
      e1 += term_err[r];
    }
    double acc = 0.0;
    for (std::size_t i = g0; i < g1; ++i) {
      double mag = 0.0;
      for (std::size_t r = 0; r < n; ++r) mag += std::fabs(ranks[r][i]) + term_err[r];
      acc = std::max(acc, static_cast<double>(n) * kF32 * mag);
    }
    const double stage1 = e1 + acc;
    const double stage2 = perturbed_rtn_bound(stats(sum, g0, g1), stage1, bitwidth);
    for (std::size_t i = g0; i < g1; ++i) {
      bound[i] = stage1 + stage2 + (std::fabs(sum[i]) + stage1 + stage2) * kBf16;
    }
  }
  return bound;
}

// Stage 1 covers the in-group reduce plus the quantized half-shard sent
// across the bridge; stage 2 is the quantized return of the reduced half.
// The all-gather forwards stage 2's bytes, so it adds no error.
inline std::vector<double> hierarchical_bound(const std::vector<std::vector<float>>& ranks,
                                              const std::vector<std::vector<int>>& groups,
                                              int bitwidth, std::size_t gs) {
  const std::size_t len = ranks[0].size();
  std::vector<std::vector<double>> partial(2, std::vector<double>(len, 0.0));
  std::vector<double> sum(len, 0.0);
  for (std::size_t h = 0; h < 2; ++h) {
    for (int r : groups[h]) {
      for (std::size_t i = 0; i < len; ++i) partial[h][i] += ranks[static_cast<std::size_t>(r)][i];
    }
    for (std::size_t i = 0; i < len; ++i) sum[i] += partial[h][i];
  }
  std::vector<double> bound(len);
  for (std::size_t g0 = 0; g0 < len; g0 += gs) {
    const std::size_t g1 = g0 + gs;
    double ea[2] = {0.0, 0.0};
    for (std::size_t h = 0; h < 2; ++h) {
      std::vector<double> term_err;
      for (int r : groups[h]) {
        const auto s = stats(ranks[static_cast<std::size_t>(r)], g0, g1);
        term_err.push_back(rtn_bound(s.range, s.maxabs, bitwidth));
        ea[h] += term_err.back();
      }
      double acc = 0.0;
      for (std::size_t i = g0; i < g1; ++i) {
        double mag = 0.0;
        for (std::size_t k = 0; k < groups[h].size(); ++k) {
          mag += std::fabs(ranks[static_cast<std::size_t>(groups[h][k])][i]) + term_err[k];
        }
        acc = std::max(acc, static_cast<double>(groups[h].size()) * kF32 * mag);
      }
      ea[h] += acc;
    }
    // Either group may be the one whose partial crosses the bridge.
    double cross = 0.0;
    for (std::size_t other = 0; other < 2; ++other) {
      cross = std::max(cross, perturbed_rtn_bound(stats(partial[other], g0, g1), ea[other],
                                                  bitwidth));
    }
    const auto ps0 = stats(partial[0], g0, g1);
    const auto ps1 = stats(partial[1], g0, g1);
    const double add = kF32 * (ps0.maxabs + ps1.maxabs + ea[0] + ea[1] + cross);
    const double stage1 = ea[0] + ea[1] + cross + add;
    const double stage2 = perturbed_rtn_bound(stats(sum, g0, g1), stage1, bitwidth);
    for (std::size_t i = g0; i < g1; ++i) {
      bound[i] = stage1 + stage2 + (std::fabs(sum[i]) + stage1 + stage2) * kBf16;
    }
  }
  return bound;
}

}  // namespace oracle
