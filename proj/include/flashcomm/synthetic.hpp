#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "flashcomm/codec.hpp"

namespace flashcomm {

enum class Distribution { Gaussian, GaussianWithSpikes };

// Gaussian body with rare symmetric spikes at mean +/- magnitude * stddev,
// mimicking the heavy tails of LLM activations.
struct SyntheticSpec {
  Distribution distribution = Distribution::GaussianWithSpikes;
  double mean = 0.0;
  double stddev = 1.0;
  double spike_rate = 1.0 / 64.0;
  double spike_magnitude = 50.0;
  std::size_t n = 4096;
  std::uint64_t seed = 0;

  void validate() const;
};

// Deterministic per seed. The Gaussian body is drawn first, so a spike rate
// of zero reproduces the plain Gaussian vector for the same seed.
std::vector<float> gen_synthetic(const SyntheticSpec& spec);

struct ErrorRow {
  int bitwidth = 0;
  Scheme scheme = Scheme::Rtn;
  int group_size = 0;
  double mse = 0.0;
  double max_abs_err = 0.0;
  double sqnr_db = 0.0;
  std::size_t footprint_bytes = 0;
};

struct ErrorReport {
  std::vector<ErrorRow> rows;
};

struct ErrorStats {
  double mse = 0.0;
  double max_abs_err = 0.0;
  double sqnr_db = 0.0;  // +inf when the reconstruction is exact
};

ErrorStats error_stats(std::span<const float> reference, std::span<const float> approx);

struct SweepOptions {
  std::vector<int> bitwidths{2, 3, 4, 5, 6, 7, 8};
  std::vector<Scheme> schemes{Scheme::Rtn, Scheme::SpikeReserving};
  // Empty: the default group size for each bitwidth.
  std::vector<int> group_sizes;
  ScaleEncoding scale_encoding = ScaleEncoding::Bf16;
  int theta = 10;
};

// Rows are ordered by (bitwidth, group size, scheme) as listed in options.
ErrorReport sweep_codec(std::span<const float> values, const SweepOptions& options);
ErrorReport sweep_codec(const SyntheticSpec& spec, const SweepOptions& options);

}  // namespace flashcomm
