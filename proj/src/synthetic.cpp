#include "flashcomm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "flashcomm/error.hpp"

namespace flashcomm {

void SyntheticSpec::validate() const {
  if (n == 0) throw InvalidConfig("synthetic spec needs n > 0");
  if (!(stddev >= 0.0) || !std::isfinite(stddev) || !std::isfinite(mean)) {
    throw InvalidConfig("synthetic spec needs finite mean and non-negative stddev");
  }
  if (!(spike_rate >= 0.0 && spike_rate <= 1.0)) {
    throw InvalidConfig("spike rate must lie in [0, 1]");
  }
  if (!std::isfinite(spike_magnitude) || spike_magnitude < 0.0) {
    throw InvalidConfig("spike magnitude must be finite and non-negative");
  }
}

std::vector<float> gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> body(spec.mean, spec.stddev);
  std::vector<float> out(spec.n);
  for (auto& v : out) v = static_cast<float>(spec.stddev > 0.0 ? body(rng) : spec.mean);
  if (spec.distribution == Distribution::Gaussian || spec.spike_rate == 0.0) return out;

  std::bernoulli_distribution place(spec.spike_rate);
  std::bernoulli_distribution positive(0.5);
  const double offset = spec.spike_magnitude * spec.stddev;
  for (auto& v : out) {
    if (!place(rng)) continue;
    v = static_cast<float>(spec.mean + (positive(rng) ? offset : -offset));
  }
  return out;
}

ErrorStats error_stats(std::span<const float> reference, std::span<const float> approx) {
  if (reference.size() != approx.size()) throw InvalidData("length mismatch");
  double signal = 0.0;
  double noise = 0.0;
  ErrorStats s;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double x = reference[i];
    const double e = x - static_cast<double>(approx[i]);
    signal += x * x;
    noise += e * e;
    s.max_abs_err = std::max(s.max_abs_err, std::abs(e));
  }
  s.mse = reference.empty() ? 0.0 : noise / static_cast<double>(reference.size());
  if (noise == 0.0) {
    s.sqnr_db = std::numeric_limits<double>::infinity();
  } else {
    s.sqnr_db = 10.0 * std::log10(signal / noise);
  }
  return s;
}

ErrorReport sweep_codec(std::span<const float> values, const SweepOptions& options) {
  ErrorReport report;
  for (int b : options.bitwidths) {
    std::vector<int> sizes = options.group_sizes;
    if (sizes.empty()) sizes.push_back(QuantConfig::for_bitwidth(b).group_size);
    for (int gs : sizes) {
      for (Scheme scheme : options.schemes) {
        QuantConfig config;
        config.bitwidth = b;
        config.group_size = gs;
        config.scheme = scheme;
        config.scale_encoding = options.scale_encoding;
        config.theta = options.theta;
        config.chunk_size = 4096 % gs == 0 ? 4096 : gs;
        config.validate();
        const std::size_t padded = (values.size() + gs - 1) / gs * gs;
        std::vector<float> input(values.begin(), values.end());
        input.resize(padded, 0.0f);
        auto decoded = quantize_dequantize(input, config);
        decoded.resize(values.size());
        const auto stats = error_stats(values, decoded);
        report.rows.push_back({b, scheme, gs, stats.mse, stats.max_abs_err, stats.sqnr_db,
                               footprint_bytes(config, padded)});
      }
    }
  }
  return report;
}

ErrorReport sweep_codec(const SyntheticSpec& spec, const SweepOptions& options) {
  const auto values = gen_synthetic(spec);
  return sweep_codec(values, options);
}

}  // namespace flashcomm
