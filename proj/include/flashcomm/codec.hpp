#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "flashcomm/bf16.hpp"
#include "flashcomm/bitpack.hpp"

namespace flashcomm {

enum class Scheme : std::uint8_t { Rtn = 0, SpikeReserving = 1 };
enum class ScaleEncoding : std::uint8_t { Bf16 = 0, IntLog = 1 };

struct QuantConfig {
  int bitwidth = 8;
  int group_size = 128;
  Scheme scheme = Scheme::Rtn;
  ScaleEncoding scale_encoding = ScaleEncoding::Bf16;
  int theta = 10;
  int chunk_size = 4096;

  // Group size 128 for INT8/7/6/5 and 32 for INT4/3/2; INT2 runs with spike
  // reserving, everything else with plain RTN.
  static QuantConfig for_bitwidth(int bitwidth);

  // Throws InvalidConfig when any field is out of range or the sizes do not
  // line up (chunk % group, group % 8, spike indices fitting a byte).
  void validate() const;

  friend bool operator==(const QuantConfig&, const QuantConfig&) = default;
};

// Per-group metadata as stored on the wire. Which fields are live depends on
// the scale encoding and whether the group was spike-reserved.
struct GroupMeta {
  ScaleEncoding encoding = ScaleEncoding::Bf16;
  Bf16 scale;
  Bf16 zero;
  std::int8_t scale_int = 0;
  std::int8_t zero_int = 0;

  bool has_spikes = false;
  Bf16 spike_min_value;
  Bf16 spike_max_value;
  std::uint8_t spike_min_index = 0;
  std::uint8_t spike_max_index = 0;

  // Affine decode parameters: value = code * decoded_scale + decoded_zero.
  double decoded_scale(int theta) const;
  double decoded_zero(int theta) const;

  friend bool operator==(const GroupMeta&, const GroupMeta&) = default;
};

struct EncodedGroup {
  std::vector<std::uint8_t> codes;
  GroupMeta meta;
};

// Asymmetric round-to-nearest over one group. zero = min, scale = range /
// (2^b - 1); codes use round-half-away-from-zero and are clamped. A constant
// group has scale 0 and all-zero codes.
EncodedGroup rtn_encode_group(std::span<const float> values, int bitwidth,
                              ScaleEncoding encoding = ScaleEncoding::Bf16, int theta = 10);
std::vector<float> rtn_decode_group(std::span<const std::uint8_t> codes, const GroupMeta& meta,
                                    int theta = 10);

// Spike reserving: the first minimum and first maximum are stored in BF16
// with their indices, zeroed in a working copy, and the group is quantized
// over the range of the remaining elements. Requires 4 <= g <= 256.
EncodedGroup spike_encode_group(std::span<const float> values, int bitwidth,
                                ScaleEncoding encoding = ScaleEncoding::Bf16, int theta = 10);
std::vector<float> spike_decode_group(std::span<const std::uint8_t> codes, const GroupMeta& meta,
                                      int theta = 10);

// Log-domain scale: round(log2(scale) * theta), clamped to [-127, 127].
// Zero maps to the -128 sentinel, which decodes back to zero.
std::int8_t scale_to_int(double scale, int theta = 10);
double int_to_scale(std::int8_t s, int theta = 10);

inline constexpr std::int8_t kZeroScaleSentinel = -128;

// Bytes of metadata emitted per group for a configuration.
std::size_t meta_bytes_per_group(const QuantConfig& config);

struct Footprint {
  std::size_t quantized = 0;
  std::size_t scale_zero = 0;
  std::size_t spikes = 0;
  std::size_t meta() const { return scale_zero + spikes; }
  std::size_t total() const { return quantized + meta(); }
};

Footprint footprint_breakdown(const QuantConfig& config, std::size_t n);

// Serialized payload size (header excluded) of n elements.
std::size_t footprint_bytes(const QuantConfig& config, std::size_t n);

inline constexpr std::size_t kChunkHeaderBytes = 15;
inline constexpr std::uint8_t kChunkVersion = 2;

struct QuantizedChunk {
  QuantConfig config;
  std::vector<Plane> planes;
  std::vector<std::uint8_t> meta;
  std::uint32_t element_count = 0;

  std::size_t payload_bytes() const;

  // Header followed by planes then per-group meta, little-endian.
  std::vector<std::uint8_t> serialize() const;
  void serialize_into(std::vector<std::uint8_t>& out) const;

  // Parses one chunk from the front of `bytes`. `consumed`, if given,
  // receives the number of bytes read. The chunk size is not carried on the
  // wire; the returned config uses 4096 or the element count if larger.
  static QuantizedChunk deserialize(std::span<const std::uint8_t> bytes,
                                    std::size_t* consumed = nullptr);

  friend bool operator==(const QuantizedChunk&, const QuantizedChunk&) = default;
};

// Encodes exactly config.chunk_size values.
QuantizedChunk encode_chunk(std::span<const float> values, const QuantConfig& config);
std::vector<float> decode_chunk(const QuantizedChunk& chunk);

// Encodes an arbitrary multiple of group_size as a run of chunks; every chunk
// but the last holds chunk_size elements.
std::vector<QuantizedChunk> encode_block(std::span<const float> values, const QuantConfig& config);
std::vector<float> decode_block(std::span<const QuantizedChunk> chunks);

// encode_block followed by decode_block, reporting the payload bytes used.
std::vector<float> quantize_dequantize(std::span<const float> values, const QuantConfig& config,
                                       std::size_t* payload_bytes = nullptr);

}  // namespace flashcomm
