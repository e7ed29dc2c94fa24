#include "flashcomm/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "flashcomm/error.hpp"

namespace flashcomm {

namespace {

constexpr char kMagic[4] = {'F', 'C', 'V', '2'};

int max_code(int bitwidth) { return (1 << bitwidth) - 1; }

void check_bitwidth(int bitwidth) {
  if (bitwidth < 2 || bitwidth > 8) {
    throw InvalidConfig("bitwidth " + std::to_string(bitwidth) + " outside [2,8]");
  }
}

void check_theta(int theta) {
  if (theta < 1 || theta > 255) {
    throw InvalidConfig("theta " + std::to_string(theta) + " outside [1,255]");
  }
}

void check_finite(std::span<const float> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw InvalidData("non-finite value at index " + std::to_string(i));
    }
  }
}

// Fills the scale/zero fields of `meta` for a group spanning [lo, hi].
void set_range(GroupMeta& meta, float lo, float hi, int bitwidth, ScaleEncoding encoding,
               int theta) {
  meta.encoding = encoding;
  const double step = (static_cast<double>(hi) - lo) / max_code(bitwidth);
  if (encoding == ScaleEncoding::Bf16) {
    meta.zero = Bf16::from_float(lo);
    if (step == 0.0) {
      meta.scale = Bf16{};
      return;
    }
    float s = static_cast<float>(step);
    if (static_cast<double>(s) < step) s = std::nextafter(s, std::numeric_limits<float>::infinity());
    // Rounded up so that the grid still reaches the group maximum.
    meta.scale = Bf16::from_float_ceil(s);
    return;
  }
  if (step == 0.0) {
    meta.scale_int = kZeroScaleSentinel;
    meta.zero_int = 0;
    return;
  }
  meta.scale_int = scale_to_int(step, theta);
  const double sq = int_to_scale(meta.scale_int, theta);
  const double z = std::clamp(std::round(-static_cast<double>(lo) / sq), -128.0, 127.0);
  meta.zero_int = static_cast<std::int8_t>(z);
}

void quantize_into(std::span<const float> values, const GroupMeta& meta, int bitwidth, int theta,
                   std::span<std::uint8_t> codes) {
  const double scale = meta.decoded_scale(theta);
  const double zero = meta.decoded_zero(theta);
  const double top = max_code(bitwidth);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (scale == 0.0) {
      codes[i] = 0;
      continue;
    }
    const double q = std::round((static_cast<double>(values[i]) - zero) / scale);
    codes[i] = static_cast<std::uint8_t>(std::clamp(q, 0.0, top));
  }
}

void dequantize_into(std::span<const std::uint8_t> codes, const GroupMeta& meta, int theta,
                     std::span<float> out) {
  const double scale = meta.decoded_scale(theta);
  const double zero = meta.decoded_zero(theta);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    out[i] = static_cast<float>(codes[i] * scale + zero);
  }
}

void encode_rtn_into(std::span<const float> values, int bitwidth, ScaleEncoding encoding,
                     int theta, GroupMeta& meta, std::span<std::uint8_t> codes) {
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  set_range(meta, *lo, *hi, bitwidth, encoding, theta);
  meta.has_spikes = false;
  quantize_into(values, meta, bitwidth, theta, codes);
}

void encode_spike_into(std::span<const float> values, int bitwidth, ScaleEncoding encoding,
                       int theta, GroupMeta& meta, std::span<std::uint8_t> codes,
                       std::vector<float>& work) {
  const std::size_t g = values.size();
  std::size_t imin = 0;
  std::size_t imax = 0;
  for (std::size_t i = 1; i < g; ++i) {
    if (values[i] < values[imin]) imin = i;
    if (values[i] > values[imax]) imax = i;
  }
  if (imin == imax) {
    imin = 0;
    imax = 1;
  }
  work.assign(values.begin(), values.end());
  work[imin] = 0.0f;
  work[imax] = 0.0f;

  float lo = std::numeric_limits<float>::infinity();
  float hi = -std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < g; ++i) {
    if (i == imin || i == imax) continue;
    lo = std::min(lo, work[i]);
    hi = std::max(hi, work[i]);
  }
  set_range(meta, lo, hi, bitwidth, encoding, theta);
  meta.has_spikes = true;
  meta.spike_min_value = Bf16::from_float(values[imin]);
  meta.spike_max_value = Bf16::from_float(values[imax]);
  meta.spike_min_index = static_cast<std::uint8_t>(imin);
  meta.spike_max_index = static_cast<std::uint8_t>(imax);
  quantize_into(work, meta, bitwidth, theta, codes);
}

void restore_spikes(const GroupMeta& meta, std::span<float> out) {
  if (meta.spike_min_index >= out.size() || meta.spike_max_index >= out.size()) {
    throw DecodeFormat("spike index outside group of " + std::to_string(out.size()));
  }
  out[meta.spike_min_index] = meta.spike_min_value.to_float();
  out[meta.spike_max_index] = meta.spike_max_value.to_float();
}

void check_spike_group(std::size_t g) {
  if (g < 4 || g > 256) {
    throw InvalidConfig("spike reserving needs 4 <= group size <= 256, got " + std::to_string(g));
  }
}

// Little-endian byte cursor helpers.
void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_meta(std::vector<std::uint8_t>& out, const GroupMeta& meta, bool spikes) {
  if (meta.encoding == ScaleEncoding::Bf16) {
    put_u16(out, meta.scale.bits);
    put_u16(out, meta.zero.bits);
  } else {
    put_u8(out, static_cast<std::uint8_t>(meta.scale_int));
    put_u8(out, static_cast<std::uint8_t>(meta.zero_int));
  }
  if (!spikes) return;
  put_u16(out, meta.spike_min_value.bits);
  put_u16(out, meta.spike_max_value.bits);
  if (meta.encoding == ScaleEncoding::Bf16) {
    // Indices travel as BF16 numbers in this encoding; 0..255 are exact.
    put_u16(out, Bf16::from_float(static_cast<float>(meta.spike_min_index)).bits);
    put_u16(out, Bf16::from_float(static_cast<float>(meta.spike_max_index)).bits);
  } else {
    put_u8(out, meta.spike_min_index);
    put_u8(out, meta.spike_max_index);
  }
}

std::uint8_t parse_bf16_index(std::uint16_t bits) {
  const float f = Bf16::from_bits(bits).to_float();
  if (!(f >= 0.0f && f <= 255.0f) || f != std::floor(f)) {
    throw DecodeFormat("spike index is not an integer in [0,255]");
  }
  return static_cast<std::uint8_t>(f);
}

GroupMeta read_meta(const std::uint8_t* p, const QuantConfig& config) {
  GroupMeta meta;
  meta.encoding = config.scale_encoding;
  const bool bf16 = config.scale_encoding == ScaleEncoding::Bf16;
  if (bf16) {
    meta.scale = Bf16::from_bits(get_u16(p));
    meta.zero = Bf16::from_bits(get_u16(p + 2));
    p += 4;
  } else {
    meta.scale_int = static_cast<std::int8_t>(p[0]);
    meta.zero_int = static_cast<std::int8_t>(p[1]);
    p += 2;
  }
  if (config.scheme != Scheme::SpikeReserving) return meta;
  meta.has_spikes = true;
  meta.spike_min_value = Bf16::from_bits(get_u16(p));
  meta.spike_max_value = Bf16::from_bits(get_u16(p + 2));
  p += 4;
  if (bf16) {
    meta.spike_min_index = parse_bf16_index(get_u16(p));
    meta.spike_max_index = parse_bf16_index(get_u16(p + 2));
  } else {
    meta.spike_min_index = p[0];
    meta.spike_max_index = p[1];
  }
  return meta;
}

}  // namespace

QuantConfig QuantConfig::for_bitwidth(int bitwidth) {
  check_bitwidth(bitwidth);
  QuantConfig c;
  c.bitwidth = bitwidth;
  c.group_size = bitwidth >= 5 ? 128 : 32;
  c.scheme = bitwidth == 2 ? Scheme::SpikeReserving : Scheme::Rtn;
  return c;
}

void QuantConfig::validate() const {
  check_bitwidth(bitwidth);
  check_theta(theta);
  if (group_size < 8 || group_size % 8 != 0 || group_size > 0xffff) {
    throw InvalidConfig("group size " + std::to_string(group_size) +
                        " must be a positive multiple of 8 below 65536");
  }
  if (chunk_size <= 0 || chunk_size % group_size != 0) {
    throw InvalidConfig("chunk size " + std::to_string(chunk_size) +
                        " is not a multiple of group size " + std::to_string(group_size));
  }
  if (scheme == Scheme::SpikeReserving) check_spike_group(static_cast<std::size_t>(group_size));
  if (scheme != Scheme::Rtn && scheme != Scheme::SpikeReserving) {
    throw InvalidConfig("unknown scheme");
  }
  if (scale_encoding != ScaleEncoding::Bf16 && scale_encoding != ScaleEncoding::IntLog) {
    throw InvalidConfig("unknown scale encoding");
  }
}

double GroupMeta::decoded_scale(int theta) const {
  if (encoding == ScaleEncoding::Bf16) return scale.to_float();
  return int_to_scale(scale_int, theta);
}

double GroupMeta::decoded_zero(int theta) const {
  if (encoding == ScaleEncoding::Bf16) return zero.to_float();
  return -static_cast<double>(zero_int) * decoded_scale(theta);
}

EncodedGroup rtn_encode_group(std::span<const float> values, int bitwidth, ScaleEncoding encoding,
                              int theta) {
  check_bitwidth(bitwidth);
  check_theta(theta);
  if (values.empty()) throw InvalidData("empty group");
  check_finite(values);
  EncodedGroup g;
  g.codes.resize(values.size());
  encode_rtn_into(values, bitwidth, encoding, theta, g.meta, g.codes);
  return g;
}

std::vector<float> rtn_decode_group(std::span<const std::uint8_t> codes, const GroupMeta& meta,
                                    int theta) {
  std::vector<float> out(codes.size());
  dequantize_into(codes, meta, theta, out);
  return out;
}

EncodedGroup spike_encode_group(std::span<const float> values, int bitwidth,
                                ScaleEncoding encoding, int theta) {
  check_bitwidth(bitwidth);
  check_theta(theta);
  check_spike_group(values.size());
  check_finite(values);
  EncodedGroup g;
  g.codes.resize(values.size());
  std::vector<float> work;
  encode_spike_into(values, bitwidth, encoding, theta, g.meta, g.codes, work);
  return g;
}

std::vector<float> spike_decode_group(std::span<const std::uint8_t> codes, const GroupMeta& meta,
                                      int theta) {
  std::vector<float> out(codes.size());
  dequantize_into(codes, meta, theta, out);
  restore_spikes(meta, out);
  return out;
}

std::int8_t scale_to_int(double scale, int theta) {
  check_theta(theta);
  if (std::isnan(scale) || scale < 0.0) throw InvalidData("scale must be non-negative");
  if (scale == 0.0) return kZeroScaleSentinel;
  const double s = std::round(std::log2(scale) * theta);
  return static_cast<std::int8_t>(std::clamp(s, -127.0, 127.0));
}

double int_to_scale(std::int8_t s, int theta) {
  check_theta(theta);
  if (s == kZeroScaleSentinel) return 0.0;
  return std::exp2(static_cast<double>(s) / theta);
}

std::size_t meta_bytes_per_group(const QuantConfig& config) {
  const bool bf16 = config.scale_encoding == ScaleEncoding::Bf16;
  std::size_t bytes = bf16 ? 4 : 2;
  if (config.scheme == Scheme::SpikeReserving) bytes += 4 + (bf16 ? 4 : 2);
  return bytes;
}

Footprint footprint_breakdown(const QuantConfig& config, std::size_t n) {
  config.validate();
  const auto gs = static_cast<std::size_t>(config.group_size);
  if (n % gs != 0) {
    throw InvalidConfig(std::to_string(n) + " elements do not divide into groups of " +
                        std::to_string(gs));
  }
  const std::size_t groups = n / gs;
  const bool bf16 = config.scale_encoding == ScaleEncoding::Bf16;
  Footprint f;
  f.quantized = n * static_cast<std::size_t>(config.bitwidth) / 8;
  f.scale_zero = groups * (bf16 ? 4 : 2);
  if (config.scheme == Scheme::SpikeReserving) f.spikes = groups * (4 + (bf16 ? 4 : 2));
  return f;
}

std::size_t footprint_bytes(const QuantConfig& config, std::size_t n) {
  return footprint_breakdown(config, n).total();
}

std::size_t QuantizedChunk::payload_bytes() const {
  std::size_t n = meta.size();
  for (const auto& p : planes) n += p.size();
  return n;
}

void QuantizedChunk::serialize_into(std::vector<std::uint8_t>& out) const {
  out.reserve(out.size() + kChunkHeaderBytes + payload_bytes());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u8(out, kChunkVersion);
  put_u8(out, static_cast<std::uint8_t>(config.bitwidth));
  put_u16(out, static_cast<std::uint16_t>(config.group_size));
  put_u8(out, static_cast<std::uint8_t>(config.scheme));
  put_u8(out, static_cast<std::uint8_t>(config.scale_encoding));
  put_u8(out, static_cast<std::uint8_t>(config.theta));
  put_u32(out, element_count);
  for (const auto& p : planes) out.insert(out.end(), p.begin(), p.end());
  out.insert(out.end(), meta.begin(), meta.end());
}

std::vector<std::uint8_t> QuantizedChunk::serialize() const {
  std::vector<std::uint8_t> out;
  serialize_into(out);
  return out;
}

QuantizedChunk QuantizedChunk::deserialize(std::span<const std::uint8_t> bytes,
                                           std::size_t* consumed) {
  if (bytes.size() < kChunkHeaderBytes) throw DecodeFormat("truncated chunk header");
  const std::uint8_t* p = bytes.data();
  if (std::memcmp(p, kMagic, 4) != 0) throw DecodeFormat("bad chunk magic");
  if (p[4] != kChunkVersion) throw DecodeFormat("unsupported chunk version " + std::to_string(p[4]));

  QuantizedChunk chunk;
  QuantConfig& c = chunk.config;
  c.bitwidth = p[5];
  c.group_size = get_u16(p + 6);
  c.scheme = static_cast<Scheme>(p[8]);
  c.scale_encoding = static_cast<ScaleEncoding>(p[9]);
  c.theta = p[10];
  chunk.element_count = get_u32(p + 11);
  c.chunk_size = std::max<std::uint32_t>(4096, chunk.element_count);
  if (c.group_size > 0 && c.chunk_size % c.group_size != 0) {
    c.chunk_size = static_cast<int>(chunk.element_count);
  }
  try {
    if (chunk.element_count == 0) throw InvalidConfig("empty chunk");
    c.validate();
  } catch (const InvalidConfig& e) {
    throw DecodeFormat(std::string("chunk header: ") + e.what());
  }
  if (chunk.element_count % static_cast<std::uint32_t>(c.group_size) != 0) {
    throw DecodeFormat("element count is not a multiple of the group size");
  }

  const std::size_t n = chunk.element_count;
  const std::size_t total = kChunkHeaderBytes + footprint_bytes(c, n);
  if (bytes.size() < total) {
    throw DecodeFormat("chunk truncated: have " + std::to_string(bytes.size()) + " bytes, need " +
                       std::to_string(total));
  }
  std::size_t off = kChunkHeaderBytes;
  for (int unit : bit_split(c.bitwidth)) {
    const std::size_t len = n * static_cast<std::size_t>(unit) / 8;
    chunk.planes.emplace_back(p + off, p + off + len);
    off += len;
  }
  chunk.meta.assign(p + off, p + total);
  if (consumed) *consumed = total;
  return chunk;
}

QuantizedChunk encode_chunk(std::span<const float> values, const QuantConfig& config) {
  config.validate();
  if (values.size() != static_cast<std::size_t>(config.chunk_size)) {
    throw InvalidData("chunk expects " + std::to_string(config.chunk_size) + " values, got " +
                      std::to_string(values.size()));
  }
  auto chunks = encode_block(values, config);
  return std::move(chunks.front());
}

std::vector<QuantizedChunk> encode_block(std::span<const float> values, const QuantConfig& config) {
  config.validate();
  const auto gs = static_cast<std::size_t>(config.group_size);
  if (values.size() % gs != 0) {
    throw InvalidData(std::to_string(values.size()) + " values do not divide into groups of " +
                      std::to_string(gs));
  }
  check_finite(values);

  const auto cs = static_cast<std::size_t>(config.chunk_size);
  const bool spikes = config.scheme == Scheme::SpikeReserving;
  std::vector<QuantizedChunk> chunks;
  std::vector<std::uint8_t> codes;
  std::vector<float> work;
  for (std::size_t start = 0; start < values.size(); start += cs) {
    const std::size_t n = std::min(cs, values.size() - start);
    const auto slice = values.subspan(start, n);
    codes.assign(n, 0);
    QuantizedChunk chunk;
    chunk.config = config;
    chunk.element_count = static_cast<std::uint32_t>(n);
    chunk.meta.reserve((n / gs) * meta_bytes_per_group(config));
    for (std::size_t g = 0; g < n; g += gs) {
      GroupMeta meta;
      const auto group = slice.subspan(g, gs);
      const auto out = std::span<std::uint8_t>(codes).subspan(g, gs);
      if (spikes) {
        encode_spike_into(group, config.bitwidth, config.scale_encoding, config.theta, meta, out,
                          work);
      } else {
        encode_rtn_into(group, config.bitwidth, config.scale_encoding, config.theta, meta, out);
      }
      write_meta(chunk.meta, meta, spikes);
    }
    chunk.planes = pack_codes(codes, config.bitwidth);
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

std::vector<float> decode_chunk(const QuantizedChunk& chunk) {
  const QuantConfig& c = chunk.config;
  c.validate();
  const std::size_t n = chunk.element_count;
  const auto gs = static_cast<std::size_t>(c.group_size);
  if (n % gs != 0) throw DecodeFormat("element count is not a multiple of the group size");
  const std::size_t per_group = meta_bytes_per_group(c);
  if (chunk.meta.size() != (n / gs) * per_group) {
    throw DecodeFormat("meta section holds " + std::to_string(chunk.meta.size()) +
                       " bytes, expected " + std::to_string((n / gs) * per_group));
  }
  const auto codes = unpack_codes(chunk.planes, c.bitwidth, n);
  std::vector<float> out(n);
  for (std::size_t g = 0; g < n / gs; ++g) {
    const GroupMeta meta = read_meta(chunk.meta.data() + g * per_group, c);
    const auto dst = std::span<float>(out).subspan(g * gs, gs);
    dequantize_into(std::span<const std::uint8_t>(codes).subspan(g * gs, gs), meta, c.theta, dst);
    if (meta.has_spikes) restore_spikes(meta, dst);
  }
  return out;
}

std::vector<float> decode_block(std::span<const QuantizedChunk> chunks) {
  std::vector<float> out;
  for (const auto& chunk : chunks) {
    const auto part = decode_chunk(chunk);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<float> quantize_dequantize(std::span<const float> values, const QuantConfig& config,
                                       std::size_t* payload_bytes) {
  const auto chunks = encode_block(values, config);
  if (payload_bytes) {
    std::size_t total = 0;
    for (const auto& c : chunks) total += c.payload_bytes();
    *payload_bytes = total;
  }
  return decode_block(chunks);
}

}  // namespace flashcomm
