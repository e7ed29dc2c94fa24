#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "flashcomm/codec.hpp"
#include "flashcomm/error.hpp"
#include "flashcomm/synthetic.hpp"
#include "oracle.hpp"

using namespace flashcomm;

namespace {

std::vector<std::uint8_t> random_codes(std::mt19937_64& rng, int bitwidth, std::size_t n) {
  std::uniform_int_distribution<int> d(0, (1 << bitwidth) - 1);
  std::vector<std::uint8_t> c(n);
  for (auto& x : c) x = static_cast<std::uint8_t>(d(rng));
  return c;
}

std::vector<float> random_values(std::mt19937_64& rng, std::size_t n, double spread) {
  std::normal_distribution<double> d(0.0, spread);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(d(rng));
  return v;
}

}  // namespace

TEST(BitSplit, Table) {
  EXPECT_EQ(bit_split(8), (std::vector<int>{8}));
  EXPECT_EQ(bit_split(7), (std::vector<int>{4, 2, 1}));
  EXPECT_EQ(bit_split(6), (std::vector<int>{4, 2}));
  EXPECT_EQ(bit_split(5), (std::vector<int>{4, 1}));
  EXPECT_EQ(bit_split(4), (std::vector<int>{4}));
  EXPECT_EQ(bit_split(3), (std::vector<int>{2, 1}));
  EXPECT_EQ(bit_split(2), (std::vector<int>{2}));
  EXPECT_THROW(bit_split(1), InvalidConfig);
  EXPECT_THROW(bit_split(9), InvalidConfig);
}

TEST(BitPack, Int5ExampleBytes) {
  const std::vector<std::uint8_t> codes{31, 0, 16, 1, 15, 2, 8, 4};
  const auto planes = pack_codes(codes, 5);
  ASSERT_EQ(planes.size(), 2u);
  EXPECT_EQ(planes[0], (Plane{0x0F, 0x10, 0x2F, 0x48}));
  const std::vector<unsigned> wide(codes.begin(), codes.end());
  const auto ref = oracle::build_planes(wide, 5);
  EXPECT_EQ(planes[0], ref[0]);
  EXPECT_EQ(planes[1], ref[1]);
}

TEST(BitPack, AllZeroCodes) {
  const std::vector<std::uint8_t> codes(16, 0);
  for (const auto& p : pack_codes(codes, 5)) {
    for (auto b : p) EXPECT_EQ(b, 0);
  }
  const std::vector<Plane> zero{Plane{0, 0}, Plane{0}};
  EXPECT_EQ(unpack_codes(zero, 3, 8), std::vector<std::uint8_t>(8, 0));
}

TEST(BitPack, DescendingInt3) {
  const std::vector<std::uint8_t> codes{7, 6, 5, 4, 3, 2, 1, 0};
  EXPECT_EQ(unpack_codes(pack_codes(codes, 3), 3, 8), codes);
}

TEST(BitPack, MatchesOracleOnRandomCodes) {
  std::mt19937_64 rng(11);
  for (int b = 2; b <= 8; ++b) {
    const auto codes = random_codes(rng, b, 4096);
    const auto planes = pack_codes(codes, b);
    const auto back = oracle::extract_codes(planes, b, codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) ASSERT_EQ(back[i], codes[i]) << "b=" << b;
    EXPECT_EQ(unpack_codes(planes, b, codes.size()), codes);
    std::size_t total = 0;
    for (const auto& p : planes) total += p.size();
    EXPECT_EQ(total, packed_bytes(b, codes.size()));
  }
}

TEST(BitPack, FlatBufferAgreesWithPlanes) {
  std::mt19937_64 rng(12);
  for (int b = 2; b <= 8; ++b) {
    const auto codes = random_codes(rng, b, 256);
    std::vector<std::uint8_t> flat(packed_bytes(b, codes.size()));
    pack_codes_into(codes, b, flat);
    std::vector<std::uint8_t> joined;
    for (const auto& p : pack_codes(codes, b)) joined.insert(joined.end(), p.begin(), p.end());
    EXPECT_EQ(flat, joined);
    std::vector<std::uint8_t> back(codes.size());
    unpack_codes_from(flat, b, back);
    EXPECT_EQ(back, codes);
  }
}

TEST(BitPack, Errors) {
  EXPECT_THROW(pack_codes(std::vector<std::uint8_t>(7, 0), 4), InvalidData);
  EXPECT_THROW(pack_codes(std::vector<std::uint8_t>{4, 0, 0, 0, 0, 0, 0, 0}, 2), EncodeRange);
  auto planes = pack_codes(std::vector<std::uint8_t>(16, 1), 5);
  planes[1].pop_back();
  EXPECT_THROW(unpack_codes(planes, 5, 16), DecodeFormat);
  planes.pop_back();
  EXPECT_THROW(unpack_codes(planes, 5, 16), DecodeFormat);
}

TEST(Rtn, ExactGrid) {
  const std::vector<float> v{0, 1, 2, 3};
  const auto g = rtn_encode_group(v, 2);
  EXPECT_EQ(g.codes, (std::vector<std::uint8_t>{0, 1, 2, 3}));
  EXPECT_EQ(g.meta.scale.to_float(), 1.0f);
  EXPECT_EQ(g.meta.zero.to_float(), 0.0f);
  EXPECT_EQ(rtn_decode_group(g.codes, g.meta), v);
}

TEST(Rtn, ConstantGroup) {
  const std::vector<float> v(32, 5.0f);
  const auto g = rtn_encode_group(v, 4);
  EXPECT_EQ(g.codes, std::vector<std::uint8_t>(32, 0));
  EXPECT_EQ(g.meta.scale.to_float(), 0.0f);
  EXPECT_EQ(g.meta.zero.to_float(), 5.0f);
  EXPECT_EQ(rtn_decode_group(g.codes, g.meta), v);
}

TEST(Rtn, EndpointsMapToExtremeCodes) {
  const std::vector<float> v{-2.0f, 2.0f};
  const auto g = rtn_encode_group(v, 8);
  EXPECT_EQ(g.meta.zero.to_float(), -2.0f);
  // The stored scale is the smallest BF16 at or above 4/255, so the top
  // endpoint lands on the nearest code of that slightly coarser grid.
  const float scale = g.meta.scale.to_float();
  EXPECT_GE(scale, 4.0f / 255.0f);
  EXPECT_LT(oracle::bits_to_float(oracle::float_to_bits(scale) - 0x10000u), 4.0f / 255.0f);
  const auto top = static_cast<std::uint8_t>(std::lround(4.0 / scale));
  EXPECT_EQ(g.codes, (std::vector<std::uint8_t>{0, top}));
  const auto back = rtn_decode_group(g.codes, g.meta);
  EXPECT_EQ(back[0], -2.0f);
  EXPECT_NEAR(back[1], 2.0f, oracle::best_grid_error(2.0, scale, -2.0, 8) + 1e-6);
}

TEST(Rtn, RejectsNonFinite) {
  const std::vector<float> v{0.0f, std::nanf(""), 1.0f};
  EXPECT_THROW(rtn_encode_group(v, 4), InvalidData);
  const std::vector<float> w{0.0f, INFINITY};
  EXPECT_THROW(rtn_encode_group(w, 4), InvalidData);
}

TEST(Rtn, ErrorMatchesBruteForceGrid) {
  std::mt19937_64 rng(21);
  for (int b = 2; b <= 8; ++b) {
    for (int trial = 0; trial < 50; ++trial) {
      const auto v = random_values(rng, 32, 3.0);
      const auto g = rtn_encode_group(v, b);
      const auto out = rtn_decode_group(g.codes, g.meta);
      const double s = g.meta.decoded_scale(10);
      const double z = g.meta.decoded_zero(10);
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double best = oracle::best_grid_error(v[i], s, z, b);
        EXPECT_LE(std::fabs(out[i] - static_cast<double>(v[i])), best + 1e-6 * (std::fabs(v[i]) + s))
            << "b=" << b;
      }
    }
  }
}

TEST(Spike, OutlierShrinksRange) {
  std::vector<float> v{100.0f, 0.1f, 0.2f, 0.3f, 0.4f, 0.5f, 0.6f, 0.7f, 0.8f, 0.9f};
  for (int b : {2, 3, 4}) {
    const auto sr = spike_encode_group(v, b);
    const auto rtn = rtn_encode_group(v, b);
    const auto sr_out = spike_decode_group(sr.codes, sr.meta);
    const auto rtn_out = rtn_decode_group(rtn.codes, rtn.meta);
    EXPECT_EQ(sr.meta.spike_max_index, 0);
    EXPECT_EQ(sr.meta.spike_min_index, 1);
    EXPECT_EQ(sr_out[0], oracle::bf16_nearest(100.0f));
    EXPECT_EQ(sr_out[1], oracle::bf16_nearest(0.1f));
    const double shrunk = (0.9 - 0.2) / ((1 << b) - 1);
    double sr_err = 0, rtn_err = 0;
    for (std::size_t i = 2; i < v.size(); ++i) {
      sr_err = std::max(sr_err, std::fabs(sr_out[i] - static_cast<double>(v[i])));
      rtn_err = std::max(rtn_err, std::fabs(rtn_out[i] - static_cast<double>(v[i])));
      EXPECT_LE(std::fabs(sr_out[i] - static_cast<double>(v[i])), oracle::rtn_bound(0.7, 0.9, b));
    }
    EXPECT_LT(sr.meta.decoded_scale(10), rtn.meta.decoded_scale(10));
    EXPECT_LE(sr_err, shrunk / 2 * (1 + 0x1p-6) + 0.9 * 0x1p-8);
    EXPECT_LT(sr_err, rtn_err);
  }
}

TEST(Spike, ConstantGroupUsesFirstTwoSlots) {
  const std::vector<float> v(32, -1.5f);
  const auto g = spike_encode_group(v, 2);
  EXPECT_EQ(g.meta.spike_min_index, 0);
  EXPECT_EQ(g.meta.spike_max_index, 1);
  EXPECT_EQ(spike_decode_group(g.codes, g.meta), v);
}

TEST(Spike, TiesPickLowestIndex) {
  std::vector<float> v{1, 3, 0, 3, 0, 2, 1, 2};
  const auto g = spike_encode_group(v, 3);
  EXPECT_EQ(g.meta.spike_min_index, 2);
  EXPECT_EQ(g.meta.spike_max_index, 1);
}

TEST(Spike, GroupSizeLimits) {
  EXPECT_THROW(spike_encode_group(std::vector<float>(3, 0.0f), 2), InvalidConfig);
  EXPECT_THROW(spike_encode_group(std::vector<float>(257, 0.0f), 2), InvalidConfig);
  auto g = spike_encode_group(std::vector<float>(8, 1.0f), 2);
  g.meta.spike_max_index = 8;
  EXPECT_THROW(spike_decode_group(g.codes, g.meta), DecodeFormat);
}

TEST(Spike, DominatesWhenSpikesStickOut) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    auto v = random_values(rng, 32, 1.0);
    v[static_cast<std::size_t>(trial % 32)] = 40.0f;
    const auto sr = spike_encode_group(v, 3);
    const auto rtn = rtn_encode_group(v, 3);
    EXPECT_LT(sr.meta.decoded_scale(10), rtn.meta.decoded_scale(10));
  }
}

TEST(Spike, IntLogIndicesAndValues) {
  std::mt19937_64 rng(32);
  auto v = random_values(rng, 32, 1.0);
  v[5] = -30.0f;
  v[17] = 25.0f;
  const auto g = spike_encode_group(v, 2, ScaleEncoding::IntLog);
  EXPECT_EQ(g.meta.spike_min_index, 5);
  EXPECT_EQ(g.meta.spike_max_index, 17);
  const auto out = spike_decode_group(g.codes, g.meta);
  EXPECT_EQ(out[5], oracle::bf16_nearest(-30.0f));
  EXPECT_EQ(out[17], oracle::bf16_nearest(25.0f));
}

TEST(IntLog, Examples) {
  EXPECT_EQ(scale_to_int(1.0), 0);
  EXPECT_EQ(scale_to_int(2.0), 10);
  EXPECT_EQ(scale_to_int(0.3), static_cast<int>(std::round(std::log2(0.3) * 10)));
  EXPECT_EQ(scale_to_int(0.3), -17);
  EXPECT_EQ(int_to_scale(0), 1.0);
  EXPECT_NEAR(int_to_scale(-17), std::pow(2.0, -1.7), 1e-12);
  EXPECT_EQ(scale_to_int(0.0), kZeroScaleSentinel);
  EXPECT_EQ(int_to_scale(kZeroScaleSentinel), 0.0);
  EXPECT_THROW(scale_to_int(-1.0), InvalidData);
}

TEST(IntLog, RelativeErrorSweep) {
  const double limit = std::pow(2.0, 1.0 / 20.0) - 1.0;
  for (double e = -12.0; e <= 12.0; e += 1.0 / 64.0) {
    const double s = std::pow(2.0, e);
    const double back = int_to_scale(scale_to_int(s));
    EXPECT_LE(std::fabs(back - s) / s, limit + 1e-12) << s;
  }
}

TEST(IntLog, ClampsAwayFromSentinel) {
  EXPECT_EQ(scale_to_int(1e-30), -127);
  EXPECT_EQ(scale_to_int(1e30), 127);
}

TEST(Config, Defaults) {
  for (int b = 2; b <= 8; ++b) {
    const auto c = QuantConfig::for_bitwidth(b);
    EXPECT_EQ(c.group_size, b >= 5 ? 128 : 32);
    EXPECT_EQ(c.scheme, b == 2 ? Scheme::SpikeReserving : Scheme::Rtn);
    EXPECT_NO_THROW(c.validate());
  }
  QuantConfig bad;
  bad.group_size = 100;
  EXPECT_THROW(bad.validate(), InvalidConfig);
  bad = QuantConfig{};
  bad.chunk_size = 4000;
  EXPECT_THROW(bad.validate(), InvalidConfig);
  bad = QuantConfig{};
  bad.bitwidth = 1;
  EXPECT_THROW(bad.validate(), InvalidConfig);
}

TEST(Footprint, Int2SpikeReserving) {
  QuantConfig c{2, 32, Scheme::SpikeReserving, ScaleEncoding::Bf16, 10, 4096};
  auto f = footprint_breakdown(c, 4096);
  EXPECT_EQ(f.quantized, 1024u);
  EXPECT_EQ(f.scale_zero, 512u);
  EXPECT_EQ(f.spikes, 1024u);
  EXPECT_EQ(f.total(), 2560u);
  c.scale_encoding = ScaleEncoding::IntLog;
  f = footprint_breakdown(c, 4096);
  EXPECT_EQ(f.quantized, 1024u);
  EXPECT_EQ(f.scale_zero, 256u);
  EXPECT_EQ(f.spikes, 768u);
  EXPECT_EQ(f.total(), 2048u);
}

TEST(Footprint, Int8Rtn) {
  const QuantConfig c{8, 128, Scheme::Rtn, ScaleEncoding::Bf16, 10, 4096};
  EXPECT_EQ(footprint_bytes(c, 4096), 4096u + 32u * 4u);
  EXPECT_EQ(footprint_bytes(c, 0), 0u);
  EXPECT_THROW(footprint_bytes(c, 100), InvalidConfig);
}

TEST(Chunk, SerializedLengthMatchesFootprintOnGrid) {
  std::mt19937_64 rng(41);
  const auto values = random_values(rng, 4096, 2.0);
  for (int b = 2; b <= 8; ++b) {
    for (int gs : {8, 32, 128, 256}) {
      for (auto scheme : {Scheme::Rtn, Scheme::SpikeReserving}) {
        for (auto enc : {ScaleEncoding::Bf16, ScaleEncoding::IntLog}) {
          const QuantConfig c{b, gs, scheme, enc, 10, 4096};
          const auto chunk = encode_chunk(values, c);
          const auto bytes = chunk.serialize();
          ASSERT_EQ(bytes.size(), kChunkHeaderBytes + footprint_bytes(c, 4096));
          ASSERT_EQ(chunk.payload_bytes(), footprint_bytes(c, 4096));
          const auto units = bit_split(b);
          for (std::size_t u = 0; u < units.size(); ++u) {
            ASSERT_EQ(chunk.planes[u].size(), 4096u * static_cast<std::size_t>(units[u]) / 8);
          }
          std::size_t used = 0;
          const auto back = QuantizedChunk::deserialize(bytes, &used);
          EXPECT_EQ(used, bytes.size());
          EXPECT_EQ(back, chunk);
          EXPECT_EQ(decode_chunk(back), decode_chunk(chunk));
        }
      }
    }
  }
}

TEST(Chunk, HeaderLayout) {
  const QuantConfig c{5, 128, Scheme::SpikeReserving, ScaleEncoding::IntLog, 10, 4096};
  const auto bytes = encode_chunk(std::vector<float>(4096, 0.5f), c).serialize();
  const std::vector<std::uint8_t> head(bytes.begin(), bytes.begin() + 15);
  EXPECT_EQ(head, (std::vector<std::uint8_t>{'F', 'C', 'V', '2', 2, 5, 128, 0, 1, 1, 10, 0x00,
                                             0x10, 0x00, 0x00}));
}

TEST(Chunk, DeterministicBytes) {
  std::mt19937_64 rng(42);
  const auto values = random_values(rng, 4096, 1.0);
  const auto c = QuantConfig::for_bitwidth(3);
  EXPECT_EQ(encode_chunk(values, c).serialize(), encode_chunk(values, c).serialize());
}

TEST(Chunk, Errors) {
  const auto c = QuantConfig::for_bitwidth(4);
  EXPECT_THROW(encode_chunk(std::vector<float>(100, 0.0f), c), InvalidData);
  auto bytes = encode_chunk(std::vector<float>(4096, 0.0f), c).serialize();
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(QuantizedChunk::deserialize(truncated), DecodeFormat);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(QuantizedChunk::deserialize(bad_magic), DecodeFormat);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(QuantizedChunk::deserialize(bad_version), DecodeFormat);
  EXPECT_THROW(QuantizedChunk::deserialize(std::vector<std::uint8_t>(4, 0)), DecodeFormat);
}

TEST(Chunk, SpikyDataRoundTripBound) {
  SyntheticSpec spec;
  spec.n = 4096;
  spec.seed = 5;
  const auto v = gen_synthetic(spec);
  const QuantConfig c{8, 128, Scheme::Rtn, ScaleEncoding::Bf16, 10, 4096};
  const auto out = decode_chunk(encode_chunk(v, c));
  for (std::size_t g = 0; g < 32; ++g) {
    double lo = v[g * 128], hi = lo;
    for (std::size_t i = g * 128; i < (g + 1) * 128; ++i) {
      lo = std::min<double>(lo, v[i]);
      hi = std::max<double>(hi, v[i]);
    }
    const double bound = oracle::rtn_bound(hi - lo, std::max(std::fabs(lo), std::fabs(hi)), 8);
    for (std::size_t i = g * 128; i < (g + 1) * 128; ++i) {
      EXPECT_LE(std::fabs(out[i] - static_cast<double>(v[i])), bound);
    }
  }
}

TEST(Block, PartialLastChunk) {
  std::mt19937_64 rng(43);
  const auto v = random_values(rng, 4096 + 256, 1.0);
  const auto c = QuantConfig::for_bitwidth(6);
  const auto chunks = encode_block(v, c);
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[1].element_count, 256u);
  std::size_t bytes = 0;
  const auto out = quantize_dequantize(v, c, &bytes);
  EXPECT_EQ(out, decode_block(chunks));
  EXPECT_EQ(bytes, footprint_bytes(c, v.size()));
  EXPECT_THROW(encode_block(std::vector<float>(100, 0.0f), c), InvalidData);
}

TEST(Bf16, AgreesWithNeighbourSearch) {
  std::mt19937_64 rng(44);
  std::uniform_int_distribution<std::uint32_t> d;
  for (int i = 0; i < 100000; ++i) {
    const float f = oracle::bits_to_float(d(rng));
    if (!std::isfinite(f) || std::fabs(f) > 3.0e38f) continue;
    ASSERT_EQ(round_to_bf16(f), oracle::bf16_nearest(f)) << f;
  }
  EXPECT_EQ(round_to_bf16(oracle::bits_to_float(0x3f808000u)), 1.0f);
  EXPECT_TRUE(std::isnan(round_to_bf16(std::nanf(""))));
}
