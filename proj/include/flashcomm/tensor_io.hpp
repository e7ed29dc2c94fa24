#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "flashcomm/codec.hpp"

namespace flashcomm {

// Tensor file: "FCTN", u32 element count, little-endian float32 values.
void write_tensor(const std::string& path, std::span<const float> values);
std::vector<float> read_tensor(const std::string& path);

// Quantized stream: "FCQS", u32 original element count, u32 chunk count,
// then serialized chunks. The tail is zero-padded to a whole chunk and
// trimmed again on read.
struct ChunkStream {
  std::size_t element_count = 0;
  std::vector<QuantizedChunk> chunks;
};

ChunkStream quantize_tensor(std::span<const float> values, const QuantConfig& config);
std::vector<float> dequantize_stream(const ChunkStream& stream);

std::vector<std::uint8_t> serialize_stream(const ChunkStream& stream);
ChunkStream parse_stream(std::span<const std::uint8_t> bytes);

void write_stream(const std::string& path, const ChunkStream& stream);
ChunkStream read_stream(const std::string& path);

}  // namespace flashcomm
