#include "flashcomm/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "flashcomm/error.hpp"

namespace flashcomm {

namespace {

constexpr char kTensorMagic[4] = {'F', 'C', 'T', 'N'};
constexpr char kStreamMagic[4] = {'F', 'C', 'Q', 'S'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint32_t checked_u32(std::size_t n) {
  if (n > 0xffffffffu) throw InvalidData("element count does not fit 32 bits");
  return static_cast<std::uint32_t>(n);
}

std::vector<std::uint8_t> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace

void write_tensor(const std::string& path, std::span<const float> values) {
  std::vector<std::uint8_t> bytes(std::begin(kTensorMagic), std::end(kTensorMagic));
  put_u32(bytes, checked_u32(values.size()));
  for (float v : values) put_u32(bytes, std::bit_cast<std::uint32_t>(v));
  dump(path, bytes);
}

std::vector<float> read_tensor(const std::string& path) {
  const auto bytes = slurp(path);
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kTensorMagic, 4) != 0) {
    throw DecodeFormat(path + " is not a tensor file");
  }
  const std::size_t n = get_u32(bytes.data() + 4);
  if (bytes.size() != 8 + 4 * n) throw DecodeFormat(path + " has the wrong length");
  std::vector<float> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = std::bit_cast<float>(get_u32(bytes.data() + 8 + 4 * i));
  return values;
}

ChunkStream quantize_tensor(std::span<const float> values, const QuantConfig& config) {
  config.validate();
  const auto cs = static_cast<std::size_t>(config.chunk_size);
  std::vector<float> padded(values.begin(), values.end());
  padded.resize((values.size() + cs - 1) / cs * cs, 0.0f);
  return {values.size(), encode_block(padded, config)};
}

std::vector<float> dequantize_stream(const ChunkStream& stream) {
  auto values = decode_block(stream.chunks);
  if (values.size() < stream.element_count) throw DecodeFormat("stream holds too few elements");
  values.resize(stream.element_count);
  return values;
}

std::vector<std::uint8_t> serialize_stream(const ChunkStream& stream) {
  std::vector<std::uint8_t> bytes(std::begin(kStreamMagic), std::end(kStreamMagic));
  put_u32(bytes, checked_u32(stream.element_count));
  put_u32(bytes, checked_u32(stream.chunks.size()));
  for (const auto& c : stream.chunks) c.serialize_into(bytes);
  return bytes;
}

ChunkStream parse_stream(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kStreamMagic, 4) != 0) {
    throw DecodeFormat("not a quantized stream");
  }
  ChunkStream s;
  s.element_count = get_u32(bytes.data() + 4);
  const std::size_t count = get_u32(bytes.data() + 8);
  std::size_t off = 12;
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t used = 0;
    s.chunks.push_back(QuantizedChunk::deserialize(bytes.subspan(off), &used));
    off += used;
  }
  if (off != bytes.size()) throw DecodeFormat("trailing bytes after the last chunk");
  return s;
}

void write_stream(const std::string& path, const ChunkStream& stream) {
  dump(path, serialize_stream(stream));
}

ChunkStream read_stream(const std::string& path) { return parse_stream(slurp(path)); }

}  // namespace flashcomm
