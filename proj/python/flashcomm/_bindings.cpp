#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "flashcomm/bitpack.hpp"
#include "flashcomm/codec.hpp"
#include "flashcomm/error.hpp"
#include "flashcomm/simulate.hpp"
#include "flashcomm/synthetic.hpp"
#include "flashcomm/table.hpp"
#include "flashcomm/tensor_io.hpp"
#include "flashcomm/topology.hpp"

namespace py = pybind11;
using namespace flashcomm;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

std::span<const float> view(const FloatArray& a) {
  if (a.ndim() != 1) throw InvalidData("expected a one-dimensional array");
  return {a.data(), static_cast<std::size_t>(a.size())};
}

FloatArray to_array(const std::vector<float>& v) {
  FloatArray out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::span<const std::uint8_t> byte_view(const py::bytes& b) {
  const std::string_view s = b;
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

py::bytes to_bytes(const std::vector<std::uint8_t>& v) {
  return {reinterpret_cast<const char*>(v.data()), v.size()};
}

SimOptions sim_options(const std::string& topology, const std::vector<int>& bitwidths,
                       std::size_t elements, std::uint64_t seed, int microchunks,
                       std::optional<Scheme> scheme, std::optional<int> group_size,
                       ScaleEncoding scale_encoding) {
  SimOptions o;
  o.topology = topology;
  o.bitwidths = bitwidths;
  o.elements = elements;
  o.seed = seed;
  o.microchunks = microchunks;
  o.scheme = scheme;
  o.group_size = group_size;
  o.scale_encoding = scale_encoding;
  return o;
}

}  // namespace

PYBIND11_MODULE(_flashcomm, m) {
  m.doc() = "Any-bit quantization codec and quantized collective simulator";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidConfig>(m, "InvalidConfig", error.ptr());
  py::register_exception<InvalidData>(m, "InvalidData", error.ptr());
  py::register_exception<EncodeRange>(m, "EncodeRange", error.ptr());
  py::register_exception<DecodeFormat>(m, "DecodeFormat", error.ptr());
  py::register_exception<NotApplicable>(m, "NotApplicable", error.ptr());
  py::register_exception<IoError>(m, "IoError", error.ptr());

  py::enum_<Scheme>(m, "Scheme")
      .value("RTN", Scheme::Rtn)
      .value("SPIKE_RESERVING", Scheme::SpikeReserving);
  py::enum_<ScaleEncoding>(m, "ScaleEncoding")
      .value("BF16", ScaleEncoding::Bf16)
      .value("INTLOG", ScaleEncoding::IntLog);

  py::class_<QuantConfig>(m, "QuantConfig")
      .def(py::init<>())
      .def_static("for_bitwidth", &QuantConfig::for_bitwidth, py::arg("bitwidth"))
      .def_readwrite("bitwidth", &QuantConfig::bitwidth)
      .def_readwrite("group_size", &QuantConfig::group_size)
      .def_readwrite("scheme", &QuantConfig::scheme)
      .def_readwrite("scale_encoding", &QuantConfig::scale_encoding)
      .def_readwrite("theta", &QuantConfig::theta)
      .def_readwrite("chunk_size", &QuantConfig::chunk_size)
      .def("validate", &QuantConfig::validate)
      .def(py::self == py::self)
      .def("__repr__", [](const QuantConfig& c) {
        return "QuantConfig(bitwidth=" + std::to_string(c.bitwidth) +
               ", group_size=" + std::to_string(c.group_size) +
               ", scheme=" + (c.scheme == Scheme::Rtn ? "RTN" : "SPIKE_RESERVING") +
               ", scale_encoding=" + (c.scale_encoding == ScaleEncoding::Bf16 ? "BF16" : "INTLOG") +
               ", theta=" + std::to_string(c.theta) +
               ", chunk_size=" + std::to_string(c.chunk_size) + ")";
      });

  m.def("bit_split", &bit_split, py::arg("bitwidth"));
  m.def("packed_bytes", &packed_bytes, py::arg("bitwidth"), py::arg("count"));
  m.def(
      "pack_codes",
      [](const std::vector<std::uint8_t>& codes, int bitwidth) {
        py::list planes;
        for (const auto& p : pack_codes(codes, bitwidth)) planes.append(to_bytes(p));
        return planes;
      },
      py::arg("codes"), py::arg("bitwidth"),
      "Pack codes (length a multiple of 8) into one bytes object per unit.");
  m.def(
      "unpack_codes",
      [](const std::vector<py::bytes>& planes, int bitwidth, std::size_t count) {
        std::vector<Plane> p;
        for (const auto& b : planes) {
          const auto v = byte_view(b);
          p.emplace_back(v.begin(), v.end());
        }
        return unpack_codes(p, bitwidth, count);
      },
      py::arg("planes"), py::arg("bitwidth"), py::arg("count"));

  m.def("scale_to_int", &scale_to_int, py::arg("scale"), py::arg("theta") = 10);
  m.def("int_to_scale", &int_to_scale, py::arg("value"), py::arg("theta") = 10);

  m.def("footprint_bytes", &footprint_bytes, py::arg("config"), py::arg("n"));
  m.def(
      "footprint_breakdown",
      [](const QuantConfig& c, std::size_t n) {
        const auto f = footprint_breakdown(c, n);
        py::dict d;
        d["quantized"] = f.quantized;
        d["scale_zero"] = f.scale_zero;
        d["spikes"] = f.spikes;
        d["meta"] = f.meta();
        d["total"] = f.total();
        return d;
      },
      py::arg("config"), py::arg("n"));

  m.def(
      "encode_chunk",
      [](const FloatArray& values, const QuantConfig& c) {
        return to_bytes(encode_chunk(view(values), c).serialize());
      },
      py::arg("values"), py::arg("config"),
      "Encode exactly config.chunk_size values into one serialized chunk.");
  m.def(
      "decode_chunk",
      [](const py::bytes& data) {
        std::size_t used = 0;
        const auto chunk = QuantizedChunk::deserialize(byte_view(data), &used);
        if (used != byte_view(data).size()) throw DecodeFormat("trailing bytes after chunk");
        return to_array(decode_chunk(chunk));
      },
      py::arg("data"));
  m.def(
      "quantize",
      [](const FloatArray& values, const QuantConfig& c) {
        return to_bytes(serialize_stream(quantize_tensor(view(values), c)));
      },
      py::arg("values"), py::arg("config"),
      "Encode a vector of any length as a chunk stream.");
  m.def(
      "dequantize",
      [](const py::bytes& data) { return to_array(dequantize_stream(parse_stream(byte_view(data)))); },
      py::arg("data"));
  m.def(
      "quantize_dequantize",
      [](const FloatArray& values, const QuantConfig& c) {
        return to_array(quantize_dequantize(view(values), c));
      },
      py::arg("values"), py::arg("config"));

  m.def(
      "gen_synthetic",
      [](std::size_t n, std::uint64_t seed, bool spiky, double mean, double stddev,
         double spike_rate, double spike_magnitude) {
        SyntheticSpec s;
        s.n = n;
        s.seed = seed;
        s.distribution = spiky ? Distribution::GaussianWithSpikes : Distribution::Gaussian;
        s.mean = mean;
        s.stddev = stddev;
        s.spike_rate = spike_rate;
        s.spike_magnitude = spike_magnitude;
        return to_array(gen_synthetic(s));
      },
      py::arg("n"), py::arg("seed") = 0, py::arg("spiky") = true, py::arg("mean") = 0.0,
      py::arg("stddev") = 1.0, py::arg("spike_rate") = 1.0 / 64.0,
      py::arg("spike_magnitude") = 50.0);

  m.def("preset_names", &preset_names);
  m.def(
      "topology_json",
      [](const std::string& preset_or_path) { return topology_to_json(load_topology(preset_or_path)).dump(); },
      py::arg("preset_or_path"));

  m.def(
      "simulate_allreduce_json",
      [](const std::vector<std::string>& algos, const std::vector<int>& bitwidths,
         std::size_t elements, std::uint64_t seed, const std::string& topology, int microchunks,
         std::optional<Scheme> scheme, std::optional<int> group_size, ScaleEncoding enc) {
        std::vector<Algo> a;
        for (const auto& s : algos) a.push_back(parse_algo(s));
        const auto o =
            sim_options(topology, bitwidths, elements, seed, microchunks, scheme, group_size, enc);
        return to_json(simulate_allreduce(a, o)).dump();
      },
      py::arg("algos"), py::arg("bitwidths"), py::arg("elements"), py::arg("seed"),
      py::arg("topology"), py::arg("microchunks"), py::arg("scheme"), py::arg("group_size"),
      py::arg("scale_encoding"));
  m.def(
      "simulate_all2all_json",
      [](const std::vector<int>& bitwidths, std::size_t elements, std::uint64_t seed,
         const std::string& topology, std::optional<Scheme> scheme, std::optional<int> group_size,
         ScaleEncoding enc) {
        const auto o = sim_options(topology, bitwidths, elements, seed, 1, scheme, group_size, enc);
        return to_json(simulate_all2all(o)).dump();
      },
      py::arg("bitwidths"), py::arg("elements"), py::arg("seed"), py::arg("topology"),
      py::arg("scheme"), py::arg("group_size"), py::arg("scale_encoding"));
}
