// fcv2: any-bit quantization codec and collective simulator front end.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flashcomm/codec.hpp"
#include "flashcomm/error.hpp"
#include "flashcomm/simulate.hpp"
#include "flashcomm/synthetic.hpp"
#include "flashcomm/table.hpp"
#include "flashcomm/tensor_io.hpp"

namespace {

using namespace flashcomm;

Scheme parse_scheme(const std::string& s) {
  if (s == "rtn") return Scheme::Rtn;
  if (s == "sr") return Scheme::SpikeReserving;
  throw InvalidConfig("unknown scheme '" + s + "' (expected rtn or sr)");
}

std::string scheme_name(Scheme s) { return s == Scheme::Rtn ? "rtn" : "sr"; }

ScaleEncoding parse_encoding(const std::string& s) {
  if (s == "bf16") return ScaleEncoding::Bf16;
  if (s == "intlog") return ScaleEncoding::IntLog;
  throw InvalidConfig("unknown scale encoding '" + s + "' (expected bf16 or intlog)");
}

std::string encoding_name(ScaleEncoding e) { return e == ScaleEncoding::Bf16 ? "bf16" : "intlog"; }

Distribution parse_distribution(const std::string& s) {
  if (s == "gaussian") return Distribution::Gaussian;
  if (s == "spiky") return Distribution::GaussianWithSpikes;
  throw InvalidConfig("unknown distribution '" + s + "' (expected gaussian or spiky)");
}

// --seed wins, then FCV2_SEED, then 0.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("FCV2_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw InvalidConfig(std::string("FCV2_SEED is not an integer: ") + env);
    }
  }
  return 0;
}

struct CodecFlags {
  int bitwidth = 8;
  std::optional<int> group_size;
  std::optional<std::string> scheme;
  std::string scale_encoding = "bf16";
  int theta = 10;
  int chunk_size = 4096;

  void add(CLI::App* app) {
    app->add_option("--bitwidth,-b", bitwidth, "Code width in bits (2-8)")->required();
    app->add_option("--group-size", group_size, "Elements per quantization group");
    app->add_option("--scheme", scheme, "rtn or sr (default: sr at INT2, rtn otherwise)");
    app->add_option("--scale-encoding", scale_encoding, "bf16 or intlog");
    app->add_option("--theta", theta, "Log-scale multiplier for intlog scales");
    app->add_option("--chunk-size", chunk_size, "Elements per chunk");
  }

  QuantConfig config() const {
    QuantConfig c = QuantConfig::for_bitwidth(bitwidth);
    if (group_size) c.group_size = *group_size;
    if (scheme) c.scheme = parse_scheme(*scheme);
    c.scale_encoding = parse_encoding(scale_encoding);
    c.theta = theta;
    c.chunk_size = chunk_size;
    c.validate();
    return c;
  }
};

struct PayloadFlags {
  std::string distribution = "spiky";
  double mean = 0.0;
  double stddev = 1.0;
  double spike_rate = 1.0 / 64.0;
  double spike_magnitude = 50.0;

  void add(CLI::App* app) {
    app->add_option("--distribution", distribution, "gaussian or spiky");
    app->add_option("--mean", mean);
    app->add_option("--stddev", stddev);
    app->add_option("--spike-rate", spike_rate, "Probability that an element is a spike");
    app->add_option("--spike-magnitude", spike_magnitude, "Spike offset in standard deviations");
  }

  SyntheticSpec spec(std::size_t n, std::uint64_t seed) const {
    SyntheticSpec s;
    s.distribution = parse_distribution(distribution);
    s.mean = mean;
    s.stddev = stddev;
    s.spike_rate = spike_rate;
    s.spike_magnitude = spike_magnitude;
    s.n = n;
    s.seed = seed;
    s.validate();
    return s;
  }
};

struct OutputFlags {
  std::string format = "csv";
  std::string path = "-";

  void add(CLI::App* app) {
    app->add_option("--out", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app->add_option("--output,-o", path, "Output file ('-' for stdout)");
  }

  void emit(const Table& t) const { emit_table(t, parse_table_format(format), path); }
};

struct SimFlags {
  std::string topology = "L40";
  std::vector<int> bitwidths{8};
  std::optional<std::string> scheme;
  std::optional<int> group_size;
  std::string scale_encoding = "bf16";
  std::size_t elements = 1 << 19;
  std::optional<std::uint64_t> seed;
  int microchunks = 8;
  double quantize_cost = 0.0;
  double dequantize_cost = 0.0;
  double reduce_cost = 0.0;
  std::string timeline;
  PayloadFlags payload;
  OutputFlags out;

  void add(CLI::App* app) {
    app->add_option("--topology", topology, "Preset (L40, A100, H800, H20) or JSON file");
    app->add_option("--bitwidth,-b", bitwidths, "One or more code widths");
    app->add_option("--scheme", scheme, "rtn or sr (default: sr at INT2, rtn otherwise)");
    app->add_option("--group-size", group_size);
    app->add_option("--scale-encoding", scale_encoding, "bf16 or intlog");
    app->add_option("--elements,-n", elements, "Elements per rank");
    app->add_option("--seed", seed, "RNG seed (falls back to FCV2_SEED)");
    app->add_option("--microchunks,-k", microchunks, "Pipeline depth for hier-pp")
        ->check(CLI::PositiveNumber);
    app->add_option("--quantize-cost", quantize_cost, "Seconds per element per SM");
    app->add_option("--dequantize-cost", dequantize_cost, "Seconds per element per SM");
    app->add_option("--reduce-cost", reduce_cost, "Seconds per element per SM");
    app->add_option("--timeline", timeline, "Write the last schedule as a JSON timeline");
    payload.add(app);
    out.add(app);
  }

  SimOptions options() const {
    SimOptions o;
    o.topology = topology;
    o.bitwidths = bitwidths;
    if (scheme) o.scheme = parse_scheme(*scheme);
    o.group_size = group_size;
    o.scale_encoding = parse_encoding(scale_encoding);
    o.elements = elements;
    o.seed = resolve_seed(seed);
    o.microchunks = microchunks;
    o.cost.quantize_per_element = quantize_cost;
    o.cost.dequantize_per_element = dequantize_cost;
    o.cost.reduce_per_element = reduce_cost;
    o.payload = payload.spec(elements, o.seed);
    return o;
  }

  void write_timeline(const Schedule& s) const {
    if (timeline.empty()) return;
    std::ofstream f(timeline);
    if (!f) throw IoError("cannot write " + timeline);
    f << schedule_timeline(s).dump(1) << '\n';
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fcv2: any-bit quantized communication codec and collective simulator"};
  app.require_subcommand(1);

  // quantize / dequantize
  std::string q_in, q_out;
  CodecFlags q_codec;
  auto* quantize = app.add_subcommand("quantize", "Encode a tensor file into a chunk stream");
  quantize->add_option("--input,-i", q_in, "Tensor file (FCTN)")->required();
  quantize->add_option("--output,-o", q_out, "Chunk stream file")->required();
  q_codec.add(quantize);

  std::string d_in, d_out;
  auto* dequantize = app.add_subcommand("dequantize", "Decode a chunk stream into a tensor file");
  dequantize->add_option("--input,-i", d_in, "Chunk stream file")->required();
  dequantize->add_option("--output,-o", d_out, "Tensor file (FCTN)")->required();

  // gen-synthetic
  std::string g_out;
  std::size_t g_n = 4096;
  std::optional<std::uint64_t> g_seed;
  PayloadFlags g_payload;
  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic activation tensor");
  gen->add_option("--output,-o", g_out, "Tensor file (FCTN)")->required();
  gen->add_option("--elements,-n", g_n);
  gen->add_option("--seed", g_seed, "RNG seed (falls back to FCV2_SEED)");
  g_payload.add(gen);

  // footprint
  int f_bitwidth = 2;
  std::optional<int> f_group;
  std::string f_scheme = "sr";
  std::vector<std::string> f_encodings{"bf16", "intlog"};
  std::size_t f_n = 4096;
  OutputFlags f_out;
  auto* footprint = app.add_subcommand("footprint", "Payload bytes of a quantized vector");
  footprint->add_option("--bitwidth,-b", f_bitwidth);
  footprint->add_option("--group-size", f_group);
  footprint->add_option("--scheme", f_scheme, "rtn or sr");
  footprint->add_option("--scale-encoding", f_encodings, "One or more of bf16, intlog");
  footprint->add_option("--elements,-n", f_n);
  f_out.add(footprint);

  // sweep-codec
  std::vector<int> s_bits{2, 3, 4, 5, 6, 7, 8};
  std::vector<std::string> s_schemes{"rtn", "sr"};
  std::vector<int> s_groups;
  std::string s_encoding = "bf16";
  std::size_t s_n = 1 << 16;
  std::optional<std::uint64_t> s_seed;
  std::string s_input;
  PayloadFlags s_payload;
  OutputFlags s_out;
  auto* sweep = app.add_subcommand("sweep-codec", "Reconstruction error per bitwidth and scheme");
  sweep->add_option("--bitwidths", s_bits);
  sweep->add_option("--schemes", s_schemes);
  sweep->add_option("--group-size", s_groups, "Group sizes (default per bitwidth)");
  sweep->add_option("--scale-encoding", s_encoding);
  sweep->add_option("--elements,-n", s_n);
  sweep->add_option("--seed", s_seed, "RNG seed (falls back to FCV2_SEED)");
  sweep->add_option("--input,-i", s_input, "Sweep a tensor file instead of synthetic data");
  s_payload.add(sweep);
  s_out.add(sweep);

  // simulate-allreduce / simulate-all2all
  std::vector<std::string> a_algos{"ring", "two-step", "hier", "hier-pp"};
  SimFlags a_flags;
  auto* allreduce = app.add_subcommand("simulate-allreduce", "Simulate quantized AllReduce");
  allreduce->add_option("--algo", a_algos, "ring, two-step, hier, hier-pp");
  a_flags.add(allreduce);

  SimFlags e_flags;
  auto* all2all = app.add_subcommand("simulate-all2all", "Simulate quantized All2All dispatch");
  e_flags.add(all2all);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*quantize) {
      const auto values = read_tensor(q_in);
      write_stream(q_out, quantize_tensor(values, q_codec.config()));
    } else if (*dequantize) {
      write_tensor(d_out, dequantize_stream(read_stream(d_in)));
    } else if (*gen) {
      write_tensor(g_out, gen_synthetic(g_payload.spec(g_n, resolve_seed(g_seed))));
    } else if (*footprint) {
      Table t{{"bitwidth", "group_size", "scheme", "scale_encoding", "data", "quantized",
               "scale_zero", "spikes", "meta", "total"},
              {}};
      for (const auto& enc : f_encodings) {
        QuantConfig c = QuantConfig::for_bitwidth(f_bitwidth);
        if (f_group) c.group_size = *f_group;
        c.scheme = parse_scheme(f_scheme);
        c.scale_encoding = parse_encoding(enc);
        if (c.chunk_size % c.group_size != 0) c.chunk_size = c.group_size;
        const auto fp = footprint_breakdown(c, f_n);
        t.add_row({static_cast<std::int64_t>(c.bitwidth), static_cast<std::int64_t>(c.group_size),
                   scheme_name(c.scheme), encoding_name(c.scale_encoding),
                   static_cast<std::int64_t>(f_n * kRawBytesPerElement),
                   static_cast<std::int64_t>(fp.quantized), static_cast<std::int64_t>(fp.scale_zero),
                   static_cast<std::int64_t>(fp.spikes), static_cast<std::int64_t>(fp.meta()),
                   static_cast<std::int64_t>(fp.total())});
      }
      f_out.emit(t);
    } else if (*sweep) {
      SweepOptions o;
      o.bitwidths = s_bits;
      o.schemes.clear();
      for (const auto& s : s_schemes) o.schemes.push_back(parse_scheme(s));
      o.group_sizes = s_groups;
      o.scale_encoding = parse_encoding(s_encoding);
      const auto values = s_input.empty()
                              ? gen_synthetic(s_payload.spec(s_n, resolve_seed(s_seed)))
                              : read_tensor(s_input);
      const auto report = sweep_codec(values, o);
      Table t{{"bitwidth", "scheme", "group_size", "mse", "max_abs_err", "sqnr_db",
               "footprint_bytes"},
              {}};
      for (const auto& r : report.rows) {
        t.add_row({static_cast<std::int64_t>(r.bitwidth), scheme_name(r.scheme),
                   static_cast<std::int64_t>(r.group_size), r.mse, r.max_abs_err, r.sqnr_db,
                   static_cast<std::int64_t>(r.footprint_bytes)});
      }
      s_out.emit(t);
    } else if (*allreduce) {
      std::vector<Algo> algos;
      for (const auto& a : a_algos) algos.push_back(parse_algo(a));
      Schedule last;
      const auto table = simulate_allreduce(algos, a_flags.options(), &last);
      a_flags.out.emit(table);
      a_flags.write_timeline(last);
    } else if (*all2all) {
      Schedule last;
      const auto table = simulate_all2all(e_flags.options(), &last);
      e_flags.out.emit(table);
      e_flags.write_timeline(last);
    }
  } catch (const flashcomm::Error& e) {
    std::cerr << "fcv2: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
