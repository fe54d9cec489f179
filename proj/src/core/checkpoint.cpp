#include "sbbts/core/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "sbbts/errors.hpp"

namespace sbbts::core {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'S', 'B', 'B', 'T', 'S', 'C', 'K', 'P'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void write_pod(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::istream& is, const std::string& path) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) throw SchemaError("checkpoint " + path + ": truncated");
  return value;
}

}  // namespace

json config_to_json(const SBBTSConfig& c) {
  return json{{"beta", c.beta},
              {"K", c.outer_iterations},
              {"n_epoch", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"d_model", c.d_model},
              {"n_head", c.n_head},
              {"ffn_mult", c.ffn_mult},
              {"N_pi", c.euler_steps},
              {"xi_frac", c.xi_frac},
              {"sb_mode", c.sb_mode},
              {"clamp_training_time", c.clamp_training_time},
              {"reference_noise", c.reference_noise},
              {"scaling", to_string(c.scaling)}};
}

SBBTSConfig config_from_json(const json& j, SBBTSConfig c) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const json& v = it.value();
    try {
      if (key == "beta") c.beta = v.get<double>();
      else if (key == "K") c.outer_iterations = v.get<std::size_t>();
      else if (key == "n_epoch") c.epochs = v.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "d_model") c.d_model = v.get<std::size_t>();
      else if (key == "n_head") c.n_head = v.get<std::size_t>();
      else if (key == "ffn_mult") c.ffn_mult = v.get<std::size_t>();
      else if (key == "N_pi") c.euler_steps = v.get<std::size_t>();
      else if (key == "xi_frac") c.xi_frac = v.get<double>();
      else if (key == "sb_mode") c.sb_mode = v.get<bool>();
      else if (key == "clamp_training_time") c.clamp_training_time = v.get<bool>();
      else if (key == "reference_noise") c.reference_noise = v.get<bool>();
      else if (key == "scaling") c.scaling = scaling_mode_from_string(v.get<std::string>());
      else throw ConfigError("config: unknown key '" + key + "'");
    } catch (const json::exception& e) {
      throw ConfigError("config: bad value for '" + key + "': " + e.what());
    }
  }
  return c;
}

json scaler_to_json(const ScalerState& s) {
  return json{{"mode", to_string(s.mode)}, {"t0", s.t0},           {"shift", s.shift},
              {"drift_rate", s.drift_rate}, {"scale", s.scale}, {"sigma_bar", s.sigma_bar}};
}

ScalerState scaler_from_json(const json& j) {
  ScalerState s;
  try {
    s.mode = scaling_mode_from_string(j.at("mode").get<std::string>());
    s.t0 = j.at("t0").get<double>();
    s.shift = j.at("shift").get<std::vector<double>>();
    s.drift_rate = j.at("drift_rate").get<std::vector<double>>();
    s.scale = j.at("scale").get<std::vector<double>>();
    s.sigma_bar = j.at("sigma_bar").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("scaler: ") + e.what());
  }
  if (s.shift.size() != s.scale.size() || s.drift_rate.size() != s.scale.size()) {
    throw SchemaError("scaler: inconsistent dimensions");
  }
  return s;
}

std::string grid_hash_hex(const stochastic::TimeGrid& grid) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << grid.hash();
  return os.str();
}

void save_checkpoint(const SBBTSModel& model, const std::string& path) {
  json params = json::array();
  std::uint64_t offset = 0;
  const auto named = model.net.named_parameters();
  for (const auto& [name, t] : named) {
    params.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.numel();
  }
  const auto& nc = model.net.config();
  json header{{"format", "sbbts-checkpoint"},
              {"version", kCheckpointVersion},
              {"config", config_to_json(model.config)},
              {"beta", model.beta},
              {"scaler", scaler_to_json(model.scaler)},
              {"grid", model.grid.dates()},
              {"grid_hash", grid_hash_hex(model.grid)},
              {"columns", model.columns},
              {"initial_values", model.initial_values},
              {"net", {{"dim", nc.dim}, {"d_model", nc.d_model}, {"n_head", nc.n_head}, {"ffn_mult", nc.ffn_mult}}},
              {"parameters", params},
              {"payload_values", offset}};
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + path);
  os.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(os, kCheckpointVersion);
  write_pod<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : named) {
    os.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!os) throw IoError("failed writing checkpoint " + path);
}

SBBTSModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw SchemaError("checkpoint " + path + ": bad magic header");
  }
  const auto version = read_pod<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    throw SchemaError("checkpoint " + path + ": file version " + std::to_string(version) +
                      ", this build reads version " + std::to_string(kCheckpointVersion));
  }
  const auto header_len = read_pod<std::uint64_t>(is, path);
  if (header_len > (1ULL << 30)) throw SchemaError("checkpoint " + path + ": implausible header length");
  std::string text(header_len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(header_len))) throw SchemaError("checkpoint " + path + ": truncated header");

  SBBTSModel model;
  try {
    const json header = json::parse(text);
    if (header.at("format") != "sbbts-checkpoint") throw SchemaError("checkpoint " + path + ": unknown format");
    model.config = config_from_json(header.at("config"));
    model.beta = header.at("beta").get<double>();
    model.scaler = scaler_from_json(header.at("scaler"));
    model.grid = stochastic::TimeGrid(header.at("grid").get<std::vector<double>>());
    if (header.at("grid_hash").get<std::string>() != grid_hash_hex(model.grid)) {
      throw SchemaError("checkpoint " + path + ": grid hash does not match stored grid");
    }
    if (header.contains("initial_values")) {
      model.initial_values = header.at("initial_values").get<std::vector<double>>();
    }
    if (header.contains("columns")) model.columns = header.at("columns").get<std::vector<std::string>>();
    const auto& nj = header.at("net");
    DriftNetConfig nc{nj.at("dim").get<std::size_t>(), nj.at("d_model").get<std::size_t>(),
                      nj.at("n_head").get<std::size_t>(), nj.at("ffn_mult").get<std::size_t>()};
    stochastic::RandomSource dummy(0);
    model.net = DriftNet(nc, dummy);

    const auto total = header.at("payload_values").get<std::uint64_t>();
    std::vector<double> payload(total);
    if (!is.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(total * sizeof(double)))) {
      throw SchemaError("checkpoint " + path + ": truncated payload");
    }
    std::set<std::string> loaded;
    for (const auto& p : header.at("parameters")) {
      const auto name = p.at("name").get<std::string>();
      const auto shape = p.at("shape").get<std::vector<std::size_t>>();
      const auto off = p.at("offset").get<std::uint64_t>();
      const std::size_t count = numerics::shape_numel(shape);
      if (off + count > total) throw SchemaError("checkpoint " + path + ": parameter " + name + " exceeds payload");
      model.net.load_parameter(name, std::span<const double>(payload.data() + off, count));
      loaded.insert(name);
    }
    for (const auto& [name, t] : model.net.named_parameters()) {
      if (!loaded.count(name)) throw SchemaError("checkpoint " + path + ": missing parameter " + name);
    }
  } catch (const json::exception& e) {
    throw SchemaError("checkpoint " + path + ": " + e.what());
  }
  return model;
}

}  // namespace sbbts::core
