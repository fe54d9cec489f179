#include "sbbts/cli/commands.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "sbbts/calib/heston_qmle.hpp"
#include "sbbts/cli/io.hpp"
#include "sbbts/core/checkpoint.hpp"
#include "sbbts/core/generator.hpp"
#include "sbbts/core/trainer.hpp"
#include "sbbts/errors.hpp"
#include "sbbts/eval/metrics.hpp"
#include "sbbts/factors/factors.hpp"
#include "sbbts/log.hpp"
#include "sbbts/parallel.hpp"

namespace sbbts::cli {

using nlohmann::json;

namespace {

// Child streams of the run seed, one per command.
constexpr std::uint64_t kSimulateStream = 1;
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kInitialValueStream = 3;
constexpr std::uint64_t kGenerateStream = 4;
constexpr std::uint64_t kClusterStream = 5;
constexpr std::uint64_t kAugmentStream = 6;

std::filesystem::path out_dir(const RunConfig& c) {
  std::filesystem::path dir(c.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory " + c.out);
  return dir;
}

std::string out_file(const RunConfig& c, const std::string& name) { return (out_dir(c) / name).string(); }

void write_resolved(const RunConfig& c) {
  write_text(out_file(c, "resolved_config.json"), run_config_to_json(c).dump(2) + "\n");
}

const std::string& require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string("missing required input ") + flag);
  return value;
}

json interval_json(const stochastic::Interval& iv) { return json::array({iv.lo, iv.hi}); }

stochastic::Interval interval_from(const json& v, const std::string& key) {
  if (!v.is_array() || v.size() != 2) throw ConfigError("config: '" + key + "' must be a [lo, hi] pair");
  return {v[0].get<double>(), v[1].get<double>()};
}

template <class F>
void each_key(const json& j, const std::string& section, F&& f) {
  if (!j.is_object()) throw ConfigError("config: section '" + section + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    try {
      if (!f(it.key(), it.value())) throw ConfigError("config: unknown key '" + section + "." + it.key() + "'");
    } catch (const json::exception& e) {
      throw ConfigError("config: bad value for '" + section + "." + it.key() + "': " + e.what());
    }
  }
}

// Simple returns when the column stays positive, increments otherwise.
struct ColumnReturns {
  std::vector<std::vector<double>> per_path;
  std::vector<double> pooled;
  bool relative = true;
};

ColumnReturns column_returns(const stochastic::TimeSeriesDataset& d, std::size_t j) {
  ColumnReturns out;
  for (std::size_t m = 0; m < d.paths && out.relative; ++m)
    for (std::size_t i = 0; i < d.dates(); ++i)
      if (!(d.at(m, i, j) > 0.0)) out.relative = false;
  out.per_path.resize(d.paths);
  for (std::size_t m = 0; m < d.paths; ++m) {
    for (std::size_t i = 0; i + 1 < d.dates(); ++i) {
      const double a = d.at(m, i, j), b = d.at(m, i + 1, j);
      const double r = out.relative ? b / a - 1.0 : b - a;
      out.per_path[m].push_back(r);
      out.pooled.push_back(r);
    }
  }
  return out;
}

// Mean over paths of the per-path ACF; constant paths are skipped.
std::vector<double> mean_acf(const std::vector<std::vector<double>>& paths, std::size_t max_lag, bool squared,
                             std::size_t& skipped) {
  std::vector<double> sum(max_lag + 1, 0.0);
  std::size_t used = 0;
  for (const auto& p : paths) {
    const auto a = eval::acf(p, max_lag, squared);
    if (a.undefined) {
      ++skipped;
      continue;
    }
    for (std::size_t l = 0; l <= max_lag; ++l) sum[l] += a.values[l];
    ++used;
  }
  for (auto& v : sum) v = used ? v / static_cast<double>(used) : std::nan("");
  return sum;
}

}  // namespace

json run_config_to_json(const RunConfig& c) {
  const auto& r = c.heston.ranges;
  return json{
      {"schema", kRunConfigSchema},
      {"command", c.command},
      {"seed", c.seed},
      {"out", c.out},
      {"model", core::config_to_json(c.model)},
      {"heston",
       {{"paths", c.heston.paths},
        {"length", c.heston.length},
        {"dt", c.heston.dt},
        {"x0", c.heston.x0},
        {"ranges",
         {{"kappa", interval_json(r.kappa)},
          {"theta", interval_json(r.theta)},
          {"xi_vol", interval_json(r.xi_vol)},
          {"rho", interval_json(r.rho)},
          {"r", interval_json(r.r)}}}}},
      {"inputs",
       {{"data", c.inputs.data},
        {"checkpoint", c.inputs.checkpoint},
        {"resume", c.inputs.resume},
        {"real", c.inputs.real},
        {"synth", c.inputs.synth},
        {"synth_sb", c.inputs.synth_sb},
        {"returns", c.inputs.returns},
        {"factor_model", c.inputs.factor_model}}},
      {"generate", {{"paths", c.generate.paths}}},
      {"report", {{"bins", c.report.bins}, {"max_lag", c.report.max_lag}}},
      {"factors",
       {{"m", c.factors.m},
        {"k", c.factors.k},
        {"window", c.factors.window},
        {"stride", c.factors.stride},
        {"standardize", c.factors.standardize},
        {"baseline", c.factors.baseline},
        {"lambda", c.factors.lambda},
        {"copies", c.factors.copies}}}};
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
  each_key(j, "", [&](const std::string& key, const json& v) {
    if (key == "schema") {
      if (v.get<std::string>() != kRunConfigSchema) {
        throw ConfigError("config: schema '" + v.get<std::string>() + "' is not " + kRunConfigSchema);
      }
    } else if (key == "command") {
      c.command = v.get<std::string>();
    } else if (key == "seed") {
      c.seed = v.get<std::uint64_t>();
    } else if (key == "out") {
      c.out = v.get<std::string>();
    } else if (key == "model") {
      c.model = core::config_from_json(v, c.model);
    } else if (key == "heston") {
      each_key(v, "heston", [&](const std::string& k, const json& x) {
        if (k == "paths") c.heston.paths = x.get<std::size_t>();
        else if (k == "length") c.heston.length = x.get<std::size_t>();
        else if (k == "dt") c.heston.dt = x.get<double>();
        else if (k == "x0") c.heston.x0 = x.get<double>();
        else if (k == "ranges") {
          auto& r = c.heston.ranges;
          each_key(x, "heston.ranges", [&](const std::string& p, const json& iv) {
            if (p == "kappa") r.kappa = interval_from(iv, p);
            else if (p == "theta") r.theta = interval_from(iv, p);
            else if (p == "xi_vol") r.xi_vol = interval_from(iv, p);
            else if (p == "rho") r.rho = interval_from(iv, p);
            else if (p == "r") r.r = interval_from(iv, p);
            else return false;
            return true;
          });
        } else return false;
        return true;
      });
    } else if (key == "inputs") {
      each_key(v, "inputs", [&](const std::string& k, const json& x) {
        auto& in = c.inputs;
        std::string* slot = k == "data"           ? &in.data
                            : k == "checkpoint"   ? &in.checkpoint
                            : k == "resume"       ? &in.resume
                            : k == "real"         ? &in.real
                            : k == "synth"        ? &in.synth
                            : k == "synth_sb"     ? &in.synth_sb
                            : k == "returns"      ? &in.returns
                            : k == "factor_model" ? &in.factor_model
                                                  : nullptr;
        if (!slot) return false;
        *slot = x.get<std::string>();
        return true;
      });
    } else if (key == "generate") {
      each_key(v, "generate", [&](const std::string& k, const json& x) {
        if (k != "paths") return false;
        c.generate.paths = x.get<std::size_t>();
        return true;
      });
    } else if (key == "report") {
      each_key(v, "report", [&](const std::string& k, const json& x) {
        if (k == "bins") c.report.bins = x.get<std::size_t>();
        else if (k == "max_lag") c.report.max_lag = x.get<std::size_t>();
        else return false;
        return true;
      });
    } else if (key == "factors") {
      each_key(v, "factors", [&](const std::string& k, const json& x) {
        auto& f = c.factors;
        if (k == "m") f.m = x.get<std::size_t>();
        else if (k == "k") f.k = x.get<std::size_t>();
        else if (k == "window") f.window = x.get<std::size_t>();
        else if (k == "stride") f.stride = x.get<std::size_t>();
        else if (k == "standardize") f.standardize = x.get<bool>();
        else if (k == "baseline") f.baseline = x.get<std::string>();
        else if (k == "lambda") f.lambda = x.get<double>();
        else if (k == "copies") f.copies = x.get<std::size_t>();
        else return false;
        return true;
      });
    } else {
      return false;
    }
    return true;
  });
  return c;
}

void cmd_simulate_heston(const RunConfig& c) {
  c.heston.ranges.validate();
  if (c.heston.paths == 0) throw ConfigError("simulate-heston: paths must be >= 1");
  if (c.heston.length < 2) throw ConfigError("simulate-heston: length must be >= 2");
  if (!(c.heston.dt > 0.0)) throw ConfigError("simulate-heston: dt must be > 0");
  if (!(c.heston.x0 > 0.0)) throw ConfigError("simulate-heston: x0 must be > 0");
  const stochastic::RandomSource root(c.seed);
  const auto hd = stochastic::sample_heston_dataset(c.heston.ranges, c.heston.paths, c.heston.length, c.heston.dt,
                                                    c.heston.x0, root.child(kSimulateStream));
  write_resolved(c);
  write_paths_csv(out_file(c, "paths.csv"), hd.data, {"X", "v"});
  write_truth_csv(out_file(c, "truth.csv"), hd.truth);
}

void cmd_train(const RunConfig& c) {
  const PathTable table = read_paths_csv(require(c.inputs.data, "--data"));
  c.model.validate(table.data.grid);

  std::optional<core::SBBTSModel> resume;
  if (!c.inputs.resume.empty()) {
    resume = core::load_checkpoint(c.inputs.resume);
    const auto want = core::grid_hash_hex(table.data.grid), have = core::grid_hash_hex(resume->grid);
    if (want != have) {
      throw SchemaError("train: checkpoint " + c.inputs.resume + " was trained on grid " + have +
                        ", the data grid is " + want);
    }
    const auto& nc = resume->net.config();
    if (nc.dim != table.data.dim || nc.d_model != c.model.d_model || nc.n_head != c.model.n_head ||
        nc.ffn_mult != c.model.ffn_mult) {
      throw ConfigError("train: network shape of " + c.inputs.resume + " does not match the configuration");
    }
  }
  write_resolved(c);

  const stochastic::RandomSource root(c.seed);
  std::vector<core::EpochLoss> trace;
  auto on_epoch = [](const core::EpochLoss& e) {
    if (log::verbose()) {
      log::info("outer " + std::to_string(e.outer) + " epoch " + std::to_string(e.epoch) + " loss " +
                format_double(e.mean_loss));
    }
  };
  core::SBBTSModel model = core::fit_model(table.data, c.model, root.child(kTrainStream), &trace, on_epoch,
                                           resume ? &resume->net : nullptr);
  model.columns = table.columns;
  core::save_checkpoint(model, out_file(c, "checkpoint.sbbts"));

  std::ostringstream os;
  os << "outer,epoch,mean_loss\n";
  for (const auto& e : trace) os << e.outer << ',' << e.epoch << ',' << format_double(e.mean_loss) << '\n';
  write_text(out_file(c, "loss.csv"), os.str());
}

void cmd_generate(const RunConfig& c) {
  const core::SBBTSModel model = core::load_checkpoint(require(c.inputs.checkpoint, "--checkpoint"));
  if (c.generate.paths == 0) throw ConfigError("generate: paths must be >= 1");
  const std::size_t d = model.net.config().dim;
  if (model.initial_values.empty()) throw SchemaError("generate: checkpoint holds no initial values");
  write_resolved(c);

  const stochastic::RandomSource root(c.seed);
  stochastic::RandomSource init_rng = root.child(kInitialValueStream);
  const auto init = core::resample_initial_values(model.initial_values, d, c.generate.paths, init_rng);
  const auto synth = core::generate(model, init, model.grid, root.child(kGenerateStream));

  std::vector<std::string> columns = model.columns;
  if (columns.size() != d) {
    columns.clear();
    for (std::size_t j = 0; j < d; ++j) columns.push_back("x" + std::to_string(j));
  }
  write_paths_csv(out_file(c, "synthetic.csv"), synth, columns);
}

void cmd_heston_bench(const RunConfig& c) {
  const std::vector<std::pair<std::string, std::string>> inputs{
      {"data", require(c.inputs.real, "--real")},
      {"sbbts", require(c.inputs.synth, "--synth")},
      {"sb_mode", require(c.inputs.synth_sb, "--synth-sb")}};
  std::vector<calib::SourceReport> sources;
  for (const auto& [name, path] : inputs) {
    const PathTable t = read_paths_csv(path);
    if (t.columns != std::vector<std::string>{"X", "v"}) {
      throw SchemaError(path + ": heston-bench expects value columns X,v");
    }
    sources.push_back(calib::calibrate_dataset(t.data, c.heston.dt, name));
  }
  write_resolved(c);
  const auto report = calib::build_report(std::move(sources), c.report.bins);

  json j;
  j["dt"] = c.heston.dt;
  j["bins"] = c.report.bins;
  std::ostringstream est, hist;
  est << "source,path_id,kappa,theta,xi_vol,rho,r\n";
  hist << "source,parameter,bin,lo,hi,count\n";
  for (const auto& s : report.sources) {
    json src{{"paths", s.estimates.size()}, {"skipped", s.skipped}, {"clipped", s.clipped}};
    for (std::size_t p = 0; p < 5; ++p) {
      const auto& sum = s.summaries[p];
      src["parameters"][calib::CalibrationReport::kParameterNames[p]] = {
          {"mean", sum.mean}, {"std", sum.std}, {"min", sum.min}, {"max", sum.max}, {"histogram", sum.histogram}};
      for (std::size_t b = 0; b < sum.histogram.size(); ++b) {
        hist << s.name << ',' << calib::CalibrationReport::kParameterNames[p] << ',' << b << ','
             << format_double(report.bin_edges[p][b]) << ',' << format_double(report.bin_edges[p][b + 1]) << ','
             << sum.histogram[b] << '\n';
      }
    }
    j["sources"][s.name] = src;
    for (std::size_t m = 0; m < s.estimates.size(); ++m) {
      const auto& e = s.estimates[m];
      est << s.name << ',' << m << ',' << format_double(e.kappa) << ',' << format_double(e.theta) << ','
          << format_double(e.xi_vol) << ',' << format_double(e.rho) << ',' << format_double(e.r) << '\n';
    }
  }
  for (std::size_t p = 0; p < 5; ++p) j["bin_edges"][calib::CalibrationReport::kParameterNames[p]] = report.bin_edges[p];

  const double xi_sbbts = report.sources[1].summaries[2].std, xi_sb = report.sources[2].summaries[2].std;
  const double rho_sbbts = report.sources[1].summaries[3].std, rho_sb = report.sources[2].summaries[3].std;
  j["dispersion"] = {{"xi_vol_std_ratio", xi_sb > 0.0 ? xi_sbbts / xi_sb : std::numeric_limits<double>::infinity()},
                     {"rho_std_ratio", rho_sb > 0.0 ? rho_sbbts / rho_sb : std::numeric_limits<double>::infinity()},
                     {"sb_mode_xi_collapsed", xi_sb < 0.5 * xi_sbbts}};
  if (!std::isfinite(j["dispersion"]["xi_vol_std_ratio"].get<double>())) j["dispersion"]["xi_vol_std_ratio"] = "inf";
  if (!std::isfinite(j["dispersion"]["rho_std_ratio"].get<double>())) j["dispersion"]["rho_std_ratio"] = "inf";

  write_text(out_file(c, "heston_report.json"), j.dump(2) + "\n");
  write_text(out_file(c, "heston_estimates.csv"), est.str());
  write_text(out_file(c, "heston_histograms.csv"), hist.str());
}

void cmd_eval(const RunConfig& c) {
  const PathTable real = read_paths_csv(require(c.inputs.real, "--real"));
  const PathTable synth = read_paths_csv(require(c.inputs.synth, "--synth"));
  if (real.columns != synth.columns) {
    throw SchemaError("eval: value columns of " + c.inputs.real + " and " + c.inputs.synth + " differ");
  }
  const std::size_t max_lag = std::min(c.report.max_lag, std::min(real.data.dates(), synth.data.dates()) - 2);
  write_resolved(c);

  eval::EvalReport report;
  std::ostringstream tail, acfs;
  tail << "column,source,var95,es95,var99,es99,ann_return_pct,ann_std_pct\n";
  acfs << "column,source,kind,lag,value\n";
  const std::vector<std::pair<std::string, const PathTable*>> sources{{"real", &real}, {"synth", &synth}};
  std::vector<Matrix> pooled(2);
  for (std::size_t j = 0; j < real.columns.size(); ++j) {
    const std::string& col = real.columns[j];
    std::map<std::string, double> stat[2];
    for (std::size_t s = 0; s < 2; ++s) {
      const auto& [name, table] = sources[s];
      const ColumnReturns r = column_returns(table->data, j);
      if (!r.relative) report.flags.push_back(col + "." + name + ": increments used (non-positive values)");
      const auto t95 = eval::var_es(r.pooled, 0.95), t99 = eval::var_es(r.pooled, 0.99);
      const auto ann = eval::annualized_stats(r.pooled);
      const auto qv = eval::qv_dispersion(table->data);
      stat[s] = {{"var95", t95.var}, {"es95", t95.es}, {"var99", t99.var}, {"es99", t99.es},
                 {"ann_return_pct", ann.return_pct}, {"ann_std_pct", ann.std_pct},
                 {"qv_mean", qv.mean[j]}, {"qv_std", qv.std[j]}};
      for (const auto& [k, v] : stat[s]) report.metrics[col + "." + name + "." + k] = v;
      tail << col << ',' << name << ',' << format_double(t95.var) << ',' << format_double(t95.es) << ','
           << format_double(t99.var) << ',' << format_double(t99.es) << ',' << format_double(ann.return_pct) << ','
           << format_double(ann.std_pct) << '\n';

      for (int squared = 0; squared < 2; ++squared) {
        std::size_t skipped = 0;
        const auto a = mean_acf(r.per_path, max_lag, squared, skipped);
        const std::string kind = squared ? "acf_squared" : "acf";
        report.series[col + "." + name + "." + kind] = a;
        if (skipped) report.flags.push_back(col + "." + name + "." + kind + ": " + std::to_string(skipped) + " constant paths skipped");
        for (std::size_t l = 0; l <= max_lag; ++l) acfs << col << ',' << name << ',' << kind << ',' << l << ',' << format_double(a[l]) << '\n';
      }
      if (j == 0) pooled[s] = Matrix(r.pooled.size(), real.columns.size());
      for (std::size_t i = 0; i < r.pooled.size(); ++i) pooled[s](i, j) = r.pooled[i];
    }
    for (const auto& [k, v] : stat[0]) report.metrics[col + ".gap." + k] = stat[1][k] - v;
  }
  for (std::size_t s = 0; s < 2; ++s) {
    const auto corr = eval::correlation_matrix(pooled[s]);
    report.matrices[sources[s].first + ".correlation"] = corr.values;
    for (std::size_t j = 0; j < corr.zero_variance.size(); ++j) {
      if (corr.zero_variance[j]) report.flags.push_back(sources[s].first + "." + real.columns[j] + ": zero variance");
    }
  }
  write_text(out_file(c, "eval_report.json"), report.to_json() + "\n");
  write_text(out_file(c, "eval_tail.csv"), tail.str());
  write_text(out_file(c, "eval_acf.csv"), acfs.str());
}

void cmd_factor_fit(const RunConfig& c) {
  const ReturnsTable returns = read_returns_csv(require(c.inputs.returns, "--returns"));
  if (returns.values.rows < c.factors.window) {
    throw DataError("factor-fit: " + std::to_string(returns.values.rows) + " dates are fewer than the window " +
                    std::to_string(c.factors.window));
  }
  const stochastic::RandomSource root(c.seed);
  stochastic::RandomSource cluster_rng = root.child(kClusterStream);
  const auto fit = factors::fit_factor_model(returns.values, c.factors.m, c.factors.k, cluster_rng, c.factors.standardize);
  write_resolved(c);
  write_text(out_file(c, "factor_model.json"), factor_model_to_json(fit.model, returns.instruments).dump(2) + "\n");

  // Cumulative factor paths over each window, starting at 0: the training set for the generator.
  const auto windows = factors::sliding_windows(fit.factors, c.factors.window, c.factors.stride);
  const std::size_t m = fit.factors.cols, len = c.factors.window + 1;
  stochastic::TimeSeriesDataset paths(stochastic::TimeGrid::uniform(c.factors.window), windows.size(), m);
  for (std::size_t w = 0; w < windows.size(); ++w)
    for (std::size_t i = 1; i < len; ++i)
      for (std::size_t j = 0; j < m; ++j) paths.at(w, i, j) = paths.at(w, i - 1, j) + windows[w](i - 1, j);
  std::vector<std::string> names;
  for (std::size_t j = 0; j < m; ++j) names.push_back("f" + std::to_string(j));
  write_paths_csv(out_file(c, "factor_paths.csv"), paths, names);
}

void cmd_augment(const RunConfig& c) {
  const auto& f = c.factors;
  if (f.copies == 0) throw ConfigError("augment: copies must be >= 1");
  if (!(f.lambda >= 0.0)) throw ConfigError("augment: lambda must be >= 0");
  const stochastic::RandomSource rng = stochastic::RandomSource(c.seed).child(kAugmentStream);
  std::vector<Matrix> windows;
  std::vector<std::string> instruments;

  if (f.baseline == "noise") {
    const ReturnsTable returns = read_returns_csv(require(c.inputs.returns, "--returns"));
    instruments = returns.instruments;
    const auto source = factors::sliding_windows(returns.values, f.window, f.stride);
    for (std::size_t w = 0; w < source.size(); ++w) {
      auto copies = factors::noise_augment(source[w], f.copies, f.lambda, rng.child(w));
      for (auto& x : copies) windows.push_back(std::move(x));
    }
  } else if (f.baseline == "sbbts") {
    const core::SBBTSModel model = core::load_checkpoint(require(c.inputs.checkpoint, "--checkpoint"));
    const auto fm = factor_model_from_json(json::parse(read_text(require(c.inputs.factor_model, "--factor-model"))),
                                           &instruments);
    const std::size_t m = fm.pca.components();
    if (model.net.config().dim != m) {
      throw SchemaError("augment: checkpoint dimension " + std::to_string(model.net.config().dim) +
                        " does not match " + std::to_string(m) + " factors");
    }
    if (model.grid.size() != f.window + 1) {
      throw SchemaError("augment: checkpoint paths have " + std::to_string(model.grid.size()) +
                        " dates, window " + std::to_string(f.window) + " needs " + std::to_string(f.window + 1));
    }
    const std::size_t count = c.generate.paths * f.copies;
    stochastic::RandomSource init_rng = rng.child(0);
    const auto init = core::resample_initial_values(model.initial_values, m, count, init_rng);
    const auto paths = core::generate(model, init, model.grid, rng.child(1));
    const stochastic::RandomSource residual_rng = rng.child(2);
    for (std::size_t p = 0; p < count; ++p) {
      Matrix fac(f.window, m);
      for (std::size_t i = 0; i < f.window; ++i)
        for (std::size_t j = 0; j < m; ++j) fac(i, j) = paths.at(p, i + 1, j) - paths.at(p, i, j);
      windows.push_back(factors::reconstruct(fac, fm, factors::sample_residuals(fm, f.window, residual_rng.child(p))));
    }
  } else {
    throw ConfigError("augment: baseline must be 'noise' or 'sbbts', got '" + f.baseline + "'");
  }
  write_resolved(c);

  std::ostringstream in, tgt;
  in << "window_id,row";
  tgt << "window_id";
  for (const auto& s : instruments) {
    in << ',' << s;
    tgt << ',' << s;
  }
  in << '\n';
  tgt << '\n';
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto split = factors::split_target(windows[w]);
    for (std::size_t i = 0; i < split.input.rows; ++i) {
      in << w << ',' << i;
      for (double v : split.input.row(i)) in << ',' << format_double(v);
      in << '\n';
    }
    tgt << w;
    for (auto l : split.labels) tgt << ',' << static_cast<int>(l);
    tgt << '\n';
  }
  write_text(out_file(c, "augment_inputs.csv"), in.str());
  write_text(out_file(c, "augment_targets.csv"), tgt.str());
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Schrodinger-Bass bridge time-series generator"};
  app.require_subcommand(1);

  std::string config_path, out;
  std::uint64_t seed = 0;
  std::size_t threads = 0, paths = 0, length = 0;
  double beta = 0.0;
  bool sb_mode = false, verbose = false, quiet = false;
  RunConfig::Inputs inputs;
  std::string baseline;
  double lambda = -1.0;
  std::size_t copies = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--threads", threads, "Worker threads (0 = hardware)");
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--paths", paths, "Number of paths to simulate or generate");
    sub->add_option("--length", length, "Observations per simulated path");
    sub->add_option("--beta", beta, "Transport regularization (0 = automatic)");
    sub->add_flag("--sb-mode", sb_mode, "Identity transport (Schrodinger bridge baseline)");
    sub->add_flag("-v,--verbose", verbose, "Progress output");
    sub->add_flag("-q,--quiet", quiet, "Suppress warnings");
  };
  struct Sub {
    CLI::App* app;
    void (*run)(const RunConfig&);
  };
  std::vector<Sub> subs;
  auto add = [&](const char* name, const char* help, void (*run)(const RunConfig&)) {
    CLI::App* s = app.add_subcommand(name, help);
    common(s);
    subs.push_back({s, run});
    return s;
  };
  add("simulate-heston", "Simulate a heterogeneous Heston dataset", cmd_simulate_heston);
  auto* train = add("train", "Train the bridge model", cmd_train);
  train->add_option("--data", inputs.data, "Paths CSV");
  train->add_option("--resume", inputs.resume, "Checkpoint to continue from");
  auto* gen = add("generate", "Generate synthetic paths", cmd_generate);
  gen->add_option("--checkpoint", inputs.checkpoint, "Trained checkpoint");
  auto* bench = add("heston-bench", "Calibrate Heston parameters on real and generated paths", cmd_heston_bench);
  bench->add_option("--real", inputs.real, "Real paths CSV");
  bench->add_option("--synth", inputs.synth, "Paths generated by the bridge model");
  bench->add_option("--synth-sb", inputs.synth_sb, "Paths generated in SB mode");
  auto* ev = add("eval", "Compare real and synthetic paths", cmd_eval);
  ev->add_option("--real", inputs.real, "Real paths CSV");
  ev->add_option("--synth", inputs.synth, "Synthetic paths CSV");
  auto* ff = add("factor-fit", "Fit the PCA / k-means / mixture factor model", cmd_factor_fit);
  ff->add_option("--returns", inputs.returns, "Returns CSV");
  auto* aug = add("augment", "Emit augmented training windows", cmd_augment);
  aug->add_option("--returns", inputs.returns, "Returns CSV (noise baseline)");
  aug->add_option("--checkpoint", inputs.checkpoint, "Checkpoint trained on factor paths");
  aug->add_option("--factor-model", inputs.factor_model, "Factor model JSON");
  aug->add_option("--baseline", baseline, "noise or sbbts");
  aug->add_option("--lambda", lambda, "Noise scale of the noise baseline");
  aug->add_option("--copies", copies, "Augmented copies per window");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const Sub* chosen = nullptr;
    for (const auto& s : subs) {
      if (s.app->parsed()) chosen = &s;
    }
    const CLI::App& sa = *chosen->app;
    RunConfig config;
    if (!config_path.empty()) {
      json j;
      try {
        j = json::parse(read_text(config_path));
      } catch (const json::parse_error& e) {
        throw ConfigError("config " + config_path + ": " + e.what());
      }
      config = run_config_from_json(j);
    }
    config.command = sa.get_name();
    if (const char* env = std::getenv(kOutDirEnv); env && *env) config.out = env;
    if (sa.count("--out")) config.out = out;
    if (sa.count("--seed")) config.seed = seed;
    if (sa.count("--beta")) config.model.beta = beta;
    if (sb_mode) config.model.sb_mode = true;
    if (sa.count("--paths")) config.heston.paths = config.generate.paths = paths;
    if (sa.count("--length")) config.heston.length = length;
    auto take = [&](const char* flag, std::string& slot, const std::string& value) {
      if (sa.get_option_no_throw(flag) && sa.count(flag)) slot = value;
    };
    take("--data", config.inputs.data, inputs.data);
    take("--resume", config.inputs.resume, inputs.resume);
    take("--checkpoint", config.inputs.checkpoint, inputs.checkpoint);
    take("--real", config.inputs.real, inputs.real);
    take("--synth", config.inputs.synth, inputs.synth);
    take("--synth-sb", config.inputs.synth_sb, inputs.synth_sb);
    take("--returns", config.inputs.returns, inputs.returns);
    take("--factor-model", config.inputs.factor_model, inputs.factor_model);
    take("--baseline", config.factors.baseline, baseline);
    if (sa.get_option_no_throw("--lambda") && sa.count("--lambda")) config.factors.lambda = lambda;
    if (sa.get_option_no_throw("--copies") && sa.count("--copies")) config.factors.copies = copies;

    set_thread_count(threads ? threads : std::max(1u, std::thread::hardware_concurrency()));
    log::set_verbose(verbose);
    log::set_quiet(quiet);
    chosen->run(config);
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace sbbts::cli
