#include "sbbts/cli/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "sbbts/errors.hpp"

namespace sbbts::cli {

using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> read_rows(const std::string& path, std::vector<std::string>& header) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      header = split(line);
      first = false;
    } else {
      rows.push_back(split(line));
    }
  }
  if (first) throw DataError(path + ": file is empty");
  return rows;
}

double parse_double(const std::string& s, const std::string& path, std::size_t line) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw DataError(path + ":" + std::to_string(line) + ": cannot parse '" + s + "' as a number");
  }
  return v;
}

std::size_t parse_index(const std::string& s, const std::string& path, std::size_t line) {
  std::size_t v = 0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw DataError(path + ":" + std::to_string(line) + ": cannot parse '" + s + "' as an index");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os << text;
  if (!os) throw IoError("failed writing " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

PathTable read_paths_csv(const std::string& path) {
  std::vector<std::string> header;
  const auto rows = read_rows(path, header);
  if (header.size() < 3 || header.front() != "date_index" || header.back() != "path_id") {
    throw SchemaError(path + ": expected header date_index,<values...>,path_id");
  }
  PathTable table;
  table.columns.assign(header.begin() + 1, header.end() - 1);
  const std::size_t d = table.columns.size();
  if (rows.empty()) throw DataError(path + ": no data rows");

  std::vector<double> values;
  values.reserve(rows.size() * d);
  std::size_t length = 0, paths = 0, expect_date = 0;
  std::size_t current_id = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t line = r + 2;
    if (rows[r].size() != header.size()) {
      throw SchemaError(path + ":" + std::to_string(line) + ": expected " + std::to_string(header.size()) +
                        " columns, got " + std::to_string(rows[r].size()));
    }
    const std::size_t date = parse_index(rows[r].front(), path, line);
    const std::size_t id = parse_index(rows[r].back(), path, line);
    if (date == 0) {
      if (paths == 1) length = expect_date;
      if (paths > 0 && expect_date != length) {
        throw DataError(path + ":" + std::to_string(line) + ": path " + std::to_string(current_id) + " has " +
                        std::to_string(expect_date) + " dates, expected " + std::to_string(length));
      }
      ++paths;
      current_id = id;
      expect_date = 0;
    } else if (id != current_id) {
      throw DataError(path + ":" + std::to_string(line) + ": path " + std::to_string(id) + " does not start at date 0");
    }
    if (date != expect_date) {
      throw DataError(path + ":" + std::to_string(line) + ": expected date_index " + std::to_string(expect_date));
    }
    ++expect_date;
    for (std::size_t j = 0; j < d; ++j) values.push_back(parse_double(rows[r][j + 1], path, line));
  }
  if (paths == 1) length = expect_date;
  if (expect_date != length) {
    throw DataError(path + ": last path has " + std::to_string(expect_date) + " dates, expected " +
                    std::to_string(length));
  }
  if (length < 2) throw DataError(path + ": paths need at least 2 dates");
  table.data = stochastic::TimeSeriesDataset(stochastic::TimeGrid::uniform(length - 1), paths, d, std::move(values));
  table.data.validate();
  return table;
}

void write_paths_csv(const std::string& path, const stochastic::TimeSeriesDataset& data,
                     const std::vector<std::string>& columns) {
  if (columns.size() != data.dim) throw ContractError("write_paths_csv: column names do not match dimension");
  std::ostringstream os;
  os << "date_index";
  for (const auto& c : columns) os << ',' << c;
  os << ",path_id\n";
  for (std::size_t m = 0; m < data.paths; ++m) {
    for (std::size_t i = 0; i < data.dates(); ++i) {
      os << i;
      for (std::size_t j = 0; j < data.dim; ++j) os << ',' << format_double(data.at(m, i, j));
      os << ',' << m << '\n';
    }
  }
  write_text(path, os.str());
}

ReturnsTable read_returns_csv(const std::string& path) {
  std::vector<std::string> header;
  const auto rows = read_rows(path, header);
  if (header.empty() || header.front().empty()) throw SchemaError(path + ": expected a header of instrument ids");
  if (rows.empty()) throw DataError(path + ": no data rows");
  ReturnsTable table;
  table.instruments = header;
  table.values = Matrix(rows.size(), header.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != header.size()) {
      throw SchemaError(path + ":" + std::to_string(r + 2) + ": expected " + std::to_string(header.size()) +
                        " columns, got " + std::to_string(rows[r].size()));
    }
    for (std::size_t j = 0; j < header.size(); ++j) table.values(r, j) = parse_double(rows[r][j], path, r + 2);
  }
  return table;
}

void write_truth_csv(const std::string& path, const std::vector<stochastic::HestonParams>& truth) {
  std::ostringstream os;
  os << "path_id,kappa,theta,xi_vol,rho,r,v0\n";
  for (std::size_t m = 0; m < truth.size(); ++m) {
    const auto& p = truth[m];
    os << m << ',' << format_double(p.kappa) << ',' << format_double(p.theta) << ',' << format_double(p.xi_vol) << ','
       << format_double(p.rho) << ',' << format_double(p.r) << ',' << format_double(p.v0) << '\n';
  }
  write_text(path, os.str());
}

json factor_model_to_json(const factors::FactorModel& model, const std::vector<std::string>& instruments) {
  const auto& p = model.pca;
  json gmms = json::array();
  for (const auto& g : model.residuals) {
    gmms.push_back({{"weight", g.weight}, {"mean", g.mean}, {"variance", g.variance}, {"converged", g.converged}});
  }
  return json{{"format", "sbbts-factor-model"},
              {"version", 1},
              {"instruments", instruments},
              {"dim", p.dim()},
              {"components", p.components()},
              {"standardized", p.standardized},
              {"mean", p.mean},
              {"scale", p.scale},
              {"loadings", p.loadings.data},
              {"explained_variance", p.explained_variance},
              {"eigenvalues", p.eigenvalues},
              {"clusters", model.clusters},
              {"residual_mixtures", gmms}};
}

factors::FactorModel factor_model_from_json(const json& j, std::vector<std::string>* instruments) {
  try {
    if (j.at("format") != "sbbts-factor-model" || j.at("version") != 1) {
      throw SchemaError("factor model: unknown format or version");
    }
    factors::FactorModel model;
    auto& p = model.pca;
    const auto d = j.at("dim").get<std::size_t>(), m = j.at("components").get<std::size_t>();
    p.standardized = j.at("standardized").get<bool>();
    p.mean = j.at("mean").get<std::vector<double>>();
    p.scale = j.at("scale").get<std::vector<double>>();
    p.loadings = Matrix(d, m, j.at("loadings").get<std::vector<double>>());
    p.explained_variance = j.at("explained_variance").get<std::vector<double>>();
    p.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    model.clusters = j.at("clusters").get<std::vector<std::size_t>>();
    for (const auto& g : j.at("residual_mixtures")) {
      factors::Gmm2 mix;
      mix.weight = g.at("weight").get<std::array<double, 2>>();
      mix.mean = g.at("mean").get<std::array<double, 2>>();
      mix.variance = g.at("variance").get<std::array<double, 2>>();
      mix.converged = g.at("converged").get<bool>();
      model.residuals.push_back(mix);
    }
    if (p.mean.size() != d || p.scale.size() != d || p.loadings.data.size() != d * m || model.residuals.size() != d) {
      throw SchemaError("factor model: array sizes do not match dim/components");
    }
    if (instruments) *instruments = j.at("instruments").get<std::vector<std::string>>();
    return model;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("factor model: ") + e.what());
  }
}

}  // namespace sbbts::cli
