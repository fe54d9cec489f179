#pragma once

// File formats used by the command-line tools.
//
// Paths CSV:   date_index,<value columns...>,path_id
//              rows grouped by path, dates 0..L-1 in order; every path has
//              the same length. Dates map to a uniform grid on [0, 1].
// Returns CSV: header of instrument ids, one row of returns per date.
// Truth CSV:   path_id,kappa,theta,xi_vol,rho,r,v0

#include <string>
#include <vector>

#include "json.hpp"
#include "sbbts/factors/factors.hpp"
#include "sbbts/matrix.hpp"
#include "sbbts/stochastic/dataset.hpp"
#include "sbbts/stochastic/heston.hpp"

namespace sbbts::cli {

struct PathTable {
  stochastic::TimeSeriesDataset data;
  std::vector<std::string> columns;  // value columns, without date_index and path_id
};

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

PathTable read_paths_csv(const std::string& path);
void write_paths_csv(const std::string& path, const stochastic::TimeSeriesDataset& data,
                     const std::vector<std::string>& columns);

struct ReturnsTable {
  Matrix values;
  std::vector<std::string> instruments;
};

ReturnsTable read_returns_csv(const std::string& path);

void write_truth_csv(const std::string& path, const std::vector<stochastic::HestonParams>& truth);

nlohmann::json factor_model_to_json(const factors::FactorModel& model, const std::vector<std::string>& instruments);
factors::FactorModel factor_model_from_json(const nlohmann::json& j, std::vector<std::string>* instruments = nullptr);

/// Writes text to a file, raising IoError with the path on failure.
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace sbbts::cli
