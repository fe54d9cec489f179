#include "sbbts/stochastic/dataset.hpp"

#include <cmath>
#include <string>

#include "sbbts/errors.hpp"

namespace sbbts::stochastic {

TimeSeriesDataset::TimeSeriesDataset(TimeGrid g, std::size_t m, std::size_t d)
    : grid(std::move(g)), paths(m), dim(d), values(m * grid.size() * d, 0.0) {}

TimeSeriesDataset::TimeSeriesDataset(TimeGrid g, std::size_t m, std::size_t d, std::vector<double> v)
    : grid(std::move(g)), paths(m), dim(d), values(std::move(v)) {
  validate();
}

void TimeSeriesDataset::validate() const {
  if (dim == 0) throw DataError("dataset: dimension must be >= 1");
  if (values.size() != paths * grid.size() * dim) {
    throw DataError("dataset: expected " + std::to_string(paths * grid.size() * dim) + " values, got " +
                    std::to_string(values.size()));
  }
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k])) throw DataError("dataset: non-finite value at flat index " + std::to_string(k));
  }
}

}  // namespace sbbts::stochastic
