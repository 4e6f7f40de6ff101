#include "netlds/metrics.hpp"

#include <cmath>
#include <string>

namespace netlds {

double mse(const std::vector<Matrix>& est, const std::vector<Matrix>& truth) {
  if (est.size() != truth.size() || est.empty())
    throw std::invalid_argument("mse needs equally many estimated and true matrices (got " +
                                std::to_string(est.size()) + " and " + std::to_string(truth.size()) + ")");
  double total = 0.0;
  for (std::size_t l = 0; l < est.size(); ++l) {
    if (est[l].rows() != truth[l].rows() || est[l].cols() != truth[l].cols())
      throw std::invalid_argument("mse: matrix shapes differ at node " + std::to_string(l + 1));
    total += (est[l] - truth[l]).squaredNorm();
  }
  return total / static_cast<double>(est.size());
}

double rmse(const std::vector<Matrix>& est, const std::vector<Matrix>& truth) {
  return std::sqrt(mse(est, truth));
}

}  // namespace netlds
