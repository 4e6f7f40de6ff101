#pragma once

#include "netlds/common.hpp"

namespace netlds {

/// (1/m) sum_l ||est_l - truth_l||_F^2
double mse(const std::vector<Matrix>& est, const std::vector<Matrix>& truth);

/// sqrt(mse); equals (1/sqrt(m)) (sum_l ||est_l - truth_l||_F^2)^{1/2}.
double rmse(const std::vector<Matrix>& est, const std::vector<Matrix>& truth);

}  // namespace netlds
