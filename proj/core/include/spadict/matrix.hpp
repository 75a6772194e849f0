#pragma once

#include <Eigen/Dense>

namespace spadict {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace spadict
