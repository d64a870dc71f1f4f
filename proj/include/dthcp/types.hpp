#pragma once

#include <Eigen/Dense>

namespace dthcp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

}  // namespace dthcp
