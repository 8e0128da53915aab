#pragma once

#include <Eigen/Dense>

#include "safeess/network.hpp"

namespace safeess {

// Path-impedance matrices over the non-slack buses. Entry (m, n) is the sum of
// line resistance (reactance) over the lines shared by the root paths of m
// and n, so that LinDistFlow reads v_sq = v0_sq + 2 (r_path p + x_path q).
struct Sensitivities {
  Eigen::MatrixXd r_path;
  Eigen::MatrixXd x_path;
};

Sensitivities build_sensitivities(const Network& net);

}  // namespace safeess
