#include "safeess/sensitivities.hpp"

#include <vector>

namespace safeess {

Sensitivities build_sensitivities(const Network& net) {
  const auto m = static_cast<Eigen::Index>(net.load_bus_count());
  Sensitivities s{Eigen::MatrixXd::Zero(m, m), Eigen::MatrixXd::Zero(m, m)};

  // in_subtree(a, b): non-slack b lies in the subtree rooted at non-slack a.
  std::vector<std::vector<bool>> in_subtree(static_cast<std::size_t>(m), std::vector<bool>(static_cast<std::size_t>(m)));
  for (Eigen::Index b = 0; b < m; ++b) {
    int id = static_cast<int>(b) + 2;
    for (int up = id; up != 1; up = net.parent[static_cast<std::size_t>(up - 1)]) {
      in_subtree[Network::pos(up)][static_cast<std::size_t>(b)] = true;
    }
  }

  // Walk buses root-first: shared(n, k) = cum(n) when k is below n, otherwise
  // it equals shared(parent(n), k).
  for (int id : net.bfs_order) {
    if (id == 1) continue;
    const auto n = static_cast<Eigen::Index>(Network::pos(id));
    const int par = net.parent[static_cast<std::size_t>(id - 1)];
    const Line& line = net.feeder(id);
    const double cum_r = (par == 1 ? 0.0 : s.r_path(static_cast<Eigen::Index>(Network::pos(par)), static_cast<Eigen::Index>(Network::pos(par)))) + line.r;
    const double cum_x = (par == 1 ? 0.0 : s.x_path(static_cast<Eigen::Index>(Network::pos(par)), static_cast<Eigen::Index>(Network::pos(par)))) + line.x;
    for (Eigen::Index k = 0; k < m; ++k) {
      if (in_subtree[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)]) {
        s.r_path(n, k) = cum_r;
        s.x_path(n, k) = cum_x;
      } else if (par != 1) {
        const auto p = static_cast<Eigen::Index>(Network::pos(par));
        s.r_path(n, k) = s.r_path(p, k);
        s.x_path(n, k) = s.x_path(p, k);
      }
    }
  }
  return s;
}

}  // namespace safeess
