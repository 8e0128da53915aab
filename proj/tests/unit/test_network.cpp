#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "safeess/network.hpp"
#include "safeess/sensitivities.hpp"

using namespace safeess;
using safeess::test::chain;
using safeess::test::chain_json;
using safeess::test::data_path;

namespace {

NetworkError::Kind parse_error_kind(const nlohmann::json& doc) {
  try {
    parse_network(doc);
  } catch (const NetworkError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected NetworkError";
  return NetworkError::Kind::kParse;
}

}  // namespace

TEST(Network, BundledNet6) {
  const Network net = load_network(data_path("networks/net6.json"));
  EXPECT_EQ(net.bus_count(), 6u);
  EXPECT_EQ(net.lines.size(), 5u);
  EXPECT_EQ(net.ess_count(), 2u);
  EXPECT_EQ(net.bfs_order.front(), 1);
}

TEST(Network, BundledNetworksAreRadial) {
  for (const char* name : {"net3", "net6", "net18", "net34"}) {
    const Network net = load_network(data_path(std::string("networks/") + name + ".json"));
    EXPECT_EQ(net.lines.size(), net.bus_count() - 1) << name;
    for (const Line& l : net.lines) {
      EXPECT_EQ(net.parent[static_cast<std::size_t>(l.to_bus - 1)], l.from_bus);
      EXPECT_GT(l.i_max_sq, 0.0);
    }
  }
}

TEST(Network, CycleIsRejected) {
  auto doc = chain_json({0.01, 0.01, 0.01, 0.01}, {0.01, 0.01, 0.01, 0.01});
  doc["lines"].push_back({{"from", 3}, {"to", 5}, {"r", 0.01}, {"x", 0.01}, {"i_max", 1.0}});
  EXPECT_EQ(parse_error_kind(doc), NetworkError::Kind::kNonRadial);
}

TEST(Network, DisconnectedIsRejected) {
  auto doc = chain_json({0.01, 0.01}, {0.01, 0.01});
  doc["buses"].push_back({{"id", 4}, {"v_min", 0.95}, {"v_max", 1.05}});
  EXPECT_EQ(parse_error_kind(doc), NetworkError::Kind::kNonRadial);
}

TEST(Network, SocLimitOrdering) {
  auto doc = chain_json({0.01, 0.01}, {0.01, 0.01}, {{3}});
  doc["ess"][0]["soc_min"] = 0.9;
  doc["ess"][0]["soc_max"] = 0.8;
  EXPECT_EQ(parse_error_kind(doc), NetworkError::Kind::kLimit);
}

TEST(Network, DuplicateEssAndUnknownBus) {
  auto dup = chain_json({0.01, 0.01}, {0.01, 0.01}, {{3}, {3}});
  EXPECT_EQ(parse_error_kind(dup), NetworkError::Kind::kDuplicateEss);
  auto unknown = chain_json({0.01, 0.01}, {0.01, 0.01}, {{7}});
  EXPECT_EQ(parse_error_kind(unknown), NetworkError::Kind::kUnknownBus);
}

TEST(Network, MalformedJson) {
  nlohmann::json doc = {{"buses", 3}};
  EXPECT_EQ(parse_error_kind(doc), NetworkError::Kind::kParse);
}

TEST(Network, SerializationRoundTrip) {
  const Network net = load_network(data_path("networks/net34.json"));
  const Network again = parse_network(network_to_json(net));
  EXPECT_EQ(network_hash(net), network_hash(again));
  EXPECT_EQ(network_hash(net).size(), 64u);
  Network other = net;
  other.lines[3].r *= 1.01;
  EXPECT_NE(network_hash(net), network_hash(other));
}

TEST(Sensitivities, SingleLine) {
  const Sensitivities s = build_sensitivities(chain({0.01}, {0.02}));
  ASSERT_EQ(s.r_path.rows(), 1);
  EXPECT_DOUBLE_EQ(s.r_path(0, 0), 0.01);
  EXPECT_DOUBLE_EQ(s.x_path(0, 0), 0.02);
}

TEST(Sensitivities, ThreeBusChain) {
  const Sensitivities s = build_sensitivities(chain({0.01, 0.02}, {0.0, 0.0}));
  EXPECT_NEAR(s.r_path(0, 0), 0.01, 1e-15);
  EXPECT_NEAR(s.r_path(0, 1), 0.01, 1e-15);
  EXPECT_NEAR(s.r_path(1, 0), 0.01, 1e-15);
  EXPECT_NEAR(s.r_path(1, 1), 0.03, 1e-15);
}

TEST(Sensitivities, MatchesPathEnumeration) {
  for (const char* name : {"net6", "net34"}) {
    const Network net = load_network(data_path(std::string("networks/") + name + ".json"));
    const Sensitivities s = build_sensitivities(net);
    auto path = [&](int bus) {
      std::vector<int> lines;
      for (int b = bus; b != 1; b = net.parent[static_cast<std::size_t>(b - 1)]) lines.push_back(b);
      return lines;
    };
    const int n = static_cast<int>(net.bus_count());
    for (int m = 2; m <= n; ++m) {
      for (int k = 2; k <= n; ++k) {
        double r = 0.0;
        double x = 0.0;
        const auto pm = path(m);
        for (int b : path(k)) {
          if (std::find(pm.begin(), pm.end(), b) != pm.end()) {
            r += net.feeder(b).r;
            x += net.feeder(b).x;
          }
        }
        EXPECT_NEAR(s.r_path(m - 2, k - 2), r, 1e-14);
        EXPECT_NEAR(s.x_path(m - 2, k - 2), x, 1e-14);
      }
    }
    // symmetric, non-negative, diagonal dominates its row
    EXPECT_LT((s.r_path - s.r_path.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_GE(s.r_path.minCoeff(), 0.0);
    for (Eigen::Index i = 0; i < s.r_path.rows(); ++i) EXPECT_GE(s.r_path(i, i), s.r_path.row(i).maxCoeff());
  }
}
