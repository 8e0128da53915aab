#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "safeess/scenarios.hpp"

using namespace safeess;
using safeess::test::data_path;

namespace {

bool same_days(const ScenarioDay& a, const ScenarioDay& b) {
  return a.date == b.date && a.dt_hours == b.dt_hours && a.price == b.price && a.p_load == b.p_load &&
         a.q_load == b.q_load && a.p_pv == b.p_pv;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("safeess_test_" + name);
}

}  // namespace

TEST(Scenarios, SeedDeterminism) {
  const Network net = load_network(data_path("networks/net6.json"));
  GeneratorConfig cfg;
  cfg.days = 5;
  const ScenarioSet a = generate_synthetic(net, cfg, 42);
  const ScenarioSet b = generate_synthetic(net, cfg, 42);
  ASSERT_EQ(a.days.size(), b.days.size());
  for (std::size_t i = 0; i < a.days.size(); ++i) EXPECT_TRUE(same_days(a.days[i], b.days[i]));
  const ScenarioSet c = generate_synthetic(net, cfg, 43);
  EXPECT_FALSE(same_days(a.days[0], c.days[0]));
}

TEST(Scenarios, NoPv) {
  const Network net = load_network(data_path("networks/net6.json"));
  GeneratorConfig cfg;
  cfg.days = 3;
  cfg.pv_penetration = 0.0;
  for (const auto& d : generate_synthetic(net, cfg, 1).days) EXPECT_EQ(d.p_pv.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Scenarios, QuarterHourlyMeansFollowShape) {
  const Network net = load_network(data_path("networks/net6.json"));
  GeneratorConfig cfg;
  cfg.days = 100;
  cfg.dt_hours = 0.25;
  cfg.peak_load_mw = {0.02};
  const ScenarioSet set = generate_synthetic(net, cfg, 9);
  ASSERT_EQ(set.days.size(), 100u);
  double shape = 0.0;
  for (int t = 0; t < 96; ++t) shape += load_shape((t + 0.5) * 0.25);
  shape /= 96.0;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(5);
  for (const auto& d : set.days) {
    ASSERT_EQ(d.steps(), 96);
    sum += d.p_load.rowwise().mean();
  }
  for (Eigen::Index b = 0; b < 5; ++b) EXPECT_NEAR(sum(b) / 100.0, 0.02 * shape, 0.05 * 0.02 * shape);
}

TEST(Scenarios, SplitsAreContiguousAndNonEmpty) {
  const auto s = assign_splits(10, {});
  EXPECT_EQ(std::count(s.begin(), s.end(), Split::kTrain), 8);
  EXPECT_EQ(std::count(s.begin(), s.end(), Split::kVal), 1);
  EXPECT_EQ(std::count(s.begin(), s.end(), Split::kTest), 1);
  EXPECT_TRUE(std::is_sorted(s.begin(), s.end(), [](Split a, Split b) { return a < b; }));
  const auto small = assign_splits(3, {});
  EXPECT_EQ(small, (std::vector<Split>{Split::kTrain, Split::kVal, Split::kTest}));
}

TEST(Scenarios, BundledWeekFixture) {
  const Network net = load_network(data_path("networks/net6.json"));
  const ScenarioSet set = load_csv(data_path("scenarios/net6_week.csv"), net);
  EXPECT_EQ(set.days.size(), 7u);
  for (const auto& d : set.days) {
    EXPECT_EQ(d.steps(), 24);
    EXPECT_NO_THROW(validate_day(d, net.load_bus_count()));
  }
}

TEST(Scenarios, CsvRoundTrip) {
  const Network net = load_network(data_path("networks/net6.json"));
  GeneratorConfig cfg;
  cfg.days = 4;
  const ScenarioSet set = generate_synthetic(net, cfg, 3);
  const auto path = temp_file("roundtrip.csv");
  write_csv(path, net, set);
  const ScenarioSet back = load_csv(path, net);
  ASSERT_EQ(back.days.size(), set.days.size());
  for (std::size_t i = 0; i < set.days.size(); ++i) EXPECT_TRUE(same_days(set.days[i], back.days[i]));
  std::filesystem::remove(path);
}

TEST(Scenarios, MissingPriceColumn) {
  const Network net = load_network(data_path("networks/net3.json"));
  const auto path = temp_file("noprice.csv");
  std::ofstream(path) << "date,t,bus,p_load_mw,q_load_mvar,p_pv_mw\n2023-01-01,0,2,0.01,0.0,0.0\n";
  try {
    load_csv(path, net);
    FAIL() << "expected a schema error";
  } catch (const ScenarioError& e) {
    EXPECT_EQ(e.kind(), ScenarioError::Kind::kSchema);
  }
  std::filesystem::remove(path);
}

TEST(Scenarios, ValidationErrors) {
  ScenarioDay day;
  day.date = "d";
  day.dt_hours = 1.0;
  day.price.assign(24, 50.0);
  day.p_load = Eigen::MatrixXd::Constant(2, 24, 0.01);
  day.q_load = Eigen::MatrixXd::Zero(2, 24);
  day.p_pv = Eigen::MatrixXd::Zero(2, 24);
  EXPECT_NO_THROW(validate_day(day, 2));
  EXPECT_THROW(validate_day(day, 3), ScenarioError);
  day.p_pv(0, 3) = -0.1;
  EXPECT_THROW(validate_day(day, 2), ScenarioError);
  day.p_pv(0, 3) = 0.0;
  day.dt_hours = 0.5;
  EXPECT_THROW(validate_day(day, 2), ScenarioError);
}

TEST(Scenarios, GeneratorConfigErrors) {
  const Network net = load_network(data_path("networks/net6.json"));
  GeneratorConfig cfg;
  cfg.dt_hours = 0.7;
  EXPECT_THROW(generate_synthetic(net, cfg, 1), ScenarioError);
  cfg = {};
  cfg.peak_load_mw = {0.01, 0.02};
  EXPECT_THROW(generate_synthetic(net, cfg, 1), ScenarioError);
  const GeneratorConfig back = generator_config_from_json(to_json(GeneratorConfig{}));
  EXPECT_EQ(back.days, GeneratorConfig{}.days);
  EXPECT_EQ(back.peak_load_mw, GeneratorConfig{}.peak_load_mw);
}
