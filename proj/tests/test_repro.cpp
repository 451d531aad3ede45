#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vulnaug/repro.hpp"

namespace vulnaug {
namespace {

using testing::TempDir;

ReproConfig small_config(std::vector<std::string> strategies) {
  nlohmann::json j = {
      {"dataset", {{"synth", {{"vuln", 20}, {"clean", 200}, {"dim", 8}, {"block", 16}}}}},
      {"strategies", strategies},
      {"seeds", {1, 2, 3}},
      {"probe", {{"epochs", 5}}},
      {"rate", 4},
  };
  return ReproConfig::from_json(j);
}

TEST(Strategy, Parsing) {
  EXPECT_FALSE(Strategy::parse("none").method);
  EXPECT_EQ(Strategy::parse("ros").method, Method::random_oversampling);
  const auto cond = Strategy::parse("cond-bi");
  EXPECT_EQ(cond.method, Method::binary_interpolation);
  EXPECT_TRUE(cond.conditioned);
  EXPECT_FALSE(Strategy::parse("blind-gs").conditioned);
  EXPECT_THROW(Strategy::parse("cond-ros"), Error);
  EXPECT_THROW(Strategy::parse("mixup"), Error);
  EXPECT_EQ(Strategy::full_matrix().size(), 12u);
}

TEST(Repro, BaselineAndRosRows) {
  TempDir dir("repro2");
  const auto report = run_repro(small_config({"none", "ros"}), dir.path());
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_FALSE(report.rows[0].delta);
  ASSERT_TRUE(report.rows[1].delta);
  EXPECT_DOUBLE_EQ(report.rows[1].delta->f1, report.rows[1].median.f1 - report.rows[0].median.f1);
  EXPECT_EQ(report.rows[1].per_seed.size(), 3u);
  const auto j = report.to_json();
  EXPECT_EQ(j["rows"].size(), 2u);
  EXPECT_TRUE(j["rows"][0]["delta"].is_null());
}

TEST(Repro, FullMatrixHasTwelveRows) {
  TempDir dir("repro12");
  auto cfg = small_config(Strategy::full_matrix());
  cfg.seeds = {1};
  const auto report = run_repro(cfg, dir.path());
  ASSERT_EQ(report.rows.size(), 12u);
  for (const auto& row : report.rows) EXPECT_FALSE(row.error) << row.strategy << ": " << *row.error;
  EXPECT_NE(report.to_text().find("cond-gs"), std::string::npos);
}

TEST(Repro, RepeatedRunIsByteIdentical) {
  TempDir a("repro-a"), b("repro-b");
  const auto cfg = small_config({"none", "ros", "blind-sp", "cond-li"});
  EXPECT_EQ(run_repro(cfg, a.path()).to_json().dump(2), run_repro(cfg, b.path()).to_json().dump(2));
}

TEST(Repro, FailingRowDoesNotAbortOthers) {
  TempDir dir("repro-fail");
  auto cfg = small_config({"none", "cond-li", "ros"});
  // No annotated samples: conditioned rows have nothing eligible.
  cfg.synth->annotated_frac = 0.0;
  const auto report = run_repro(cfg, dir.path());
  EXPECT_FALSE(report.rows[0].error);
  EXPECT_TRUE(report.rows[1].error);
  EXPECT_FALSE(report.rows[2].error);
  EXPECT_EQ(report.to_json()["rows"][1]["status"], "error");
}

TEST(Repro, ConfigValidation) {
  EXPECT_THROW(ReproConfig::from_json(nlohmann::json::object()), Error);
  nlohmann::json j = {{"dataset", {{"synth", nlohmann::json::object()}}}, {"seeds", nlohmann::json::array()}};
  EXPECT_THROW(ReproConfig::from_json(j), Error);
  j["seeds"] = {1};
  j["strategies"] = {"bogus"};
  EXPECT_THROW(ReproConfig::from_json(j), Error);
}

}  // namespace
}  // namespace vulnaug
