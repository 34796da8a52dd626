#include <gtest/gtest.h>

#include <json.hpp>

#include "memalign/config_io.hpp"
#include "memalign/error.hpp"

using namespace memalign;

namespace {

std::string key_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsMirrorTheLibrary) {
  const auto c = parse_config(R"({"schema_version": 1})");
  EXPECT_EQ(c, ExperimentConfig{});
  EXPECT_EQ(c.schedule.weights.lambda1, 1.0);
  EXPECT_EQ(c.schedule.weights.lambda2, 0.1);
  EXPECT_EQ(c.schedule.weights.lambda3, 0.1);
  EXPECT_EQ(c.schedule.weights.margin, 1.0);
  EXPECT_EQ(c.schedule.top_k, 1u);
  EXPECT_EQ(c.schedule.learning_rate, 0.04);
  EXPECT_EQ(c.schedule.momentum, 0.9);
  EXPECT_DOUBLE_EQ(c.schedule.memory_update_fraction, 1.0 / 3.0);
}

TEST(Config, RoundTrip) {
  ExperimentConfig c;
  c.seed = 99;
  c.world.rotation_strength = 2.5;
  c.world.rotation_rank = 6;
  c.world.modes_per_class = 3;
  c.world.mode_scale = 0.5;
  c.schedule.top_k = 10;
  c.schedule.stop_similarity_gradient = true;
  c.schedule.storage = {StorageVariant::Balanced, 0.1};
  c.schedule.weights.lambda3 = 0.15;
  c.schedule.memory_update_fraction = 0.1;
  c.out_dir = "elsewhere";
  EXPECT_EQ(parse_config(config_to_json(c)), c);
}

TEST(Config, ReportCarriesResolvedConfig) {
  ExperimentConfig c;
  c.world.shift_norm = 3.0;
  const auto doc = nlohmann::json::parse(report_to_json(c, MetricsReport{}));
  EXPECT_EQ(doc["schema"], "memalign.report");
  EXPECT_EQ(doc["schema_version"], kReportSchemaVersion);
  EXPECT_EQ(parse_config(doc["resolved_config"].dump()), c);
}

TEST(Config, RejectsUnknownKeysWithPath) {
  EXPECT_EQ(key_of(R"({"schema_version": 1, "world": {"colour": 1}})"), "world.colour");
  EXPECT_EQ(key_of(R"({"schema_version": 1, "extra": true})"), "extra");
}

TEST(Config, RejectsBadValues) {
  EXPECT_EQ(key_of(R"({"world": {}})"), "schema_version");
  EXPECT_EQ(key_of(R"({"schema_version": 2})"), "schema_version");
  EXPECT_EQ(key_of(R"({"schema_version": 1, "memory": {"gamma": 1.5}})"), "gamma");
  EXPECT_EQ(key_of(R"({"schema_version": 1, "memory": {"policy": "fifo"}})"), "policy");
  EXPECT_EQ(key_of(R"({"schema_version": 1, "schedule": {"K": 0}})"), "K");
  EXPECT_EQ(key_of(R"({"schema_version": 1, "schedule": {"K": "one"}})"), "schedule.K");
  EXPECT_EQ(key_of(R"({"schema_version": 1, "loss": {"margin": 0}})"), "margin");
  EXPECT_EQ(key_of(R"({"schema_version": 1, "loss": {"lambda3": -0.1}})"), "lambda3");
  EXPECT_EQ(key_of("{not json"), "<root>");
}

TEST(SweepOutput, CsvHasOneRowPerValue) {
  SweepTable table;
  table.param = SweepParam::K;
  for (const char* v : {"1", "10", "30", "100"}) {
    SweepRow row;
    row.value = v;
    row.seeds = {1};
    row.runs.push_back(MetricsReport{});
    table.rows.push_back(row);
  }
  const auto csv = sweep_to_csv(table);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_EQ(csv.rfind("param,value,seeds,target_accuracy_mean,target_accuracy_std", 0), 0u);
  EXPECT_NE(csv.find("\nK,100,1,"), std::string::npos);
}
