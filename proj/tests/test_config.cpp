#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "artde/config.hpp"
#include "artde/presets.hpp"

using namespace artde;

namespace {

bool mentions(const std::vector<std::string>& errs, const std::string& needle) {
  return std::any_of(errs.begin(), errs.end(), [&](const std::string& e) { return e.find(needle) != std::string::npos; });
}

std::vector<std::string> load_errors(const Json& j, const std::vector<std::string>& overrides = {}) {
  try {
    load_scenario(j, overrides);
  } catch (const ConfigErrors& e) {
    return e.errors();
  }
  return {};
}

}  // namespace

TEST(Config, PresetsRoundTrip) {
  for (const auto& name : preset_names()) {
    const Json j = to_json(builtin_preset(name));
    const ScenarioConfig parsed = load_scenario(j);
    EXPECT_EQ(to_json(parsed), j) << name;
    EXPECT_EQ(to_json(load_scenario(Json::parse(j.dump()))), j) << name;
  }
}

TEST(Config, ShippedPresetFilesMatchBuiltins) {
  for (const auto& name : preset_names()) {
    const auto path = std::filesystem::path(ARTDE_PRESET_DIR) / (name + ".json");
    ASSERT_TRUE(std::filesystem::exists(path)) << path;
    const Json file = read_json_file(path.string());
    EXPECT_EQ(to_json(load_scenario(file)), to_json(builtin_preset(name))) << name;
  }
}

TEST(Config, PresetValuesSurviveParsing) {
  const ScenarioConfig c = load_scenario(to_json(preset_chain_s3()));
  EXPECT_EQ(c.chain_disturbance.impulses.size(), 3u);
  EXPECT_DOUBLE_EQ(c.chain_disturbance.impulses[1].start, 28.0);
  EXPECT_DOUBLE_EQ(c.chain_disturbance.impulses[2].start, 37.0);
  EXPECT_EQ(c.events.size(), 1u);
  EXPECT_DOUBLE_EQ(c.joint.gains.gamma0, 1e4);
  const ScenarioConfig q = load_scenario(to_json(preset_quad_infinity()));
  EXPECT_DOUBLE_EQ(q.control_period, 0.015);
  EXPECT_DOUBLE_EQ(q.attitude.config.m_bar(0, 0), 0.015);
  EXPECT_EQ(q.events.front().kind, EventKind::PayloadDetach);
}

TEST(Config, AlphaAtOneRejected) {
  const auto errs = load_errors(to_json(preset_chain_s1()), {"controller.alpha=1"});
  ASSERT_EQ(errs.size(), 1u);
  EXPECT_TRUE(mentions(errs, "alpha must exceed 1"));
  EXPECT_TRUE(mentions(load_errors(to_json(preset_quad_infinity()), {"attitude.alpha=0.5"}), "attitude"));
}

TEST(Config, ZeroDelayRejected) {
  const auto errs = load_errors(to_json(preset_chain_s1()), {"control_period=0"});
  EXPECT_TRUE(mentions(errs, "control_period"));
}

TEST(Config, EveryViolationReported) {
  Json j = to_json(preset_chain_s2());
  j["controller"]["alpha"] = 0.9;
  j["dt"] = 0.0015;
  j["controller"]["gains"]["floor0"] = 0.0;
  j["bogus"] = 1;
  j["chain"]["links"][0]["mass"] = "heavy";
  // Schema problems are reported together before cross-field checks run.
  auto errs = load_errors(j);
  EXPECT_TRUE(mentions(errs, "bogus: unknown key"));
  EXPECT_TRUE(mentions(errs, "chain.links[0].mass: expected a number"));
  j.erase("bogus");
  j["chain"]["links"][0]["mass"] = 1.2;
  errs = load_errors(j);
  EXPECT_GE(errs.size(), 3u);
  EXPECT_TRUE(mentions(errs, "alpha"));
  EXPECT_TRUE(mentions(errs, "dt"));
  EXPECT_TRUE(mentions(errs, "floor"));
}

TEST(Config, PlantSpecificSections) {
  Json j = to_json(preset_chain_s1());
  j["wind"] = Json::object();
  EXPECT_TRUE(mentions(load_errors(j), "wind: only valid for a quadrotor plant"));
  Json q = to_json(preset_quad_infinity());
  q["chain"] = Json::object();
  EXPECT_TRUE(mentions(load_errors(q), "chain: only valid for a chain plant"));
}

TEST(Config, MatrixForms) {
  Json j = to_json(preset_chain_s1());
  j["controller"]["kp"] = {10.0, 20.0, 30.0};
  j["controller"]["kd"] = {{5.0, 0.0, 0.0}, {0.0, 6.0, 0.0}, {0.0, 0.0, 7.0}};
  const ScenarioConfig c = load_scenario(j);
  EXPECT_EQ(c.joint.config.kp(1, 1), 20.0);
  EXPECT_EQ(c.joint.config.kd(2, 2), 7.0);
  j["controller"]["kp"] = {1.0, 2.0};
  EXPECT_TRUE(mentions(load_errors(j), "controller.kp"));
}

TEST(Config, OverridesApplyBeforeValidation) {
  const Json j = to_json(preset_chain_s1());
  const ScenarioConfig c = load_scenario(j, {"controller.alpha=2.5", "chain.links.1.mass=0.8", "name=renamed",
                                             "variant=atde"});
  EXPECT_EQ(c.joint.config.alpha, 2.5);
  EXPECT_EQ(c.chain.links[1].mass, 0.8);
  EXPECT_EQ(c.name, "renamed");
  EXPECT_EQ(c.variant, Variant::ATDE);
  // An override can repair a file that would not validate on its own.
  Json broken = j;
  broken["controller"]["alpha"] = 1.0;
  EXPECT_NO_THROW(load_scenario(broken, {"controller.alpha=3"}));
}

TEST(Config, BadOverrides) {
  Json j = to_json(preset_chain_s1());
  EXPECT_THROW(apply_override(j, "controller.alpha"), Error);
  EXPECT_THROW(apply_override(j, "chain.links.9.mass=1"), Error);
  EXPECT_THROW(apply_override(j, "duration.x=1"), Error);
  EXPECT_TRUE(mentions(load_errors(j, {"controller.alpah=2"}), "controller.alpah: unknown key"));
}

TEST(Config, UnreadableFile) {
  EXPECT_THROW(read_json_file("/nonexistent/scenario.json"), Error);
}
