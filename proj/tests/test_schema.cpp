#include <gtest/gtest.h>

#include <set>

#include "teer/session.hpp"

using namespace teer;

namespace {

const json& schema() {
  static const json s = read_json_file(std::filesystem::path(TEER_SOURCE_DIR) / "schema" / "teer.schema.json");
  return s;
}

const json& def(const std::string& name) { return schema().at("$defs").at(name); }

std::set<std::string> strings(const json& arr) {
  std::set<std::string> out;
  for (const json& v : arr) out.insert(v.get<std::string>());
  return out;
}

std::set<std::string> keys(const json& obj) {
  std::set<std::string> out;
  for (auto it = obj.begin(); it != obj.end(); ++it) out.insert(it.key());
  return out;
}

}  // namespace

TEST(WireSchema, VersionMatches) { EXPECT_EQ(schema().at("version"), std::string(kWireVersion)); }

TEST(WireSchema, EnumerationsMatchTheCode) {
  std::set<std::string> dofs;
  for (Dof d : kAllDofs) dofs.insert(std::string(dof_name(d)));
  EXPECT_EQ(strings(def("DofName").at("enum")), dofs);
  EXPECT_EQ(keys(def("DofVector").at("properties")), dofs);

  std::set<std::string> buttons, segments, actions;
  for (ModeButton b : {ModeButton::X, ModeButton::Y, ModeButton::A, ModeButton::B}) buttons.insert(std::string(to_string(b)));
  for (Segment s : {Segment::a1p1, Segment::a2p2, Segment::a3p3}) segments.insert(std::string(to_string(s)));
  for (TrialAction a : {TrialAction::start, TrialAction::stop, TrialAction::reset, TrialAction::step_start,
                        TrialAction::step_end, TrialAction::correction_start, TrialAction::correction_end})
    actions.insert(std::string(to_string(a)));
  EXPECT_EQ(strings(def("ModeButton").at("enum")), buttons);
  EXPECT_EQ(strings(def("Segment").at("enum")), segments);
  EXPECT_EQ(strings(def("TrialControl").at("properties").at("action").at("enum")), actions);
}

TEST(WireSchema, SnapshotFieldsMatchWhatIsSent) {
  SessionCore s(SessionConfig{}, "k");
  const json snap = s.latest_snapshot();
  EXPECT_EQ(keys(snap), strings(def("Snapshot").at("required")));
  EXPECT_EQ(keys(snap), keys(def("Snapshot").at("properties")));
  EXPECT_EQ(keys(snap.at("disturbance")), keys(def("DisturbanceState").at("properties")));
  EXPECT_EQ(keys(snap.at("score")), keys(def("PlacementScore").at("properties")));
}

TEST(WireSchema, GamepadFrameFieldsMatch) {
  const json f = GamepadFrame{};
  EXPECT_EQ(keys(f), keys(def("GamepadFrame").at("properties")));
  EXPECT_EQ(keys(f.at("buttons")), keys(def("GamepadFrame").at("properties").at("buttons").at("properties")));
  EXPECT_EQ(keys(f.at("dpad")), keys(def("GamepadFrame").at("properties").at("dpad").at("properties")));
}

TEST(WireSchema, SummaryFieldsMatch) {
  TrialSummary s;
  s.timings = StepTimings{};
  const json j = s;
  EXPECT_EQ(keys(j), keys(def("TrialSummary").at("properties")));
  EXPECT_EQ(keys(j.at("timings")), keys(def("StepTimings").at("properties")));
}
