// Prints {"valid": [...], "invalid": [...]}: every kind of message the gateway sends or
// accepts, and client messages the parser rejects. validate_schema.py checks both lists
// against the shipped schema.

#include <iostream>

#include "teer/scenarios.hpp"
#include "teer/session.hpp"

using namespace teer;

int main() {
  json valid = json::array(), invalid = json::array();
  auto keep = [&](std::vector<json> v) {
    for (json& m : v) valid.push_back(std::move(m));
  };

  SessionConfig cfg;
  SessionCore s(cfg, "samples");
  std::uint64_t seq = 1;
  auto send = [&](ClientPayload p) {
    ClientMessage m{seq++, "samples", std::move(p)};
    valid.push_back(client_message_to_json(m));
    keep(s.driver_message(parse_client_message(client_message_to_json(m).dump())));
  };
  auto trial = [&](TrialAction a, int step = 0) { send(TrialControl{a, ControlPath::robotic, Segment::a3p3, step}); };
  auto ticks = [&](int n) {
    for (int k = 0; k < n; ++k) keep(s.tick());
  };

  valid.push_back(s.latest_snapshot());
  s.driver_connected();
  ticks(3);
  trial(TrialAction::start);
  trial(TrialAction::step_start, 1);
  GamepadFrame f;
  f.left_stick = {0.5, -0.25};
  f.dpad.up = true;
  f.triggers = {0.0, 0.75};
  f.timestamp = 3.25;
  send(InputFrame{f});
  ticks(5);
  trial(TrialAction::step_end, 1);
  trial(TrialAction::step_end, 6);  // reported as an error event
  trial(TrialAction::correction_start);
  send(ModeSelect{ModeButton::B});
  GamepadFrame roll;
  roll.dpad.right = true;
  send(InputFrame{roll});
  ticks(5);
  trial(TrialAction::correction_end);
  trial(TrialAction::step_start, 5);
  ticks(2);
  trial(TrialAction::step_end, 5);
  trial(TrialAction::stop);
  trial(TrialAction::reset);
  s.driver_gone();
  ticks(4);

  // Replay covers the events only scripted trials produce.
  TrialRecorder rec(cfg, ControlPath::manual, Segment::a1p1, 7, "samples", s.state(), std::nullopt);
  PlantState ps = s.state();
  rec.tick({}, ps, std::nullopt);
  detail::apply_clip_item(ClipItem{ClipArms::open, Grippers::down, std::nullopt}, ps, rec);
  detail::apply_disturb_item(DisturbItem{{1.5, -0.5}}, ps, rec);
  rec.event("violation", {{"what", "atrium"}});
  rec.tick({}, ps, std::nullopt);
  const TrialLog log = rec.finish();
  ReplaySource r(log, 1.0, "replay");
  valid.push_back(r.latest_snapshot());
  while (!r.finished()) keep(r.tick());

  for (const char* bad : {
           R"({"type":"input","frame":{}})",
           R"({"type":"input","seq":-1,"frame":{}})",
           R"({"type":"warp","seq":1})",
           R"({"type":"input","seq":1,"frame":{"left_stick":[1]}})",
           R"({"type":"input","seq":1,"frame":{"triggers":"x"}})",
           R"({"type":"mode","seq":1,"button":"Q"})",
           R"({"type":"mode","seq":1})",
           R"({"type":"trial","seq":1,"action":"launch"})",
           R"({"type":"trial","seq":1,"action":"step_start"})",
           R"({"type":"trial","seq":1,"action":"step_end","step":9})",
           R"({"type":"trial","seq":1,"action":"start","target":"a4p4"})",
           R"({"type":"trial","seq":1,"action":"start","control":"remote"})",
       }) {
    try {
      parse_client_message(bad);
      std::cerr << "parser accepted " << bad << '\n';
      return 1;
    } catch (const MalformedInputError&) {
      invalid.push_back(json::parse(bad));
    }
  }
  std::cout << json{{"valid", valid}, {"invalid", invalid}}.dump() << '\n';
}
