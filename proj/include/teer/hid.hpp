#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace teer {

class MalformedInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Stick {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Stick&, const Stick&) = default;
};

struct DPad {
  bool up = false;
  bool down = false;
  bool left = false;
  bool right = false;
  friend bool operator==(const DPad&, const DPad&) = default;
};

struct Triggers {
  double left = 0.0;
  double right = 0.0;
  friend bool operator==(const Triggers&, const Triggers&) = default;
};

struct FaceButtons {
  bool x = false;
  bool y = false;
  bool a = false;
  bool b = false;
  friend bool operator==(const FaceButtons&, const FaceButtons&) = default;
};

enum class ModeButton { X, Y, A, B };

constexpr std::string_view to_string(ModeButton b) {
  switch (b) {
    case ModeButton::X: return "X";
    case ModeButton::Y: return "Y";
    case ModeButton::A: return "A";
    case ModeButton::B: return "B";
  }
  return "?";
}

inline ModeButton mode_button_from_string(std::string_view s) {
  if (s == "X" || s == "x") return ModeButton::X;
  if (s == "Y" || s == "y") return ModeButton::Y;
  if (s == "A" || s == "a") return ModeButton::A;
  if (s == "B" || s == "b") return ModeButton::B;
  throw MalformedInputError("unknown mode button '" + std::string(s) + "'");
}

// One sample of the game controller. Sticks in [-1, 1], triggers in [0, 1]. Stick +y is
// "forward" (away from the operator).
struct GamepadFrame {
  Stick left_stick;
  Stick right_stick;
  DPad dpad;
  Triggers triggers;
  FaceButtons buttons;
  double timestamp = 0.0;  // s

  friend bool operator==(const GamepadFrame&, const GamepadFrame&) = default;
};

inline constexpr double kDefaultDeadzone = 0.05;

namespace detail {

inline double normalize_axis(double raw, double lo, double deadzone) {
  if (!std::isfinite(raw)) throw MalformedInputError("non-finite gamepad axis");
  const double v = std::clamp(raw, lo, 1.0);
  return std::abs(v) < deadzone ? 0.0 : v;
}

}  // namespace detail

// Clamps axes into range and zeroes anything inside the deadzone. Values outside the
// deadzone pass through unscaled, so normalize is idempotent.
inline GamepadFrame normalize(const GamepadFrame& raw, double deadzone = kDefaultDeadzone) {
  if (!std::isfinite(raw.timestamp)) throw MalformedInputError("non-finite frame timestamp");
  GamepadFrame out = raw;
  out.left_stick.x = detail::normalize_axis(raw.left_stick.x, -1.0, deadzone);
  out.left_stick.y = detail::normalize_axis(raw.left_stick.y, -1.0, deadzone);
  out.right_stick.x = detail::normalize_axis(raw.right_stick.x, -1.0, deadzone);
  out.right_stick.y = detail::normalize_axis(raw.right_stick.y, -1.0, deadzone);
  out.triggers.left = detail::normalize_axis(raw.triggers.left, 0.0, deadzone);
  out.triggers.right = detail::normalize_axis(raw.triggers.right, 0.0, deadzone);
  return out;
}

// Edge-triggered mode buttons: a press held across many frames yields one event. When
// several buttons rise in the same frame, X wins over Y over A over B.
class ModeButtonEdges {
 public:
  std::optional<ModeButton> update(const FaceButtons& now) {
    std::optional<ModeButton> event;
    if (now.x && !prev_.x) event = ModeButton::X;
    else if (now.y && !prev_.y) event = ModeButton::Y;
    else if (now.a && !prev_.a) event = ModeButton::A;
    else if (now.b && !prev_.b) event = ModeButton::B;
    prev_ = now;
    return event;
  }

  void reset() { prev_ = {}; }

 private:
  FaceButtons prev_;
};

}  // namespace teer
