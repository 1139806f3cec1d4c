#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace teer {

// The eight continuous DOFs of the three telescoping sheaths.
enum class Dof : std::size_t {
  ts_translation = 0,
  ts_rotation,
  ts_bend,
  is_translation,
  is_bend_ml,
  is_bend_ap,
  ds_translation,
  ds_rotation_cmd,
};

inline constexpr std::size_t kDofCount = 8;

inline constexpr std::array<Dof, kDofCount> kAllDofs = {
    Dof::ts_translation, Dof::ts_rotation, Dof::ts_bend,        Dof::is_translation,
    Dof::is_bend_ml,     Dof::is_bend_ap,  Dof::ds_translation, Dof::ds_rotation_cmd};

enum class DofKind { translation, rotation, flexure };

constexpr DofKind dof_kind(Dof d) {
  switch (d) {
    case Dof::ts_translation:
    case Dof::is_translation:
    case Dof::ds_translation:
      return DofKind::translation;
    case Dof::ts_rotation:
    case Dof::ds_rotation_cmd:
      return DofKind::rotation;
    default:
      return DofKind::flexure;
  }
}

constexpr std::string_view dof_name(Dof d) {
  constexpr std::array<std::string_view, kDofCount> names = {
      "ts_translation", "ts_rotation",    "ts_bend",        "is_translation",
      "is_bend_ml",     "is_bend_ap",     "ds_translation", "ds_rotation_cmd"};
  return names[static_cast<std::size_t>(d)];
}

inline Dof dof_from_name(std::string_view name) {
  for (Dof d : kAllDofs) {
    if (dof_name(d) == name) return d;
  }
  throw std::invalid_argument("unknown DOF '" + std::string(name) + "'");
}

// Fixed-size vector indexed by Dof. Used for joint values and joint rates.
struct DofVector {
  std::array<double, kDofCount> v{};

  constexpr double& operator[](Dof d) { return v[static_cast<std::size_t>(d)]; }
  constexpr double operator[](Dof d) const { return v[static_cast<std::size_t>(d)]; }

  friend constexpr bool operator==(const DofVector&, const DofVector&) = default;
};

// A set of DOFs, stored as a bitmask.
class DofSet {
 public:
  constexpr DofSet() = default;
  constexpr DofSet(std::initializer_list<Dof> dofs) {
    for (Dof d : dofs) insert(d);
  }

  constexpr void insert(Dof d) { bits_ |= bit(d); }
  constexpr bool contains(Dof d) const { return (bits_ & bit(d)) != 0; }
  constexpr DofSet operator|(DofSet o) const { return from_bits(bits_ | o.bits_); }
  constexpr unsigned bits() const { return bits_; }

  friend constexpr bool operator==(const DofSet&, const DofSet&) = default;

 private:
  static constexpr unsigned bit(Dof d) { return 1u << static_cast<unsigned>(d); }
  static constexpr DofSet from_bits(unsigned b) {
    DofSet s;
    s.bits_ = b;
    return s;
  }
  unsigned bits_ = 0;
};

enum class ClipArms { closed, open };
enum class Grippers { up, down };
enum class ClipAttachment { attached, released };

constexpr std::string_view to_string(ClipArms a) { return a == ClipArms::open ? "open" : "closed"; }
constexpr std::string_view to_string(Grippers g) { return g == Grippers::down ? "down" : "up"; }
constexpr std::string_view to_string(ClipAttachment c) {
  return c == ClipAttachment::released ? "released" : "attached";
}

// Joint values in mm (translations) and degrees (rotations, bends). Translations are
// relative: the intermediate sheath is measured from the transseptal tip and the device
// sheath from the intermediate tip.
struct JointState {
  DofVector q;
  ClipArms clip_arms = ClipArms::closed;
  Grippers grippers = Grippers::up;
  ClipAttachment clip = ClipAttachment::attached;

  constexpr double& operator[](Dof d) { return q[d]; }
  constexpr double operator[](Dof d) const { return q[d]; }

  friend constexpr bool operator==(const JointState&, const JointState&) = default;
};

// Stroke and bend limits. Rotations are unbounded.
struct JointLimits {
  double ts_stroke = 150.0;
  double is_stroke = 150.0;
  double ds_stroke = 150.0;
  double ts_bend_max = 180.0;
  double is_bend_max = 120.0;

  constexpr double lower(Dof d) const {
    switch (dof_kind(d)) {
      case DofKind::translation: return 0.0;
      case DofKind::rotation: return -std::numeric_limits<double>::infinity();
      case DofKind::flexure: return -upper(d);
    }
    return 0.0;
  }

  constexpr double upper(Dof d) const {
    switch (d) {
      case Dof::ts_translation: return ts_stroke;
      case Dof::is_translation: return is_stroke;
      case Dof::ds_translation: return ds_stroke;
      case Dof::ts_bend: return ts_bend_max;
      case Dof::is_bend_ml:
      case Dof::is_bend_ap: return is_bend_max;
      default: return std::numeric_limits<double>::infinity();
    }
  }

  constexpr double saturate(Dof d, double value) const {
    if (value < lower(d)) return lower(d);
    if (value > upper(d)) return upper(d);
    return value;
  }

  bool within(const JointState& js) const {
    for (Dof d : kAllDofs) {
      if (js[d] < lower(d) || js[d] > upper(d)) return false;
    }
    return true;
  }
};

}  // namespace teer
