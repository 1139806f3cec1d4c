#include <gtest/gtest.h>

#include <random>

#include "teer/control.hpp"

namespace teer {
namespace {

constexpr double kDt = 0.01;

GamepadFrame random_frame(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> axis(-1.5, 1.5), trig(-0.5, 1.5);
  std::bernoulli_distribution press(0.3);
  GamepadFrame f;
  f.left_stick = {axis(rng), axis(rng)};
  f.right_stick = {axis(rng), axis(rng)};
  f.triggers = {trig(rng), trig(rng)};
  f.dpad = {press(rng), press(rng), press(rng), press(rng)};
  return f;
}

TEST(ModeTable, StepsMapToTableModes) {
  const int expected[] = {1, 2, 3, 4, 4, 4, 4, 4};
  for (int step = 1; step <= 8; ++step) EXPECT_EQ(mode_for_step(step), expected[step - 1]);
  EXPECT_THROW(mode_for_step(0), std::invalid_argument);
  EXPECT_THROW(mode_for_step(9), std::invalid_argument);
}

TEST(ModeTable, MasksMatchModeDefinitions) {
  EXPECT_EQ(movable_dofs(control_mode(1)), (DofSet{Dof::ts_bend, Dof::ts_rotation, Dof::ts_translation}));
  EXPECT_EQ(movable_dofs(control_mode(2)), (DofSet{Dof::ts_rotation, Dof::is_bend_ml, Dof::is_translation}));
  EXPECT_EQ(movable_dofs(control_mode(3)),
            (DofSet{Dof::is_translation, Dof::is_bend_ml, Dof::is_bend_ap, Dof::ts_rotation}));
  EXPECT_EQ(movable_dofs(control_mode(4)), (DofSet{Dof::ds_translation, Dof::ds_rotation_cmd, Dof::ts_rotation}));
  EXPECT_EQ(control_mode(1).trigger_translation_set, Sheath::transseptal | Sheath::intermediate | Sheath::device);
  EXPECT_EQ(control_mode(2).trigger_translation_set, Sheath::intermediate | Sheath::device);
  EXPECT_EQ(control_mode(3).trigger_translation_set, Sheath::intermediate | Sheath::device);
}

TEST(MapGamepad, ModeFourIgnoresRightStick) {
  GamepadFrame f;
  f.right_stick = {1.0, 1.0};
  const VelocityCommand c = map_gamepad(f, control_mode(4), SpeedLimits{});
  EXPECT_EQ(c.rate[Dof::is_bend_ml], 0.0);
  EXPECT_EQ(c.rate[Dof::is_bend_ap], 0.0);
  EXPECT_EQ(c.rate[Dof::is_translation], 0.0);
}

TEST(MapGamepad, ModeThreeLeftStick) {
  GamepadFrame f;
  f.left_stick = {1.0, 0.0};
  EXPECT_TRUE(map_gamepad(f, control_mode(3), SpeedLimits{}).is_zero());
  f.left_stick = {0.0, 1.0};
  const VelocityCommand c = map_gamepad(f, control_mode(3), SpeedLimits{});
  EXPECT_DOUBLE_EQ(c.rate[Dof::ts_rotation], 14.56);
  for (Dof d : kAllDofs)
    if (d != Dof::ts_rotation) {
      EXPECT_EQ(c.rate[d], 0.0);
    }
}

TEST(MapGamepad, ModeOneFlexesTransseptalAtClamp) {
  GamepadFrame f;
  f.left_stick = {1.0, 0.0};
  EXPECT_DOUBLE_EQ(map_gamepad(f, control_mode(1), SpeedLimits{}).rate[Dof::ts_bend], 5.46);
}

TEST(MapGamepad, IdleFrameIsZero) {
  for (int m = 1; m <= 4; ++m) {
    const VelocityCommand c = map_gamepad(GamepadFrame{}, control_mode(m), SpeedLimits{});
    EXPECT_TRUE(c.is_zero());
    EXPECT_FALSE(c.dither_requested);
  }
}

TEST(MapGamepad, TriggersMoveTheModeGroup) {
  GamepadFrame f;
  f.triggers = {0.0, 0.5};
  EXPECT_DOUBLE_EQ(map_gamepad(f, control_mode(1), SpeedLimits{}).rate[Dof::ts_translation], 3.0);
  EXPECT_DOUBLE_EQ(map_gamepad(f, control_mode(2), SpeedLimits{}).rate[Dof::is_translation], 3.0);
  EXPECT_DOUBLE_EQ(map_gamepad(f, control_mode(3), SpeedLimits{}).rate[Dof::is_translation], 3.0);
  EXPECT_DOUBLE_EQ(map_gamepad(f, control_mode(4), SpeedLimits{}).rate[Dof::ds_translation], 3.0);
  f.triggers = {1.0, 0.0};
  EXPECT_DOUBLE_EQ(map_gamepad(f, control_mode(2), SpeedLimits{}).rate[Dof::is_translation], -6.0);
}

TEST(MapGamepad, TriggerPlusDpadStillClamped) {
  GamepadFrame f;
  f.triggers = {0.0, 1.0};
  f.dpad.up = true;
  EXPECT_DOUBLE_EQ(map_gamepad(f, control_mode(4), SpeedLimits{}).rate[Dof::ds_translation], 6.0);
}

TEST(MapGamepad, InvertApFlipsSign) {
  GamepadFrame f;
  f.right_stick = {0.0, 1.0};
  EXPECT_DOUBLE_EQ(map_gamepad(f, control_mode(3), SpeedLimits{}, false).rate[Dof::is_bend_ap], 5.46);
  EXPECT_DOUBLE_EQ(map_gamepad(f, control_mode(3), SpeedLimits{}, true).rate[Dof::is_bend_ap], -5.46);
}

TEST(MapGamepad, RejectsNaN) {
  GamepadFrame f;
  f.right_stick.x = std::nan("");
  EXPECT_THROW(map_gamepad(f, control_mode(3), SpeedLimits{}), MalformedInputError);
}

TEST(MapGamepad, DitherRequestedIffModeFourRoll) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20000; ++i) {
    const GamepadFrame f = random_frame(rng);
    for (int m = 1; m <= 4; ++m) {
      const VelocityCommand c = map_gamepad(f, control_mode(m), SpeedLimits{});
      EXPECT_EQ(c.dither_requested, m == 4 && c.rate[Dof::ds_rotation_cmd] != 0.0);
    }
  }
}

TEST(MapGamepad, GatingSoundOverSignGrid) {
  const double vals[] = {-1.0, 0.0, 1.0};
  const double tvals[] = {0.0, 1.0};
  int checked = 0;
  for (double lx : vals)
    for (double ly : vals)
      for (double rx : vals)
        for (double ry : vals)
          for (double tl : tvals)
            for (double tr : tvals)
              for (int dp = 0; dp < 16; ++dp) {
                GamepadFrame f;
                f.left_stick = {lx, ly};
                f.right_stick = {rx, ry};
                f.triggers = {tl, tr};
                f.dpad = {(dp & 1) != 0, (dp & 2) != 0, (dp & 4) != 0, (dp & 8) != 0};
                for (int m = 1; m <= 4; ++m) {
                  const ControlMode mode = control_mode(m);
                  const VelocityCommand c = map_gamepad(f, mode, SpeedLimits{});
                  for (Dof d : kAllDofs)
                    if (!movable_dofs(mode).contains(d)) {
                      ASSERT_EQ(c.rate[d], 0.0);
                    }
                  ++checked;
                }
              }
  EXPECT_EQ(checked, 81 * 4 * 16 * 4);
}

TEST(Clamp, SaturatesAndPassesThrough) {
  VelocityCommand c;
  c.rate[Dof::is_bend_ml] = 10.0;
  c.rate[Dof::ds_translation] = 3.0;
  c.rate[Dof::ds_rotation_cmd] = -100.0;
  const VelocityCommand out = clamp(c, SpeedLimits{});
  EXPECT_DOUBLE_EQ(out.rate[Dof::is_bend_ml], 5.46);
  EXPECT_DOUBLE_EQ(out.rate[Dof::ds_translation], 3.0);
  EXPECT_DOUBLE_EQ(out.rate[Dof::ds_rotation_cmd], -14.56);
}

TEST(Clamp, Idempotent) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> r(-50.0, 50.0);
  for (int i = 0; i < 10000; ++i) {
    VelocityCommand c;
    for (Dof d : kAllDofs) c.rate[d] = r(rng);
    EXPECT_EQ(clamp(clamp(c, SpeedLimits{}), SpeedLimits{}), clamp(c, SpeedLimits{}));
  }
}

TEST(StepRobotic, ModeTwoFlexureNeverExtendsDeviceSheath) {
  PlantModel model;
  PlantState s;
  s.js[Dof::is_translation] = 30.0;
  GamepadFrame f;
  f.right_stick = {1.0, 0.0};
  const VelocityCommand c = map_gamepad(f, control_mode(2), SpeedLimits{});
  for (int i = 0; i < 1700; ++i) s = step_robotic(s, c, kDt, model);
  EXPECT_GT(s.js[Dof::is_bend_ml], 90.0);
  EXPECT_EQ(s.dist.coupled_extension, 0.0);
}

TEST(StepRobotic, ZeroCommandChangesOnlyDither) {
  PlantModel model;
  PlantState s;
  s.js[Dof::ts_translation] = 20;
  s.js[Dof::ds_rotation_cmd] = 40;
  s.dist.distal_roll = 34;
  s.dist.windup = 6;
  s.dist.dither_active = true;
  s.dist.dither_phase = 0.3;
  s.dist.dither_offset = 2.5 * std::sin(0.3);
  const PlantState after = step_robotic(s, VelocityCommand{}, kDt, model);
  EXPECT_EQ(after.js, s.js);
  EXPECT_EQ(after.dist.windup, s.dist.windup);
  EXPECT_EQ(after.dist.distal_roll, s.dist.distal_roll);
  EXPECT_EQ(after.dist.coupled_extension, s.dist.coupled_extension);
  EXPECT_NE(after.dist.dither_phase, s.dist.dither_phase);

  PlantState still;
  still.js[Dof::is_bend_ml] = 12.0;
  EXPECT_EQ(step_robotic(still, VelocityCommand{}, kDt, model), still);
}

TEST(StepRobotic, NinetyDegreeRollTakesSixPointOneEightSeconds) {
  PlantModel model;
  PlantState s;
  GamepadFrame f;
  f.dpad.right = true;
  const VelocityCommand c = map_gamepad(f, control_mode(4), SpeedLimits{});
  int ticks = 0;
  while (s.js[Dof::ds_rotation_cmd] < 90.0 - 1e-12) {
    s = step_robotic(s, c, kDt, model);
    ++ticks;
  }
  EXPECT_NEAR(ticks * kDt, 90.0 / 14.56, kDt);
}

TEST(StepRobotic, JointLimitsSaturate) {
  PlantModel model;
  PlantState s;
  VelocityCommand c;
  c.rate[Dof::is_bend_ml] = 5.46;
  c.rate[Dof::ds_translation] = -6.0;
  for (int i = 0; i < 3000; ++i) s = step_robotic(s, c, kDt, model);
  EXPECT_EQ(s.js[Dof::is_bend_ml], model.limits.is_bend_max);
  EXPECT_EQ(s.js[Dof::ds_translation], 0.0);
}

TEST(StepManual, FlexureDragsDeviceSheath) {
  PlantModel model;
  PlantState s;
  const ManualAction flex{Dof::is_bend_ml, 5.46, false};
  for (int i = 0; i < 500; ++i) s = step_manual(s, flex, kDt, model);
  EXPECT_GT(s.dist.coupled_extension, 0.0);
  EXPECT_NEAR(s.dist.coupled_extension, model.friction.k_couple * s.js[Dof::is_bend_ml], 1e-9);
}

TEST(StepManual, HandDitherLowersThresholdOnlyWhileDithering) {
  PlantModel model;
  PlantState s;
  const ManualAction roll{Dof::ds_rotation_cmd, 14.56, false};
  const ManualAction roll_dither{Dof::ds_rotation_cmd, 14.56, true};
  for (int i = 0; i < 400; ++i) s = step_manual(s, roll, kDt, model);
  EXPECT_NEAR(s.dist.windup, model.friction.tau_static, 1e-9);
  for (int i = 0; i < 10; ++i) s = step_manual(s, roll_dither, kDt, model);
  const double relieved = model.friction.tau_static * model.friction.dither_relief;
  EXPECT_NEAR(s.dist.windup, relieved, 1e-9);
  s = step_manual(s, roll, kDt, model);
  EXPECT_NEAR(s.dist.windup, relieved + 14.56 * kDt, 1e-9);
}

TEST(StepManual, IdleActionIsNoOp) {
  PlantModel model;
  PlantState s;
  s.js[Dof::is_translation] = 40;
  s.dist.windup = 12;
  s.dist.coupled_extension = 3;
  EXPECT_EQ(step_manual(s, ManualAction::idle(), kDt, model), s);
}

TEST(SetMode, ButtonBindings) {
  const ControlMode m = control_mode(2);
  EXPECT_EQ(set_mode(m, ModeButton::X).id, 1);
  EXPECT_EQ(set_mode(m, ModeButton::Y).id, 2);
  EXPECT_EQ(set_mode(m, ModeButton::A).id, 3);
  EXPECT_EQ(set_mode(m, ModeButton::B).id, 4);
  EXPECT_EQ(set_mode(set_mode(m, ModeButton::A), ModeButton::A), set_mode(m, ModeButton::A));
  ModeBindings custom;
  custom.mode = {4, 3, 2, 1};
  EXPECT_EQ(set_mode(m, ModeButton::A, custom).id, 2);
}

TEST(RoboticController, ModeChangeMidRollEmitsOneZeroTick) {
  RoboticController ctl({}, 4);
  GamepadFrame roll;
  roll.dpad.right = true;
  int t = 0;
  auto frame = [&](GamepadFrame f) {
    f.timestamp = (t++) * kDt;
    return f;
  };
  EXPECT_DOUBLE_EQ(ctl.tick(frame(roll)).cmd.rate[Dof::ds_rotation_cmd], 14.56);
  EXPECT_DOUBLE_EQ(ctl.tick(std::nullopt).cmd.rate[Dof::ds_rotation_cmd], 14.56);

  GamepadFrame press = roll;
  press.buttons.b = true;  // re-select mode 4 while rolling
  const auto out = ctl.tick(frame(press));
  ASSERT_TRUE(out.mode_changed_to.has_value());
  EXPECT_TRUE(out.cmd.is_zero());
  // Without new input the latched roll is gone.
  EXPECT_TRUE(ctl.tick(std::nullopt).cmd.is_zero());
  // Holding the button does not re-trigger; new input resumes motion.
  const auto resumed = ctl.tick(frame(press));
  EXPECT_FALSE(resumed.mode_changed_to.has_value());
  EXPECT_DOUBLE_EQ(resumed.cmd.rate[Dof::ds_rotation_cmd], 14.56);
}

TEST(RoboticController, DeadzoneAppliedBeforeMapping) {
  RoboticController ctl({}, 3);
  GamepadFrame f;
  f.right_stick = {0.03, -0.04};
  EXPECT_TRUE(ctl.tick(f).cmd.is_zero());
}

}  // namespace
}  // namespace teer
