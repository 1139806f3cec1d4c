#include <gtest/gtest.h>

#include <random>

#include "support/oracles.hpp"
#include "teer/kinematics.hpp"

namespace teer {
namespace {

Eigen::Matrix4d to_matrix(const Pose& p) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = p.orientation.toRotationMatrix();
  m.topRightCorner<3, 1>() = p.position;
  return m;
}

Eigen::Matrix4d rz_matrix(double deg) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  const double r = oracle::rad(deg);
  m(0, 0) = std::cos(r);
  m(0, 1) = -std::sin(r);
  m(1, 0) = std::sin(r);
  m(1, 1) = std::cos(r);
  return m;
}

JointState random_joints(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> trans(0.0, 150.0), bend(-120.0, 120.0), roll(-360.0, 360.0);
  JointState js;
  js[Dof::ts_translation] = trans(rng);
  js[Dof::ts_rotation] = roll(rng);
  js[Dof::ts_bend] = bend(rng) * 1.5;
  js[Dof::is_translation] = trans(rng);
  js[Dof::is_bend_ml] = bend(rng);
  js[Dof::is_bend_ap] = bend(rng);
  js[Dof::ds_translation] = trans(rng);
  js[Dof::ds_rotation_cmd] = roll(rng);
  return js;
}

TEST(SheathFk, ZeroBendIsStraight) {
  const Pose p = sheath_fk(0.0, 0.0, 100.0, SheathGeometry{80.0, 2.9});
  EXPECT_DOUBLE_EQ(p.position.x(), 0.0);
  EXPECT_DOUBLE_EQ(p.position.y(), 0.0);
  EXPECT_NEAR(p.position.z(), 100.0, 1e-12);
  EXPECT_NEAR(p.orientation.angularDistance(Eigen::Quaterniond::Identity()), 0.0, 1e-15);
}

TEST(SheathFk, QuarterArcMatchesClosedFormAndIntegration) {
  const SheathGeometry g{100.0, 2.0};
  const Pose p = sheath_fk(90.0, 0.0, 100.0, g);
  // (200/pi)(1 - cos 90deg) and (200/pi) sin 90deg.
  constexpr double expected = 63.66197723675813;
  EXPECT_NEAR(p.position.x(), expected, 1e-9);
  EXPECT_NEAR(p.position.z(), expected, 1e-9);
  const Eigen::Vector3d integrated = oracle::integrate_sheath(90.0, 0.0, 100.0, 100.0);
  EXPECT_LE((p.position - integrated).norm(), 1e-6);
}

TEST(SheathFk, MatchesArcIntegrationOnRandomSamples) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> bend(-180.0, 180.0), roll(-180.0, 180.0), ins(0.0, 150.0);
  const SheathGeometry g{80.0, 2.9};
  for (int i = 0; i < 40; ++i) {
    const double b = bend(rng), r = roll(rng), d = ins(rng);
    const Eigen::Vector3d expect = oracle::integrate_sheath(b, r, d, g.bend_section_length, 200'000);
    EXPECT_LE((sheath_fk(b, r, d, g).position - expect).norm(), 1e-6) << b << " " << r << " " << d;
  }
}

TEST(SheathFk, HalfTurnRollMirrorsThroughTheBendPlaneNormal) {
  const SheathGeometry g{80.0, 2.9};
  for (double bend : {15.0, 60.0, 140.0}) {
    const Eigen::Vector3d a = sheath_fk(bend, 0.0, 95.0, g).position;
    const Eigen::Vector3d b = sheath_fk(bend, 180.0, 95.0, g).position;
    EXPECT_NEAR(b.x(), -a.x(), 1e-12);
    EXPECT_NEAR(b.y(), -a.y(), 1e-12);
    EXPECT_NEAR(b.z(), a.z(), 1e-12);
  }
}

TEST(SheathFk, TinyBendUsesSeriesAndConvergesToStraight) {
  const SheathGeometry g{80.0, 2.9};
  const double bend = 1e-6;  // deg
  const Pose p = sheath_fk(bend, 0.0, 80.0, g);
  // Closed form in extended precision as the reference.
  const long double th = static_cast<long double>(bend) * 3.14159265358979323846264338327950288L / 180.0L;
  const long double r = 80.0L / th;
  const long double x = r * (1.0L - std::cos(th));
  const long double z = r * std::sin(th);
  const double rel = std::hypot(p.position.x() - static_cast<double>(x), p.position.z() - static_cast<double>(z)) / 80.0;
  EXPECT_LT(rel, 1e-9);
  EXPECT_LT((p.position - Eigen::Vector3d(0, 0, 80)).norm() / 80.0, 1e-8);
}

TEST(SheathFk, SeriesBranchIsContinuousAtThreshold) {
  const SheathGeometry g{80.0, 2.9};
  const double at = rad2deg(kSeriesThresholdRad);
  const Pose below = sheath_fk(at * (1 - 1e-9), 0.0, 80.0, g);
  const Pose above = sheath_fk(at * (1 + 1e-9), 0.0, 80.0, g);
  EXPECT_LT((below.position - above.position).norm(), 1e-11);
}

TEST(SheathFk, PartialInsertionExposesProportionalBend) {
  const SheathGeometry g{80.0, 2.9};
  const Pose half = sheath_fk(90.0, 0.0, 40.0, g);
  // Half of the section is out: 45 degrees of tip rotation.
  const double tip_angle = rad2deg(std::atan2(half.z_axis().x(), half.z_axis().z()));
  EXPECT_NEAR(tip_angle, 45.0, 1e-12);
  const Pose none = sheath_fk(90.0, 30.0, 0.0, g);
  EXPECT_NEAR(none.position.norm(), 0.0, 1e-15);
  EXPECT_NEAR(none.orientation.angularDistance(rot_z(30.0).orientation), 0.0, 1e-12);
}

TEST(ChainFk, AllZeroJointsSitAtBaseFrame) {
  CatheterGeometry geom;
  geom.base_frame.position = {1.0, -2.0, 3.0};
  geom.base_frame.orientation = Eigen::AngleAxisd(0.3, Eigen::Vector3d(1, 2, 3).normalized());
  const ChainPoses c = chain_fk(JointState{}, geom);
  EXPECT_LT((c.clip.position - geom.base_frame.position).norm(), 1e-12);
  EXPECT_LT(c.clip.orientation.angularDistance(geom.base_frame.orientation), 1e-12);
}

TEST(ChainFk, DeviceSheathAdvanceIsRigidAlongIntermediateAxis) {
  CatheterGeometry geom;
  JointState js;
  js[Dof::ts_translation] = 40.0;
  js[Dof::is_translation] = 30.0;
  js[Dof::ts_rotation] = 25.0;
  js[Dof::ds_translation] = 12.0;
  const ChainPoses a = chain_fk(js, geom);
  js[Dof::ds_translation] += 5.0;
  const ChainPoses b = chain_fk(js, geom);
  const Eigen::Vector3d step = b.clip.position - a.clip.position;
  EXPECT_NEAR(step.norm(), 5.0, 1e-12);
  EXPECT_NEAR(step.normalized().dot(a.is_tip.z_axis()), 1.0, 1e-12);
}

TEST(ChainFk, EqualsExplicitMatrixComposition) {
  std::mt19937_64 rng(11);
  CatheterGeometry geom;
  geom.base_frame.position = {-25.0, 0.0, 66.0};
  geom.base_frame.orientation = Eigen::AngleAxisd(deg2rad(135.0), Eigen::Vector3d::UnitY());
  std::uniform_real_distribution<double> small(-5.0, 5.0), roll(-90.0, 90.0);
  for (int i = 0; i < 500; ++i) {
    const JointState js = random_joints(rng);
    DistalOffsets off;
    off.distal_roll = roll(rng);
    off.ds_extra_translation = std::abs(small(rng));
    off.is_tip_deflection = {small(rng), small(rng)};

    const double bend = std::hypot(js[Dof::is_bend_ml], js[Dof::is_bend_ap]);
    const double dir = rad2deg(std::atan2(js[Dof::is_bend_ap], js[Dof::is_bend_ml]));
    Eigen::Matrix4d deflect = Eigen::Matrix4d::Identity();
    deflect(0, 3) = off.is_tip_deflection.x();
    deflect(1, 3) = off.is_tip_deflection.y();
    const Eigen::Matrix4d ts =
        to_matrix(geom.base_frame) *
        to_matrix(sheath_fk(js[Dof::ts_bend], js[Dof::ts_rotation], js[Dof::ts_translation], geom.transseptal));
    const Eigen::Matrix4d is = ts * to_matrix(sheath_fk(bend, dir, js[Dof::is_translation], geom.intermediate)) *
                               rz_matrix(-dir) * deflect;
    const Eigen::Matrix4d clip =
        is * to_matrix(sheath_fk(0.0, off.distal_roll, js[Dof::ds_translation] + off.ds_extra_translation, geom.device));

    const ChainPoses c = chain_fk(js, geom, off);
    EXPECT_LT((to_matrix(c.ts_tip) - ts).norm(), 1e-9);
    EXPECT_LT((to_matrix(c.is_tip) - is).norm(), 1e-9);
    EXPECT_LT((to_matrix(c.clip) - clip).norm(), 1e-9);
  }
}

TEST(ChainFk, ClipRollFollowsDistalRollNotCommand) {
  CatheterGeometry geom;
  JointState js;
  js[Dof::ds_translation] = 10.0;
  js[Dof::ds_rotation_cmd] = 90.0;
  DistalOffsets off;
  off.distal_roll = 60.0;
  const ChainPoses c = chain_fk(js, geom, off);
  EXPECT_NEAR(c.clip.orientation.angularDistance(rot_z(60.0).orientation), 0.0, 1e-12);
}

TEST(ChainFk, ContinuousUnderSmallPerturbations) {
  std::mt19937_64 rng(3);
  CatheterGeometry geom;
  std::uniform_int_distribution<int> pick(0, 7);
  for (int i = 0; i < 2000; ++i) {
    JointState js = random_joints(rng);
    const Eigen::Vector3d p0 = chain_fk(js, geom).clip.position;
    for (Dof d : kAllDofs) js[d] += 1e-6;
    EXPECT_LT((chain_fk(js, geom).clip.position - p0).norm(), 1e-3);
  }
  // Through the zero-curvature point of the combined intermediate bend.
  JointState js;
  js[Dof::is_translation] = 70.0;
  js[Dof::ds_translation] = 20.0;
  const Eigen::Vector3d p0 = chain_fk(js, geom).clip.position;
  js[Dof::is_bend_ml] = -1e-6;
  js[Dof::is_bend_ap] = 1e-6;
  EXPECT_LT((chain_fk(js, geom).clip.position - p0).norm(), 1e-3);
}

TEST(ChainFk, TransseptalRollWithoutBendKeepsItsTip) {
  CatheterGeometry geom;
  geom.base_frame.position = {3, 4, 5};
  JointState js;
  js[Dof::ts_translation] = 110.0;
  const Eigen::Vector3d tip = chain_fk(js, geom).ts_tip.position;
  for (double r : {-170.0, -45.0, 10.0, 90.0, 300.0}) {
    js[Dof::ts_rotation] = r;
    EXPECT_LT((chain_fk(js, geom).ts_tip.position - tip).norm(), 1e-12);
  }
}

TEST(ChainFk, RetractedIntermediateCollapsesToTwoSheathChain) {
  std::mt19937_64 rng(5);
  CatheterGeometry geom;
  for (int i = 0; i < 200; ++i) {
    JointState js = random_joints(rng);
    js[Dof::is_translation] = 0.0;
    const ChainPoses c = chain_fk(js, geom);
    const Pose two = geom.base_frame *
                     sheath_fk(js[Dof::ts_bend], js[Dof::ts_rotation], js[Dof::ts_translation], geom.transseptal) *
                     sheath_fk(0.0, 0.0, js[Dof::ds_translation], geom.device);
    EXPECT_LT((c.clip.position - two.position).norm(), 1e-9);
    EXPECT_LT(c.clip.orientation.angularDistance(two.orientation), 1e-9);
  }
}

TEST(Pose, OrientationStaysUnit) {
  std::mt19937_64 rng(9);
  CatheterGeometry geom;
  for (int i = 0; i < 200; ++i) {
    const ChainPoses c = chain_fk(random_joints(rng), geom);
    EXPECT_NEAR(c.clip.orientation.norm(), 1.0, 1e-9);
  }
}

}  // namespace
}  // namespace teer
