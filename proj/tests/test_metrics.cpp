#include <gtest/gtest.h>

#include <random>

#include "teer/metrics.hpp"

using namespace teer;

namespace {

struct Spec {
  std::string script;
  ControlPath control;
  Segment target;
  double total;
  double along;
  std::optional<double> twist = std::nullopt;
  bool violation = false;
};

TrialLog make(const Spec& s) {
  TrialLog l;
  l.header.script = s.script;
  l.header.control = s.control;
  l.header.target = s.target;
  TrialSummary sum;
  StepTimings t;
  t.t_steps_2_3 = s.total / 2;
  t.t_steps_7_8 = s.total / 2;
  t.total = s.total;
  sum.timings = t;
  sum.score.along_line_position = s.along;
  sum.residual_twist = s.twist;
  sum.atrium_violation = s.violation;
  sum.coupled_extension = s.control == ControlPath::manual ? 6.0 : 0.0;
  l.summary = sum;
  return l;
}

std::vector<TrialLog> sample() {
  return {make({"m1", ControlPath::manual, Segment::a2p2, 100, -7.5, 30.0, true}),
          make({"m2", ControlPath::manual, Segment::a2p2, 120, 7.5, 26.0}),
          make({"r1", ControlPath::robotic, Segment::a2p2, 55, 1.0, 4.0}),
          make({"r2", ControlPath::robotic, Segment::a2p2, 59, -1.0}),
          make({"r3", ControlPath::robotic, Segment::a1p1, 40, 0.0})};
}

}  // namespace

TEST(Stat, MeanAndSampleDeviation) {
  const Stat s = stat({2, 4, 4, 4, 5, 5, 7, 9});
  EXPECT_EQ(s.n, 8u);
  EXPECT_DOUBLE_EQ(s.mean, 5.0);
  EXPECT_DOUBLE_EQ(s.sd, std::sqrt(32.0 / 7.0));
  EXPECT_EQ(stat({}).n, 0u);
  EXPECT_EQ(stat({3.0}).sd, 0.0);
  EXPECT_EQ(stat({3.0}).mean, 3.0);
}

TEST(ComputeMetrics, GroupsAndComparisons) {
  const MetricsReport r = compute_metrics(sample());
  ASSERT_EQ(r.trials.size(), 5u);
  ASSERT_EQ(r.groups.size(), 3u);

  const GroupRow& man = r.groups[0];
  EXPECT_EQ(man.control, ControlPath::manual);
  EXPECT_EQ(man.target, Segment::a2p2);
  EXPECT_EQ(man.trials, 2u);
  EXPECT_DOUBLE_EQ(man.mean_timings->total, 110.0);
  EXPECT_DOUBLE_EQ(*man.placement_spread, 15.0);
  EXPECT_EQ(man.residual_twist.n, 2u);
  EXPECT_DOUBLE_EQ(man.residual_twist.mean, 28.0);
  EXPECT_DOUBLE_EQ(man.coupled_extension.mean, 6.0);
  EXPECT_EQ(man.atrium_violations, 1u);

  // Robotic groups sort after manual ones, by target.
  EXPECT_EQ(r.groups[1].control, ControlPath::robotic);
  EXPECT_EQ(r.groups[1].target, Segment::a1p1);
  EXPECT_EQ(r.groups[1].placement_spread, std::nullopt);
  const GroupRow& rob = r.groups[2];
  EXPECT_EQ(rob.residual_twist.n, 1u);
  EXPECT_DOUBLE_EQ(*rob.placement_spread, 2.0);

  // Only a2p2 has both control paths.
  ASSERT_EQ(r.comparisons.size(), 1u);
  EXPECT_EQ(r.comparisons[0].target, Segment::a2p2);
  EXPECT_DOUBLE_EQ(*r.comparisons[0].time_ratio, 57.0 / 110.0);
}

TEST(ComputeMetrics, IndependentOfInputOrder) {
  auto logs = sample();
  const std::string want = metrics_to_json(compute_metrics(logs)).dump();
  const std::string csv = metrics_to_csv(compute_metrics(logs));
  std::mt19937 rng(5);
  for (int k = 0; k < 10; ++k) {
    std::shuffle(logs.begin(), logs.end(), rng);
    EXPECT_EQ(metrics_to_json(compute_metrics(logs)).dump(), want);
    EXPECT_EQ(metrics_to_csv(compute_metrics(logs)), csv);
  }
}

TEST(ComputeMetrics, ErrorsAndMissingTimings) {
  EXPECT_THROW(compute_metrics({}), std::invalid_argument);
  TrialLog bare;
  EXPECT_THROW(compute_metrics({bare}), MalformedLogError);

  auto logs = sample();
  logs[2].summary->timings.reset();
  logs[3].summary->timings.reset();
  const MetricsReport r = compute_metrics(logs);
  EXPECT_EQ(r.groups[2].mean_timings, std::nullopt);
  ASSERT_EQ(r.comparisons.size(), 1u);
  EXPECT_EQ(r.comparisons[0].time_ratio, std::nullopt);
}

TEST(MetricsOutput, CsvTables) {
  const std::string csv = metrics_to_csv(compute_metrics(sample()));
  std::vector<std::string> lines;
  std::istringstream in(csv);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  // header + 5 trials, blank, header + 3 groups, blank, header + 1 comparison
  ASSERT_EQ(lines.size(), 14u);
  EXPECT_EQ(lines[1], "m1,manual,a2p2,0,50,0,0,50,100,-7.5,0,0,0,30,6,0,1");
  EXPECT_EQ(lines[3], "r3,robotic,a1p1,0,20,0,0,20,40,0,0,0,0,,0,0,0");
  EXPECT_EQ(lines[5], "r2,robotic,a2p2,0,29.5,0,0,29.5,59,-1,0,0,0,,0,0,0");
  EXPECT_EQ(lines[6], "");
  EXPECT_EQ(lines[8], "manual,a2p2,2,0,55,0,0,55,110,15,28,2.828427125,6,0,0,1");
  EXPECT_EQ(lines[9], "robotic,a1p1,1,0,20,0,0,20,40,,,,0,0,0,0");
  EXPECT_EQ(lines[12], "target,time_ratio");
  EXPECT_EQ(lines[13], "a2p2,0.5181818182");
  for (std::size_t k : {0u, 7u}) {
    const auto header_cols = std::count(lines[k].begin(), lines[k].end(), ',');
    for (std::size_t j = k + 1; j < lines.size() && !lines[j].empty(); ++j)
      EXPECT_EQ(std::count(lines[j].begin(), lines[j].end(), ','), header_cols) << lines[j];
  }
}

TEST(MetricsOutput, JsonUsesNullForMissingValues) {
  const json j = metrics_to_json(compute_metrics(sample()));
  EXPECT_TRUE(j.at("trials")[4].at("residual_twist").is_null());
  EXPECT_TRUE(j.at("groups")[1].at("placement_spread").is_null());
  EXPECT_EQ(j.at("groups")[0].at("residual_twist").at("n"), 2);
  EXPECT_DOUBLE_EQ(j.at("comparisons")[0].at("time_ratio").get<double>(), 57.0 / 110.0);
}
