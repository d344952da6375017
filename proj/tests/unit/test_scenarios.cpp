#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "gridcap/feeders.hpp"
#include "gridcap/scenarios.hpp"

using namespace gridcap;

namespace {

LoadProfile first_periods(const LoadProfile& profile, std::size_t count, std::size_t stride = 1) {
  LoadProfile out(profile.node_count(), count, profile.step_minutes());
  for (NodeId n = 0; n < profile.node_count(); ++n)
    for (Phase ph : kPhases)
      for (std::size_t t = 0; t < count; ++t) {
        out.p(n, ph, t) = profile.p(n, ph, t * stride);
        out.q(n, ph, t) = profile.q(n, ph, t * stride);
      }
  return out;
}

}  // namespace

TEST(Scenarios, ParsesNamesAndFormulations) {
  EXPECT_EQ(parse_scenario_kind("S3"), ScenarioKind::S3_RandomFixed);
  EXPECT_EQ(parse_scenario_kind("s5"), ScenarioKind::S5_LoadedFixed);
  EXPECT_THROW(parse_scenario_kind("S6"), ParseError);
  EXPECT_EQ(parse_formulation("lin"), Formulation::LinDist3Flow);
  EXPECT_EQ(parse_formulation("slp"), Formulation::CurrentVoltageSLP);
  EXPECT_THROW(parse_formulation("ac"), ParseError);
  EXPECT_EQ(Scenario::make(ScenarioKind::S4_LoadedPerPeriod, 9).name(), "S4");
  EXPECT_FALSE(Scenario::make(ScenarioKind::S4_LoadedPerPeriod, 9).seed.has_value());
  EXPECT_THROW(assign_phases(NetworkModel(fixtures::four_node()), LoadProfile(4, 1),
                             Scenario{ScenarioKind::S2_RandomPerPeriod, std::nullopt}, Direction::Export),
               ModelError);
}

TEST(Scenarios, S1LeavesEveryDerNodeFree) {
  auto [net, profile] = build_cigre_lv(1);
  const auto a = assign_phases(net, profile, Scenario::make(ScenarioKind::S1_Binaries), Direction::Export);
  for (NodeId n : net.der_nodes())
    for (std::size_t t = 0; t < profile.horizon(); ++t) EXPECT_FALSE(a.at(n, t).has_value());
}

TEST(Scenarios, RandomRulesAreSeededAndS3IsPeriodInvariant) {
  auto [net, profile] = build_cigre_lv(1);
  const auto s2 = assign_phases(net, profile, Scenario::make(ScenarioKind::S2_RandomPerPeriod, 7), Direction::Export);
  const auto s2_again =
      assign_phases(net, profile, Scenario::make(ScenarioKind::S2_RandomPerPeriod, 7), Direction::Import);
  const auto s2_other =
      assign_phases(net, profile, Scenario::make(ScenarioKind::S2_RandomPerPeriod, 8), Direction::Export);
  const auto s3 = assign_phases(net, profile, Scenario::make(ScenarioKind::S3_RandomFixed, 7), Direction::Export);
  EXPECT_TRUE(s2 == s2_again);
  EXPECT_FALSE(s2 == s2_other);
  EXPECT_TRUE(s2.fully_fixed(net));
  EXPECT_FALSE(s2.period_invariant());
  EXPECT_TRUE(s3.period_invariant());
  for (NodeId n : net.der_nodes()) EXPECT_EQ(s3.at(n, 5), s2.at(n, 0));
}

TEST(Scenarios, LoadedRulesFollowDirection) {
  NetworkModel net(fixtures::four_node());
  LoadProfile profile(net.node_count(), 2);
  const NodeId u1 = net.index_of("U1");
  const double a[2] = {3.0, 1.0}, b[2] = {2.0, 2.0}, c[2] = {1.0, 2.0};
  for (std::size_t t = 0; t < 2; ++t) {
    profile.p(u1, Phase::A, t) = a[t];
    profile.p(u1, Phase::B, t) = b[t];
    profile.p(u1, Phase::C, t) = c[t];
  }
  const auto s4e = assign_phases(net, profile, Scenario::make(ScenarioKind::S4_LoadedPerPeriod), Direction::Export);
  const auto s4i = assign_phases(net, profile, Scenario::make(ScenarioKind::S4_LoadedPerPeriod), Direction::Import);
  const auto s5e = assign_phases(net, profile, Scenario::make(ScenarioKind::S5_LoadedFixed), Direction::Export);
  const auto s5i = assign_phases(net, profile, Scenario::make(ScenarioKind::S5_LoadedFixed), Direction::Import);
  EXPECT_EQ(s4e.at(u1, 0), Phase::A);
  EXPECT_EQ(s4e.at(u1, 1), Phase::B);  // B and C tie, the earlier phase wins
  EXPECT_EQ(s4i.at(u1, 0), Phase::C);
  EXPECT_EQ(s4i.at(u1, 1), Phase::A);
  EXPECT_EQ(s5e.at(u1, 0), Phase::A);  // sums 4, 4, 3
  EXPECT_EQ(s5e.at(u1, 1), Phase::A);
  EXPECT_EQ(s5i.at(u1, 1), Phase::C);
}

TEST(Scenarios, SinglePhaseUsersKeepTheirPhase) {
  NetworkModel net(fixtures::four_node());
  LoadProfile profile(net.node_count(), 3);
  const NodeId u2 = net.index_of("U2");
  for (std::size_t t = 0; t < 3; ++t) profile.p(u2, Phase::C, t) = 0.01;
  for (ScenarioKind k : kScenarioKinds) {
    const auto a = assign_phases(net, profile, Scenario::make(k, 3), Direction::Export);
    for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(a.at(u2, t), Phase::C);
  }
}

TEST(Scenarios, HcSolveCertifiesSlpAndFlagsInfeasibleBase) {
  auto [net, profile] = build_cigre_lv(1);
  const auto lin = hc_solve(net, profile, Direction::Export, Scenario::make(ScenarioKind::S5_LoadedFixed),
                            Formulation::LinDist3Flow);
  const auto slp = hc_solve(net, profile, Direction::Export, Scenario::make(ScenarioKind::S5_LoadedFixed),
                            Formulation::CurrentVoltageSLP);
  ASSERT_EQ(lin.status, HcStatus::Optimal);
  ASSERT_EQ(slp.status, HcStatus::Optimal);
  EXPECT_GT(lin.objective_kw, 0.0);
  EXPECT_TRUE(slp.certified.ok());
  EXPECT_FALSE(slp.binding.empty());

  const auto bad = hc_solve(net, profile.scaled(2.0), Direction::Import, Scenario::make(ScenarioKind::S5_LoadedFixed),
                            Formulation::LinDist3Flow);
  EXPECT_EQ(bad.status, HcStatus::Infeasible);
  EXPECT_FALSE(bad.diagnostic.ok());
  EXPECT_NE(bad.message.find("minimum voltage"), std::string::npos);
  EXPECT_NE(bad.message.find(net.node_name(bad.diagnostic.min_voltage.node)), std::string::npos);
  EXPECT_LT(bad.diagnostic.min_voltage.value, net.limits().u_min);
}

TEST(Scenarios, DoeIsIndependentOfWorkerCount) {
  auto [net, profile] = build_cigre_lv(2);
  const auto short_profile = first_periods(profile, 4, 24);
  const auto sc = Scenario::make(ScenarioKind::S2_RandomPerPeriod, 5);
  const auto one = doe_solve(net, short_profile, Direction::Export, sc, Formulation::LinDist3Flow, {}, 1);
  const auto two = doe_solve(net, short_profile, Direction::Export, sc, Formulation::LinDist3Flow, {}, 2);
  EXPECT_EQ(one.failed_periods(), 0u);
  EXPECT_DOUBLE_EQ(one.objective_kw, two.objective_kw);
  std::ostringstream a, b;
  one.write_schedule_csv(a, net);
  two.write_schedule_csv(b, net);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().rfind("period,node,phase,p_der_kw\n", 0), 0u);
}

TEST(Scenarios, ComparisonTableHasOneCellPerPair) {
  auto [net, profile] = build_cigre_lv(3);
  const std::vector<Scenario> scenarios{Scenario::make(ScenarioKind::S3_RandomFixed, 1),
                                        Scenario::make(ScenarioKind::S5_LoadedFixed)};
  const auto table = compare_scenarios(net, profile, Direction::Export,
                                       {Formulation::LinDist3Flow, Formulation::CurrentVoltageSLP}, scenarios);
  ASSERT_EQ(table.cells.size(), 4u);
  ASSERT_NE(table.find(ScenarioKind::S5_LoadedFixed, Formulation::CurrentVoltageSLP), nullptr);
  EXPECT_EQ(table.find(ScenarioKind::S5_LoadedFixed, Formulation::CurrentVoltageSLP)->certified_violation, 0.0);  // within the default 1e-4 band
  std::ostringstream csv;
  table.write_csv(csv, false);
  EXPECT_EQ(csv.str().rfind("scenario,formulation,direction,status,objective_kw,gap,certified_violation\n", 0), 0u);
}
