#include <gtest/gtest.h>

#include <set>

#include "socnav/scenario.hpp"

using namespace socnav;

TEST(Scenario, DefaultsMatchProtocol) {
  const auto c = build_scenario(Layout::coinciding);
  EXPECT_DOUBLE_EQ(c.room_width, 2.5);
  EXPECT_DOUBLE_EQ(c.room_length, 4.0);
  EXPECT_DOUBLE_EQ(c.v_max_robot, 0.3);
  EXPECT_DOUBLE_EQ(c.a_max_robot, 0.3);
  EXPECT_DOUBLE_EQ(c.d_safe, 0.2);
  EXPECT_DOUBLE_EQ(c.d_social, 0.4);
  EXPECT_EQ(c.cartons, 3);
  EXPECT_EQ(c.robot_loops, 4);
}

TEST(Scenario, CoincidingSharesWaypoints) {
  const auto c = build_scenario(Layout::coinciding);
  EXPECT_EQ(c.waypoints.R1, c.waypoints.H2);
  EXPECT_EQ(c.waypoints.R2, c.waypoints.H1);

  // moving H2 drags R1 along
  const auto moved = build_scenario(Layout::coinciding, {{"waypoints", {{"H2", {1.0, 3.2}}}}});
  EXPECT_EQ(moved.waypoints.R1, (Point2D{1.0, 3.2}));

  EXPECT_THROW(build_scenario(Layout::coinciding, {{"waypoints", {{"R1", {0.3, 0.3}}}}}), ValidationError);
}

TEST(Scenario, PerpendicularWaypoints) {
  const auto c = build_scenario(Layout::perpendicular);
  EXPECT_EQ(c.waypoints.R1, (Point2D{0.5, 2.0}));
  EXPECT_EQ(c.waypoints.R2, (Point2D{2.0, 2.0}));
}

TEST(Scenario, ValidationNamesField) {
  try {
    build_scenario(Layout::perpendicular, {{"d_safe", 0.5}});
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "d_safe");
  }
  try {
    build_scenario(Layout::perpendicular, {{"waypoints", {{"HS", {3.0, 0.3}}}}});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "waypoints.HS");
  }
  try {
    build_scenario(Layout::perpendicular, {{"speed_of_light", 1}});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "speed_of_light");
  }
  EXPECT_THROW(build_scenario(Layout::perpendicular, {{"cartons", 0}}), ValidationError);
  EXPECT_THROW(build_scenario(Layout::perpendicular, {{"robot_loops", 1.5}}), ValidationError);
  EXPECT_THROW(build_scenario(Layout::perpendicular, {{"control_dt", 0}}), ValidationError);
}

TEST(Scenario, RebuildIsBitExact) {
  for (auto layout : {Layout::coinciding, Layout::perpendicular}) {
    const auto c = build_scenario(layout, {{"v_human", 0.9}, {"cartons", 2}});
    const auto again = scenario_from_json(to_json(c));
    EXPECT_EQ(c, again);
    EXPECT_EQ(to_json(c).dump(), to_json(again).dump());
  }
}

TEST(Scenario, HumanScriptUnrolling) {
  auto cfg = build_scenario(Layout::coinciding, {{"cartons", 1}});
  auto s = human_script(cfg);
  std::vector<std::string> labels;
  for (const auto& st : s.steps) labels.push_back(st.label);
  EXPECT_EQ(labels, (std::vector<std::string>{"HS", "H1", "H2", "H1"}));
  EXPECT_EQ(s.steps[2].event, CartonEvent::pick);
  EXPECT_EQ(s.steps[3].event, CartonEvent::drop);
  EXPECT_DOUBLE_EQ(s.steps[2].pause, 1.5);
  EXPECT_DOUBLE_EQ(s.steps[1].pause, 0.0);

  cfg = build_scenario(Layout::coinciding);
  EXPECT_EQ(human_script(cfg).count_visits("H2"), 3u);

  // length is affine in cartons: 2 + 2k
  for (int k = 1; k <= 6; ++k) {
    cfg = build_scenario(Layout::coinciding, {{"cartons", k}});
    EXPECT_EQ(human_script(cfg).steps.size(), static_cast<std::size_t>(2 + 2 * k));
  }
}

TEST(Scenario, RobotScriptUnrolling) {
  auto cfg = build_scenario(Layout::perpendicular, {{"robot_loops", 1}});
  std::vector<std::string> labels;
  for (const auto& st : robot_script(cfg).steps) labels.push_back(st.label);
  EXPECT_EQ(labels, (std::vector<std::string>{"RS", "R1", "R2", "R1"}));

  cfg = build_scenario(Layout::perpendicular, {{"robot_loops", 2}});
  EXPECT_EQ(robot_script(cfg).steps.size(), 6u);
  cfg = build_scenario(Layout::perpendicular);
  const auto s = robot_script(cfg);
  EXPECT_EQ(s.count_visits("R2"), 4u);
  EXPECT_EQ(s.steps.back().label, "R1");
}

TEST(Scenario, MethodIds) {
  EXPECT_EQ(MethodId::parse("TDP"), MethodId::tdp());
  EXPECT_EQ(MethodId::parse("CADRL").kind, MethodId::Kind::External);
  EXPECT_EQ(MethodId::parse("CADRL").str(), "CADRL");
  EXPECT_THROW(MethodId::parse(""), ValidationError);
}

TEST(LatinSquare, CyclicRows) {
  const auto m = latin_square_order(4, 4);
  EXPECT_EQ(m, (OrderingMatrix{{0, 1, 2, 3}, {1, 2, 3, 0}, {2, 3, 0, 1}, {3, 0, 1, 2}}));
  EXPECT_EQ(latin_square_order(1, 3), (OrderingMatrix{{0}, {0}, {0}}));
  const auto six = latin_square_order(4, 6);
  EXPECT_EQ(six[4], m[0]);
  EXPECT_EQ(six[5], m[1]);
  EXPECT_THROW(latin_square_order(0, 3), ValidationError);
  EXPECT_THROW(latin_square_order(3, 0), ValidationError);
}

TEST(LatinSquare, OncePerRowAndColumn) {
  for (int n = 1; n <= 8; ++n) {
    const auto sq = latin_square_order(n, n);
    for (int i = 0; i < n; ++i) {
      std::set<int> row(sq[i].begin(), sq[i].end());
      std::set<int> col;
      for (int r = 0; r < n; ++r) col.insert(sq[r][i]);
      EXPECT_EQ(row.size(), static_cast<std::size_t>(n));
      EXPECT_EQ(col.size(), static_cast<std::size_t>(n));
    }
  }
}

TEST(LatinSquare, TwentyParticipantsBalance) {
  const auto rows = latin_square_order(4, 20);
  for (int pos = 0; pos < 4; ++pos)
    for (int method = 0; method < 4; ++method) {
      int count = 0;
      for (const auto& r : rows) count += r[pos] == method;
      EXPECT_EQ(count, 5);
    }
}
