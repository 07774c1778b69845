#include "ovi/beam.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace ovi;
using namespace ovi::beam;

namespace {

// Simple bridge model: 60 m simply supported T-beam, E = 33 GPa,
// vertical bending inertia 0.28 m^4.
BeamModel sbm(int n_elements = 64) {
  return make_simply_supported(60.0, 33e9, 0.28, 2600.0, 0.94, n_elements);
}

constexpr double kSbmEi = 33e9 * 0.28;

}  // namespace

TEST(SsInfluence, ZeroLoadGivesZeroEverywhere) {
  for (double x : {0.0, 7.5, 30.0, 59.0}) {
    EXPECT_DOUBLE_EQ(ss_influence(20.0, x, 0.0, 60.0, kSbmEi), 0.0);
  }
}

TEST(SsInfluence, MidspanMatchesPl3Over48Ei) {
  const double p = 294300.0;  // 30 t * 9.81
  const double expected = p * 60.0 * 60.0 * 60.0 / (48.0 * kSbmEi);
  const double w = ss_influence(30.0, 30.0, p, 60.0, kSbmEi);
  EXPECT_NEAR(-w, expected, 1e-12 * expected);
  EXPECT_NEAR(-w, 0.1433, 2e-4);  // magnitude sanity
}

TEST(SsInfluence, LinearInLoad) {
  const double w1 = ss_influence(21.0, 44.0, 1000.0, 60.0, kSbmEi);
  const double w2 = ss_influence(21.0, 44.0, 2000.0, 60.0, kSbmEi);
  EXPECT_NEAR(w2, 2.0 * w1, 1e-15 * std::abs(w2));
}

TEST(SsInfluence, MirrorSymmetry) {
  const double l = 60.0;
  for (double a : {5.0, 17.0, 29.0, 41.5}) {
    for (double x : {3.0, 22.0, 48.0}) {
      const double lhs = ss_influence(a, x, 1e5, l, kSbmEi);
      const double rhs = ss_influence(l - a, l - x, 1e5, l, kSbmEi);
      EXPECT_NEAR(lhs, rhs, 1e-12 * std::abs(lhs));
    }
  }
}

TEST(SsInfluence, MaxwellBettiReciprocity) {
  for (double a : {8.0, 24.0, 40.0}) {
    for (double x : {14.0, 33.0, 54.0}) {
      const double ab = ss_influence(a, x, 2e5, 60.0, kSbmEi);
      const double ba = ss_influence(x, a, 2e5, 60.0, kSbmEi);
      EXPECT_NEAR(ab, ba, 1e-9 * std::abs(ab));
    }
  }
}

TEST(SsInfluence, RejectsOffSpanPositions) {
  EXPECT_THROW(ss_influence(-1.0, 30.0, 1.0, 60.0, kSbmEi), ConfigError);
  EXPECT_THROW(ss_influence(30.0, 61.0, 1.0, 60.0, kSbmEi), ConfigError);
}

TEST(FeStaticSolve, NoLoadsGiveZeroDisplacement) {
  const auto u = fe_static_solve(sbm(16), {});
  EXPECT_DOUBLE_EQ(u.cwiseAbs().maxCoeff(), 0.0);
}

TEST(FeStaticSolve, MidspanLoadMatchesClosedForm) {
  const double p = 294300.0;
  StaticBeamSolver solver(sbm(64));
  const auto u = solver.solve({{30.0, p}});
  const double expected = ss_influence(30.0, 30.0, p, 60.0, kSbmEi);
  EXPECT_NEAR(solver.deflection_at(u, 30.0), expected,
              1e-8 * std::abs(expected));
}

TEST(FeStaticSolve, MatchesClosedFormAtManyPoints) {
  StaticBeamSolver solver(sbm(64));
  const double p = 1.7e5;
  const auto u = solver.solve({{22.0, p}});
  for (double x : {4.0, 8.0, 24.0, 40.0, 54.0, 58.0}) {
    const double expected = ss_influence(22.0, x, p, 60.0, kSbmEi);
    EXPECT_NEAR(solver.deflection_at(u, x), expected,
                1e-7 * std::abs(expected) + 1e-15);
  }
}

TEST(FeStaticSolve, LinearityUnderLoadDoubling) {
  StaticBeamSolver solver(sbm(32));
  const std::vector<PointForce> loads{{9.0, 1e5}, {33.0, 2e5}, {51.0, 5e4}};
  std::vector<PointForce> doubled = loads;
  for (auto& l : doubled) l.p_newton *= 2.0;
  const auto u1 = solver.solve(loads);
  const auto u2 = solver.solve(doubled);
  for (int i = 0; i < u1.size(); ++i) {
    EXPECT_NEAR(u2(i), 2.0 * u1(i), 1e-12 * std::abs(u2(i)) + 1e-18);
  }
}

TEST(FeStaticSolve, SuperpositionOfLoadSets) {
  StaticBeamSolver solver(sbm(32));
  const auto ua = solver.solve({{12.0, 1e5}});
  const auto ub = solver.solve({{44.0, 3e5}});
  const auto uab = solver.solve({{12.0, 1e5}, {44.0, 3e5}});
  for (int i = 0; i < ua.size(); ++i) {
    EXPECT_NEAR(uab(i), ua(i) + ub(i), 1e-10 * std::abs(uab(i)) + 1e-18);
  }
}

TEST(FeStaticSolve, ReciprocityBetweenLoadAndSensor) {
  StaticBeamSolver solver(sbm(48));
  const double p = 1e5;
  for (double a : {7.5, 18.75, 30.0}) {
    for (double x : {11.25, 41.25, 52.5}) {
      const auto ua = solver.solve({{a, p}});
      const auto ux = solver.solve({{x, p}});
      const double wax = solver.deflection_at(ua, x);
      const double wxa = solver.deflection_at(ux, a);
      EXPECT_NEAR(wax, wxa, 1e-9 * std::abs(wax));
    }
  }
}

// With the load inside an element (off-node) and the deflection read at an
// off-node point in the same element, the consistent-load solution carries a
// genuine discretization error that must shrink monotonically under mesh
// refinement.
TEST(FeStaticSolve, ConvergenceMonotoneForOffNodeLoad) {
  const double load_pos = 29.9, eval_pos = 29.5, p = 294300.0;
  const double exact = ss_influence(load_pos, eval_pos, p, 60.0, kSbmEi);
  double prev_err = 1e300;
  for (int n : {4, 8, 16, 32, 64}) {
    StaticBeamSolver solver(sbm(n));
    const auto u = solver.solve({{load_pos, p}});
    const double err =
        std::abs(solver.deflection_at(u, eval_pos) - exact) / std::abs(exact);
    EXPECT_LT(err, prev_err) << "elements=" << n;
    prev_err = err;
  }
  EXPECT_LT(prev_err, 1e-6);
}

TEST(FeStaticSolve, NodalValuesExactForNodeLoad) {
  // Hermite elements reproduce the piecewise-cubic exact solution when the
  // point load sits on a node, at every mesh size.
  const double p = 294300.0;
  for (int n : {4, 8, 16}) {
    StaticBeamSolver solver(sbm(n));
    const auto u = solver.solve({{30.0, p}});
    for (int node = 0; node <= n; ++node) {
      const double x = solver.node_pos(node);
      const double expected = ss_influence(30.0, x, p, 60.0, kSbmEi);
      EXPECT_NEAR(u(2 * node), expected, 1e-12 * std::abs(expected) + 1e-16);
    }
  }
}

TEST(FeStaticSolve, MechanismReportedAsNumericError) {
  BeamModel m = sbm(8);
  m.supports = {{0.0, SupportKind::kPinned}, {0.0, SupportKind::kPinned}};
  EXPECT_THROW(StaticBeamSolver{m}, NumericError);
}

TEST(FeStaticSolve, SpringSupportedBeamDeflectsLessWithStifferSprings) {
  BeamModel soft = make_simply_supported(100.0, 200e9, 2.0, 7850.0, 1.0, 40);
  for (double x = 20.0; x < 100.0 - 1e-9; x += 20.0) {
    soft.supports.push_back({x, SupportKind::kSpring, 1e6});
  }
  BeamModel stiff = soft;
  for (auto& s : stiff.supports) {
    if (s.kind == SupportKind::kSpring) s.stiffness_n_per_m = 1e9;
  }
  StaticBeamSolver ssoft(soft), sstiff(stiff);
  const auto usoft = ssoft.solve({{50.0, 1e6}});
  const auto ustiff = sstiff.solve({{50.0, 1e6}});
  EXPECT_LT(std::abs(sstiff.deflection_at(ustiff, 50.0)),
            std::abs(ssoft.deflection_at(usoft, 50.0)));
  EXPECT_LT(ssoft.deflection_at(usoft, 50.0), 0.0);  // downward negative
}

TEST(SensorsForSections, SbmAndCbmLayouts) {
  const auto s4 = sensors_for_sections(60.0, 16.0);
  ASSERT_EQ(s4.positions_m.size(), 4u);  // 16/16/16/12
  EXPECT_DOUBLE_EQ(s4.positions_m[0], 8.0);
  EXPECT_DOUBLE_EQ(s4.positions_m[1], 24.0);
  EXPECT_DOUBLE_EQ(s4.positions_m[2], 40.0);
  EXPECT_DOUBLE_EQ(s4.positions_m[3], 54.0);  // midpoint of [48, 60]

  const auto s15 = sensors_for_sections(705.0, 50.0);
  ASSERT_EQ(s15.positions_m.size(), 15u);  // 14 x 50 m + 5 m stub
  EXPECT_DOUBLE_EQ(s15.positions_m[0], 25.0);
  EXPECT_DOUBLE_EQ(s15.positions_m[13], 675.0);
  EXPECT_DOUBLE_EQ(s15.positions_m[14], 702.5);
}

TEST(SynthesizeResponse, EmptyTrajectoryGivesZeroMatrix) {
  traffic::TrafficTrajectory traj;
  traj.states.assign(5, traffic::RoadState{30, 2.0, {}});
  const auto resp = synthesize_response(traj, sbm(16),
                                        sensors_for_sections(60.0, 16.0), 0.5,
                                        8, ResponseBackend::kClosedFormSS);
  EXPECT_EQ(resp.n_rows(), 8u);
  EXPECT_EQ(resp.n_sensors, 4u);
  for (double v : resp.values) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(SynthesizeResponse, StaticMidspanVehicleGivesConstantColumn) {
  // A 30 t vehicle parked at midspan: cell 14 has center (14.5)*2 = 29 m, so
  // use a custom sensor at 29 m and compare against the closed form there.
  traffic::TrafficTrajectory traj;
  traffic::RoadState s{30, 2.0, {traffic::Vehicle{0, 4, 30000.0, 0, 14}}};
  traj.states.assign(6, s);
  SensorLayout sensors{{29.0}};
  const auto resp = synthesize_response(traj, sbm(16), sensors, 0.5, 10,
                                        ResponseBackend::kClosedFormSS);
  const double expected =
      ss_influence(29.0, 29.0, 30000.0 * kGravity, 60.0, kSbmEi);
  for (std::size_t t = 0; t < resp.n_rows(); ++t) {
    EXPECT_DOUBLE_EQ(resp.at(t, 0), expected);
  }
  EXPECT_LT(expected, 0.0);
}

TEST(SynthesizeResponse, TwoVehicleResponseIsSumOfSingles) {
  traffic::Vehicle va{0, 0, 12000.0, 1, 5};
  traffic::Vehicle vb{1, 0, 28000.0, 2, 21};
  traffic::TrafficTrajectory both, only_a, only_b;
  for (int t = 0; t < 4; ++t) {
    both.states.push_back(traffic::RoadState{30, 2.0, {va, vb}});
    only_a.states.push_back(traffic::RoadState{30, 2.0, {va}});
    only_b.states.push_back(traffic::RoadState{30, 2.0, {vb}});
  }
  const auto sensors = sensors_for_sections(60.0, 16.0);
  for (auto backend :
       {ResponseBackend::kClosedFormSS, ResponseBackend::kFiniteElement}) {
    const auto rab =
        synthesize_response(both, sbm(32), sensors, 0.5, 7, backend);
    const auto ra =
        synthesize_response(only_a, sbm(32), sensors, 0.5, 7, backend);
    const auto rb =
        synthesize_response(only_b, sbm(32), sensors, 0.5, 7, backend);
    for (std::size_t i = 0; i < rab.values.size(); ++i) {
      EXPECT_NEAR(rab.values[i], ra.values[i] + rb.values[i],
                  1e-10 * std::abs(rab.values[i]) + 1e-18);
    }
  }
}

TEST(SynthesizeResponse, ClosedFormAndFeBackendsAgree) {
  const auto traj = traffic::simulate(
      []() {
        traffic::CaParams p;
        p.seed = 17;
        return p;
      }(),
      40);
  const auto sensors = sensors_for_sections(60.0, 16.0);
  const auto rc = synthesize_response(traj, sbm(64), sensors, 0.5, 70,
                                      ResponseBackend::kClosedFormSS);
  const auto rf = synthesize_response(traj, sbm(64), sensors, 0.5, 70,
                                      ResponseBackend::kFiniteElement);
  for (std::size_t i = 0; i < rc.values.size(); ++i) {
    EXPECT_NEAR(rf.values[i], rc.values[i], 1e-7 * std::abs(rc.values[i]) + 1e-12);
  }
}

TEST(SynthesizeResponse, RejectsMismatchedBridgeLength) {
  traffic::TrafficTrajectory traj;
  traj.states.assign(3, traffic::RoadState{30, 2.0, {}});
  BeamModel wrong = sbm(16);
  wrong.length_m = 59.0;
  wrong.segments[0].span_m = 59.0;
  wrong.supports[1].pos_m = 59.0;
  EXPECT_THROW(synthesize_response(traj, wrong,
                                   sensors_for_sections(59.0, 16.0), 0.5, 4,
                                   ResponseBackend::kClosedFormSS),
               ConfigError);
}

TEST(ResponseCsv, RoundTrip) {
  ResponseMatrix resp;
  resp.n_sensors = 2;
  resp.dt_s = 0.5;
  resp.sensor_positions_m = {8.0, 24.0};
  resp.values = {-0.001234567890123, 0.0, -1e-9, 2.5e-4};
  const auto csv = response_to_csv(resp, "0123456789abcdef");
  const auto back = response_from_csv(csv, 0.5, {8.0, 24.0});
  ASSERT_EQ(back.values.size(), resp.values.size());
  for (std::size_t i = 0; i < resp.values.size(); ++i) {
    EXPECT_EQ(back.values[i], resp.values[i]);  // bitwise round trip
  }
}
