#include <doctest.h>

#include <cmath>
#include <vector>

#include "heatrec/solver.hpp"
#include "oracles.hpp"

using namespace heatrec;

namespace {

DomainSpec square_spec(int n) {
  DomainSpec spec;
  spec.grid_w = spec.grid_h = n;
  return spec;
}

std::vector<HeatSourceShape> one_source() {
  std::vector<HeatSourceShape> s(1);
  s[0].kind = ShapeKind::circle;
  s[0].center_u = 0.12;
  s[0].center_v = 0.08;
  s[0].radius = 0.02;
  s[0].nominal_power_W = 1000.0;
  return s;
}

}  // namespace

TEST_CASE("intensity map integrates back to the injected power") {
  const DomainSpec spec = square_spec(41);
  const auto sources = one_source();
  const auto map = assemble_intensity(spec, sources, {1234.5});
  const double integral = map.phi.sum() * spec.du() * spec.dv();
  CHECK(integral == doctest::Approx(1234.5).epsilon(1e-12));

  CHECK_THROWS_AS(assemble_intensity(spec, sources, {1.0, 2.0}), DomainError);
}

TEST_CASE("a source falling between nodes is reported, not dropped") {
  const DomainSpec spec = square_spec(11);  // du = dv = 0.02
  std::vector<HeatSourceShape> s(1);
  s[0].kind = ShapeKind::circle;
  s[0].center_u = 0.05;  // node-free neighbourhood: nodes sit at 0.04, 0.06
  s[0].center_v = 0.05;
  s[0].radius = 0.005;
  CHECK_THROWS_AS(assemble_intensity(spec, s, {100.0}), GeometryError);
}

TEST_CASE("zero heating relaxes to the sink temperature everywhere") {
  const DomainSpec spec = square_spec(33);
  SteadyStateSolver solver(spec, 150.0);
  SourceIntensityMap none;
  none.phi = Grid64::Zero(spec.grid_h, spec.grid_w);
  const Grid64 field = solver.solve(none);
  CHECK((field.array() - spec.ref_temp_K).abs().maxCoeff() < 1e-6);
}

TEST_CASE("nonnegative heating keeps the plate at or above the sink") {
  const DomainSpec spec = square_spec(33);
  const auto sources = one_source();
  const Grid64 field = solve_steady_state(
      spec, assemble_intensity(spec, sources, {500.0}), 150.0);
  CHECK(field.minCoeff() >= spec.ref_temp_K - 1e-6);
  CHECK(field.maxCoeff() > spec.ref_temp_K + 1.0);
  // sink cells are held at the reference up to factorization rounding
  for (const int r : sink_rows(spec))
    CHECK(field(r, 0) == doctest::Approx(spec.ref_temp_K).epsilon(1e-9));
}

TEST_CASE("solution is linear in the heating power") {
  const DomainSpec spec = square_spec(33);
  const auto sources = one_source();
  SteadyStateSolver solver(spec, 150.0);
  const Grid64 base =
      solver.solve(assemble_intensity(spec, sources, {200.0}));
  const Grid64 scaled =
      solver.solve(assemble_intensity(spec, sources, {700.0}));
  const double alpha = 700.0 / 200.0;
  const Grid64 predicted =
      ((base.array() - spec.ref_temp_K) * alpha + spec.ref_temp_K).matrix();
  const double denom = (scaled.array() - spec.ref_temp_K).abs().maxCoeff();
  CHECK((scaled - predicted).cwiseAbs().maxCoeff() / denom < 1e-7);
}

TEST_CASE("doubling the conductivity halves the rise") {
  const DomainSpec spec = square_spec(33);
  const auto sources = one_source();
  const auto intensity = assemble_intensity(spec, sources, {300.0});
  const Grid64 a = solve_steady_state(spec, intensity, 100.0);
  const Grid64 b = solve_steady_state(spec, intensity, 200.0);
  const Grid64 predicted =
      ((a.array() - spec.ref_temp_K) * 0.5 + spec.ref_temp_K).matrix();
  const double denom = (b.array() - spec.ref_temp_K).abs().maxCoeff();
  CHECK((b - predicted).cwiseAbs().maxCoeff() / denom < 1e-7);
}

TEST_CASE("manufactured solution converges at second order") {
  // Analytic field with adiabatic-compatible edges; the left column is pinned
  // to the exact trace so the discrete problem is well posed.
  oracles::Manufactured mms;
  const double k = 150.0;
  std::vector<double> errs;
  for (const int n : {17, 33, 65}) {
    const DomainSpec spec = square_spec(n);
    const Grid64 exact = mms.field(spec);
    DirichletOverride ov;
    ov.mask = BoolGrid::Constant(n, n, false);
    ov.values = Grid64::Zero(n, n);
    for (int r = 0; r < n; ++r) {
      ov.mask(r, 0) = true;
      ov.values(r, 0) = exact(r, 0);
    }
    SteadyStateSolver solver(spec, k, &ov);
    SourceIntensityMap rhs;
    rhs.phi = mms.rhs(spec, k);
    const Grid64 sol = solver.solve(rhs);
    errs.push_back((sol - exact).cwiseAbs().maxCoeff());
  }
  // halving the spacing should shrink the max error about fourfold
  CHECK(errs[0] / errs[1] > 3.5);
  CHECK(errs[1] / errs[2] > 3.5);
  CHECK(errs[2] < 5e-3);
}

TEST_CASE("override must match the grid shape and pin something") {
  const DomainSpec spec = square_spec(9);
  DirichletOverride ov;
  ov.mask = BoolGrid::Constant(5, 5, false);
  ov.values = Grid64::Zero(5, 5);
  CHECK_THROWS_AS(SteadyStateSolver(spec, 150.0, &ov), DomainError);

  ov.mask = BoolGrid::Constant(9, 9, false);
  ov.values = Grid64::Zero(9, 9);
  CHECK_THROWS_AS(SteadyStateSolver(spec, 150.0, &ov), SolverError);
}

TEST_CASE("solver rejects nonpositive conductivity and bad phi shape") {
  const DomainSpec spec = square_spec(9);
  CHECK_THROWS_AS(SteadyStateSolver(spec, 0.0), DomainError);
  SteadyStateSolver solver(spec, 150.0);
  SourceIntensityMap wrong;
  wrong.phi = Grid64::Zero(5, 5);
  CHECK_THROWS_AS(solver.solve(wrong), DomainError);
}

TEST_CASE("solved fields satisfy the conduction balance away from sources") {
  const DomainSpec spec = square_spec(41);
  const auto sources = one_source();
  SensorLayout layout;
  layout.points = {{1, 1}};
  const RegionMasks masks = build_masks(spec, sources, layout);
  const auto intensity = assemble_intensity(spec, sources, {800.0});
  const Grid64 field = solve_steady_state(spec, intensity, 150.0);
  const Grid64 res = laplace_residual(spec, field, masks);

  // -k lap T = 0 on source-free interior cells, so lap T should vanish there
  // relative to its magnitude inside the heated footprint.
  double worst = 0.0;
  for (int r = 1; r < spec.grid_h - 1; ++r)
    for (int c = 1; c < spec.grid_w - 1; ++c)
      if (masks.nc_mask(r, c) && !masks.bc_mask(r, c) && c > 1)
        worst = std::max(worst, std::abs(res(r, c)));
  const double inside = intensity.phi.maxCoeff() / 150.0;
  CHECK(worst < 1e-6 * inside);
}
