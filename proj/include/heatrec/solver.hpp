#pragma once

#include <Eigen/Sparse>
#include <memory>
#include <vector>

#include "heatrec/geometry.hpp"
#include "heatrec/types.hpp"

namespace heatrec {

// Volumetric heating collapsed to the plate surface: phi(r,c) in W/m^2.
// Each source spreads its sampled power uniformly over its rasterized
// footprint, so the grid integral of phi recovers the total power exactly.
struct SourceIntensityMap {
  Grid64 phi;
};

inline SourceIntensityMap assemble_intensity(
    const DomainSpec& spec, const std::vector<HeatSourceShape>& sources,
    const std::vector<double>& powers_W) {
  if (powers_W.size() != sources.size())
    throw DomainError("assemble_intensity: one power per source required");
  SourceIntensityMap out;
  out.phi = Grid64::Zero(spec.grid_h, spec.grid_w);
  const double cell_area = spec.du() * spec.dv();
  for (std::size_t i = 0; i < sources.size(); ++i) {
    sources[i].validate(spec, i);
    const BoolGrid mask = rasterize_shape(spec, sources[i]);
    const Eigen::Index n = mask.count();
    if (n == 0)
      throw GeometryError("source " + std::to_string(i) +
                          ": rasterizes to an empty footprint at this grid");
    const double density = powers_W[i] / (static_cast<double>(n) * cell_area);
    for (int r = 0; r < spec.grid_h; ++r)
      for (int c = 0; c < spec.grid_w; ++c)
        if (mask(r, c)) out.phi(r, c) += density;
  }
  return out;
}

// Boundary override for verification runs (manufactured solutions, maximum
// principle). When set, cells in mask are pinned to values and the sink
// segment from the geometry is ignored.
struct DirichletOverride {
  BoolGrid mask;
  Grid64 values;
};

// Steady conduction: -k lap(T) = phi with the sink segment held at ref_temp_K
// and every other boundary node adiabatic. The 5-point stencil is closed at
// adiabatic edges by mirror ghost nodes, which keeps it second order there.
// The matrix depends only on geometry, so the sparse LU factorization is done
// once and reused across right-hand sides; the residual of every solve is
// checked.
class SteadyStateSolver {
 public:
  SteadyStateSolver(const DomainSpec& spec, double conductivity_W_mK,
                    const DirichletOverride* override_bc = nullptr)
      : spec_(spec), k_(conductivity_W_mK) {
    spec_.validate();
    if (!(k_ > 0.0))
      throw DomainError("SteadyStateSolver: conductivity must be > 0");
    const int h = spec_.grid_h, w = spec_.grid_w;

    dirichlet_ = BoolGrid::Constant(h, w, false);
    dirichlet_val_ = Grid64::Zero(h, w);
    if (override_bc != nullptr) {
      if (override_bc->mask.rows() != h || override_bc->mask.cols() != w ||
          override_bc->values.rows() != h || override_bc->values.cols() != w)
        throw DomainError("SteadyStateSolver: override shape mismatch");
      dirichlet_ = override_bc->mask;
      dirichlet_val_ = override_bc->values;
    } else {
      for (const int r : sink_rows(spec_)) {
        dirichlet_(r, 0) = true;
        dirichlet_val_(r, 0) = spec_.ref_temp_K;
      }
    }
    if (dirichlet_.count() == 0)
      throw SolverError(
          "no Dirichlet cell: the field is defined only up to a constant");

    const double iu2 = 1.0 / (spec_.du() * spec_.du());
    const double iv2 = 1.0 / (spec_.dv() * spec_.dv());
    const auto id = [w](int r, int c) { return r * w + c; };

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(5) * h * w);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const int i = id(r, c);
        if (dirichlet_(r, c)) {
          trip.emplace_back(i, i, 1.0);
          continue;
        }
        // -lap(T) = phi / k. Off-grid neighbours mirror to the opposite
        // in-grid neighbour (adiabatic: dT/dn = 0).
        trip.emplace_back(i, i, 2.0 * iu2 + 2.0 * iv2);
        const int cw = (c - 1 >= 0) ? c - 1 : c + 1;
        const int ce = (c + 1 < w) ? c + 1 : c - 1;
        const int rn = (r - 1 >= 0) ? r - 1 : r + 1;
        const int rs = (r + 1 < h) ? r + 1 : r - 1;
        trip.emplace_back(i, id(r, cw), -iu2);
        trip.emplace_back(i, id(r, ce), -iu2);
        trip.emplace_back(i, id(rn, c), -iv2);
        trip.emplace_back(i, id(rs, c), -iv2);
      }
    }

    A_.resize(h * w, h * w);
    A_.setFromTriplets(trip.begin(), trip.end());
    A_.makeCompressed();
    lu_.compute(A_);
    if (lu_.info() != Eigen::Success)
      throw SolverError("sparse LU factorization failed");
  }

  Grid64 solve(const SourceIntensityMap& intensity) const {
    const int h = spec_.grid_h, w = spec_.grid_w;
    if (intensity.phi.rows() != h || intensity.phi.cols() != w)
      throw DomainError("SteadyStateSolver: intensity grid shape mismatch");

    Eigen::VectorXd b(h * w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        b(r * w + c) = dirichlet_(r, c) ? dirichlet_val_(r, c)
                                        : intensity.phi(r, c) / k_;

    Eigen::VectorXd x = lu_.solve(b);
    if (lu_.info() != Eigen::Success)
      throw SolverError("sparse LU solve failed");

    const double resid = (A_ * x - b).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    if (!(resid <= 1e-8 * scale))
      throw SolverError("linear system residual too large: " +
                        std::to_string(resid / scale));

    Grid64 field(h, w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) field(r, c) = x(r * w + c);
    if (!all_finite(field))
      throw SolverError("solution contains non-finite values");
    return field;
  }

  const DomainSpec& spec() const { return spec_; }

 private:
  DomainSpec spec_;
  double k_;
  BoolGrid dirichlet_;
  Grid64 dirichlet_val_;
  Eigen::SparseMatrix<double> A_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

inline Grid64 solve_steady_state(const DomainSpec& spec,
                                 const SourceIntensityMap& intensity,
                                 double conductivity_W_mK,
                                 const DirichletOverride* override_bc = nullptr) {
  return SteadyStateSolver(spec, conductivity_W_mK, override_bc)
      .solve(intensity);
}

// 5-point Laplacian of field (physical units, 1/m^2 scaling) on the cells
// where conduction should balance, zero elsewhere. Diagnostic companion to
// the solver: on a solved field it vanishes on nc cells away from sources.
inline Grid64 laplace_residual(const DomainSpec& spec, const Grid64& field,
                               const RegionMasks& masks) {
  const int h = spec.grid_h, w = spec.grid_w;
  if (field.rows() != h || field.cols() != w)
    throw DomainError("laplace_residual: field shape mismatch");
  const double iu2 = 1.0 / (spec.du() * spec.du());
  const double iv2 = 1.0 / (spec.dv() * spec.dv());
  Grid64 res = Grid64::Zero(h, w);
  for (int r = 1; r < h - 1; ++r)
    for (int c = 1; c < w - 1; ++c)
      if (masks.nc_mask(r, c))
        res(r, c) =
            (field(r, c - 1) - 2.0 * field(r, c) + field(r, c + 1)) * iu2 +
            (field(r - 1, c) - 2.0 * field(r, c) + field(r + 1, c)) * iv2;
  return res;
}

}  // namespace heatrec
