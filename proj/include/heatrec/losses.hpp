#pragma once

#include <vector>

#include "heatrec/geometry.hpp"
#include "heatrec/types.hpp"

namespace heatrec {

// Pixel units treat the grid spacing as 1 so the conduction penalty matches
// the scale the default loss weights were tuned at; physical divides by the
// metric spacings and is what the solver-side diagnostics use.
enum class LaplaceUnits { physical, pixel };

struct LossBreakdown {
  double pinball = 0.0;
  double laplace = 0.0;
  double boundary = 0.0;
  double tv = 0.0;
  double total = 0.0;
};

struct LossWeights {
  double pinball = 1e5;
  double laplace = 1e2;
  double boundary = 1e2;
  double tv = 1e4;

  void validate() const {
    if (pinball < 0 || laplace < 0 || boundary < 0 || tv < 0)
      throw ConfigError("loss_weights: weights must be >= 0");
    if (pinball + laplace + boundary + tv <= 0)
      throw ConfigError("loss_weights: at least one weight must be > 0");
  }

  double total_of(const LossBreakdown& b) const {
    return pinball * b.pinball + laplace * b.laplace + boundary * b.boundary +
           tv * b.tv;
  }
};

// Quantile (pinball) penalty at the monitoring points:
//   mean over mp cells of  tau*(y-p)       if y >= p
//                          (1-tau)*(p-y)   otherwise.
// At y == p the tau branch is taken; that choice also fixes the subgradient.
template <typename Scalar>
double pinball_mp_loss(const Grid<Scalar>& pred, const Grid<Scalar>& mp,
                       double tau, const RegionMasks& masks) {
  if (!(tau > 0.0 && tau < 1.0))
    throw DomainError("pinball_mp_loss: tau must be in (0, 1)");
  if (masks.n_mp == 0)
    throw ConfigError("pinball_mp_loss: empty monitoring-point set");
  double sum = 0.0;
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
      if (!masks.mp_mask(r, c)) continue;
      const double e = static_cast<double>(mp(r, c)) -
                       static_cast<double>(pred(r, c));
      sum += (e >= 0.0) ? tau * e : (tau - 1.0) * e;
    }
  }
  return sum / static_cast<double>(masks.n_mp);
}

template <typename Scalar>
void add_pinball_grad(const Grid<Scalar>& pred, const Grid<Scalar>& mp,
                      double tau, const RegionMasks& masks, double coef,
                      Grid<Scalar>& grad) {
  const double inv = coef / static_cast<double>(masks.n_mp);
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
      if (!masks.mp_mask(r, c)) continue;
      const double e = static_cast<double>(mp(r, c)) -
                       static_cast<double>(pred(r, c));
      grad(r, c) += static_cast<Scalar>(e >= 0.0 ? -tau * inv
                                                 : (1.0 - tau) * inv);
    }
  }
}

// Mean squared 5-point Laplacian over the conduction cells.
template <typename Scalar>
double laplace_loss(const Grid<Scalar>& pred, const DomainSpec& spec,
                    const RegionMasks& masks, LaplaceUnits units) {
  if (masks.n_nc == 0)
    throw ConfigError("laplace_loss: empty conduction-cell set");
  const double iu2 =
      units == LaplaceUnits::pixel ? 1.0 : 1.0 / (spec.du() * spec.du());
  const double iv2 =
      units == LaplaceUnits::pixel ? 1.0 : 1.0 / (spec.dv() * spec.dv());
  double sum = 0.0;
  for (Eigen::Index r = 1; r < pred.rows() - 1; ++r) {
    for (Eigen::Index c = 1; c < pred.cols() - 1; ++c) {
      if (!masks.nc_mask(r, c)) continue;
      const double p = static_cast<double>(pred(r, c));
      const double lap =
          (static_cast<double>(pred(r, c - 1)) - 2.0 * p +
           static_cast<double>(pred(r, c + 1))) * iu2 +
          (static_cast<double>(pred(r - 1, c)) - 2.0 * p +
           static_cast<double>(pred(r + 1, c))) * iv2;
      sum += lap * lap;
    }
  }
  return sum / static_cast<double>(masks.n_nc);
}

template <typename Scalar>
void add_laplace_grad(const Grid<Scalar>& pred, const DomainSpec& spec,
                      const RegionMasks& masks, LaplaceUnits units,
                      double coef, Grid<Scalar>& grad) {
  const double iu2 =
      units == LaplaceUnits::pixel ? 1.0 : 1.0 / (spec.du() * spec.du());
  const double iv2 =
      units == LaplaceUnits::pixel ? 1.0 : 1.0 / (spec.dv() * spec.dv());
  const double scale = 2.0 * coef / static_cast<double>(masks.n_nc);
  for (Eigen::Index r = 1; r < pred.rows() - 1; ++r) {
    for (Eigen::Index c = 1; c < pred.cols() - 1; ++c) {
      if (!masks.nc_mask(r, c)) continue;
      const double p = static_cast<double>(pred(r, c));
      const double lap =
          (static_cast<double>(pred(r, c - 1)) - 2.0 * p +
           static_cast<double>(pred(r, c + 1))) * iu2 +
          (static_cast<double>(pred(r - 1, c)) - 2.0 * p +
           static_cast<double>(pred(r + 1, c))) * iv2;
      const double s = scale * lap;
      grad(r, c) += static_cast<Scalar>(-2.0 * s * (iu2 + iv2));
      grad(r, c - 1) += static_cast<Scalar>(s * iu2);
      grad(r, c + 1) += static_cast<Scalar>(s * iu2);
      grad(r - 1, c) += static_cast<Scalar>(s * iv2);
      grad(r + 1, c) += static_cast<Scalar>(s * iv2);
    }
  }
}

// Mean squared deviation from the sink temperature over the sink cells.
template <typename Scalar>
double boundary_loss(const Grid<Scalar>& pred, const DomainSpec& spec,
                     const RegionMasks& masks) {
  if (masks.n_bc == 0)
    throw ConfigError("boundary_loss: empty sink-cell set");
  double sum = 0.0;
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
      if (!masks.bc_mask(r, c)) continue;
      const double d = static_cast<double>(pred(r, c)) - spec.ref_temp_K;
      sum += d * d;
    }
  }
  return sum / static_cast<double>(masks.n_bc);
}

template <typename Scalar>
void add_boundary_grad(const Grid<Scalar>& pred, const DomainSpec& spec,
                       const RegionMasks& masks, double coef,
                       Grid<Scalar>& grad) {
  const double scale = 2.0 * coef / static_cast<double>(masks.n_bc);
  for (Eigen::Index r = 0; r < pred.rows(); ++r)
    for (Eigen::Index c = 0; c < pred.cols(); ++c)
      if (masks.bc_mask(r, c))
        grad(r, c) += static_cast<Scalar>(
            scale * (static_cast<double>(pred(r, c)) - spec.ref_temp_K));
}

// Squared total variation: mean of squared horizontal neighbour differences
// plus mean of squared vertical ones, each over its own pair count.
template <typename Scalar>
double tv_loss(const Grid<Scalar>& pred) {
  const Eigen::Index h = pred.rows(), w = pred.cols();
  if (h < 2 || w < 2) throw DomainError("tv_loss: grid must be at least 2x2");
  double hsum = 0.0, vsum = 0.0;
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c + 1 < w; ++c) {
      const double d = static_cast<double>(pred(r, c + 1)) -
                       static_cast<double>(pred(r, c));
      hsum += d * d;
    }
  for (Eigen::Index r = 0; r + 1 < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c) {
      const double d = static_cast<double>(pred(r + 1, c)) -
                       static_cast<double>(pred(r, c));
      vsum += d * d;
    }
  return hsum / static_cast<double>(h * (w - 1)) +
         vsum / static_cast<double>((h - 1) * w);
}

template <typename Scalar>
void add_tv_grad(const Grid<Scalar>& pred, double coef, Grid<Scalar>& grad) {
  const Eigen::Index h = pred.rows(), w = pred.cols();
  const double hs = 2.0 * coef / static_cast<double>(h * (w - 1));
  const double vs = 2.0 * coef / static_cast<double>((h - 1) * w);
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c + 1 < w; ++c) {
      const double d = static_cast<double>(pred(r, c + 1)) -
                       static_cast<double>(pred(r, c));
      grad(r, c + 1) += static_cast<Scalar>(hs * d);
      grad(r, c) -= static_cast<Scalar>(hs * d);
    }
  for (Eigen::Index r = 0; r + 1 < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c) {
      const double d = static_cast<double>(pred(r + 1, c)) -
                       static_cast<double>(pred(r, c));
      grad(r + 1, c) += static_cast<Scalar>(vs * d);
      grad(r, c) -= static_cast<Scalar>(vs * d);
    }
}

// Per-sample composite. Batch components are means of these; the batch total
// must be formed with LossWeights::total_of on the averaged components so the
// logged value and the optimized value come from the same arithmetic.
template <typename Scalar>
LossBreakdown composite_loss(const Grid<Scalar>& pred, const Grid<Scalar>& mp,
                             double tau, const DomainSpec& spec,
                             const RegionMasks& masks,
                             const LossWeights& weights, LaplaceUnits units) {
  LossBreakdown b;
  b.pinball = pinball_mp_loss(pred, mp, tau, masks);
  b.laplace = laplace_loss(pred, spec, masks, units);
  b.boundary = boundary_loss(pred, spec, masks);
  b.tv = tv_loss(pred);
  b.total = weights.total_of(b);
  return b;
}

// Adds sample_weight * d(total)/d(pred) for one sample.
template <typename Scalar>
void add_composite_grad(const Grid<Scalar>& pred, const Grid<Scalar>& mp,
                        double tau, const DomainSpec& spec,
                        const RegionMasks& masks, const LossWeights& weights,
                        LaplaceUnits units, double sample_weight,
                        Grid<Scalar>& grad) {
  if (weights.pinball > 0)
    add_pinball_grad(pred, mp, tau, masks, sample_weight * weights.pinball,
                     grad);
  if (weights.laplace > 0)
    add_laplace_grad(pred, spec, masks, units, sample_weight * weights.laplace,
                     grad);
  if (weights.boundary > 0)
    add_boundary_grad(pred, spec, masks, sample_weight * weights.boundary,
                      grad);
  if (weights.tv > 0) add_tv_grad(pred, sample_weight * weights.tv, grad);
}

inline LossBreakdown average_breakdowns(const std::vector<LossBreakdown>& v,
                                        const LossWeights& weights) {
  LossBreakdown b;
  if (v.empty()) return b;
  for (const auto& s : v) {
    b.pinball += s.pinball;
    b.laplace += s.laplace;
    b.boundary += s.boundary;
    b.tv += s.tv;
  }
  const double inv = 1.0 / static_cast<double>(v.size());
  b.pinball *= inv;
  b.laplace *= inv;
  b.boundary *= inv;
  b.tv *= inv;
  b.total = weights.total_of(b);
  return b;
}

}  // namespace heatrec
