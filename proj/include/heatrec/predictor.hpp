#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "heatrec/dataset.hpp"
#include "heatrec/geometry.hpp"
#include "heatrec/model.hpp"
#include "heatrec/rng.hpp"
#include "heatrec/types.hpp"

namespace heatrec {

template <typename Scalar>
struct PredictionResult {
  Grid<Scalar> mean_field;   // kelvin
  Grid<Scalar> sigma_field;  // kelvin, >= 0 elementwise
  int n_pre = 0;
  std::uint64_t seed = 0;
};

// Elementwise average of the sampled fields, accumulated in double in a
// fixed order.
template <typename Scalar>
Grid64 mc_mean(const std::vector<Grid<Scalar>>& fields) {
  if (fields.empty()) throw DomainError("mc_mean: no fields");
  Grid64 acc = Grid64::Zero(fields[0].rows(), fields[0].cols());
  for (const auto& f : fields) acc += f.template cast<double>();
  return acc / static_cast<double>(fields.size());
}

// Population standard deviation, two-pass form: numerically stable and used
// for the reported field.
template <typename Scalar>
Grid64 mc_sigma_two_pass(const std::vector<Grid<Scalar>>& fields,
                         const Grid64& mean) {
  if (fields.size() < 2) throw DomainError("mc_sigma: needs >= 2 fields");
  Grid64 acc = Grid64::Zero(mean.rows(), mean.cols());
  for (const auto& f : fields) {
    const Grid64 d = f.template cast<double>() - mean;
    acc += d.cwiseProduct(d);
  }
  acc /= static_cast<double>(fields.size());
  return acc.cwiseSqrt();
}

// Population standard deviation, one-pass mean-of-squares form. Cancellation
// can push the radicand a hair below zero; it is clamped at 0, and anything
// below -1e-9 (relative to the mean square) indicates a real defect and
// throws.
template <typename Scalar>
Grid64 mc_sigma_one_pass(const std::vector<Grid<Scalar>>& fields) {
  if (fields.size() < 2) throw DomainError("mc_sigma: needs >= 2 fields");
  const Eigen::Index h = fields[0].rows(), w = fields[0].cols();
  Grid64 sum = Grid64::Zero(h, w), sumsq = Grid64::Zero(h, w);
  for (const auto& f : fields) {
    const Grid64 d = f.template cast<double>();
    sum += d;
    sumsq += d.cwiseProduct(d);
  }
  const double inv = 1.0 / static_cast<double>(fields.size());
  Grid64 sigma(h, w);
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    const double ms = sumsq.data()[i] * inv;
    const double m = sum.data()[i] * inv;
    const double radicand = ms - m * m;
    const double floor = -1e-9 * std::max(1.0, std::abs(ms));
    if (radicand < floor)
      throw DomainError("mc_sigma_one_pass: negative radicand " +
                        std::to_string(radicand));
    sigma.data()[i] = std::sqrt(std::max(radicand, 0.0));
  }
  return sigma;
}

// Monte Carlo prediction: n_pre forward passes of the same sensor image
// under freshly drawn quantile levels; the spread across quantile levels is
// the aleatoric-uncertainty estimate. forward(mp, q) -> Grid<Scalar>.
template <typename Scalar, typename ForwardFn>
PredictionResult<Scalar> predict_with_uq_fn(ForwardFn&& forward,
                                            const Grid<Scalar>& mp,
                                            const SensorLayout& layout,
                                            int n_pre, std::uint64_t seed) {
  if (n_pre < 2)
    throw DomainError("predict_with_uq: n_pre must be >= 2");
  const int h = static_cast<int>(mp.rows()), w = static_cast<int>(mp.cols());
  Rng rng(derive_seed(seed, "tau_pre"));
  std::vector<Grid<Scalar>> fields;
  fields.reserve(static_cast<std::size_t>(n_pre));
  for (int i = 0; i < n_pre; ++i) {
    const double tau = rng.uniform_open01();
    const Grid<Scalar> q = make_quantile_image<Scalar>(h, w, layout, tau);
    Grid<Scalar> pred = forward(mp, q);
    if (pred.rows() != h || pred.cols() != w)
      throw DomainError("predict_with_uq: model output shape mismatch");
    fields.push_back(std::move(pred));
  }
  const Grid64 mean = mc_mean(fields);
  const Grid64 sigma = mc_sigma_two_pass(fields, mean);
  PredictionResult<Scalar> out;
  out.mean_field = mean.cast<Scalar>();
  out.sigma_field = sigma.cast<Scalar>();
  out.n_pre = n_pre;
  out.seed = seed;
  return out;
}

template <typename Scalar>
PredictionResult<Scalar> predict_with_uq(ReconNet<Scalar>& model,
                                         const Grid<Scalar>& mp,
                                         const SensorLayout& layout,
                                         int n_pre, std::uint64_t seed) {
  return predict_with_uq_fn(
      [&model](const Grid<Scalar>& m, const Grid<Scalar>& q) {
        return model.forward(m, q);
      },
      mp, layout, n_pre, seed);
}

// --- sigma summaries ------------------------------------------------------

struct GroupSigmaStats {
  std::string group;
  int count = 0;
  double median = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

struct UqSummary {
  std::vector<GroupSigmaStats> groups;  // one per layout group, name order
  double background_median = 0.0;       // non-sensor cells
  double background_max = 0.0;
  double overall_max = 0.0;
};

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// Aggregates the sigma field per sensor group and over the background, the
// numbers the noise-recovery comparisons read off.
template <typename Scalar>
UqSummary summarize_sigma(const Grid<Scalar>& sigma,
                          const SensorLayout& layout) {
  UqSummary out;
  for (const auto& [name, idx] : layout.groups) {
    GroupSigmaStats g;
    g.group = name;
    g.count = static_cast<int>(idx.size());
    std::vector<double> vals;
    vals.reserve(idx.size());
    double sum = 0.0;
    for (const int i : idx) {
      const auto& [r, c] = layout.points[static_cast<std::size_t>(i)];
      const double v = static_cast<double>(sigma(r, c));
      vals.push_back(v);
      sum += v;
      g.max = std::max(g.max, v);
    }
    g.median = detail::median_of(vals);
    g.mean = vals.empty() ? 0.0 : sum / static_cast<double>(vals.size());
    out.groups.push_back(std::move(g));
  }

  BoolGrid sensor = BoolGrid::Constant(sigma.rows(), sigma.cols(), false);
  for (const auto& [r, c] : layout.points) sensor(r, c) = true;
  std::vector<double> bg;
  bg.reserve(static_cast<std::size_t>(sigma.size()));
  for (Eigen::Index r = 0; r < sigma.rows(); ++r)
    for (Eigen::Index c = 0; c < sigma.cols(); ++c) {
      const double v = static_cast<double>(sigma(r, c));
      out.overall_max = std::max(out.overall_max, v);
      if (!sensor(r, c)) {
        bg.push_back(v);
        out.background_max = std::max(out.background_max, v);
      }
    }
  out.background_median = detail::median_of(bg);
  return out;
}

template <typename Scalar>
nlohmann::json uq_report(const PredictionResult<Scalar>& result,
                         const SensorLayout& layout,
                         const std::vector<NoiseSpec>& noise_specs) {
  const UqSummary s = summarize_sigma(result.sigma_field, layout);
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : s.groups) {
    bool noisy = false;
    for (const auto& n : noise_specs)
      if (n.group == g.group) noisy = true;
    groups.push_back({{"group", g.group},
                      {"count", g.count},
                      {"sigma_median", g.median},
                      {"sigma_mean", g.mean},
                      {"sigma_max", g.max},
                      {"noise_injected", noisy}});
  }
  return nlohmann::json{{"n_pre", result.n_pre},
                        {"seed", result.seed},
                        {"groups", groups},
                        {"background",
                         {{"sigma_median", s.background_median},
                          {"sigma_max", s.background_max}}},
                        {"sigma_overall_max", s.overall_max}};
}

}  // namespace heatrec
