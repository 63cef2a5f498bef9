#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "heatrec/types.hpp"

namespace heatrec {

// Accuracy of a set of reconstructed fields against ground-truth labels.
// Every metric is computed per sample over all cells and then averaged over
// samples, so the record generalizes to any test-set size and grid shape.
struct MetricsRecord {
  double mae_avg = 0.0;   // kelvin
  double rmse_avg = 0.0;  // kelvin
  double mre_avg = 0.0;   // dimensionless
  double r2_avg = 0.0;
  int n_test = 0;

  nlohmann::json to_json() const {
    return nlohmann::json{{"mae_avg", mae_avg},
                          {"rmse_avg", rmse_avg},
                          {"mre_avg", mre_avg},
                          {"r2_avg", r2_avg},
                          {"n_test", n_test}};
  }
};

// Baseline used in the R^2 denominator. true_sample_mean is the standard
// coefficient of determination (each sample scored against the mean of its
// own true field). pooled_pred_mean scores every sample against the
// elementwise mean of all predicted fields; it is kept because one published
// variant of the formula reads that way, but it is not the standard R^2 and
// is reported separately.
enum class R2Baseline { true_sample_mean, pooled_pred_mean };

template <typename Scalar>
MetricsRecord compute_metrics(const std::vector<Grid<Scalar>>& preds,
                              const std::vector<Grid<Scalar>>& labels,
                              R2Baseline baseline = R2Baseline::true_sample_mean) {
  if (preds.size() != labels.size())
    throw DomainError("compute_metrics: prediction/label count mismatch");
  if (preds.empty()) throw DomainError("compute_metrics: empty test set");
  const Eigen::Index h = labels[0].rows(), w = labels[0].cols();
  for (std::size_t t = 0; t < preds.size(); ++t)
    if (preds[t].rows() != h || preds[t].cols() != w ||
        labels[t].rows() != h || labels[t].cols() != w)
      throw DomainError("compute_metrics: shape mismatch at sample " +
                        std::to_string(t));

  Grid64 pooled_pred;
  if (baseline == R2Baseline::pooled_pred_mean) {
    pooled_pred = Grid64::Zero(h, w);
    for (const auto& p : preds) pooled_pred += p.template cast<double>();
    pooled_pred /= static_cast<double>(preds.size());
  }

  MetricsRecord rec;
  rec.n_test = static_cast<int>(preds.size());
  const double inv_cells = 1.0 / static_cast<double>(h * w);
  for (std::size_t t = 0; t < preds.size(); ++t) {
    const Grid64 pred = preds[t].template cast<double>();
    const Grid64 label = labels[t].template cast<double>();
    double abs_sum = 0.0, sq_sum = 0.0, rel_sum = 0.0;
    for (Eigen::Index r = 0; r < h; ++r) {
      for (Eigen::Index c = 0; c < w; ++c) {
        const double d = label(r, c) - pred(r, c);
        abs_sum += std::abs(d);
        sq_sum += d * d;
        if (!(label(r, c) > 0.0))
          throw DomainError("compute_metrics: non-positive label at sample " +
                            std::to_string(t) + ", cell (" + std::to_string(r) +
                            ", " + std::to_string(c) + ")");
        rel_sum += std::abs(d) / label(r, c);
      }
    }
    rec.mae_avg += abs_sum * inv_cells;
    rec.rmse_avg += std::sqrt(sq_sum * inv_cells);
    rec.mre_avg += rel_sum * inv_cells;

    double denom = 0.0;
    if (baseline == R2Baseline::true_sample_mean) {
      const double mean_t = label.mean();
      denom = (label.array() - mean_t).square().sum();
    } else {
      denom = (label - pooled_pred).array().square().sum();
    }
    if (!(denom > 0.0))
      throw DomainError(
          "compute_metrics: degenerate R^2 baseline at sample " +
          std::to_string(t));
    rec.r2_avg += 1.0 - sq_sum / denom;
  }
  const double inv_n = 1.0 / static_cast<double>(rec.n_test);
  rec.mae_avg *= inv_n;
  rec.rmse_avg *= inv_n;
  rec.mre_avg *= inv_n;
  rec.r2_avg *= inv_n;
  return rec;
}

}  // namespace heatrec
