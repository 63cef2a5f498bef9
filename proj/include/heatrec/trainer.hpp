#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "heatrec/checkpoint.hpp"
#include "heatrec/dataset.hpp"
#include "heatrec/losses.hpp"
#include "heatrec/model.hpp"
#include "heatrec/rng.hpp"

namespace heatrec {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 16;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 10.0;               // global L2 norm; <= 0 disables
  std::string lr_schedule = "constant";  // constant | cosine
  int checkpoint_every = 10;             // extra numbered snapshots; 0 = off
  std::string select_on = "val_loss";    // val_loss | train_loss
  std::uint64_t seed = 0;
  LossWeights weights;
  LaplaceUnits laplace_units = LaplaceUnits::physical;
  double fixed_tau = -1.0;  // in (0,1): pin the quantile level (tests)

  void validate() const {
    if (epochs < 1) throw ConfigError("train.epochs: must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("train.lr: must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0))
      throw ConfigError("train.beta1: must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("train.beta2: must be in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("train.eps: must be > 0");
    if (lr_schedule != "constant" && lr_schedule != "cosine")
      throw ConfigError("train.lr_schedule: must be \"constant\" or \"cosine\"");
    if (checkpoint_every < 0)
      throw ConfigError("train.checkpoint_every: must be >= 0");
    if (select_on != "val_loss" && select_on != "train_loss")
      throw ConfigError(
          "train.select_on: must be \"val_loss\" or \"train_loss\"");
    if (fixed_tau >= 0.0 && !(fixed_tau > 0.0 && fixed_tau < 1.0))
      throw ConfigError("train.fixed_tau: must be in (0, 1) when set");
    weights.validate();
  }
};

// Algorithm step shared by training and tests: one fresh quantile level per
// sample, drawn independently each call and never cached across epochs.
inline std::vector<double> draw_quantile_levels(int n_samples, Rng& rng) {
  if (n_samples < 1)
    throw DomainError("draw_quantile_levels: n_samples must be >= 1");
  std::vector<double> taus(static_cast<std::size_t>(n_samples));
  for (auto& t : taus) t = rng.uniform_open01();
  return taus;
}

template <typename Scalar>
std::vector<Grid<Scalar>> resample_quantiles(int h, int w,
                                             const SensorLayout& layout,
                                             int n_samples, Rng& rng) {
  const auto taus = draw_quantile_levels(n_samples, rng);
  std::vector<Grid<Scalar>> images;
  images.reserve(taus.size());
  for (const double t : taus)
    images.push_back(make_quantile_image<Scalar>(h, w, layout, t));
  return images;
}

// Learning rate as a pure function of the 1-based epoch, so interrupted and
// resumed runs see exactly the same values.
inline double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  if (cfg.lr_schedule == "constant" || cfg.epochs <= 1) return cfg.lr;
  const double lr_min = 0.05 * cfg.lr;
  const double t = static_cast<double>(epoch - 1) / (cfg.epochs - 1);
  return lr_min + 0.5 * (cfg.lr - lr_min) * (1.0 + std::cos(M_PI * t));
}

// Adam with bias correction. Moments are stored per parameter in registry
// order and round-trip through checkpoints by name.
template <typename Scalar>
class Adam {
 public:
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit Adam(const std::vector<ParamRef<Scalar>>& params) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
      m_.push_back(Vec::Zero(p.size()));
      v_.push_back(Vec::Zero(p.size()));
    }
  }

  void step(const std::vector<ParamRef<Scalar>>& params,
            const TrainConfig& cfg, double lr) {
    ++t_;
    if (cfg.grad_clip > 0.0) {
      double sq = 0.0;
      for (const auto& p : params)
        for (Eigen::Index i = 0; i < p.size(); ++i)
          sq += static_cast<double>(p.grad[i]) * p.grad[i];
      const double norm = std::sqrt(sq);
      if (norm > cfg.grad_clip) {
        const Scalar s = static_cast<Scalar>(cfg.grad_clip / norm);
        for (const auto& p : params)
          for (Eigen::Index i = 0; i < p.size(); ++i) p.grad[i] *= s;
      }
    }
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
    const Scalar b1 = static_cast<Scalar>(cfg.beta1);
    const Scalar b2 = static_cast<Scalar>(cfg.beta2);
    const Scalar alpha = static_cast<Scalar>(lr / bc1);
    const Scalar inv_sqrt_bc2 = static_cast<Scalar>(1.0 / std::sqrt(bc2));
    const Scalar eps = static_cast<Scalar>(cfg.eps);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const auto& p = params[k];
      Vec& m = m_[k];
      Vec& v = v_[k];
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        const Scalar g = p.grad[i];
        m(i) = b1 * m(i) + (Scalar(1) - b1) * g;
        v(i) = b2 * v(i) + (Scalar(1) - b2) * g * g;
        p.value[i] -=
            alpha * m(i) / (std::sqrt(v(i)) * inv_sqrt_bc2 + eps);
      }
    }
  }

  std::int64_t steps() const { return t_; }
  void set_steps(std::int64_t t) { t_ = t; }
  std::vector<Vec>& m() { return m_; }
  std::vector<Vec>& v() { return v_; }

 private:
  std::vector<Vec> m_, v_;
  std::int64_t t_ = 0;
};

template <typename Scalar>
struct TrainData {
  std::vector<Grid<Scalar>> train_mp;
  std::vector<Grid<Scalar>> val_mp;
};

struct TrainSummary {
  int epochs_done = 0;
  int best_epoch = 0;
  double best_metric = std::numeric_limits<double>::infinity();
  std::string selection_metric;
  double epoch1_train_total = 0.0;
  double final_train_total = 0.0;
};

namespace detail {

inline nlohmann::json breakdown_json(const LossBreakdown& b) {
  return nlohmann::json{{"pinball", b.pinball},
                        {"laplace", b.laplace},
                        {"boundary", b.boundary},
                        {"tv", b.tv},
                        {"total", b.total}};
}

}  // namespace detail

// One-model training driver. Per epoch: a fresh quantile level per training
// sample, a fresh shuffle, minibatch subgradient steps with Adam, then a
// fixed-tau validation sweep. Model selection tracks the lowest validation
// total (training total when there is no validation split). All per-epoch
// randomness is derived from (seed, epoch), so a run resumed from the last
// state checkpoint continues exactly as the uninterrupted run would have.
//
// Files under run_dir:
//   logs/steps.jsonl   one line per optimizer step (no timestamps)
//   logs/epochs.jsonl  one line per epoch
//   ckpt_last.ckpt     params + Adam moments + position, written every epoch
//   ckpt_best.ckpt     params of the best epoch so far
//   ckpt_epoch_N.ckpt  numbered snapshots every checkpoint_every epochs
template <typename Scalar>
TrainSummary train_model(ReconNet<Scalar>& model, const TrainData<Scalar>& data,
                         const DomainSpec& spec, const RegionMasks& masks,
                         const SensorLayout& layout, const TrainConfig& cfg,
                         const std::filesystem::path& run_dir, bool resume,
                         const std::string& config_hash,
                         std::ostream* progress = nullptr) {
  namespace fs = std::filesystem;
  cfg.validate();
  if (data.train_mp.empty())
    throw TrainerError("train_model: empty training split");
  if (cfg.select_on == "val_loss" && data.val_mp.empty())
    throw ConfigError(
        "train.select_on: \"val_loss\" requires a validation split");
  const int h = spec.grid_h, w = spec.grid_w;
  for (const auto& g : data.train_mp)
    if (g.rows() != h || g.cols() != w)
      throw TrainerError("train_model: training sample shape mismatch");

  fs::create_directories(run_dir / "logs");
  const auto last_path = run_dir / "ckpt_last.ckpt";
  const auto best_path = run_dir / "ckpt_best.ckpt";

  auto params = model.params();
  Adam<Scalar> adam(params);
  TrainSummary summary;
  summary.selection_metric = cfg.select_on;
  int start_epoch = 1;

  if (resume) {
    if (!fs::exists(last_path))
      throw TrainerError("resume requested but no checkpoint found in " +
                         run_dir.string());
    const auto state = read_checkpoint<Scalar>(last_path);
    if (state.meta.at("config_hash").template get<std::string>() !=
        config_hash)
      throw TrainerError(
          "resume: run directory holds state trained from a different "
          "configuration");
    load_params_into(model, state);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const auto& mp_name = "adam.m." + params[k].name;
      const auto& vp_name = "adam.v." + params[k].name;
      adam.m()[k] = state.tensors.at(mp_name).reshaped();
      adam.v()[k] = state.tensors.at(vp_name).reshaped();
    }
    adam.set_steps(state.meta.at("step").template get<std::int64_t>());
    summary.epochs_done = state.meta.at("epoch_done").template get<int>();
    summary.best_epoch = state.meta.at("best_epoch").template get<int>();
    summary.best_metric =
        state.meta.at("best_metric").template get<double>();
    summary.epoch1_train_total =
        state.meta.at("epoch1_train_total").template get<double>();
    summary.final_train_total =
        state.meta.at("final_train_total").template get<double>();
    start_epoch = summary.epochs_done + 1;
  } else {
    if (fs::exists(last_path))
      throw TrainerError(run_dir.string() +
                         ": already contains training state; pass resume to "
                         "continue or choose a fresh run directory");
    model.init_params(cfg.seed);
  }

  std::ofstream step_log(run_dir / "logs" / "steps.jsonl", std::ios::app);
  std::ofstream epoch_log(run_dir / "logs" / "epochs.jsonl", std::ios::app);
  if (!step_log || !epoch_log)
    throw IoError("cannot open training logs in " + run_dir.string());

  const auto save_state = [&](int epoch_done) {
    nlohmann::json meta{{"kind", "train_state"},
                        {"model", model.config().to_json()},
                        {"ref_temp_K", model.ref_temp()},
                        {"config_hash", config_hash},
                        {"epoch_done", epoch_done},
                        {"step", adam.steps()},
                        {"best_epoch", summary.best_epoch},
                        {"best_metric", summary.best_metric},
                        {"selection_metric", summary.selection_metric},
                        {"epoch1_train_total", summary.epoch1_train_total},
                        {"final_train_total", summary.final_train_total}};
    std::vector<CheckpointTensorRef<Scalar>> tensors;
    for (const auto& p : params)
      tensors.push_back({p.name, p.rows, p.cols, p.value});
    for (std::size_t k = 0; k < params.size(); ++k) {
      tensors.push_back({"adam.m." + params[k].name, params[k].size(), 1,
                         adam.m()[k].data()});
      tensors.push_back({"adam.v." + params[k].name, params[k].size(), 1,
                         adam.v()[k].data()});
    }
    write_checkpoint(last_path, meta, tensors);
  };

  const int n_train = static_cast<int>(data.train_mp.size());
  std::int64_t global_step = adam.steps();
  Grid<Scalar> dpred(h, w);

  for (int epoch = start_epoch; epoch <= cfg.epochs; ++epoch) {
    const auto t_start = std::chrono::steady_clock::now();
    const double lr = lr_at_epoch(cfg, epoch);

    // Quantile levels are drawn per sample identity, before shuffling, so
    // the pairing (sample, tau) is independent of batch order.
    std::vector<double> taus;
    if (cfg.fixed_tau > 0.0) {
      taus.assign(static_cast<std::size_t>(n_train), cfg.fixed_tau);
    } else {
      Rng tau_rng(derive_seed(cfg.seed, "tau",
                              static_cast<std::uint64_t>(epoch)));
      taus = draw_quantile_levels(n_train, tau_rng);
    }
    std::vector<int> order(static_cast<std::size_t>(n_train));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle",
                                static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    std::vector<LossBreakdown> epoch_breakdowns;
    epoch_breakdowns.reserve(static_cast<std::size_t>(n_train));

    for (int begin = 0; begin < n_train; begin += cfg.batch_size) {
      const int bsz = std::min(cfg.batch_size, n_train - begin);
      model.zero_grads();
      std::vector<LossBreakdown> batch;
      batch.reserve(static_cast<std::size_t>(bsz));
      for (int k = 0; k < bsz; ++k) {
        const int idx = order[static_cast<std::size_t>(begin + k)];
        const double tau = taus[static_cast<std::size_t>(idx)];
        const Grid<Scalar> q = make_quantile_image<Scalar>(h, w, layout, tau);
        const Grid<Scalar>& mp = data.train_mp[static_cast<std::size_t>(idx)];
        const Grid<Scalar> pred = model.forward(mp, q);
        const LossBreakdown b = composite_loss(pred, mp, tau, spec, masks,
                                               cfg.weights, cfg.laplace_units);
        if (!std::isfinite(b.total)) {
          std::string idxs;
          for (int j = 0; j < bsz; ++j)
            idxs += (j ? "," : "") +
                    std::to_string(order[static_cast<std::size_t>(begin + j)]);
          throw TrainerError("non-finite loss at epoch " +
                             std::to_string(epoch) + ", step " +
                             std::to_string(global_step + 1) +
                             "; batch sample indices: " + idxs);
        }
        batch.push_back(b);
        dpred.setZero();
        add_composite_grad(pred, mp, tau, spec, masks, cfg.weights,
                           cfg.laplace_units, 1.0 / bsz, dpred);
        model.backward(dpred);
      }
      adam.step(params, cfg, lr);
      ++global_step;

      const LossBreakdown bb = average_breakdowns(batch, cfg.weights);
      epoch_breakdowns.insert(epoch_breakdowns.end(), batch.begin(),
                              batch.end());
      nlohmann::json line{{"epoch", epoch},
                          {"step", global_step},
                          {"batch_size", bsz},
                          {"lr", lr},
                          {"loss", detail::breakdown_json(bb)}};
      step_log << line.dump() << "\n";
    }

    const LossBreakdown train_avg =
        average_breakdowns(epoch_breakdowns, cfg.weights);
    summary.final_train_total = train_avg.total;
    if (epoch == 1) summary.epoch1_train_total = train_avg.total;

    // Validation sweep at the median quantile level.
    LossBreakdown val_avg;
    if (!data.val_mp.empty()) {
      const Grid<Scalar> q_val = make_quantile_image<Scalar>(h, w, layout, 0.5);
      std::vector<LossBreakdown> vb;
      vb.reserve(data.val_mp.size());
      for (const auto& mp : data.val_mp) {
        const Grid<Scalar> pred = model.forward(mp, q_val);
        vb.push_back(composite_loss(pred, mp, 0.5, spec, masks, cfg.weights,
                                    cfg.laplace_units));
      }
      val_avg = average_breakdowns(vb, cfg.weights);
    }

    const double metric =
        cfg.select_on == "val_loss" ? val_avg.total : train_avg.total;
    if (metric < summary.best_metric) {
      summary.best_metric = metric;
      summary.best_epoch = epoch;
      save_model(best_path, model,
                 nlohmann::json{{"kind", "model"},
                                {"config_hash", config_hash},
                                {"epoch", epoch},
                                {"selection_metric", summary.selection_metric},
                                {"metric", metric}});
    }
    summary.epochs_done = epoch;

    nlohmann::json eline{{"epoch", epoch},
                         {"lr", lr},
                         {"train", detail::breakdown_json(train_avg)},
                         {"best_epoch", summary.best_epoch}};
    if (!data.val_mp.empty()) eline["val"] = detail::breakdown_json(val_avg);
    epoch_log << eline.dump() << "\n";
    step_log.flush();
    epoch_log.flush();

    save_state(epoch);
    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
      save_model(run_dir / ("ckpt_epoch_" + std::to_string(epoch) + ".ckpt"),
                 model,
                 nlohmann::json{{"kind", "model"},
                                {"config_hash", config_hash},
                                {"epoch", epoch}});
    }

    if (progress != nullptr) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        t_start)
              .count();
      (*progress) << "epoch " << epoch << "/" << cfg.epochs << "  train "
                  << train_avg.total;
      if (!data.val_mp.empty()) (*progress) << "  val " << val_avg.total;
      (*progress) << "  lr " << lr << "  (" << secs << " s)\n";
      progress->flush();
    }
  }

  return summary;
}

}  // namespace heatrec
