#include "heatrec/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "heatrec/checkpoint.hpp"
#include "heatrec/config.hpp"
#include "heatrec/dataset.hpp"
#include "heatrec/metrics.hpp"
#include "heatrec/predictor.hpp"
#include "heatrec/render.hpp"
#include "heatrec/trainer.hpp"
#include "heatrec/version.hpp"

namespace heatrec {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct CliArgs {
  std::string config_path;
  std::string out_dir;  // overrides run_dir (data_dir for generate)
  bool resume = false;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

// Wall time makes this file non-reproducible by design; determinism claims
// cover dataset files, checkpoints, predictions, and loss logs, never the
// run manifests.
void write_run_manifest(const fs::path& dir, const std::string& command,
                        const RunConfig& cfg, double wall_s,
                        const nlohmann::json& outputs) {
  write_json_file(dir / ("run_" + command + ".json"),
                  nlohmann::json{{"command", command},
                                 {"version", kVersion},
                                 {"data_hash", cfg.data_hash()},
                                 {"run_hash", cfg.run_hash()},
                                 {"wall_time_s", wall_s},
                                 {"outputs", outputs}});
}

RunConfig load_for(const CliArgs& a, bool out_is_data_dir) {
  RunConfig cfg = load_run_config(a.config_path);
  apply_env_overrides(cfg.paths);
  if (!a.out_dir.empty()) {
    if (out_is_data_dir)
      cfg.paths.data_dir = a.out_dir;
    else
      cfg.paths.run_dir = a.out_dir;
  }
  return cfg;
}

DatasetManifest checked_manifest(const RunConfig& cfg) {
  const auto& dir = cfg.paths.data_dir;
  if (!fs::exists(dir / "manifest.json"))
    throw IoError("no dataset found in " + dir.string() +
                  "; run generate first");
  const DatasetManifest m = load_manifest(dir);
  if (m.config_hash != cfg.data_hash())
    throw IoError(dir.string() +
                  ": dataset was generated from a different configuration");
  return m;
}

template <typename Scalar>
ReconNet<Scalar> checked_best_model(const RunConfig& cfg) {
  const fs::path best = cfg.paths.run_dir / "ckpt_best.ckpt";
  if (!fs::exists(best))
    throw TrainerError("no checkpoint found in " +
                       cfg.paths.run_dir.string() + "; train first");
  nlohmann::json meta;
  ReconNet<Scalar> model = load_model<Scalar>(best, &meta);
  if (meta.value("config_hash", std::string()) != cfg.run_hash())
    throw TrainerError(best.string() +
                       ": checkpoint was trained from a different "
                       "configuration");
  return model;
}

int split_count(const DatasetManifest& m, const std::string& split) {
  if (split == "train") return m.counts.n_train;
  if (split == "val") return m.counts.n_val;
  return m.counts.n_test;
}

std::string sample_tag(const std::string& split, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return split + "_" + buf;
}

// Runs fn with a value of the configured scalar type, so each subcommand
// body is written once and instantiated for f32 and f64.
template <typename Fn>
int dispatch_precision(const RunConfig& cfg, Fn&& fn) {
  if (cfg.model.precision == "f64") return fn(double{});
  return fn(float{});
}

int cmd_generate(const CliArgs& a, std::ostream& out) {
  const auto t0 = Clock::now();
  const RunConfig cfg = load_for(a, true);
  const DatasetManifest m =
      generate_dataset(cfg.geometry.domain, cfg.geometry.sources,
                       cfg.geometry.sensors, cfg.dataset_params(),
                       cfg.paths.data_dir, cfg.data_hash());
  write_json_file(cfg.paths.data_dir / "config.json", cfg.to_json());
  write_run_manifest(cfg.paths.data_dir, "generate", cfg, seconds_since(t0),
                     nlohmann::json{{"manifest", "manifest.json"},
                                    {"train", m.counts.n_train},
                                    {"val", m.counts.n_val},
                                    {"test", m.counts.n_test}});
  out << "dataset ready in " << cfg.paths.data_dir.string() << " (train "
      << m.counts.n_train << ", val " << m.counts.n_val << ", test "
      << m.counts.n_test << ")\n";
  return 0;
}

int cmd_train(const CliArgs& a, std::ostream& out) {
  const auto t0 = Clock::now();
  const RunConfig cfg = load_for(a, false);
  const DatasetManifest m = checked_manifest(cfg);
  return dispatch_precision(cfg, [&](auto tag) {
    using Scalar = std::decay_t<decltype(tag)>;
    TrainData<Scalar> data;
    data.train_mp = load_split<Scalar>(cfg.paths.data_dir, "train",
                                       m.counts.n_train, m.grid_h, m.grid_w);
    data.val_mp = load_split<Scalar>(cfg.paths.data_dir, "val",
                                     m.counts.n_val, m.grid_h, m.grid_w);
    const RegionMasks masks = build_masks(
        cfg.geometry.domain, cfg.geometry.sources, cfg.geometry.sensors);
    ReconNet<Scalar> model(cfg.model, cfg.geometry.domain.ref_temp_K);
    fs::create_directories(cfg.paths.run_dir);
    write_json_file(cfg.paths.run_dir / "config.json", cfg.to_json());
    const TrainSummary s =
        train_model(model, data, cfg.geometry.domain, masks,
                    cfg.geometry.sensors, cfg.train, cfg.paths.run_dir,
                    a.resume, cfg.run_hash(), &out);
    write_json_file(cfg.paths.run_dir / "selection.json",
                    nlohmann::json{{"best_epoch", s.best_epoch},
                                   {"best_metric", s.best_metric},
                                   {"selection_metric", s.selection_metric},
                                   {"epochs_done", s.epochs_done},
                                   {"run_hash", cfg.run_hash()}});
    write_run_manifest(cfg.paths.run_dir, "train", cfg, seconds_since(t0),
                       nlohmann::json{{"epochs_done", s.epochs_done},
                                      {"best_epoch", s.best_epoch}});
    out << "training done: best epoch " << s.best_epoch << " ("
        << s.selection_metric << " " << s.best_metric << ")\n";
    return 0;
  });
}

int cmd_predict(const CliArgs& a, std::ostream& out) {
  const auto t0 = Clock::now();
  const RunConfig cfg = load_for(a, false);
  const DatasetManifest m = checked_manifest(cfg);
  const std::string& split = cfg.predict.split;
  const int count = split_count(m, split);
  if (count == 0)
    throw DomainError("predict: split \"" + split + "\" is empty");
  std::vector<int> indices = cfg.predict.indices;
  if (indices.empty()) {
    indices.resize(static_cast<std::size_t>(count));
    std::iota(indices.begin(), indices.end(), 0);
  }
  for (const int i : indices)
    if (i < 0 || i >= count)
      throw ConfigError("predict.indices: " + std::to_string(i) +
                        " outside split \"" + split + "\" (size " +
                        std::to_string(count) + ")");
  return dispatch_precision(cfg, [&](auto tag) {
    using Scalar = std::decay_t<decltype(tag)>;
    ReconNet<Scalar> model = checked_best_model<Scalar>(cfg);
    const fs::path pred_dir = cfg.paths.run_dir / "predictions";
    fs::create_directories(pred_dir);
    for (const int i : indices) {
      const Grid<Scalar> mp = read_f32<Scalar>(
          cfg.paths.data_dir / split / sample_filename(i, "mp"), m.grid_h,
          m.grid_w);
      const PredictionResult<Scalar> res = predict_with_uq(
          model, mp, cfg.geometry.sensors, cfg.predict.n_pre,
          derive_seed(cfg.predict.seed, "sample",
                      static_cast<std::uint64_t>(i)));
      const std::string tag_name = sample_tag(split, i);
      write_f32(pred_dir / (tag_name + "_mean.f32"), res.mean_field);
      write_f32(pred_dir / (tag_name + "_sigma.f32"), res.sigma_field);
      nlohmann::json uq = uq_report(res, cfg.geometry.sensors,
                                    cfg.dataset.noise);
      uq["split"] = split;
      uq["index"] = i;
      write_json_file(pred_dir / (tag_name + "_uq.json"), uq);
    }
    write_run_manifest(
        cfg.paths.run_dir, "predict", cfg, seconds_since(t0),
        nlohmann::json{{"split", split},
                       {"n_samples", static_cast<int>(indices.size())},
                       {"n_pre", cfg.predict.n_pre},
                       {"dir", "predictions"}});
    out << "wrote " << indices.size() << " predictions to "
        << pred_dir.string() << "\n";
    return 0;
  });
}

int cmd_evaluate(const CliArgs& a, std::ostream& out) {
  const auto t0 = Clock::now();
  const RunConfig cfg = load_for(a, false);
  const DatasetManifest m = checked_manifest(cfg);
  if (m.counts.n_test == 0)
    throw DomainError("evaluate: the test split is empty");
  return dispatch_precision(cfg, [&](auto tag) {
    using Scalar = std::decay_t<decltype(tag)>;
    ReconNet<Scalar> model = checked_best_model<Scalar>(cfg);
    std::vector<Grid<Scalar>> means, labels;
    means.reserve(static_cast<std::size_t>(m.counts.n_test));
    labels.reserve(static_cast<std::size_t>(m.counts.n_test));
    std::string csv = "split,index,mae,rmse,mre,r2\n";
    for (int i = 0; i < m.counts.n_test; ++i) {
      const Grid<Scalar> mp = read_f32<Scalar>(
          cfg.paths.data_dir / "test" / sample_filename(i, "mp"), m.grid_h,
          m.grid_w);
      const Grid<Scalar> label = read_f32<Scalar>(
          cfg.paths.data_dir / "test" / sample_filename(i, "label"), m.grid_h,
          m.grid_w);
      const PredictionResult<Scalar> res = predict_with_uq(
          model, mp, cfg.geometry.sensors, cfg.predict.n_pre,
          derive_seed(cfg.predict.seed, "sample",
                      static_cast<std::uint64_t>(i)));
      const MetricsRecord one = compute_metrics<Scalar>({res.mean_field},
                                                        {label});
      csv += "test," + std::to_string(i) + "," + std::to_string(one.mae_avg) +
             "," + std::to_string(one.rmse_avg) + "," +
             std::to_string(one.mre_avg) + "," + std::to_string(one.r2_avg) +
             "\n";
      means.push_back(res.mean_field);
      labels.push_back(std::move(label));
    }
    const MetricsRecord rec = compute_metrics(means, labels);
    const MetricsRecord alt =
        compute_metrics(means, labels, R2Baseline::pooled_pred_mean);
    nlohmann::json mj = rec.to_json();
    mj["r2_pooled_baseline"] = alt.r2_avg;
    mj["n_pre"] = cfg.predict.n_pre;
    mj["run_hash"] = cfg.run_hash();
    write_json_file(cfg.paths.run_dir / "metrics.json", mj);
    std::ofstream csvf(cfg.paths.run_dir / "metrics.csv", std::ios::trunc);
    if (!csvf)
      throw IoError("cannot write " +
                    (cfg.paths.run_dir / "metrics.csv").string());
    csvf << csv;
    write_run_manifest(cfg.paths.run_dir, "evaluate", cfg, seconds_since(t0),
                       nlohmann::json{{"metrics", "metrics.json"},
                                      {"table", "metrics.csv"},
                                      {"n_test", rec.n_test}});
    out << "test metrics over " << rec.n_test << " samples: MAE "
        << rec.mae_avg << " K, RMSE " << rec.rmse_avg << " K, MRE "
        << rec.mre_avg << ", R2 " << rec.r2_avg << "\n";
    return 0;
  });
}

int cmd_report(const CliArgs& a, std::ostream& out) {
  const auto t0 = Clock::now();
  const RunConfig cfg = load_for(a, false);
  const DatasetManifest m = checked_manifest(cfg);
  const fs::path pred_dir = cfg.paths.run_dir / "predictions";

  std::vector<std::pair<std::string, int>> found;
  if (fs::exists(pred_dir)) {
    for (const auto& entry : fs::directory_iterator(pred_dir)) {
      const std::string name = entry.path().filename().string();
      const std::string suffix = "_mean.f32";
      if (name.size() <= suffix.size() || !name.ends_with(suffix)) continue;
      const std::string stem = name.substr(0, name.size() - suffix.size());
      const auto pos = stem.rfind('_');
      if (pos == std::string::npos) continue;
      found.emplace_back(stem.substr(0, pos),
                         std::stoi(stem.substr(pos + 1)));
    }
  }
  if (found.empty())
    throw IoError("no predictions found in " + pred_dir.string() +
                  "; run predict first");
  std::sort(found.begin(), found.end());

  std::vector<SampleRender> samples;
  samples.reserve(found.size());
  for (const auto& [split, index] : found) {
    SampleRender s;
    s.split = split;
    s.index = index;
    const std::string tag_name = sample_tag(split, index);
    s.mean = read_f32<double>(pred_dir / (tag_name + "_mean.f32"), m.grid_h,
                              m.grid_w);
    s.sigma = read_f32<double>(pred_dir / (tag_name + "_sigma.f32"), m.grid_h,
                               m.grid_w);
    const fs::path label_path =
        cfg.paths.data_dir / split / sample_filename(index, "label");
    if (split == "test" && fs::exists(label_path))
      s.label = read_f32<double>(label_path, m.grid_h, m.grid_w);
    samples.push_back(std::move(s));
  }
  const auto files =
      render_reports(samples, cfg.geometry.sensors, cfg.dataset.noise,
                     cfg.paths.run_dir / "report");
  write_run_manifest(cfg.paths.run_dir, "report", cfg, seconds_since(t0),
                     nlohmann::json{{"dir", "report"},
                                    {"n_files", static_cast<int>(files.size())},
                                    {"n_samples",
                                     static_cast<int>(samples.size())}});
  out << "wrote " << files.size() << " report files to "
      << (cfg.paths.run_dir / "report").string() << "\n";
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err) {
  CLI::App app{
      "reconstruction of steady-state temperature fields from sparse "
      "sensors, with aleatoric uncertainty"};
  app.require_subcommand(1);

  CliArgs a;
  const auto add_common = [&a](CLI::App* sub) {
    sub->add_option("--config", a.config_path, "config document (JSON)")
        ->required();
    sub->add_option("--out", a.out_dir, "override the output directory");
  };
  CLI::App* generate =
      app.add_subcommand("generate", "simulate and persist the dataset");
  CLI::App* train = app.add_subcommand("train", "train the surrogate");
  CLI::App* predict =
      app.add_subcommand("predict", "write mean/sigma fields for a split");
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "metrics over the labeled test split");
  CLI::App* report =
      app.add_subcommand("report", "render figures from predictions");
  for (CLI::App* sub : {generate, train, predict, evaluate, report})
    add_common(sub);
  train->add_flag("--resume", a.resume,
                  "continue from the last state checkpoint");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(generate)) return cmd_generate(a, out);
    if (app.got_subcommand(train)) return cmd_train(a, out);
    if (app.got_subcommand(predict)) return cmd_predict(a, out);
    if (app.got_subcommand(evaluate)) return cmd_evaluate(a, out);
    return cmd_report(a, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace heatrec
