#include <doctest.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "heatrec/solver.hpp"
#include "heatrec/trainer.hpp"
#include "oracles.hpp"

using namespace heatrec;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("heatrec_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

// Small but physically real training setup on a 16x16 grid.
struct Toy {
  DomainSpec spec;
  std::vector<HeatSourceShape> sources;
  SensorLayout layout;
  RegionMasks masks;
  TrainData<float> data;

  explicit Toy(int n_train, int n_val) {
    spec.grid_w = spec.grid_h = 16;
    spec.sink_width_m = 0.04;
    sources.resize(1);
    sources[0].kind = ShapeKind::rectangle;
    sources[0].center_u = 0.12;
    sources[0].center_v = 0.08;
    sources[0].extent_u = 0.05;
    sources[0].extent_v = 0.05;
    layout.points = {{2, 2},  {2, 8},  {2, 13}, {6, 4},  {6, 11},
                     {9, 2},  {9, 8},  {9, 14}, {13, 5}, {13, 10}};
    masks = build_masks(spec, sources, layout);

    SteadyStateSolver solver(spec, 150.0);
    for (int i = 0; i < n_train + n_val; ++i) {
      const auto powers =
          sample_source_powers(sources, 600.0, 60.0, derive_seed(7, "p", i));
      const Grid64 field =
          solver.solve(assemble_intensity(spec, sources, powers));
      const Grid32 mp = make_mp_image(field, layout).cast<float>();
      if (i < n_train)
        data.train_mp.push_back(mp);
      else
        data.val_mp.push_back(mp);
    }
  }
};

TrainConfig fast_cfg(int epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 2;
  cfg.lr = 2e-3;
  cfg.checkpoint_every = 0;
  cfg.select_on = "train_loss";
  cfg.seed = 99;
  cfg.laplace_units = LaplaceUnits::pixel;
  return cfg;
}

ModelConfig toy_model() {
  ModelConfig cfg;
  cfg.base_width = 4;
  cfg.depth = 2;
  cfg.mid_channels = 4;
  return cfg;
}

}  // namespace

TEST_CASE("learning-rate schedule endpoints and symmetry") {
  TrainConfig cfg;
  cfg.epochs = 11;
  cfg.lr = 1e-3;
  cfg.lr_schedule = "constant";
  CHECK(lr_at_epoch(cfg, 1) == 1e-3);
  CHECK(lr_at_epoch(cfg, 11) == 1e-3);

  cfg.lr_schedule = "cosine";
  CHECK(lr_at_epoch(cfg, 1) == doctest::Approx(1e-3));
  CHECK(lr_at_epoch(cfg, 11) == doctest::Approx(0.05e-3));
  // halfway point of the cosine: the average of the two extremes
  CHECK(lr_at_epoch(cfg, 6) == doctest::Approx(0.5 * (1e-3 + 0.05e-3)));
  // monotone decreasing
  for (int e = 1; e < 11; ++e)
    CHECK(lr_at_epoch(cfg, e) > lr_at_epoch(cfg, e + 1));

  cfg.epochs = 1;
  CHECK(lr_at_epoch(cfg, 1) == 1e-3);  // degenerate schedule stays put
}

TEST_CASE("quantile levels are fresh, open-interval draws") {
  Rng rng(5);
  const auto taus = draw_quantile_levels(1000, rng);
  REQUIRE(taus.size() == 1000);
  for (const double t : taus) {
    REQUIRE(t > 0.0);
    REQUIRE(t < 1.0);
  }
  Rng r2(5);
  CHECK(draw_quantile_levels(1000, r2) == taus);
  CHECK_THROWS_AS(draw_quantile_levels(0, rng), DomainError);
}

TEST_CASE("optimizer reproduces the textbook update") {
  // two fake parameters driven with constant gradients for two steps
  double w[2] = {1.0, -2.0};
  double g[2] = {0.5, -1.5};
  std::vector<ParamRef<double>> params;
  params.push_back({"w", w, g, 2, 1});

  TrainConfig cfg;
  cfg.lr = 0.1;
  cfg.beta1 = 0.9;
  cfg.beta2 = 0.999;
  cfg.eps = 1e-8;
  cfg.grad_clip = 0.0;  // disabled

  Adam<double> adam(params);
  adam.step(params, cfg, cfg.lr);

  // by hand: m1 = 0.1 g, v1 = 0.001 g^2, mhat = g, vhat = g^2
  // update = lr * g / (|g| + eps')  ~ lr * sign(g)
  double m[2] = {0.0, 0.0}, v[2] = {0.0, 0.0}, expect[2] = {1.0, -2.0};
  for (int i = 0; i < 2; ++i) {
    m[i] = 0.1 * g[i];
    v[i] = 0.001 * g[i] * g[i];
    const double mhat = m[i] / (1.0 - 0.9);
    const double vhat = v[i] / (1.0 - 0.999);
    expect[i] -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
  }
  CHECK(w[0] == doctest::Approx(expect[0]).epsilon(1e-9));
  CHECK(w[1] == doctest::Approx(expect[1]).epsilon(1e-9));

  adam.step(params, cfg, cfg.lr);
  for (int i = 0; i < 2; ++i) {
    m[i] = 0.9 * m[i] + 0.1 * g[i];
    v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
    const double mhat = m[i] / (1.0 - 0.9 * 0.9);
    const double vhat = v[i] / (1.0 - 0.999 * 0.999);
    expect[i] -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
  }
  CHECK(w[0] == doctest::Approx(expect[0]).epsilon(1e-9));
  CHECK(w[1] == doctest::Approx(expect[1]).epsilon(1e-9));
  CHECK(adam.steps() == 2);
}

TEST_CASE("gradient clipping rescales to the global norm bound") {
  double w[2] = {0.0, 0.0};
  double g[2] = {3.0, 4.0};  // norm 5
  std::vector<ParamRef<double>> params;
  params.push_back({"w", w, g, 2, 1});

  TrainConfig cfg;
  cfg.grad_clip = 1.0;
  Adam<double> adam(params);
  adam.step(params, cfg, 0.0);  // lr 0: only the clip touches state
  CHECK(g[0] == doctest::Approx(0.6));
  CHECK(g[1] == doctest::Approx(0.8));

  // below the bound, gradients pass through untouched
  double g2[2] = {0.3, 0.4};
  params[0].grad = g2;
  adam.step(params, cfg, 0.0);
  CHECK(g2[0] == doctest::Approx(0.3));
  CHECK(g2[1] == doctest::Approx(0.4));
}

TEST_CASE("training configuration validation") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.beta2 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.lr_schedule = "linear";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.select_on = "test_loss";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.checkpoint_every = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.fixed_tau = 2.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("a short run learns the toy problem and keeps its books") {
  TempDir dir("train_short");
  Toy toy(4, 2);
  ReconNet<float> model(toy_model(), toy.spec.ref_temp_K);
  TrainConfig cfg = fast_cfg(30);
  cfg.select_on = "val_loss";
  cfg.checkpoint_every = 10;

  const TrainSummary s =
      train_model(model, toy.data, toy.spec, toy.masks, toy.layout, cfg,
                  dir.path, false, "cfg_hash_1");
  CHECK(s.epochs_done == 30);
  CHECK(s.best_epoch >= 1);
  CHECK(s.best_epoch <= 30);
  CHECK(std::isfinite(s.best_metric));
  CHECK(s.final_train_total < 0.5 * s.epoch1_train_total);

  CHECK(fs::exists(dir.path / "ckpt_last.ckpt"));
  CHECK(fs::exists(dir.path / "ckpt_best.ckpt"));
  CHECK(fs::exists(dir.path / "ckpt_epoch_10.ckpt"));
  CHECK(fs::exists(dir.path / "ckpt_epoch_30.ckpt"));
  CHECK(fs::exists(dir.path / "logs" / "steps.jsonl"));
  CHECK(fs::exists(dir.path / "logs" / "epochs.jsonl"));

  // the state checkpoint records where the run stands
  const auto state = read_checkpoint<float>(dir.path / "ckpt_last.ckpt");
  CHECK(state.meta.at("epoch_done").get<int>() == 30);
  CHECK(state.meta.at("config_hash").get<std::string>() == "cfg_hash_1");
  CHECK(state.meta.at("step").get<int>() == 30 * 2);  // 4 samples, batches of 2

  // epoch log: one line per epoch, each with train and val entries
  std::ifstream elog(dir.path / "logs" / "epochs.jsonl");
  int lines = 0;
  std::string line;
  while (std::getline(elog, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("train"));
    CHECK(j.contains("val"));
    ++lines;
  }
  CHECK(lines == 30);
}

TEST_CASE("interrupted and uninterrupted runs produce identical state") {
  TempDir one("train_once"), two("train_twice");
  Toy toy(4, 0);

  ReconNet<float> a(toy_model(), toy.spec.ref_temp_K);
  train_model(a, toy.data, toy.spec, toy.masks, toy.layout, fast_cfg(4),
              one.path, false, "h");

  ReconNet<float> b(toy_model(), toy.spec.ref_temp_K);
  train_model(b, toy.data, toy.spec, toy.masks, toy.layout, fast_cfg(2),
              two.path, false, "h");
  ReconNet<float> c(toy_model(), toy.spec.ref_temp_K);
  TrainConfig rest = fast_cfg(4);  // same 4-epoch horizon, resumed at 3
  train_model(c, toy.data, toy.spec, toy.masks, toy.layout, rest, two.path,
              true, "h");

  CHECK(slurp(one.path / "ckpt_last.ckpt") ==
        slurp(two.path / "ckpt_last.ckpt"));
  CHECK(slurp(one.path / "logs" / "epochs.jsonl") ==
        slurp(two.path / "logs" / "epochs.jsonl"));
  CHECK(slurp(one.path / "logs" / "steps.jsonl") ==
        slurp(two.path / "logs" / "steps.jsonl"));
}

TEST_CASE("run directories are protected against accidents") {
  TempDir dir("train_guard");
  Toy toy(2, 0);
  ReconNet<float> model(toy_model(), toy.spec.ref_temp_K);
  TrainConfig cfg = fast_cfg(1);

  // resume with nothing to resume from
  CHECK_THROWS_AS(train_model(model, toy.data, toy.spec, toy.masks,
                              toy.layout, cfg, dir.path, true, "h"),
                  TrainerError);

  train_model(model, toy.data, toy.spec, toy.masks, toy.layout, cfg, dir.path,
              false, "h");

  // starting fresh over existing state
  CHECK_THROWS_AS(train_model(model, toy.data, toy.spec, toy.masks,
                              toy.layout, cfg, dir.path, false, "h"),
                  TrainerError);

  // resuming under a different configuration hash
  TrainConfig more = fast_cfg(2);
  CHECK_THROWS_AS(train_model(model, toy.data, toy.spec, toy.masks,
                              toy.layout, more, dir.path, true, "other"),
                  TrainerError);

  // valid resume extends the run
  const TrainSummary s = train_model(model, toy.data, toy.spec, toy.masks,
                                     toy.layout, more, dir.path, true, "h");
  CHECK(s.epochs_done == 2);
}

TEST_CASE("selecting on validation loss requires a validation split") {
  TempDir dir("train_noval");
  Toy toy(2, 0);
  ReconNet<float> model(toy_model(), toy.spec.ref_temp_K);
  TrainConfig cfg = fast_cfg(1);
  cfg.select_on = "val_loss";
  CHECK_THROWS_AS(train_model(model, toy.data, toy.spec, toy.masks,
                              toy.layout, cfg, dir.path, false, "h"),
                  ConfigError);
}

TEST_CASE("an exploding run fails loudly with context") {
  TempDir dir("train_blowup");
  Toy toy(4, 0);
  ReconNet<float> model(toy_model(), toy.spec.ref_temp_K);
  TrainConfig cfg = fast_cfg(3);
  cfg.lr = 1e20;       // guaranteed overflow in f32
  cfg.grad_clip = 0.0; // do not soften it
  CHECK_THROWS_WITH_AS(
      train_model(model, toy.data, toy.spec, toy.masks, toy.layout, cfg,
                  dir.path, false, "h"),
      doctest::Contains("non-finite loss"), TrainerError);
}

TEST_CASE("a pinned quantile level trains deterministically too") {
  TempDir a("fixed_tau_a"), b("fixed_tau_b");
  Toy toy(2, 0);
  TrainConfig cfg = fast_cfg(2);
  cfg.fixed_tau = 0.5;

  ReconNet<float> m1(toy_model(), toy.spec.ref_temp_K);
  train_model(m1, toy.data, toy.spec, toy.masks, toy.layout, cfg, a.path,
              false, "h");
  ReconNet<float> m2(toy_model(), toy.spec.ref_temp_K);
  train_model(m2, toy.data, toy.spec, toy.masks, toy.layout, cfg, b.path,
              false, "h");
  CHECK(slurp(a.path / "ckpt_last.ckpt") == slurp(b.path / "ckpt_last.ckpt"));
}
