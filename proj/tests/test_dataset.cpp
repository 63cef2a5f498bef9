#include <doctest.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "heatrec/dataset.hpp"
#include "heatrec/solver.hpp"
#include "oracles.hpp"

using namespace heatrec;
namespace fs = std::filesystem;

namespace {

// Fresh directory per test, removed on scope exit.
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

DomainSpec tiny_spec() {
  DomainSpec spec;
  spec.grid_w = spec.grid_h = 9;
  spec.sink_width_m = 0.05;
  return spec;
}

std::vector<HeatSourceShape> tiny_sources() {
  std::vector<HeatSourceShape> s(1);
  s[0].kind = ShapeKind::rectangle;
  s[0].center_u = 0.1;
  s[0].center_v = 0.1;
  s[0].extent_u = 0.06;
  s[0].extent_v = 0.06;
  s[0].nominal_power_W = 50.0;
  return s;
}

SensorLayout tiny_layout() {
  SensorLayout layout;
  layout.points = {{1, 1}, {1, 6}, {4, 4}, {7, 2}, {6, 7}};
  layout.groups["left"] = {0, 3};
  layout.groups["right"] = {1, 4};
  layout.groups["all"] = {0, 1, 2, 3, 4};
  return layout;
}

DatasetParams tiny_params() {
  DatasetParams p;
  p.counts = {2, 1, 1};
  p.power_mean_W = 50.0;
  p.power_std_W = 5.0;
  p.conductivity_W_mK = 150.0;
  p.seed = 31337;
  return p;
}

}  // namespace

TEST_CASE("float32 grids round-trip through disk") {
  TempDir dir("f32io");
  Grid32 g(3, 4);
  Rng rng(8);
  for (Eigen::Index i = 0; i < g.size(); ++i)
    g.data()[i] = static_cast<float>(rng.uniform(-1e3, 1e3));
  write_f32(dir.path / "g.f32", g);
  const Grid32 back = read_f32<float>(dir.path / "g.f32", 3, 4);
  CHECK((back - g).cwiseAbs().maxCoeff() == 0.0f);

  // doubles are quantized to f32 on write, and the file size is checked
  Grid64 d = Grid64::Constant(3, 4, 1.0 / 3.0);
  write_f32(dir.path / "d.f32", d);
  const Grid64 dback = read_f32<double>(dir.path / "d.f32", 3, 4);
  CHECK((dback - d).cwiseAbs().maxCoeff() < 1e-7);
  CHECK(dback(0, 0) == static_cast<double>(static_cast<float>(1.0 / 3.0)));

  CHECK_THROWS_AS(read_f32<float>(dir.path / "g.f32", 4, 4), IoError);
  CHECK_THROWS_AS(read_f32<float>(dir.path / "missing.f32", 3, 4), IoError);
}

TEST_CASE("sample filenames are zero-padded and kind-tagged") {
  CHECK(sample_filename(7, "mp") == "000007_mp.f32");
  CHECK(sample_filename(123456, "label") == "123456_label.f32");
}

TEST_CASE("sensor channel images") {
  const SensorLayout layout = tiny_layout();
  Rng rng(3);
  const Grid64 field = oracles::random_field(rng, 9, 9, 300.0, 330.0);
  const Grid64 mp = make_mp_image(field, layout);
  CHECK(mp(1, 1) == field(1, 1));
  CHECK(mp(4, 4) == field(4, 4));
  CHECK(mp(0, 0) == 0.0);
  // exactly the sensor cells are nonzero
  int nonzero = 0;
  for (Eigen::Index i = 0; i < mp.size(); ++i)
    if (mp.data()[i] != 0.0) ++nonzero;
  CHECK(nonzero == 5);

  const Grid64 q = make_quantile_image<double>(9, 9, layout, 0.25);
  CHECK(q(1, 6) == 0.25);
  CHECK(q(0, 0) == 0.0);
  CHECK_THROWS_AS(make_quantile_image<double>(9, 9, layout, 0.0), DomainError);
  CHECK_THROWS_AS(make_quantile_image<double>(9, 9, layout, 1.0), DomainError);
}

TEST_CASE("noise injection targets exactly the named groups") {
  const SensorLayout layout = tiny_layout();
  const Grid64 img = Grid64::Constant(9, 9, 100.0);

  std::vector<NoiseSpec> specs(1);
  specs[0].kind = NoiseSpec::Kind::gaussian;
  specs[0].sigma = 1.0;
  specs[0].group = "left";
  const Grid64 noisy = inject_noise(img, layout, specs, 404);

  CHECK(noisy(1, 1) != 100.0);  // group member (index 0)
  CHECK(noisy(7, 2) != 100.0);  // group member (index 3)
  CHECK(noisy(1, 6) == 100.0);  // not in the group
  CHECK(noisy(4, 4) == 100.0);
  CHECK(noisy(0, 0) == 100.0);  // non-sensor cells untouched

  // deterministic in the seed
  const Grid64 again = inject_noise(img, layout, specs, 404);
  CHECK((again - noisy).cwiseAbs().maxCoeff() == 0.0);
  const Grid64 other = inject_noise(img, layout, specs, 405);
  CHECK((other - noisy).cwiseAbs().maxCoeff() != 0.0);
}

TEST_CASE("uniform noise respects its bounds") {
  const SensorLayout layout = tiny_layout();
  const Grid64 img = Grid64::Zero(9, 9);
  std::vector<NoiseSpec> specs(1);
  specs[0].kind = NoiseSpec::Kind::uniform;
  specs[0].lo = -1.0;
  specs[0].hi = 1.0;
  specs[0].group = "all";
  for (int seed = 0; seed < 200; ++seed) {
    const Grid64 noisy = inject_noise(img, layout, specs, seed);
    for (const auto& [r, c] : layout.points) {
      REQUIRE(noisy(r, c) >= -1.0);
      REQUIRE(noisy(r, c) < 1.0);
    }
  }
}

TEST_CASE("a sensor in two noisy groups receives both draws") {
  SensorLayout layout = tiny_layout();
  layout.groups["dup"] = {0};
  const Grid64 img = Grid64::Zero(9, 9);
  std::vector<NoiseSpec> both(2);
  both[0].kind = NoiseSpec::Kind::uniform;
  both[0].lo = both[0].hi = 5.0;  // degenerate draw, always 5
  both[0].group = "left";
  both[1] = both[0];
  both[1].group = "dup";
  const Grid64 noisy = inject_noise(img, layout, both, 1);
  CHECK(noisy(1, 1) == doctest::Approx(10.0));  // sensor 0: both specs
  CHECK(noisy(7, 2) == doctest::Approx(5.0));   // sensor 3: left only
}

TEST_CASE("noise validation failures") {
  const SensorLayout layout = tiny_layout();
  const Grid64 img = Grid64::Zero(9, 9);
  std::vector<NoiseSpec> bad(1);
  bad[0].kind = NoiseSpec::Kind::gaussian;
  bad[0].sigma = -0.5;
  bad[0].group = "left";
  CHECK_THROWS_AS(inject_noise(img, layout, bad, 0), ConfigError);
  bad[0].sigma = 0.5;
  bad[0].group = "no_such_group";
  CHECK_THROWS_AS(inject_noise(img, layout, bad, 0), ConfigError);
  bad[0].group = "";
  CHECK_THROWS_AS(inject_noise(img, layout, bad, 0), ConfigError);
}

TEST_CASE("generation writes a complete, reloadable dataset") {
  TempDir dir("gen");
  const DomainSpec spec = tiny_spec();
  const auto sources = tiny_sources();
  const auto layout = tiny_layout();
  const auto params = tiny_params();

  const DatasetManifest m =
      generate_dataset(spec, sources, layout, params, dir.path, "hash123");
  CHECK(m.grid_h == 9);
  CHECK(m.counts.n_train == 2);
  CHECK(m.config_hash == "hash123");

  CHECK(fs::exists(dir.path / "train" / "000000_mp.f32"));
  CHECK(fs::exists(dir.path / "train" / "000001_mp.f32"));
  CHECK(fs::exists(dir.path / "val" / "000000_mp.f32"));
  CHECK(fs::exists(dir.path / "test" / "000000_mp.f32"));
  CHECK(fs::exists(dir.path / "test" / "000000_label.f32"));
  CHECK(fs::exists(dir.path / "manifest.json"));
  // labels exist only for the test split
  CHECK_FALSE(fs::exists(dir.path / "train" / "000000_label.f32"));
  CHECK_FALSE(fs::exists(dir.path / "val" / "000000_label.f32"));

  const auto train = load_split<float>(dir.path, "train", 2, 9, 9);
  REQUIRE(train.size() == 2);
  CHECK(train[0].rows() == 9);
  // sensor images are zero off the sensor set
  CHECK(train[0](0, 0) == 0.0f);
  CHECK(train[0](1, 1) != 0.0f);

  const DatasetManifest loaded = load_manifest(dir.path);
  CHECK(loaded == m);
}

TEST_CASE("regeneration is a no-op; changed settings are refused") {
  TempDir dir("regen");
  const DomainSpec spec = tiny_spec();
  const auto sources = tiny_sources();
  const auto layout = tiny_layout();
  const auto params = tiny_params();

  generate_dataset(spec, sources, layout, params, dir.path, "h1");
  const std::string manifest_before = slurp(dir.path / "manifest.json");
  const std::string sample_before = slurp(dir.path / "train" / "000000_mp.f32");

  // identical settings: nothing changes
  generate_dataset(spec, sources, layout, params, dir.path, "h1");
  CHECK(slurp(dir.path / "manifest.json") == manifest_before);
  CHECK(slurp(dir.path / "train" / "000000_mp.f32") == sample_before);

  // different settings: refused, files untouched
  DatasetParams changed = params;
  changed.seed = 999;
  CHECK_THROWS_AS(
      generate_dataset(spec, sources, layout, changed, dir.path, "h1"),
      IoError);
  CHECK_THROWS_AS(
      generate_dataset(spec, sources, layout, params, dir.path, "h2"),
      IoError);
  CHECK(slurp(dir.path / "train" / "000000_mp.f32") == sample_before);
}

TEST_CASE("two generations from the same seed are byte-identical") {
  TempDir a("gen_a"), b("gen_b");
  const DomainSpec spec = tiny_spec();
  const auto sources = tiny_sources();
  const auto layout = tiny_layout();
  DatasetParams params = tiny_params();
  params.noise.resize(1);
  params.noise[0].kind = NoiseSpec::Kind::gaussian;
  params.noise[0].sigma = 0.3;
  params.noise[0].group = "all";

  generate_dataset(spec, sources, layout, params, a.path, "h");
  generate_dataset(spec, sources, layout, params, b.path, "h");

  for (const char* rel :
       {"manifest.json", "train/000000_mp.f32", "train/000001_mp.f32",
        "val/000000_mp.f32", "test/000000_mp.f32", "test/000000_label.f32"})
    CHECK(slurp(a.path / rel) == slurp(b.path / rel));
}

TEST_CASE("samples are reproducible from their global index alone") {
  TempDir dir("per_sample");
  const DomainSpec spec = tiny_spec();
  const auto sources = tiny_sources();
  const auto layout = tiny_layout();
  DatasetParams params = tiny_params();
  params.noise.resize(1);
  params.noise[0].kind = NoiseSpec::Kind::gaussian;
  params.noise[0].sigma = 0.3;
  params.noise[0].group = "all";

  generate_dataset(spec, sources, layout, params, dir.path, "h");

  // re-derive the val sample (global index 2) in isolation
  const int g = 2;
  const auto powers = sample_source_powers(
      sources, params.power_mean_W, params.power_std_W,
      derive_seed(params.seed, "powers", g));
  SteadyStateSolver solver(spec, params.conductivity_W_mK);
  const Grid64 field = solver.solve(assemble_intensity(spec, sources, powers));
  Grid64 mp = make_mp_image(field, layout);
  mp = inject_noise(mp, layout, params.noise, derive_seed(params.seed, "noise", g));

  const Grid32 stored = read_f32<float>(dir.path / "val" / "000000_mp.f32", 9, 9);
  CHECK((stored.cast<double>() - mp.unaryExpr([](double x) {
          return static_cast<double>(static_cast<float>(x));
        })).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("test labels are the clean solved fields") {
  TempDir dir("labels");
  const DomainSpec spec = tiny_spec();
  const auto sources = tiny_sources();
  const auto layout = tiny_layout();
  DatasetParams params = tiny_params();
  params.noise.resize(1);
  params.noise[0].kind = NoiseSpec::Kind::gaussian;
  params.noise[0].sigma = 10.0;  // large, so clean vs noisy is unmistakable
  params.noise[0].group = "all";

  generate_dataset(spec, sources, layout, params, dir.path, "h");
  const int g = 3;  // the single test sample
  const auto powers = sample_source_powers(
      sources, params.power_mean_W, params.power_std_W,
      derive_seed(params.seed, "powers", g));
  SteadyStateSolver solver(spec, params.conductivity_W_mK);
  const Grid64 field = solver.solve(assemble_intensity(spec, sources, powers));

  const Grid32 label = read_f32<float>(dir.path / "test" / "000000_label.f32", 9, 9);
  CHECK((label.cast<double>() - field).cwiseAbs().maxCoeff() < 1e-4);

  // the sensor file for the same sample carries the injected noise
  const Grid32 mp = read_f32<float>(dir.path / "test" / "000000_mp.f32", 9, 9);
  double devsum = 0.0;
  for (const auto& [r, c] : layout.points)
    devsum += std::abs(static_cast<double>(mp(r, c)) - field(r, c));
  CHECK(devsum > 1.0);
}

TEST_CASE("empty counts and missing manifest are rejected") {
  TempDir dir("bad");
  DatasetParams params = tiny_params();
  params.counts = {0, 0, 0};
  CHECK_THROWS_AS(generate_dataset(tiny_spec(), tiny_sources(), tiny_layout(),
                                   params, dir.path, "h"),
                  ConfigError);
  CHECK_THROWS_AS(load_manifest(dir.path), IoError);
  CHECK_THROWS_AS(load_split<float>(dir.path, "train", 1, 9, 9), IoError);
}
