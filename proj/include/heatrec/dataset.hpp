#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "heatrec/geometry.hpp"
#include "heatrec/rng.hpp"
#include "heatrec/solver.hpp"
#include "heatrec/types.hpp"
#include "heatrec/version.hpp"

namespace heatrec {

static_assert(std::endian::native == std::endian::little,
              "field files are little-endian float32; big-endian hosts are "
              "not supported");

// --- raw float32 field files -------------------------------------------
// Row-major float32, no header; shape comes from the dataset manifest.

template <typename Scalar>
void write_f32(const std::filesystem::path& path, const Grid<Scalar>& g) {
  std::vector<float> buf(static_cast<std::size_t>(g.size()));
  for (Eigen::Index i = 0; i < g.size(); ++i)
    buf[static_cast<std::size_t>(i)] = static_cast<float>(g.data()[i]);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!f) throw IoError("short write: " + path.string());
}

template <typename Scalar = float>
Grid<Scalar> read_f32(const std::filesystem::path& path, int h, int w) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw IoError("cannot open: " + path.string());
  const auto bytes = static_cast<std::size_t>(f.tellg());
  const std::size_t expect = static_cast<std::size_t>(h) * w * sizeof(float);
  if (bytes != expect)
    throw IoError(path.string() + ": size " + std::to_string(bytes) +
                  " does not match " + std::to_string(h) + "x" +
                  std::to_string(w) + " float32");
  f.seekg(0);
  std::vector<float> buf(static_cast<std::size_t>(h) * w);
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(expect));
  if (!f) throw IoError("short read: " + path.string());
  Grid<Scalar> g(h, w);
  for (Eigen::Index i = 0; i < g.size(); ++i)
    g.data()[i] = static_cast<Scalar>(buf[static_cast<std::size_t>(i)]);
  return g;
}

inline std::string sample_filename(int index, const char* kind) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d_%s.f32", index, kind);
  return buf;
}

// --- model input channels ----------------------------------------------

// Channel 0: the field value at each monitoring point, zero elsewhere.
template <typename Scalar>
Grid<Scalar> make_mp_image(const Grid<Scalar>& field,
                           const SensorLayout& layout) {
  Grid<Scalar> img = Grid<Scalar>::Zero(field.rows(), field.cols());
  for (const auto& [r, c] : layout.points) img(r, c) = field(r, c);
  return img;
}

// Channel 1: the quantile level at each monitoring point, zero elsewhere.
// Because tau is strictly inside (0, 1), nonzero cells of this channel
// identify the sensor positions.
template <typename Scalar>
Grid<Scalar> make_quantile_image(int h, int w, const SensorLayout& layout,
                                 double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw DomainError("make_quantile_image: tau must be in (0, 1)");
  Grid<Scalar> img = Grid<Scalar>::Zero(h, w);
  for (const auto& [r, c] : layout.points) img(r, c) = static_cast<Scalar>(tau);
  return img;
}

// --- measurement noise ---------------------------------------------------

struct NoiseSpec {
  enum class Kind { gaussian, uniform };
  Kind kind = Kind::gaussian;
  double sigma = 0.0;  // gaussian
  double lo = 0.0;     // uniform
  double hi = 0.0;
  std::string group;

  void validate() const {
    if (kind == Kind::gaussian && !(sigma >= 0.0))
      throw ConfigError("noise.sigma: must be >= 0");
    if (kind == Kind::uniform && !(lo <= hi))
      throw ConfigError("noise.lo/hi: lo must be <= hi");
    if (group.empty()) throw ConfigError("noise.group: must be non-empty");
  }
};

// Adds one independent draw to every sensor named by each spec, specs in
// declaration order, sensors in the group's declared order. A sensor listed
// in two applied groups receives both draws.
inline Grid64 inject_noise(const Grid64& img, const SensorLayout& layout,
                           const std::vector<NoiseSpec>& specs,
                           std::uint64_t seed) {
  Grid64 out = img;
  Rng rng(seed);
  for (const auto& spec : specs) {
    spec.validate();
    for (const int idx : layout.group(spec.group)) {
      const auto& [r, c] = layout.points[static_cast<std::size_t>(idx)];
      out(r, c) += (spec.kind == NoiseSpec::Kind::gaussian)
                       ? rng.normal(0.0, spec.sigma)
                       : rng.uniform(spec.lo, spec.hi);
    }
  }
  return out;
}

// --- dataset generation --------------------------------------------------

struct DatasetCounts {
  int n_train = 0;
  int n_val = 0;
  int n_test = 0;

  int total() const { return n_train + n_val + n_test; }

  bool operator==(const DatasetCounts&) const = default;

  void validate() const {
    if (n_train < 0 || n_val < 0 || n_test < 0)
      throw ConfigError("dataset counts: must be >= 0");
    if (total() == 0) throw ConfigError("dataset counts: all splits empty");
  }
};

struct DatasetParams {
  DatasetCounts counts;
  double power_mean_W = 20000.0;
  double power_std_W = 1000.0;
  double conductivity_W_mK = 150.0;
  std::vector<NoiseSpec> noise;
  std::uint64_t seed = 0;
};

// What generate writes next to the sample files. Deliberately free of
// timestamps and environment details so regeneration is byte-stable.
struct DatasetManifest {
  int format_version = kManifestFormatVersion;
  int grid_h = 0;
  int grid_w = 0;
  DatasetCounts counts;
  std::uint64_t seed = 0;
  std::string config_hash;  // fingerprint of geometry + dataset settings

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"format_version", format_version},
        {"grid", {{"h", grid_h}, {"w", grid_w}}},
        {"counts",
         {{"train", counts.n_train},
          {"val", counts.n_val},
          {"test", counts.n_test}}},
        {"seed", seed},
        {"config_hash", config_hash}};
  }

  static DatasetManifest from_json(const nlohmann::json& j) {
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    m.grid_h = j.at("grid").at("h").get<int>();
    m.grid_w = j.at("grid").at("w").get<int>();
    m.counts.n_train = j.at("counts").at("train").get<int>();
    m.counts.n_val = j.at("counts").at("val").get<int>();
    m.counts.n_test = j.at("counts").at("test").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    return m;
  }

  bool operator==(const DatasetManifest&) const = default;
};

inline DatasetManifest load_manifest(const std::filesystem::path& data_dir) {
  const auto path = data_dir / "manifest.json";
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path.string());
  nlohmann::json j;
  try {
    f >> j;
    return DatasetManifest::from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

// Simulates counts.total() plate configurations and writes, per sample, the
// noisy sensor readings (all splits) and the clean solved field (test split
// only: those are evaluation labels, never training input). Per-sample noise
// and power draws are derived from (seed, global index), so any sample can be
// re-derived in isolation. Writing an already-generated dataset is a no-op;
// a manifest from different settings is an error, never silently replaced.
inline DatasetManifest generate_dataset(const DomainSpec& spec,
                                        const std::vector<HeatSourceShape>& sources,
                                        const SensorLayout& layout,
                                        const DatasetParams& params,
                                        const std::filesystem::path& data_dir,
                                        const std::string& config_hash) {
  namespace fs = std::filesystem;
  spec.validate();
  layout.validate(spec);
  params.counts.validate();
  if (sources.empty()) throw ConfigError("sources: must be non-empty");

  DatasetManifest manifest;
  manifest.grid_h = spec.grid_h;
  manifest.grid_w = spec.grid_w;
  manifest.counts = params.counts;
  manifest.seed = params.seed;
  manifest.config_hash = config_hash;

  if (fs::exists(data_dir / "manifest.json")) {
    const DatasetManifest existing = load_manifest(data_dir);
    if (existing == manifest) return existing;  // already generated
    throw IoError(data_dir.string() +
                  ": holds a dataset generated from different settings; "
                  "refusing to overwrite");
  }

  for (const char* split : {"train", "val", "test"})
    fs::create_directories(data_dir / split);

  SteadyStateSolver solver(spec, params.conductivity_W_mK);
  const int n_total = params.counts.total();
  for (int g = 0; g < n_total; ++g) {
    const char* split;
    int local;
    if (g < params.counts.n_train) {
      split = "train";
      local = g;
    } else if (g < params.counts.n_train + params.counts.n_val) {
      split = "val";
      local = g - params.counts.n_train;
    } else {
      split = "test";
      local = g - params.counts.n_train - params.counts.n_val;
    }

    const auto powers = sample_source_powers(
        sources, params.power_mean_W, params.power_std_W,
        derive_seed(params.seed, "powers", static_cast<std::uint64_t>(g)));
    const Grid64 field = solver.solve(assemble_intensity(spec, sources, powers));
    Grid64 mp = make_mp_image(field, layout);
    mp = inject_noise(mp, layout, params.noise,
                      derive_seed(params.seed, "noise",
                                  static_cast<std::uint64_t>(g)));

    write_f32(data_dir / split / sample_filename(local, "mp"), mp);
    if (std::string(split) == "test")
      write_f32(data_dir / split / sample_filename(local, "label"), field);
  }

  // Manifest last: its presence marks a complete dataset.
  std::ofstream mf(data_dir / "manifest.json", std::ios::trunc);
  if (!mf) throw IoError("cannot write manifest in " + data_dir.string());
  mf << manifest.to_json().dump(2) << "\n";
  return manifest;
}

template <typename Scalar>
std::vector<Grid<Scalar>> load_split(const std::filesystem::path& data_dir,
                                     const std::string& split, int count,
                                     int h, int w, const char* kind = "mp") {
  std::vector<Grid<Scalar>> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    out.push_back(read_f32<Scalar>(data_dir / split / sample_filename(i, kind),
                                   h, w));
  return out;
}

}  // namespace heatrec
