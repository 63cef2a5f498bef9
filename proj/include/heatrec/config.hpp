#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "heatrec/dataset.hpp"
#include "heatrec/geometry.hpp"
#include "heatrec/losses.hpp"
#include "heatrec/model.hpp"
#include "heatrec/trainer.hpp"
#include "heatrec/types.hpp"

namespace heatrec {

// Plate geometry plus the physical constant of the conduction equation.
struct GeometryConfig {
  DomainSpec domain;
  double conductivity_W_mK = 150.0;
  std::vector<HeatSourceShape> sources;
  SensorLayout sensors;
};

// Dataset section of the config document. Conductivity lives under geometry;
// dataset_params() below merges it in for the generator.
struct DatasetSection {
  DatasetCounts counts;
  double power_mean_W = 20000.0;
  double power_std_W = 1000.0;
  std::vector<NoiseSpec> noise;
  std::uint64_t seed = 0;
};

struct PredictConfig {
  int n_pre = 100;
  std::uint64_t seed = 0;
  std::string split = "test";
  std::vector<int> indices;  // empty: the whole split

  void validate() const;
};

struct PathsConfig {
  std::filesystem::path data_dir = "data";
  std::filesystem::path run_dir = "run";
};

// One document drives every subcommand, so a run is reproducible from the
// config and the code version alone. Flags never override anything except
// the output locations.
struct RunConfig {
  int version = 1;
  GeometryConfig geometry;
  DatasetSection dataset;
  ModelConfig model;
  TrainConfig train;
  PredictConfig predict;
  PathsConfig paths;

  DatasetParams dataset_params() const {
    DatasetParams p;
    p.counts = dataset.counts;
    p.power_mean_W = dataset.power_mean_W;
    p.power_std_W = dataset.power_std_W;
    p.conductivity_W_mK = geometry.conductivity_W_mK;
    p.noise = dataset.noise;
    p.seed = dataset.seed;
    return p;
  }

  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  // Fingerprint of everything that shapes the dataset files.
  std::string data_hash() const;
  // Fingerprint of everything that shapes training artifacts (dataset
  // settings included; predict and paths excluded).
  std::string run_hash() const;
};

// HEATREC_DATA_DIR / HEATREC_RUN_DIR replace the corresponding paths when
// set. Environment overrides are restricted to paths by design.
void apply_env_overrides(PathsConfig& paths);

// Reads, parses, and validates a config document. Any problem with the file
// or its contents is a ConfigError carrying the offending field path.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace heatrec
