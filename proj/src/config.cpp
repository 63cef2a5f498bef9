#include "heatrec/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "heatrec/hashing.hpp"

namespace heatrec {

namespace {

using nlohmann::json;

// Unknown keys are rejected so a typo never silently falls back to a
// default.
void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw ConfigError(where + "." + key + ": unknown key");
}

template <typename T>
void read_field(const json& j, const char* key, const std::string& where,
                T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

json domain_to_json(const DomainSpec& d) {
  return json{{"width_m", d.width_m},       {"height_m", d.height_m},
              {"grid_w", d.grid_w},         {"grid_h", d.grid_h},
              {"sink_center", d.sink_center}, {"sink_width_m", d.sink_width_m},
              {"ref_temp_K", d.ref_temp_K}};
}

DomainSpec domain_from_json(const json& j) {
  check_keys(j,
             {"width_m", "height_m", "grid_w", "grid_h", "sink_center",
              "sink_width_m", "ref_temp_K"},
             "geometry.domain");
  DomainSpec d;
  read_field(j, "width_m", "geometry.domain", d.width_m);
  read_field(j, "height_m", "geometry.domain", d.height_m);
  read_field(j, "grid_w", "geometry.domain", d.grid_w);
  read_field(j, "grid_h", "geometry.domain", d.grid_h);
  read_field(j, "sink_center", "geometry.domain", d.sink_center);
  read_field(j, "sink_width_m", "geometry.domain", d.sink_width_m);
  read_field(j, "ref_temp_K", "geometry.domain", d.ref_temp_K);
  return d;
}

json source_to_json(const HeatSourceShape& s) {
  json j{{"center_u", s.center_u},
         {"center_v", s.center_v},
         {"power_W", s.nominal_power_W}};
  switch (s.kind) {
    case ShapeKind::rectangle:
      j["kind"] = "rectangle";
      j["extent_u"] = s.extent_u;
      j["extent_v"] = s.extent_v;
      break;
    case ShapeKind::circle:
      j["kind"] = "circle";
      j["radius"] = s.radius;
      break;
    case ShapeKind::capsule:
      j["kind"] = "capsule";
      j["radius"] = s.radius;
      j["length"] = s.length;
      j["axis"] = (s.axis == CapsuleAxis::horizontal) ? "horizontal"
                                                      : "vertical";
      break;
  }
  return j;
}

HeatSourceShape source_from_json(const json& j, std::size_t index) {
  const std::string where = "geometry.sources[" + std::to_string(index) + "]";
  if (!j.is_object() || !j.contains("kind"))
    throw ConfigError(where + ".kind: required");
  const std::string kind = j.at("kind").get<std::string>();
  HeatSourceShape s;
  if (kind == "rectangle") {
    check_keys(j,
               {"kind", "center_u", "center_v", "extent_u", "extent_v",
                "power_W"},
               where);
    s.kind = ShapeKind::rectangle;
    read_field(j, "extent_u", where, s.extent_u);
    read_field(j, "extent_v", where, s.extent_v);
  } else if (kind == "circle") {
    check_keys(j, {"kind", "center_u", "center_v", "radius", "power_W"},
               where);
    s.kind = ShapeKind::circle;
    read_field(j, "radius", where, s.radius);
  } else if (kind == "capsule") {
    check_keys(j,
               {"kind", "center_u", "center_v", "radius", "length", "axis",
                "power_W"},
               where);
    s.kind = ShapeKind::capsule;
    read_field(j, "radius", where, s.radius);
    read_field(j, "length", where, s.length);
    std::string axis = "horizontal";
    read_field(j, "axis", where, axis);
    if (axis == "horizontal")
      s.axis = CapsuleAxis::horizontal;
    else if (axis == "vertical")
      s.axis = CapsuleAxis::vertical;
    else
      throw ConfigError(where + ".axis: must be horizontal or vertical");
  } else {
    throw ConfigError(where + ".kind: must be rectangle, circle, or capsule");
  }
  read_field(j, "center_u", where, s.center_u);
  read_field(j, "center_v", where, s.center_v);
  read_field(j, "power_W", where, s.nominal_power_W);
  return s;
}

json sensors_to_json(const SensorLayout& layout) {
  json pts = json::array();
  for (const auto& [r, c] : layout.points) pts.push_back(json::array({r, c}));
  json groups = json::object();
  for (const auto& [name, idx] : layout.groups) groups[name] = idx;
  return json{{"points", pts}, {"groups", groups}};
}

SensorLayout sensors_from_json(const json& j) {
  check_keys(j, {"points", "groups"}, "geometry.sensors");
  SensorLayout layout;
  if (!j.contains("points") || !j.at("points").is_array())
    throw ConfigError("geometry.sensors.points: required array");
  for (std::size_t i = 0; i < j.at("points").size(); ++i) {
    const auto& p = j.at("points")[i];
    if (!p.is_array() || p.size() != 2)
      throw ConfigError("geometry.sensors.points[" + std::to_string(i) +
                        "]: expected [row, col]");
    layout.points.emplace_back(p[0].get<int>(), p[1].get<int>());
  }
  if (j.contains("groups")) {
    if (!j.at("groups").is_object())
      throw ConfigError("geometry.sensors.groups: expected an object");
    for (const auto& [name, idx] : j.at("groups").items()) {
      try {
        layout.groups[name] = idx.get<std::vector<int>>();
      } catch (const json::exception&) {
        throw ConfigError("geometry.sensors.groups." + name +
                          ": expected an index array");
      }
    }
  }
  return layout;
}

json noise_to_json(const NoiseSpec& n) {
  if (n.kind == NoiseSpec::Kind::gaussian)
    return json{{"kind", "gaussian"}, {"sigma", n.sigma}, {"group", n.group}};
  return json{{"kind", "uniform"}, {"lo", n.lo}, {"hi", n.hi},
              {"group", n.group}};
}

NoiseSpec noise_from_json(const json& j, std::size_t index) {
  const std::string where = "dataset.noise[" + std::to_string(index) + "]";
  if (!j.is_object() || !j.contains("kind"))
    throw ConfigError(where + ".kind: required");
  const std::string kind = j.at("kind").get<std::string>();
  NoiseSpec n;
  if (kind == "gaussian") {
    check_keys(j, {"kind", "sigma", "group"}, where);
    n.kind = NoiseSpec::Kind::gaussian;
    read_field(j, "sigma", where, n.sigma);
  } else if (kind == "uniform") {
    check_keys(j, {"kind", "lo", "hi", "group"}, where);
    n.kind = NoiseSpec::Kind::uniform;
    read_field(j, "lo", where, n.lo);
    read_field(j, "hi", where, n.hi);
  } else {
    throw ConfigError(where + ".kind: must be gaussian or uniform");
  }
  read_field(j, "group", where, n.group);
  return n;
}

json train_to_json(const TrainConfig& t) {
  return json{{"epochs", t.epochs},
              {"batch_size", t.batch_size},
              {"lr", t.lr},
              {"beta1", t.beta1},
              {"beta2", t.beta2},
              {"eps", t.eps},
              {"grad_clip", t.grad_clip},
              {"lr_schedule", t.lr_schedule},
              {"checkpoint_every", t.checkpoint_every},
              {"select_on", t.select_on},
              {"seed", t.seed},
              {"weights",
               {{"pinball", t.weights.pinball},
                {"laplace", t.weights.laplace},
                {"boundary", t.weights.boundary},
                {"tv", t.weights.tv}}},
              {"laplace_units",
               t.laplace_units == LaplaceUnits::physical ? "physical"
                                                         : "pixel"}};
}

TrainConfig train_from_json(const json& j) {
  check_keys(j,
             {"epochs", "batch_size", "lr", "beta1", "beta2", "eps",
              "grad_clip", "lr_schedule", "checkpoint_every", "select_on",
              "seed", "weights", "laplace_units"},
             "train");
  TrainConfig t;
  read_field(j, "epochs", "train", t.epochs);
  read_field(j, "batch_size", "train", t.batch_size);
  read_field(j, "lr", "train", t.lr);
  read_field(j, "beta1", "train", t.beta1);
  read_field(j, "beta2", "train", t.beta2);
  read_field(j, "eps", "train", t.eps);
  read_field(j, "grad_clip", "train", t.grad_clip);
  read_field(j, "lr_schedule", "train", t.lr_schedule);
  read_field(j, "checkpoint_every", "train", t.checkpoint_every);
  read_field(j, "select_on", "train", t.select_on);
  read_field(j, "seed", "train", t.seed);
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    check_keys(w, {"pinball", "laplace", "boundary", "tv"}, "train.weights");
    read_field(w, "pinball", "train.weights", t.weights.pinball);
    read_field(w, "laplace", "train.weights", t.weights.laplace);
    read_field(w, "boundary", "train.weights", t.weights.boundary);
    read_field(w, "tv", "train.weights", t.weights.tv);
  }
  if (j.contains("laplace_units")) {
    const std::string u = j.at("laplace_units").get<std::string>();
    if (u == "physical")
      t.laplace_units = LaplaceUnits::physical;
    else if (u == "pixel")
      t.laplace_units = LaplaceUnits::pixel;
    else
      throw ConfigError("train.laplace_units: must be physical or pixel");
  }
  return t;
}

std::string canonical(const json& j) { return j.dump(); }

}  // namespace

void PredictConfig::validate() const {
  if (n_pre < 2) throw ConfigError("predict.n_pre: must be >= 2");
  if (split != "train" && split != "val" && split != "test")
    throw ConfigError("predict.split: must be train, val, or test");
  for (const int i : indices)
    if (i < 0) throw ConfigError("predict.indices: must be >= 0");
}

void RunConfig::validate() const {
  geometry.domain.validate();
  if (!(geometry.conductivity_W_mK > 0.0))
    throw ConfigError("geometry.conductivity_W_mK: must be > 0");
  if (geometry.sources.empty())
    throw ConfigError("geometry.sources: must be non-empty");
  for (std::size_t i = 0; i < geometry.sources.size(); ++i)
    geometry.sources[i].validate(geometry.domain, i);
  geometry.sensors.validate(geometry.domain);
  dataset.counts.validate();
  if (!(dataset.power_std_W >= 0.0))
    throw ConfigError("dataset.power.std_W: must be >= 0");
  for (std::size_t i = 0; i < dataset.noise.size(); ++i) {
    dataset.noise[i].validate();
    if (!geometry.sensors.groups.count(dataset.noise[i].group))
      throw ConfigError("dataset.noise[" + std::to_string(i) +
                        "].group: no such sensor group \"" +
                        dataset.noise[i].group + "\"");
  }
  model.validate();
  if (geometry.domain.grid_h != geometry.domain.grid_w)
    throw ConfigError(
        "geometry.domain: the diagonal feature-map flip requires a square "
        "grid");
  const int div = 1 << model.depth;
  if (geometry.domain.grid_h % div != 0)
    throw ConfigError("geometry.domain.grid_h: must be divisible by 2^depth (" +
                      std::to_string(div) + ")");
  train.validate();
  if (train.select_on == "val_loss" && dataset.counts.n_val == 0)
    throw ConfigError(
        "train.select_on: \"val_loss\" requires dataset.counts.val > 0");
  predict.validate();
}

nlohmann::json RunConfig::to_json() const {
  json sources = json::array();
  for (const auto& s : geometry.sources) sources.push_back(source_to_json(s));
  json noise = json::array();
  for (const auto& n : dataset.noise) noise.push_back(noise_to_json(n));
  return json{
      {"version", version},
      {"geometry",
       {{"domain", domain_to_json(geometry.domain)},
        {"conductivity_W_mK", geometry.conductivity_W_mK},
        {"sources", sources},
        {"sensors", sensors_to_json(geometry.sensors)}}},
      {"dataset",
       {{"counts",
         {{"train", dataset.counts.n_train},
          {"val", dataset.counts.n_val},
          {"test", dataset.counts.n_test}}},
        {"power", {{"mean_W", dataset.power_mean_W}, {"std_W", dataset.power_std_W}}},
        {"noise", noise},
        {"seed", dataset.seed}}},
      {"model", model.to_json()},
      {"train", train_to_json(train)},
      {"predict",
       {{"n_pre", predict.n_pre},
        {"seed", predict.seed},
        {"split", predict.split},
        {"indices", predict.indices}}},
      {"paths",
       {{"data_dir", paths.data_dir.string()},
        {"run_dir", paths.run_dir.string()}}}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  check_keys(j,
             {"version", "geometry", "dataset", "model", "train", "predict",
              "paths"},
             "config");
  RunConfig cfg;
  read_field(j, "version", "config", cfg.version);
  if (cfg.version != 1)
    throw ConfigError("config.version: unsupported version " +
                      std::to_string(cfg.version));

  if (j.contains("geometry")) {
    const auto& g = j.at("geometry");
    check_keys(g, {"domain", "conductivity_W_mK", "sources", "sensors"},
               "geometry");
    if (g.contains("domain"))
      cfg.geometry.domain = domain_from_json(g.at("domain"));
    read_field(g, "conductivity_W_mK", "geometry",
               cfg.geometry.conductivity_W_mK);
    if (g.contains("sources")) {
      if (!g.at("sources").is_array())
        throw ConfigError("geometry.sources: expected an array");
      for (std::size_t i = 0; i < g.at("sources").size(); ++i)
        cfg.geometry.sources.push_back(source_from_json(g.at("sources")[i], i));
    }
    if (g.contains("sensors"))
      cfg.geometry.sensors = sensors_from_json(g.at("sensors"));
  }

  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    check_keys(d, {"counts", "power", "noise", "seed"}, "dataset");
    if (d.contains("counts")) {
      const auto& c = d.at("counts");
      check_keys(c, {"train", "val", "test"}, "dataset.counts");
      read_field(c, "train", "dataset.counts", cfg.dataset.counts.n_train);
      read_field(c, "val", "dataset.counts", cfg.dataset.counts.n_val);
      read_field(c, "test", "dataset.counts", cfg.dataset.counts.n_test);
    }
    if (d.contains("power")) {
      const auto& p = d.at("power");
      check_keys(p, {"mean_W", "std_W"}, "dataset.power");
      read_field(p, "mean_W", "dataset.power", cfg.dataset.power_mean_W);
      read_field(p, "std_W", "dataset.power", cfg.dataset.power_std_W);
    }
    if (d.contains("noise")) {
      if (!d.at("noise").is_array())
        throw ConfigError("dataset.noise: expected an array");
      for (std::size_t i = 0; i < d.at("noise").size(); ++i)
        cfg.dataset.noise.push_back(noise_from_json(d.at("noise")[i], i));
    }
    read_field(d, "seed", "dataset", cfg.dataset.seed);
  }

  if (j.contains("model")) {
    check_keys(j.at("model"),
               {"base_width", "depth", "mid_channels", "flip_axis",
                "normalize", "temp_scale", "precision"},
               "model");
    try {
      cfg.model = ModelConfig::from_json(j.at("model"));
    } catch (const json::exception& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
  }

  if (j.contains("train")) cfg.train = train_from_json(j.at("train"));

  if (j.contains("predict")) {
    const auto& p = j.at("predict");
    check_keys(p, {"n_pre", "seed", "split", "indices"}, "predict");
    read_field(p, "n_pre", "predict", cfg.predict.n_pre);
    read_field(p, "seed", "predict", cfg.predict.seed);
    read_field(p, "split", "predict", cfg.predict.split);
    read_field(p, "indices", "predict", cfg.predict.indices);
  }

  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    check_keys(p, {"data_dir", "run_dir"}, "paths");
    std::string data_dir = cfg.paths.data_dir.string();
    std::string run_dir = cfg.paths.run_dir.string();
    read_field(p, "data_dir", "paths", data_dir);
    read_field(p, "run_dir", "paths", run_dir);
    cfg.paths.data_dir = data_dir;
    cfg.paths.run_dir = run_dir;
  }
  return cfg;
}

std::string RunConfig::data_hash() const {
  const json full = to_json();
  const json j{{"geometry", full.at("geometry")},
               {"dataset", full.at("dataset")}};
  return hex64(fnv1a64(canonical(j)));
}

std::string RunConfig::run_hash() const {
  const json full = to_json();
  const json j{{"geometry", full.at("geometry")},
               {"dataset", full.at("dataset")},
               {"model", full.at("model")},
               {"train", full.at("train")}};
  return hex64(fnv1a64(canonical(j)));
}

void apply_env_overrides(PathsConfig& paths) {
  if (const char* v = std::getenv("HEATREC_DATA_DIR"); v && *v)
    paths.data_dir = v;
  if (const char* v = std::getenv("HEATREC_RUN_DIR"); v && *v)
    paths.run_dir = v;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  RunConfig cfg = RunConfig::from_json(j);
  cfg.validate();
  return cfg;
}

}  // namespace heatrec
