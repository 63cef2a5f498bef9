#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "heatrec/model.hpp"
#include "heatrec/types.hpp"
#include "heatrec/version.hpp"

namespace heatrec {

// Checkpoint container: 8-byte magic, u64 header length, JSON header with a
// named-tensor index, then the raw little-endian payload. The header carries
// arbitrary metadata (model settings, optimizer position) so a file is
// self-describing; loading into the same scalar type is bit-exact.

inline constexpr char kCheckpointMagic[8] = {'H', 'R', 'C', 'K',
                                             'P', 'T', '0', '1'};

template <typename Scalar>
const char* dtype_name() {
  if constexpr (std::is_same_v<Scalar, float>) return "f32";
  else return "f64";
}

template <typename Scalar>
struct CheckpointTensorRef {
  std::string name;
  Eigen::Index rows;
  Eigen::Index cols;
  const Scalar* data;
};

template <typename Scalar>
void write_checkpoint(const std::filesystem::path& path,
                      const nlohmann::json& meta,
                      const std::vector<CheckpointTensorRef<Scalar>>& tensors) {
  nlohmann::json header;
  header["version"] = kCheckpointFormatVersion;
  header["dtype"] = dtype_name<Scalar>();
  header["meta"] = meta;
  std::uint64_t offset = 0;
  nlohmann::json index = nlohmann::json::array();
  for (const auto& t : tensors) {
    index.push_back({{"name", t.name},
                     {"rows", t.rows},
                     {"cols", t.cols},
                     {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.rows) * t.cols * sizeof(Scalar);
  }
  header["tensors"] = index;
  const std::string hs = header.dump();

  // Write to a sibling temp file first so readers never see a torn file.
  const auto tmp = path.parent_path() /
                   (path.filename().string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + tmp.string());
    f.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const std::uint64_t hlen = hs.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& t : tensors)
      f.write(reinterpret_cast<const char*>(t.data),
              static_cast<std::streamsize>(static_cast<std::size_t>(t.rows) *
                                           t.cols * sizeof(Scalar)));
    if (!f) throw IoError("short write: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

template <typename Scalar>
struct LoadedCheckpoint {
  nlohmann::json meta;
  std::string dtype;
  std::map<std::string, Grid<Scalar>> tensors;
};

template <typename Scalar>
LoadedCheckpoint<Scalar> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw IoError(path.string() + ": not a checkpoint file");
  std::uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!f || hlen > (1u << 30))
    throw IoError(path.string() + ": corrupt header length");
  std::string hs(hlen, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!f) throw IoError(path.string() + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": bad header: " + e.what());
  }
  if (header.at("version").get<int>() != kCheckpointFormatVersion)
    throw IoError(path.string() + ": unsupported checkpoint version");

  LoadedCheckpoint<Scalar> out;
  out.meta = header.at("meta");
  out.dtype = header.at("dtype").get<std::string>();
  const std::size_t elem = out.dtype == "f32" ? 4 : 8;
  if (out.dtype != "f32" && out.dtype != "f64")
    throw IoError(path.string() + ": unknown dtype " + out.dtype);

  const std::streampos payload_start = f.tellg();
  for (const auto& t : header.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    const auto offset = t.at("offset").get<std::uint64_t>();
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    f.seekg(payload_start + static_cast<std::streamoff>(offset));
    Grid<Scalar> g(rows, cols);
    if (out.dtype == dtype_name<Scalar>()) {
      f.read(reinterpret_cast<char*>(g.data()),
             static_cast<std::streamsize>(n * elem));
    } else {
      std::vector<char> buf(n * elem);
      f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      if (out.dtype == "f32") {
        const float* p = reinterpret_cast<const float*>(buf.data());
        for (std::size_t i = 0; i < n; ++i)
          g.data()[i] = static_cast<Scalar>(p[i]);
      } else {
        const double* p = reinterpret_cast<const double*>(buf.data());
        for (std::size_t i = 0; i < n; ++i)
          g.data()[i] = static_cast<Scalar>(p[i]);
      }
    }
    if (!f) throw IoError(path.string() + ": truncated tensor " + name);
    out.tensors.emplace(name, std::move(g));
  }
  return out;
}

// --- model-level helpers --------------------------------------------------

template <typename Scalar>
void save_model(const std::filesystem::path& path, ReconNet<Scalar>& model,
                nlohmann::json extra_meta = nlohmann::json::object()) {
  nlohmann::json meta = std::move(extra_meta);
  meta["kind"] = meta.contains("kind") ? meta["kind"] : "model";
  meta["model"] = model.config().to_json();
  meta["ref_temp_K"] = model.ref_temp();
  std::vector<CheckpointTensorRef<Scalar>> tensors;
  for (const auto& p : model.params())
    tensors.push_back({p.name, p.rows, p.cols, p.value});
  write_checkpoint(path, meta, tensors);
}

// Copies named tensors into the model's parameters; every parameter must be
// present with its exact shape.
template <typename Scalar>
void load_params_into(ReconNet<Scalar>& model,
                      const LoadedCheckpoint<Scalar>& ckpt) {
  for (const auto& p : model.params()) {
    const auto it = ckpt.tensors.find(p.name);
    if (it == ckpt.tensors.end())
      throw IoError("checkpoint is missing tensor " + p.name);
    const Grid<Scalar>& g = it->second;
    if (g.rows() != p.rows || g.cols() != p.cols)
      throw IoError("checkpoint tensor " + p.name + " has shape " +
                    std::to_string(g.rows()) + "x" + std::to_string(g.cols()) +
                    ", expected " + std::to_string(p.rows) + "x" +
                    std::to_string(p.cols));
    std::copy(g.data(), g.data() + g.size(), p.value);
  }
}

template <typename Scalar>
ReconNet<Scalar> load_model(const std::filesystem::path& path,
                            nlohmann::json* meta_out = nullptr) {
  const auto ckpt = read_checkpoint<Scalar>(path);
  const ModelConfig cfg = ModelConfig::from_json(ckpt.meta.at("model"));
  ReconNet<Scalar> model(cfg, ckpt.meta.at("ref_temp_K").template get<double>());
  load_params_into(model, ckpt);
  if (meta_out != nullptr) *meta_out = ckpt.meta;
  return model;
}

}  // namespace heatrec
