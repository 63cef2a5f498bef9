#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "heatrec/dataset.hpp"
#include "heatrec/geometry.hpp"
#include "heatrec/types.hpp"

namespace heatrec {

struct ImageRGB {
  int w = 0;
  int h = 0;
  std::vector<unsigned char> px;  // 3 bytes per pixel, row-major

  void resize(int w_, int h_) {
    w = w_;
    h = h_;
    px.assign(static_cast<std::size_t>(w_) * h_ * 3, 0);
  }
  unsigned char* at(int x, int y) {
    return px.data() + (static_cast<std::size_t>(y) * w + x) * 3;
  }
  const unsigned char* at(int x, int y) const {
    return px.data() + (static_cast<std::size_t>(y) * w + x) * 3;
  }
};

enum class Colormap { sequential, diverging };

// Maps values linearly onto the colormap over [vmin, vmax]; vmin == vmax
// renders the low end everywhere. The sequential map never produces the
// pure-red marker colour used by fusion overlays.
ImageRGB colorize(const Grid64& values, double vmin, double vmax,
                  Colormap map);

ImageRGB upscale(const ImageRGB& img, int factor);

// Paints sensor cells as scale x scale pure-red blocks on an image rendered
// at the given integer upscale factor.
void draw_sensor_markers(ImageRGB& img, const SensorLayout& layout, int scale);

// Sigma heatmap with sensor markers: the "where are the sensors and how
// noisy does the model think they are" overlay.
ImageRGB make_fusion_image(const Grid64& sigma, const SensorLayout& layout,
                           int scale);

void write_png_rgb(const std::filesystem::path& path, const ImageRGB& img);

// One evaluated (or predicted) sample ready for rendering.
struct SampleRender {
  int index = 0;
  std::string split = "test";
  Grid64 mean;
  Grid64 sigma;
  std::optional<Grid64> label;
};

// Renders each sample's mean/sigma/fusion maps (plus a signed error map when
// a label is present), a delimiter-separated summary table, and a JSON
// report. Returns every path written. No samples -> table and report only.
std::vector<std::filesystem::path> render_reports(
    const std::vector<SampleRender>& samples, const SensorLayout& layout,
    const std::vector<NoiseSpec>& noise_specs,
    const std::filesystem::path& out_dir, int scale = 4);

}  // namespace heatrec
