#include "heatrec/render.hpp"

#include <zlib.h>

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace heatrec {

namespace {

struct Rgb {
  double r, g, b;
};

// Compact anchor tables, linearly interpolated. The sequential ramp is a
// perceptually ordered dark-violet-to-yellow map whose range stays far from
// pure red; the diverging one runs blue-white-red for signed errors.
constexpr std::array<Rgb, 9> kSequential{{{68, 1, 84},
                                          {71, 44, 122},
                                          {59, 81, 139},
                                          {44, 113, 142},
                                          {33, 144, 141},
                                          {39, 173, 129},
                                          {92, 200, 99},
                                          {170, 220, 50},
                                          {253, 231, 37}}};

constexpr std::array<Rgb, 3> kDiverging{{{59, 76, 192},
                                         {221, 221, 221},
                                         {180, 4, 38}}};

template <std::size_t N>
Rgb sample_map(const std::array<Rgb, N>& anchors, double t) {
  t = std::min(1.0, std::max(0.0, t));
  const double x = t * static_cast<double>(N - 1);
  const auto i = static_cast<std::size_t>(std::min(
      static_cast<double>(N - 2), std::floor(x)));
  const double f = x - static_cast<double>(i);
  const Rgb& a = anchors[i];
  const Rgb& b = anchors[i + 1];
  return {a.r + f * (b.r - a.r), a.g + f * (b.g - a.g),
          a.b + f * (b.b - a.b)};
}

void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
  out.push_back(static_cast<unsigned char>(v & 0xff));
}

void append_chunk(std::vector<unsigned char>& out, const char type[4],
                  const std::vector<unsigned char>& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const auto crc = crc32(0L, out.data() + crc_start,
                         static_cast<uInt>(out.size() - crc_start));
  put_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

ImageRGB colorize(const Grid64& values, double vmin, double vmax,
                  Colormap map) {
  ImageRGB img;
  img.resize(static_cast<int>(values.cols()), static_cast<int>(values.rows()));
  const double span = vmax - vmin;
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      const double v = values(y, x);
      const double t = span > 0 ? (v - vmin) / span : 0.0;
      const Rgb c = map == Colormap::sequential ? sample_map(kSequential, t)
                                                : sample_map(kDiverging, t);
      unsigned char* p = img.at(x, y);
      p[0] = static_cast<unsigned char>(std::lround(c.r));
      p[1] = static_cast<unsigned char>(std::lround(c.g));
      p[2] = static_cast<unsigned char>(std::lround(c.b));
    }
  }
  return img;
}

ImageRGB upscale(const ImageRGB& img, int factor) {
  if (factor < 1) throw DomainError("upscale: factor must be >= 1");
  if (factor == 1) return img;
  ImageRGB out;
  out.resize(img.w * factor, img.h * factor);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x)
      std::memcpy(out.at(x, y), img.at(x / factor, y / factor), 3);
  return out;
}

void draw_sensor_markers(ImageRGB& img, const SensorLayout& layout,
                         int scale) {
  for (const auto& [r, c] : layout.points) {
    for (int dy = 0; dy < scale; ++dy) {
      for (int dx = 0; dx < scale; ++dx) {
        const int x = c * scale + dx, y = r * scale + dy;
        if (x < 0 || x >= img.w || y < 0 || y >= img.h) continue;
        unsigned char* p = img.at(x, y);
        p[0] = 255;
        p[1] = 0;
        p[2] = 0;
      }
    }
  }
}

ImageRGB make_fusion_image(const Grid64& sigma, const SensorLayout& layout,
                           int scale) {
  ImageRGB img = upscale(
      colorize(sigma, 0.0, std::max(sigma.maxCoeff(), 1e-12),
               Colormap::sequential),
      scale);
  draw_sensor_markers(img, layout, scale);
  return img;
}

void write_png_rgb(const std::filesystem::path& path, const ImageRGB& img) {
  if (img.w <= 0 || img.h <= 0) throw DomainError("write_png_rgb: empty image");

  // one filter byte (0 = none) per scanline
  std::vector<unsigned char> raw;
  raw.reserve(static_cast<std::size_t>(img.h) * (1 + 3 * img.w));
  for (int y = 0; y < img.h; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), img.at(0, y), img.at(0, y) + 3 * img.w);
  }
  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(),
                static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw IoError("write_png_rgb: deflate failed");
  comp.resize(comp_len);

  std::vector<unsigned char> out;
  const unsigned char sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  out.insert(out.end(), sig, sig + 8);

  std::vector<unsigned char> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(img.w));
  put_be32(ihdr, static_cast<std::uint32_t>(img.h));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", comp);
  append_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write: " + path.string());
}

std::vector<std::filesystem::path> render_reports(
    const std::vector<SampleRender>& samples, const SensorLayout& layout,
    const std::vector<NoiseSpec>& noise_specs,
    const std::filesystem::path& out_dir, int scale) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<fs::path> written;

  nlohmann::json report = nlohmann::json::array();
  std::string csv = "split,index,mae,rmse,sigma_max\n";

  for (const auto& s : samples) {
    char tag[64];
    std::snprintf(tag, sizeof(tag), "%s_%06d", s.split.c_str(), s.index);

    const auto save = [&](const std::string& kind, const ImageRGB& img) {
      const fs::path p = out_dir / (std::string(tag) + "_" + kind + ".png");
      write_png_rgb(p, img);
      written.push_back(p);
    };

    save("pred", upscale(colorize(s.mean, s.mean.minCoeff(),
                                  s.mean.maxCoeff(), Colormap::sequential),
                         scale));
    save("sigma", upscale(colorize(s.sigma, 0.0,
                                   std::max(s.sigma.maxCoeff(), 1e-12),
                                   Colormap::sequential),
                          scale));
    save("fusion", make_fusion_image(s.sigma, layout, scale));

    nlohmann::json entry{{"split", s.split},
                         {"index", s.index},
                         {"sigma_max", s.sigma.maxCoeff()}};
    double mae = -1.0, rmse = -1.0;
    if (s.label.has_value()) {
      const Grid64 err = s.mean - *s.label;
      const double amax = std::max(std::abs(err.minCoeff()),
                                   std::abs(err.maxCoeff()));
      save("error", upscale(colorize(err, -std::max(amax, 1e-12),
                                     std::max(amax, 1e-12),
                                     Colormap::diverging),
                            scale));
      mae = err.cwiseAbs().mean();
      rmse = std::sqrt(err.cwiseProduct(err).mean());
      entry["mae"] = mae;
      entry["rmse"] = rmse;
    }
    report.push_back(entry);

    char row[160];
    if (mae >= 0)
      std::snprintf(row, sizeof(row), "%s,%d,%.6g,%.6g,%.6g\n",
                    s.split.c_str(), s.index, mae, rmse, s.sigma.maxCoeff());
    else
      std::snprintf(row, sizeof(row), "%s,%d,,,%.6g\n", s.split.c_str(),
                    s.index, s.sigma.maxCoeff());
    csv += row;
  }

  {
    const fs::path p = out_dir / "summary.csv";
    std::ofstream f(p, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + p.string());
    f << csv;
    written.push_back(p);
  }
  {
    const fs::path p = out_dir / "report.json";
    std::ofstream f(p, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + p.string());
    nlohmann::json noise = nlohmann::json::array();
    for (const auto& n : noise_specs) {
      nlohmann::json e{{"group", n.group}};
      if (n.kind == NoiseSpec::Kind::gaussian) {
        e["kind"] = "gaussian";
        e["sigma"] = n.sigma;
      } else {
        e["kind"] = "uniform";
        e["lo"] = n.lo;
        e["hi"] = n.hi;
      }
      noise.push_back(e);
    }
    f << nlohmann::json{{"samples", report}, {"noise", noise}}.dump(2)
      << "\n";
    written.push_back(p);
  }
  return written;
}

}  // namespace heatrec
