#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "heatrec/rng.hpp"
#include "heatrec/types.hpp"

namespace heatrec {

// Feature map: channels x (h*w), each row one channel in row-major raster
// order. Convolutions become plain matrix products against an im2col patch
// matrix, which is where almost all of the compute lives.
template <typename Scalar>
struct Tensor {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic,
                            Eigen::RowMajor>;
  int c = 0, h = 0, w = 0;
  Mat m;

  void resize(int c_, int h_, int w_) {
    c = c_;
    h = h_;
    w = w_;
    m.resize(c_, static_cast<Eigen::Index>(h_) * w_);
  }

  Eigen::Map<Grid<Scalar>> channel(int ci) {
    return Eigen::Map<Grid<Scalar>>(m.row(ci).data(), h, w);
  }
  Eigen::Map<const Grid<Scalar>> channel(int ci) const {
    return Eigen::Map<const Grid<Scalar>>(m.row(ci).data(), h, w);
  }
};

// One trainable array, addressed by a stable name. Optimizer state and
// checkpoints key off these names, so they must not depend on run order.
template <typename Scalar>
struct ParamRef {
  std::string name;
  Scalar* value;
  Scalar* grad;
  Eigen::Index rows;
  Eigen::Index cols;
  Eigen::Index size() const { return rows * cols; }
};

namespace detail {

// 3x3, stride 1, zero padding 1. col(ci*9 + ky*3 + kx, r*w + c) holds the
// input value at (ci, r + ky - 1, c + kx - 1), zero outside the image.
template <typename Scalar>
void im2col3(const Tensor<Scalar>& x, typename Tensor<Scalar>::Mat& col) {
  const int h = x.h, w = x.w;
  col.resize(static_cast<Eigen::Index>(x.c) * 9,
             static_cast<Eigen::Index>(h) * w);
  for (int ci = 0; ci < x.c; ++ci) {
    const Scalar* src = x.m.row(ci).data();
    for (int ky = 0; ky < 3; ++ky) {
      const int dy = ky - 1;
      for (int kx = 0; kx < 3; ++kx) {
        const int dx = kx - 1;
        Scalar* dst = col.row(static_cast<Eigen::Index>(ci) * 9 + ky * 3 + kx)
                          .data();
        const int c0 = dx < 0 ? 1 : 0;      // first in-bounds output column
        const int c1 = dx > 0 ? w - 1 : w;  // one past the last
        for (int r = 0; r < h; ++r) {
          Scalar* row = dst + static_cast<std::ptrdiff_t>(r) * w;
          const int rs = r + dy;
          if (rs < 0 || rs >= h) {
            std::fill(row, row + w, Scalar(0));
            continue;
          }
          const Scalar* srow = src + static_cast<std::ptrdiff_t>(rs) * w;
          if (c0 > 0) row[0] = Scalar(0);
          std::copy(srow + c0 + dx, srow + c1 + dx, row + c0);
          if (c1 < w) row[w - 1] = Scalar(0);
        }
      }
    }
  }
}

// Transpose of im2col3: scatter-adds patch-space gradients back onto the
// input image. dx must be sized and zeroed by the caller.
template <typename Scalar>
void col2im3_add(const typename Tensor<Scalar>::Mat& dcol, Tensor<Scalar>& dx) {
  const int h = dx.h, w = dx.w;
  for (int ci = 0; ci < dx.c; ++ci) {
    Scalar* dst = dx.m.row(ci).data();
    for (int ky = 0; ky < 3; ++ky) {
      const int dy = ky - 1;
      for (int kx = 0; kx < 3; ++kx) {
        const int off = kx - 1;
        const Scalar* src =
            dcol.row(static_cast<Eigen::Index>(ci) * 9 + ky * 3 + kx).data();
        const int c0 = off < 0 ? 1 : 0;
        const int c1 = off > 0 ? w - 1 : w;
        for (int r = 0; r < h; ++r) {
          const int rs = r + dy;
          if (rs < 0 || rs >= h) continue;
          const Scalar* srow = src + static_cast<std::ptrdiff_t>(r) * w;
          Scalar* drow = dst + static_cast<std::ptrdiff_t>(rs) * w + off;
          for (int c = c0; c < c1; ++c) drow[c] += srow[c];
        }
      }
    }
  }
}

template <typename Scalar>
void leaky_relu(const Tensor<Scalar>& x, Tensor<Scalar>& y, Scalar slope) {
  y.resize(x.c, x.h, x.w);
  y.m = (x.m.array() > Scalar(0)).select(x.m, slope * x.m);
}

template <typename Scalar>
void leaky_relu_backward(const Tensor<Scalar>& x_pre, const Tensor<Scalar>& dy,
                         Tensor<Scalar>& dx, Scalar slope) {
  dx.resize(x_pre.c, x_pre.h, x_pre.w);
  dx.m = (x_pre.m.array() > Scalar(0)).select(dy.m, slope * dy.m);
}

template <typename Scalar>
void avgpool2(const Tensor<Scalar>& x, Tensor<Scalar>& y) {
  if (x.h % 2 != 0 || x.w % 2 != 0)
    throw DomainError("avgpool2: odd input size");
  const int oh = x.h / 2, ow = x.w / 2;
  y.resize(x.c, oh, ow);
  for (int ci = 0; ci < x.c; ++ci) {
    const Scalar* src = x.m.row(ci).data();
    Scalar* dst = y.m.row(ci).data();
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c) {
        const Scalar* p = src + (2 * r) * x.w + 2 * c;
        dst[r * ow + c] = Scalar(0.25) * (p[0] + p[1] + p[x.w] + p[x.w + 1]);
      }
  }
}

template <typename Scalar>
void avgpool2_backward(const Tensor<Scalar>& dy, Tensor<Scalar>& dx, int h,
                       int w) {
  dx.resize(dy.c, h, w);
  for (int ci = 0; ci < dy.c; ++ci) {
    const Scalar* src = dy.m.row(ci).data();
    Scalar* dst = dx.m.row(ci).data();
    for (int r = 0; r < dy.h; ++r)
      for (int c = 0; c < dy.w; ++c) {
        const Scalar v = Scalar(0.25) * src[r * dy.w + c];
        Scalar* p = dst + (2 * r) * w + 2 * c;
        p[0] = v;
        p[1] = v;
        p[w] = v;
        p[w + 1] = v;
      }
  }
}

template <typename Scalar>
void upsample2(const Tensor<Scalar>& x, Tensor<Scalar>& y) {
  const int oh = x.h * 2, ow = x.w * 2;
  y.resize(x.c, oh, ow);
  for (int ci = 0; ci < x.c; ++ci) {
    const Scalar* src = x.m.row(ci).data();
    Scalar* dst = y.m.row(ci).data();
    for (int r = 0; r < oh; ++r) {
      const Scalar* srow = src + static_cast<std::ptrdiff_t>(r / 2) * x.w;
      Scalar* drow = dst + static_cast<std::ptrdiff_t>(r) * ow;
      for (int c = 0; c < ow; ++c) drow[c] = srow[c / 2];
    }
  }
}

template <typename Scalar>
void upsample2_backward(const Tensor<Scalar>& dy, Tensor<Scalar>& dx) {
  const int h = dy.h / 2, w = dy.w / 2;
  dx.resize(dy.c, h, w);
  for (int ci = 0; ci < dy.c; ++ci) {
    const Scalar* src = dy.m.row(ci).data();
    Scalar* dst = dx.m.row(ci).data();
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const Scalar* p = src + (2 * r) * dy.w + 2 * c;
        dst[r * w + c] = p[0] + p[1] + p[dy.w] + p[dy.w + 1];
      }
  }
}

template <typename Scalar>
void concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b,
                     Tensor<Scalar>& y) {
  if (a.h != b.h || a.w != b.w)
    throw DomainError("concat_channels: spatial shape mismatch");
  y.resize(a.c + b.c, a.h, a.w);
  y.m.topRows(a.c) = a.m;
  y.m.bottomRows(b.c) = b.m;
}

}  // namespace detail

// Convolution (3x3 pad 1, or 1x1) with accumulated gradients. forward caches
// the patch matrix it used; backward for that input must run before the same
// layer's next forward.
template <typename Scalar>
class Conv {
 public:
  using Mat = typename Tensor<Scalar>::Mat;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Conv() = default;
  Conv(int in_c, int out_c, int k) : in_c_(in_c), out_c_(out_c), k_(k) {
    if (k != 1 && k != 3) throw DomainError("Conv: kernel must be 1 or 3");
    W_.setZero(out_c, static_cast<Eigen::Index>(in_c) * k * k);
    b_.setZero(out_c);
    gW_.setZero(W_.rows(), W_.cols());
    gb_.setZero(out_c);
  }

  void forward(const Tensor<Scalar>& x, Tensor<Scalar>& y) {
    if (x.c != in_c_) throw DomainError("Conv: input channel mismatch");
    y.resize(out_c_, x.h, x.w);
    if (k_ == 3) {
      detail::im2col3(x, col_);
      y.m.noalias() = W_ * col_;
    } else {
      y.m.noalias() = W_ * x.m;
    }
    y.m.colwise() += b_;
  }

  // dy: gradient at the output; x: the forward input. Parameter gradients
  // accumulate; dx (optional) is overwritten.
  void backward(const Tensor<Scalar>& x, const Tensor<Scalar>& dy,
                Tensor<Scalar>* dx) {
    gb_.noalias() += dy.m.rowwise().sum();
    if (k_ == 3) {
      gW_.noalias() += dy.m * col_.transpose();
      if (dx != nullptr) {
        dcol_.noalias() = W_.transpose() * dy.m;
        dx->resize(in_c_, x.h, x.w);
        dx->m.setZero();
        detail::col2im3_add<Scalar>(dcol_, *dx);
      }
    } else {
      gW_.noalias() += dy.m * x.m.transpose();
      if (dx != nullptr) {
        dx->resize(in_c_, x.h, x.w);
        dx->m.noalias() = W_.transpose() * dy.m;
      }
    }
  }

  void zero_grad() {
    gW_.setZero();
    gb_.setZero();
  }

  void init_he(Rng& rng) {
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in()));
    for (Eigen::Index i = 0; i < W_.size(); ++i)
      W_.data()[i] = static_cast<Scalar>(rng.normal(0.0, std));
    b_.setZero();
  }

  void set_zero_params() {
    W_.setZero();
    b_.setZero();
  }

  void collect_params(const std::string& prefix,
                      std::vector<ParamRef<Scalar>>& out) {
    out.push_back({prefix + ".W", W_.data(), gW_.data(), W_.rows(), W_.cols()});
    out.push_back({prefix + ".b", b_.data(), gb_.data(), b_.rows(), 1});
  }

  int in_channels() const { return in_c_; }
  int out_channels() const { return out_c_; }
  Eigen::Index fan_in() const {
    return static_cast<Eigen::Index>(in_c_) * k_ * k_;
  }
  Eigen::Index param_count() const { return W_.size() + b_.size(); }

 private:
  int in_c_ = 0, out_c_ = 0, k_ = 3;
  Mat W_, gW_;
  Vec b_, gb_;
  Mat col_, dcol_;
};

enum class FlipAxis { main_diagonal, anti_diagonal };

inline std::string to_string(FlipAxis f) {
  return f == FlipAxis::main_diagonal ? "main" : "anti";
}

inline FlipAxis flip_axis_from_string(const std::string& s) {
  if (s == "main") return FlipAxis::main_diagonal;
  if (s == "anti") return FlipAxis::anti_diagonal;
  throw ConfigError("model.flip_axis: must be \"main\" or \"anti\"");
}

// Per-channel reflection of a square feature map across a diagonal. Both
// variants are involutions, so the same operation back-propagates gradients.
template <typename Scalar>
void flip_diagonal(const Tensor<Scalar>& x, Tensor<Scalar>& y, FlipAxis axis) {
  if (x.h != x.w)
    throw DomainError("flip_diagonal: feature map must be square");
  y.resize(x.c, x.h, x.w);
  const int n = x.h;
  for (int ci = 0; ci < x.c; ++ci) {
    const auto in = x.channel(ci);
    auto out = y.channel(ci);
    if (axis == FlipAxis::main_diagonal) {
      out = in.transpose();
    } else {
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) out(r, c) = in(n - 1 - c, n - 1 - r);
    }
  }
}

// Encoder-decoder with skip connections. One 3x3 conv + LeakyReLU per level,
// 2x2 average-pool down, nearest-neighbour up, concatenation skips, linear
// 1x1 head. Channel widths double per level starting at base.
template <typename Scalar>
class UNet {
 public:
  static constexpr Scalar kSlope = Scalar(0.1);

  UNet(int in_c, int out_c, int base, int depth)
      : in_c_(in_c), out_c_(out_c), depth_(depth) {
    if (depth < 1) throw ConfigError("model.depth: must be >= 1");
    if (base < 1) throw ConfigError("model.base_width: must be >= 1");
    for (int s = 0; s < depth; ++s)
      enc_.emplace_back(s == 0 ? in_c : base << (s - 1), base << s, 3);
    bott_ = Conv<Scalar>(base << (depth - 1), base << depth, 3);
    for (int s = 0; s < depth; ++s)
      dec_.emplace_back((base << (s + 1)) + (base << s), base << s, 3);
    head_ = Conv<Scalar>(base, out_c, 1);

    e_pre_.resize(static_cast<std::size_t>(depth));
    e_act_.resize(static_cast<std::size_t>(depth));
    pooled_.resize(static_cast<std::size_t>(depth));
    up_.resize(static_cast<std::size_t>(depth));
    cat_.resize(static_cast<std::size_t>(depth));
    d_pre_.resize(static_cast<std::size_t>(depth));
    d_act_.resize(static_cast<std::size_t>(depth));
  }

  void forward(const Tensor<Scalar>& x, Tensor<Scalar>& out) {
    if (x.c != in_c_) throw DomainError("UNet: input channel mismatch");
    if (x.h % (1 << depth_) != 0 || x.w % (1 << depth_) != 0)
      throw DomainError("UNet: grid size must be divisible by 2^depth");
    const Tensor<Scalar>* cur = &x;
    for (std::size_t s = 0; s < enc_.size(); ++s) {
      enc_[s].forward(*cur, e_pre_[s]);
      detail::leaky_relu(e_pre_[s], e_act_[s], kSlope);
      detail::avgpool2(e_act_[s], pooled_[s]);
      cur = &pooled_[s];
    }
    bott_.forward(*cur, b_pre_);
    detail::leaky_relu(b_pre_, b_act_, kSlope);
    cur = &b_act_;
    for (int s = depth_ - 1; s >= 0; --s) {
      const auto si = static_cast<std::size_t>(s);
      detail::upsample2(*cur, up_[si]);
      detail::concat_channels(up_[si], e_act_[si], cat_[si]);
      dec_[si].forward(cat_[si], d_pre_[si]);
      detail::leaky_relu(d_pre_[si], d_act_[si], kSlope);
      cur = &d_act_[si];
    }
    head_.forward(*cur, out);
  }

  // Unwinds the latest forward. x must be that forward's argument; dx
  // (optional) receives the gradient at the input.
  void backward(const Tensor<Scalar>& x, const Tensor<Scalar>& dout,
                Tensor<Scalar>* dx) {
    std::vector<Tensor<Scalar>> d_skip(static_cast<std::size_t>(depth_));
    Tensor<Scalar> d_cur, d_tmp, d_up;

    head_.backward(d_act_[0], dout, &d_cur);
    // decoder stages unwound from the finest (s = 0) back to the coarsest
    for (std::size_t s = 0; s < d_skip.size(); ++s) {
      detail::leaky_relu_backward(d_pre_[s], d_cur, d_tmp, kSlope);
      dec_[s].backward(cat_[s], d_tmp, &d_cur);
      d_up.resize(up_[s].c, up_[s].h, up_[s].w);
      d_up.m = d_cur.m.topRows(up_[s].c);
      d_skip[s].resize(e_act_[s].c, e_act_[s].h, e_act_[s].w);
      d_skip[s].m = d_cur.m.bottomRows(e_act_[s].c);
      detail::upsample2_backward(d_up, d_cur);
    }
    // d_cur now sits at b_act_
    detail::leaky_relu_backward(b_pre_, d_cur, d_tmp, kSlope);
    bott_.backward(pooled_[static_cast<std::size_t>(depth_ - 1)], d_tmp,
                   &d_cur);
    // encoder stages, coarsest to finest; each activation fed both its pool
    // and its skip, so the two gradient paths add
    for (int s = depth_ - 1; s >= 0; --s) {
      const auto si = static_cast<std::size_t>(s);
      detail::avgpool2_backward(d_cur, d_tmp, e_act_[si].h, e_act_[si].w);
      d_tmp.m += d_skip[si].m;
      detail::leaky_relu_backward(e_pre_[si], d_tmp, d_cur, kSlope);
      const Tensor<Scalar>& input =
          (s == 0) ? x : pooled_[static_cast<std::size_t>(s - 1)];
      Tensor<Scalar>* d_target = (s == 0) ? dx : &d_tmp;
      enc_[si].backward(input, d_cur, d_target);
      if (s != 0) d_cur = std::move(d_tmp);
    }
  }

  void zero_grad() {
    for (auto& c : enc_) c.zero_grad();
    bott_.zero_grad();
    for (auto& c : dec_) c.zero_grad();
    head_.zero_grad();
  }

  void init_he(Rng& rng) {
    for (auto& c : enc_) c.init_he(rng);
    bott_.init_he(rng);
    for (auto& c : dec_) c.init_he(rng);
    head_.init_he(rng);
  }

  void collect_params(const std::string& prefix,
                      std::vector<ParamRef<Scalar>>& out) {
    for (std::size_t s = 0; s < enc_.size(); ++s)
      enc_[s].collect_params(prefix + ".enc" + std::to_string(s), out);
    bott_.collect_params(prefix + ".bott", out);
    for (std::size_t s = 0; s < dec_.size(); ++s)
      dec_[s].collect_params(prefix + ".dec" + std::to_string(s), out);
    head_.collect_params(prefix + ".head", out);
  }

  Conv<Scalar>& head() { return head_; }
  int depth() const { return depth_; }

 private:
  int in_c_, out_c_, depth_;
  std::vector<Conv<Scalar>> enc_, dec_;
  Conv<Scalar> bott_, head_;
  std::vector<Tensor<Scalar>> e_pre_, e_act_, pooled_, up_, cat_, d_pre_,
      d_act_;
  Tensor<Scalar> b_pre_, b_act_;
};

struct ModelConfig {
  int base_width = 16;
  int depth = 3;
  int mid_channels = 16;
  FlipAxis flip_axis = FlipAxis::main_diagonal;
  bool normalize = true;
  double temp_scale = 50.0;
  std::string precision = "f32";

  void validate() const {
    if (base_width < 1) throw ConfigError("model.base_width: must be >= 1");
    if (depth < 1 || depth > 8)
      throw ConfigError("model.depth: must be in [1, 8]");
    if (mid_channels < 1)
      throw ConfigError("model.mid_channels: must be >= 1");
    if (!(temp_scale > 0.0))
      throw ConfigError("model.temp_scale: must be > 0");
    if (precision != "f32" && precision != "f64")
      throw ConfigError("model.precision: must be \"f32\" or \"f64\"");
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"base_width", base_width},
                          {"depth", depth},
                          {"mid_channels", mid_channels},
                          {"flip_axis", to_string(flip_axis)},
                          {"normalize", normalize},
                          {"temp_scale", temp_scale},
                          {"precision", precision}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    if (j.contains("base_width")) c.base_width = j.at("base_width").get<int>();
    if (j.contains("depth")) c.depth = j.at("depth").get<int>();
    if (j.contains("mid_channels"))
      c.mid_channels = j.at("mid_channels").get<int>();
    if (j.contains("flip_axis"))
      c.flip_axis = flip_axis_from_string(j.at("flip_axis").get<std::string>());
    if (j.contains("normalize")) c.normalize = j.at("normalize").get<bool>();
    if (j.contains("temp_scale"))
      c.temp_scale = j.at("temp_scale").get<double>();
    if (j.contains("precision"))
      c.precision = j.at("precision").get<std::string>();
    return c;
  }
};

// The full surrogate: sensor readings + quantile level in, temperature field
// out. Two U-Nets bridged by a diagonal feature-map flip, so the second half
// of the network sees the first half's features in transposed orientation.
// Inputs and outputs can be expressed as offsets from the sink temperature
// scaled by temp_scale (normalize = true), which keeps activations O(1).
template <typename Scalar>
class ReconNet {
 public:
  ReconNet(const ModelConfig& cfg, double ref_temp_K)
      : cfg_(cfg),
        t0_(ref_temp_K),
        u1_(2, cfg.mid_channels, cfg.base_width, cfg.depth),
        u2_(cfg.mid_channels, 1, cfg.base_width, cfg.depth) {
    cfg_.validate();
  }

  // mp: readings at sensor cells, zero elsewhere (kelvin). q: quantile level
  // at sensor cells, zero elsewhere. Sensor cells are exactly the nonzero
  // cells of q, since quantile levels are strictly inside (0, 1).
  Grid<Scalar> forward(const Grid<Scalar>& mp, const Grid<Scalar>& q) {
    const int h = static_cast<int>(mp.rows()), w = static_cast<int>(mp.cols());
    if (q.rows() != h || q.cols() != w)
      throw DomainError("ReconNet: mp/q shape mismatch");
    if (h != w)
      throw DomainError("ReconNet: diagonal flip requires a square grid");

    x_.resize(2, h, w);
    auto ch0 = x_.channel(0);
    if (cfg_.normalize) {
      const Scalar t0 = static_cast<Scalar>(t0_);
      const Scalar inv = static_cast<Scalar>(1.0 / cfg_.temp_scale);
      ch0 = (q.array() != Scalar(0))
                .select((mp.array() - t0) * inv, Grid<Scalar>::Zero(h, w));
    } else {
      ch0 = mp;
    }
    x_.channel(1) = q;

    u1_.forward(x_, f1_pre_);
    detail::leaky_relu(f1_pre_, f1_act_, UNet<Scalar>::kSlope);
    flip_diagonal(f1_act_, f1_flip_, cfg_.flip_axis);
    u2_.forward(f1_flip_, out_);

    Grid<Scalar> pred(h, w);
    if (cfg_.normalize)
      pred = (out_.channel(0).array() * static_cast<Scalar>(cfg_.temp_scale) +
              static_cast<Scalar>(t0_))
                 .matrix();
    else
      pred = out_.channel(0);
    return pred;
  }

  // dpred: gradient at the kelvin-scale prediction. Accumulates parameter
  // gradients; optionally reports the gradient at the quantile channel.
  void backward(const Grid<Scalar>& dpred, Grid<Scalar>* dq = nullptr) {
    Tensor<Scalar> dout;
    dout.resize(1, static_cast<int>(dpred.rows()),
                static_cast<int>(dpred.cols()));
    dout.channel(0) = cfg_.normalize
                          ? (dpred.array() *
                             static_cast<Scalar>(cfg_.temp_scale))
                                .matrix()
                                .eval()
                          : dpred;

    Tensor<Scalar> d_flip, d_act, d_pre, dx;
    u2_.backward(f1_flip_, dout, &d_flip);
    flip_diagonal(d_flip, d_act, cfg_.flip_axis);  // involution
    detail::leaky_relu_backward(f1_pre_, d_act, d_pre, UNet<Scalar>::kSlope);
    u1_.backward(x_, d_pre, dq != nullptr ? &dx : nullptr);
    if (dq != nullptr) *dq = dx.channel(1);
  }

  void zero_grads() {
    u1_.zero_grad();
    u2_.zero_grad();
  }

  // He fan-in init. The second network's head starts at zero so the initial
  // prediction is exactly the reference temperature everywhere (normalized
  // runs). Tests that need gradients through every layer pass false.
  void init_params(std::uint64_t seed, bool zero_final_head = true) {
    Rng rng(derive_seed(seed, "init"));
    u1_.init_he(rng);
    u2_.init_he(rng);
    if (zero_final_head) u2_.head().set_zero_params();
  }

  std::vector<ParamRef<Scalar>> params() {
    std::vector<ParamRef<Scalar>> out;
    u1_.collect_params("u1", out);
    u2_.collect_params("u2", out);
    return out;
  }

  Eigen::Index param_count() {
    Eigen::Index n = 0;
    for (const auto& p : params()) n += p.size();
    return n;
  }

  const ModelConfig& config() const { return cfg_; }
  double ref_temp() const { return t0_; }

 private:
  ModelConfig cfg_;
  double t0_;
  UNet<Scalar> u1_, u2_;
  Tensor<Scalar> x_, f1_pre_, f1_act_, f1_flip_, out_;
};

}  // namespace heatrec
