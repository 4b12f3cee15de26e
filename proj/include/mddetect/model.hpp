// Copyright 2026 The mddetect Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MDDETECT_MODEL_HPP_
#define MDDETECT_MODEL_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mddetect/dsp.hpp"
#include "mddetect/error.hpp"
#include "mddetect/rng.hpp"

namespace mdd::model {

using dsp::Label;

// ---------------------------------------------------------------------------
// Parameter containers
//
// A compact residual classifier: stride-2 stem, two projected residual
// blocks, global average pooling, 2-logit head. Small enough that every
// gradient can be checked against finite differences, while keeping the
// structural elements of the usual residual image classifiers.
// ---------------------------------------------------------------------------

template <typename T>
struct Conv {
  int in_c = 0, out_c = 0, k = 0, stride = 1, pad = 0;
  std::vector<T> w;  // out_c x in_c x k x k
  std::vector<T> b;  // out_c

  int fan_in() const { return in_c * k * k; }
  int out_dim(int in_dim) const { return (in_dim + 2 * pad - k) / stride + 1; }
};

template <typename T>
struct Affine {
  int in_f = 0, out_f = 0;
  std::vector<T> w;  // out_f x in_f
  std::vector<T> b;  // out_f
};

template <typename T>
struct ResidualBlock {
  Conv<T> conv1;  // stride 2
  Conv<T> conv2;  // stride 1
  Conv<T> proj;   // 1x1 stride 2 shortcut
};

template <typename T>
struct ModelParams {
  Conv<T> stem;
  ResidualBlock<T> block1;
  ResidualBlock<T> block2;
  Affine<T> head;
};

inline constexpr std::size_t kParamCount = 72546;

namespace detail {

template <typename T>
Conv<T> make_conv(int in_c, int out_c, int k, int stride, int pad) {
  Conv<T> c;
  c.in_c = in_c;
  c.out_c = out_c;
  c.k = k;
  c.stride = stride;
  c.pad = pad;
  c.w.assign(static_cast<std::size_t>(out_c) * in_c * k * k, T{0});
  c.b.assign(static_cast<std::size_t>(out_c), T{0});
  return c;
}

}  // namespace detail

template <typename T>
ModelParams<T> make_model() {
  ModelParams<T> p;
  p.stem = detail::make_conv<T>(3, 16, 3, 2, 1);
  p.block1.conv1 = detail::make_conv<T>(16, 32, 3, 2, 1);
  p.block1.conv2 = detail::make_conv<T>(32, 32, 3, 1, 1);
  p.block1.proj = detail::make_conv<T>(16, 32, 1, 2, 0);
  p.block2.conv1 = detail::make_conv<T>(32, 64, 3, 2, 1);
  p.block2.conv2 = detail::make_conv<T>(64, 64, 3, 1, 1);
  p.block2.proj = detail::make_conv<T>(32, 64, 1, 2, 0);
  p.head.in_f = 64;
  p.head.out_f = 2;
  p.head.w.assign(2 * 64, T{0});
  p.head.b.assign(2, T{0});
  return p;
}

// Visits every parameter array in a fixed order; the order defines the
// checkpoint layout and the weight-initialization draw order.
template <typename T, typename Fn>
void for_each_array(ModelParams<T>& p, Fn&& fn) {
  fn("stem.w", p.stem.w);
  fn("stem.b", p.stem.b);
  fn("block1.conv1.w", p.block1.conv1.w);
  fn("block1.conv1.b", p.block1.conv1.b);
  fn("block1.conv2.w", p.block1.conv2.w);
  fn("block1.conv2.b", p.block1.conv2.b);
  fn("block1.proj.w", p.block1.proj.w);
  fn("block1.proj.b", p.block1.proj.b);
  fn("block2.conv1.w", p.block2.conv1.w);
  fn("block2.conv1.b", p.block2.conv1.b);
  fn("block2.conv2.w", p.block2.conv2.w);
  fn("block2.conv2.b", p.block2.conv2.b);
  fn("block2.proj.w", p.block2.proj.w);
  fn("block2.proj.b", p.block2.proj.b);
  fn("head.w", p.head.w);
  fn("head.b", p.head.b);
}

template <typename T, typename Fn>
void for_each_array(const ModelParams<T>& p, Fn&& fn) {
  for_each_array(const_cast<ModelParams<T>&>(p),
                 [&fn](const char* name, std::vector<T>& v) {
                   fn(name, static_cast<const std::vector<T>&>(v));
                 });
}

template <typename T>
std::size_t param_count(const ModelParams<T>& p) {
  std::size_t n = 0;
  for_each_array(p, [&n](const char*, const std::vector<T>& v) { n += v.size(); });
  return n;
}

// He-normal weights (std = sqrt(2 / fan_in)), zero biases. Draws happen in
// double in visitation order, so float and double instantiations of the same
// seed agree to float rounding.
template <typename T>
ModelParams<T> init_model(std::uint64_t seed) {
  ModelParams<T> p = make_model<T>();
  Rng rng(derive_seed(seed, "model.init"));

  const auto fill_conv = [&rng](Conv<T>& c) {
    const double std_dev = std::sqrt(2.0 / c.fan_in());
    for (auto& v : c.w) v = static_cast<T>(std_dev * rng.normal());
  };
  fill_conv(p.stem);
  fill_conv(p.block1.conv1);
  fill_conv(p.block1.conv2);
  fill_conv(p.block1.proj);
  fill_conv(p.block2.conv1);
  fill_conv(p.block2.conv2);
  fill_conv(p.block2.proj);
  const double head_std = std::sqrt(2.0 / p.head.in_f);
  for (auto& v : p.head.w) v = static_cast<T>(head_std * rng.normal());
  return p;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

template <typename T>
struct Tensor3 {
  int c = 0, h = 0, w = 0;
  std::vector<T> v;

  void resize(int c_, int h_, int w_) {
    c = c_;
    h = h_;
    w = w_;
    v.assign(static_cast<std::size_t>(c) * h * w, T{0});
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
};

namespace detail {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatCM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

// Patch matrix: column p holds the receptive field of output pixel p, rows
// ordered (in_c, ky, kx) to match the weight layout.
template <typename T>
void im2col(const Tensor3<T>& in, const Conv<T>& cv, int oh, int ow,
            std::vector<T>& col) {
  const int k = cv.k;
  const std::size_t rows = static_cast<std::size_t>(cv.in_c) * k * k;
  col.assign(rows * static_cast<std::size_t>(oh) * ow, T{0});
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      T* column = col.data() + (static_cast<std::size_t>(oy) * ow + ox) * rows;
      const int iy0 = oy * cv.stride - cv.pad;
      const int ix0 = ox * cv.stride - cv.pad;
      for (int ci = 0; ci < cv.in_c; ++ci) {
        const T* plane = in.v.data() + static_cast<std::size_t>(ci) * in.plane();
        for (int ky = 0; ky < k; ++ky) {
          const int iy = iy0 + ky;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ix0 + kx;
            if (iy >= 0 && iy < in.h && ix >= 0 && ix < in.w) {
              column[(static_cast<std::size_t>(ci) * k + ky) * k + kx] =
                  plane[static_cast<std::size_t>(iy) * in.w + ix];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const std::vector<T>& col, const Conv<T>& cv, int oh, int ow,
            Tensor3<T>& din) {
  const int k = cv.k;
  const std::size_t rows = static_cast<std::size_t>(cv.in_c) * k * k;
  std::fill(din.v.begin(), din.v.end(), T{0});
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const T* column =
          col.data() + (static_cast<std::size_t>(oy) * ow + ox) * rows;
      const int iy0 = oy * cv.stride - cv.pad;
      const int ix0 = ox * cv.stride - cv.pad;
      for (int ci = 0; ci < cv.in_c; ++ci) {
        T* plane = din.v.data() + static_cast<std::size_t>(ci) * din.plane();
        for (int ky = 0; ky < k; ++ky) {
          const int iy = iy0 + ky;
          if (iy < 0 || iy >= din.h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ix0 + kx;
            if (ix < 0 || ix >= din.w) continue;
            plane[static_cast<std::size_t>(iy) * din.w + ix] +=
                column[(static_cast<std::size_t>(ci) * k + ky) * k + kx];
          }
        }
      }
    }
  }
}

template <typename T>
void conv_forward(const Tensor3<T>& in, const Conv<T>& cv, std::vector<T>& col,
                  Tensor3<T>& out) {
  const int oh = cv.out_dim(in.h);
  const int ow = cv.out_dim(in.w);
  out.resize(cv.out_c, oh, ow);
  im2col(in, cv, oh, ow, col);

  const int kk = cv.fan_in();
  const auto pixels = static_cast<Eigen::Index>(out.plane());
  Eigen::Map<const MatRM<T>> wm(cv.w.data(), cv.out_c, kk);
  Eigen::Map<const MatCM<T>> cm(col.data(), kk, pixels);
  Eigen::Map<MatRM<T>> om(out.v.data(), cv.out_c, pixels);
  om.noalias() = wm * cm;
  for (int co = 0; co < cv.out_c; ++co) {
    om.row(co).array() += cv.b[static_cast<std::size_t>(co)];
  }
}

// dIn is optional (the stem skips it). `col` must still hold the forward
// pass's patches of `in`; `dcol` is scratch.
template <typename T>
void conv_backward(const Tensor3<T>& in, const Conv<T>& cv,
                   const Tensor3<T>& dout, const std::vector<T>& col,
                   std::vector<T>& dcol, Conv<T>& grad, Tensor3<T>* din) {
  const int kk = cv.fan_in();
  const auto pixels = static_cast<Eigen::Index>(dout.plane());
  Eigen::Map<const MatRM<T>> dom(dout.v.data(), cv.out_c, pixels);
  Eigen::Map<const MatCM<T>> cm(col.data(), kk, pixels);
  Eigen::Map<const MatRM<T>> wm(cv.w.data(), cv.out_c, kk);

  Eigen::Map<MatRM<T>> dwm(grad.w.data(), cv.out_c, kk);
  dwm.noalias() = dom * cm.transpose();
  for (int co = 0; co < cv.out_c; ++co) {
    grad.b[static_cast<std::size_t>(co)] = dom.row(co).sum();
  }
  if (din != nullptr) {
    dcol.resize(static_cast<std::size_t>(kk) * pixels);
    Eigen::Map<MatCM<T>> dcm(dcol.data(), kk, pixels);
    dcm.noalias() = wm.transpose() * dom;
    din->resize(din->c, din->h, din->w);
    col2im(dcol, cv, dout.h, dout.w, *din);
  }
}

template <typename T>
void relu_inplace(Tensor3<T>& t) {
  for (auto& x : t.v) x = std::max(x, T{0});
}

// dX = dY masked by (activation > 0); activation is the post-ReLU tensor.
template <typename T>
void relu_backward_inplace(const Tensor3<T>& activation, Tensor3<T>& d) {
  for (std::size_t i = 0; i < d.v.size(); ++i) {
    if (!(activation.v[i] > T{0})) d.v[i] = T{0};
  }
}

}  // namespace detail

// Per-image activation storage, reused across calls. One per thread.
template <typename T>
struct Workspace {
  Tensor3<T> input;
  Tensor3<T> stem_out;                    // post-ReLU
  Tensor3<T> b1_r1, b1_conv2, b1_proj, b1_out;
  Tensor3<T> b2_r1, b2_conv2, b2_proj, b2_out;
  std::vector<T> pooled;
  std::array<T, 2> logits{};

  // backward scratch
  Tensor3<T> d_stem_out, d_b1_r1, d_b1_out, d_b2_r1, d_b2_out, d_tmp;
  std::vector<T> col, col2, dcol;
};

// Normalized 3-channel input from a grayscale plane in [0, 1].
template <typename T>
void image_to_input(const std::vector<float>& gray, int h, int w,
                    Tensor3<T>& input) {
  if (gray.size() != static_cast<std::size_t>(h) * w) {
    throw Error(ErrorKind::kShapeMismatch, "gray plane size mismatch");
  }
  input.resize(3, h, w);
  const std::size_t plane = gray.size();
  for (int c = 0; c < 3; ++c) {
    T* out = input.v.data() + static_cast<std::size_t>(c) * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      out[i] = static_cast<T>(
          (static_cast<double>(gray[i]) - dsp::kNormMean[c]) / dsp::kNormStd[c]);
    }
  }
}

template <typename T>
void block_forward(const Tensor3<T>& in, const ResidualBlock<T>& blk,
                   Workspace<T>& ws, Tensor3<T>& r1, Tensor3<T>& conv2_out,
                   Tensor3<T>& proj_out, Tensor3<T>& out) {
  detail::conv_forward(in, blk.conv1, ws.col, r1);
  detail::relu_inplace(r1);
  detail::conv_forward(r1, blk.conv2, ws.col, conv2_out);
  detail::conv_forward(in, blk.proj, ws.col, proj_out);
  out.resize(conv2_out.c, conv2_out.h, conv2_out.w);
  for (std::size_t i = 0; i < out.v.size(); ++i) {
    out.v[i] = conv2_out.v[i] + proj_out.v[i];
  }
  detail::relu_inplace(out);
}

// Forward pass on one image already loaded into ws.input. Returns logits.
template <typename T>
std::array<T, 2> forward(const ModelParams<T>& p, Workspace<T>& ws) {
  if (ws.input.c != 3 || ws.input.h < 1 || ws.input.w < 1) {
    throw Error(ErrorKind::kShapeMismatch, "model input must be 3xHxW");
  }
  detail::conv_forward(ws.input, p.stem, ws.col, ws.stem_out);
  detail::relu_inplace(ws.stem_out);
  block_forward(ws.stem_out, p.block1, ws, ws.b1_r1, ws.b1_conv2, ws.b1_proj,
                ws.b1_out);
  block_forward(ws.b1_out, p.block2, ws, ws.b2_r1, ws.b2_conv2, ws.b2_proj,
                ws.b2_out);

  ws.pooled.assign(static_cast<std::size_t>(ws.b2_out.c), T{0});
  const T inv = T{1} / static_cast<T>(ws.b2_out.plane());
  for (int c = 0; c < ws.b2_out.c; ++c) {
    const T* plane = ws.b2_out.v.data() + static_cast<std::size_t>(c) * ws.b2_out.plane();
    T acc{0};
    for (std::size_t i = 0; i < ws.b2_out.plane(); ++i) acc += plane[i];
    ws.pooled[static_cast<std::size_t>(c)] = acc * inv;
  }

  for (int o = 0; o < 2; ++o) {
    T acc = p.head.b[static_cast<std::size_t>(o)];
    const T* row = p.head.w.data() + static_cast<std::size_t>(o) * p.head.in_f;
    for (int i = 0; i < p.head.in_f; ++i) acc += row[i] * ws.pooled[static_cast<std::size_t>(i)];
    ws.logits[static_cast<std::size_t>(o)] = acc;
  }
  return ws.logits;
}

template <typename T>
std::array<T, 2> forward(const ModelParams<T>& p, const std::vector<float>& gray,
                         int h, int w, Workspace<T>& ws) {
  image_to_input(gray, h, w, ws.input);
  return forward(p, ws);
}

// Stable softmax cross-entropy for one sample.
template <typename T>
T cross_entropy_single(const std::array<T, 2>& logits, Label label,
                       std::array<T, 2>* dlogits = nullptr) {
  const T m = std::max(logits[0], logits[1]);
  const T e0 = std::exp(logits[0] - m);
  const T e1 = std::exp(logits[1] - m);
  const T z = e0 + e1;
  const auto idx = static_cast<std::size_t>(label);
  const T loss = -(logits[idx] - m) + std::log(z);
  if (dlogits != nullptr) {
    (*dlogits)[0] = e0 / z - (label == Label::kDeepfake ? T{1} : T{0});
    (*dlogits)[1] = e1 / z - (label == Label::kHuman ? T{1} : T{0});
  }
  return loss;
}

// Mean cross-entropy over a batch of logit rows.
template <typename T>
T cross_entropy(const std::vector<std::array<T, 2>>& logits,
                const std::vector<Label>& labels) {
  if (logits.size() != labels.size() || logits.empty()) {
    throw Error(ErrorKind::kLengthMismatch, "logit/label batch size mismatch");
  }
  T acc{0};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    acc += cross_entropy_single(logits[i], labels[i]);
  }
  return acc / static_cast<T>(logits.size());
}

// Analytic gradients of cross_entropy(forward(input)) for one image whose
// forward state is still in ws. The returned gradients are for this sample
// alone; batch means are taken by the caller.
template <typename T>
void backward(const ModelParams<T>& p, Workspace<T>& ws,
              const std::array<T, 2>& dlogits, ModelParams<T>& grad) {
  // head
  for (int o = 0; o < 2; ++o) {
    grad.head.b[static_cast<std::size_t>(o)] = dlogits[static_cast<std::size_t>(o)];
    T* grow = grad.head.w.data() + static_cast<std::size_t>(o) * p.head.in_f;
    for (int i = 0; i < p.head.in_f; ++i) {
      grow[i] = dlogits[static_cast<std::size_t>(o)] * ws.pooled[static_cast<std::size_t>(i)];
    }
  }
  // pooled -> spatial
  ws.d_b2_out.resize(ws.b2_out.c, ws.b2_out.h, ws.b2_out.w);
  const T inv = T{1} / static_cast<T>(ws.b2_out.plane());
  for (int c = 0; c < ws.b2_out.c; ++c) {
    T dpool{0};
    for (int o = 0; o < 2; ++o) {
      dpool += dlogits[static_cast<std::size_t>(o)] *
               p.head.w[static_cast<std::size_t>(o) * p.head.in_f + c];
    }
    const T g = dpool * inv;
    T* plane = ws.d_b2_out.v.data() + static_cast<std::size_t>(c) * ws.d_b2_out.plane();
    for (std::size_t i = 0; i < ws.d_b2_out.plane(); ++i) plane[i] = g;
  }

  // block2
  detail::relu_backward_inplace(ws.b2_out, ws.d_b2_out);
  ws.d_b1_out.resize(ws.b1_out.c, ws.b1_out.h, ws.b1_out.w);
  ws.d_tmp.resize(ws.b1_out.c, ws.b1_out.h, ws.b1_out.w);
  ws.d_b2_r1.resize(ws.b2_r1.c, ws.b2_r1.h, ws.b2_r1.w);
  detail::im2col(ws.b2_r1, p.block2.conv2, ws.d_b2_out.h, ws.d_b2_out.w, ws.col);
  detail::conv_backward(ws.b2_r1, p.block2.conv2, ws.d_b2_out, ws.col, ws.dcol,
                        grad.block2.conv2, &ws.d_b2_r1);
  detail::relu_backward_inplace(ws.b2_r1, ws.d_b2_r1);
  detail::im2col(ws.b1_out, p.block2.conv1, ws.d_b2_r1.h, ws.d_b2_r1.w, ws.col);
  detail::conv_backward(ws.b1_out, p.block2.conv1, ws.d_b2_r1, ws.col, ws.dcol,
                        grad.block2.conv1, &ws.d_b1_out);
  detail::im2col(ws.b1_out, p.block2.proj, ws.d_b2_out.h, ws.d_b2_out.w, ws.col);
  detail::conv_backward(ws.b1_out, p.block2.proj, ws.d_b2_out, ws.col, ws.dcol,
                        grad.block2.proj, &ws.d_tmp);
  for (std::size_t i = 0; i < ws.d_b1_out.v.size(); ++i) {
    ws.d_b1_out.v[i] += ws.d_tmp.v[i];
  }

  // block1
  detail::relu_backward_inplace(ws.b1_out, ws.d_b1_out);
  ws.d_stem_out.resize(ws.stem_out.c, ws.stem_out.h, ws.stem_out.w);
  ws.d_tmp.resize(ws.stem_out.c, ws.stem_out.h, ws.stem_out.w);
  ws.d_b1_r1.resize(ws.b1_r1.c, ws.b1_r1.h, ws.b1_r1.w);
  detail::im2col(ws.b1_r1, p.block1.conv2, ws.d_b1_out.h, ws.d_b1_out.w, ws.col);
  detail::conv_backward(ws.b1_r1, p.block1.conv2, ws.d_b1_out, ws.col, ws.dcol,
                        grad.block1.conv2, &ws.d_b1_r1);
  detail::relu_backward_inplace(ws.b1_r1, ws.d_b1_r1);
  detail::im2col(ws.stem_out, p.block1.conv1, ws.d_b1_r1.h, ws.d_b1_r1.w, ws.col);
  detail::conv_backward(ws.stem_out, p.block1.conv1, ws.d_b1_r1, ws.col, ws.dcol,
                        grad.block1.conv1, &ws.d_stem_out);
  detail::im2col(ws.stem_out, p.block1.proj, ws.d_b1_out.h, ws.d_b1_out.w, ws.col);
  detail::conv_backward(ws.stem_out, p.block1.proj, ws.d_b1_out, ws.col, ws.dcol,
                        grad.block1.proj, &ws.d_tmp);
  for (std::size_t i = 0; i < ws.d_stem_out.v.size(); ++i) {
    ws.d_stem_out.v[i] += ws.d_tmp.v[i];
  }

  // stem; the input gradient is never needed
  detail::relu_backward_inplace(ws.stem_out, ws.d_stem_out);
  detail::im2col(ws.input, p.stem, ws.d_stem_out.h, ws.d_stem_out.w, ws.col);
  detail::conv_backward(ws.input, p.stem, ws.d_stem_out, ws.col, ws.dcol,
                        grad.stem, static_cast<Tensor3<T>*>(nullptr));
}

struct Prediction {
  Label label = Label::kDeepfake;
  std::array<double, 2> probabilities{};  // [deepfake, human]
};

// Softmax over the logits; exact ties go to deepfake.
template <typename T>
Prediction predict_from_logits(const std::array<T, 2>& logits) {
  Prediction pred;
  const double m = std::max<double>(logits[0], logits[1]);
  const double e0 = std::exp(static_cast<double>(logits[0]) - m);
  const double e1 = std::exp(static_cast<double>(logits[1]) - m);
  pred.probabilities[0] = e0 / (e0 + e1);
  pred.probabilities[1] = e1 / (e0 + e1);
  pred.label = logits[1] > logits[0] ? Label::kHuman : Label::kDeepfake;
  return pred;
}

template <typename T>
Prediction predict(const ModelParams<T>& p, const std::vector<float>& gray,
                   int h, int w) {
  Workspace<T> ws;
  return predict_from_logits(forward(p, gray, h, w, ws));
}

inline Prediction predict(const ModelParams<float>& p,
                          const dsp::SpectroImage& image) {
  Workspace<float> ws;
  ws.input.resize(3, image.height, image.width);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    ws.input.v[i] = static_cast<float>(image.pixels[i]);
  }
  return predict_from_logits(forward(p, ws));
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <typename T>
struct AdamState {
  ModelParams<T> m;  // first moments
  ModelParams<T> v;  // second moments
  std::int64_t t = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
AdamState<T> make_adam(double lr) {
  AdamState<T> s;
  s.m = make_model<T>();
  s.v = make_model<T>();
  s.lr = lr;
  return s;
}

template <typename T>
void adam_step(AdamState<T>& s, ModelParams<T>& params,
               const ModelParams<T>& grads) {
  s.t += 1;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));

  const auto update = [&](std::vector<T>& p, std::vector<T>& m,
                          std::vector<T>& v, const std::vector<T>& g) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = s.beta1 * static_cast<double>(m[i]) + (1.0 - s.beta1) * gi;
      const double vi =
          s.beta2 * static_cast<double>(v[i]) + (1.0 - s.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      p[i] = static_cast<T>(static_cast<double>(p[i]) -
                            s.lr * mhat / (std::sqrt(vhat) + s.epsilon));
    }
  };

  // walk the three containers in lockstep
  std::vector<std::vector<T>*> pv, mv, vv;
  std::vector<const std::vector<T>*> gv;
  for_each_array(params, [&pv](const char*, std::vector<T>& a) { pv.push_back(&a); });
  for_each_array(s.m, [&mv](const char*, std::vector<T>& a) { mv.push_back(&a); });
  for_each_array(s.v, [&vv](const char*, std::vector<T>& a) { vv.push_back(&a); });
  for_each_array(grads,
                 [&gv](const char*, const std::vector<T>& a) { gv.push_back(&a); });
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (pv[i]->size() != gv[i]->size()) {
      throw Error(ErrorKind::kShapeMismatch, "gradient shape mismatch");
    }
    update(*pv[i], *mv[i], *vv[i], *gv[i]);
  }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  int epochs = 20;
  int batch_size = 32;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

// Features ready for the model: grayscale planes in [0, 1] plus labels.
struct FeatureSet {
  int height = dsp::kImageSize;
  int width = dsp::kImageSize;
  std::vector<std::vector<float>> gray;
  std::vector<Label> labels;

  std::size_t size() const { return gray.size(); }
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct Checkpoint {
  ModelParams<float> params;  // best-validation-accuracy snapshot
  AdamState<float> adam;      // optimizer state at the end of training
  int best_epoch = -1;
  double best_val_accuracy = 0.0;
  std::vector<EpochStats> history;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<Label> predictions;
};

namespace detail {

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline int thread_id() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

}  // namespace detail

template <typename T>
EvalResult evaluate(const ModelParams<T>& p, const FeatureSet& set) {
  if (set.size() == 0) {
    throw Error(ErrorKind::kTooSmall, "empty evaluation set");
  }
  EvalResult r;
  r.predictions.resize(set.size());
  std::vector<double> losses(set.size());
  std::vector<Workspace<T>> workspaces(
      static_cast<std::size_t>(detail::max_threads()));

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(set.size()); ++i) {
    Workspace<T>& ws = workspaces[static_cast<std::size_t>(detail::thread_id())];
    const auto logits = forward(p, set.gray[static_cast<std::size_t>(i)],
                                set.height, set.width, ws);
    losses[static_cast<std::size_t>(i)] = static_cast<double>(
        cross_entropy_single(logits, set.labels[static_cast<std::size_t>(i)]));
    r.predictions[static_cast<std::size_t>(i)] = predict_from_logits(logits).label;
  }

  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    loss += losses[i];
    if (r.predictions[i] == set.labels[i]) ++correct;
  }
  r.loss = loss / static_cast<double>(set.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(set.size());
  return r;
}

// One full pass: seeded shuffle, sequential minibatches (short tail batch
// kept), per-sample forward/backward in parallel, then a fixed-order batch
// reduction so results never depend on thread count. Returns the mean
// training loss.
template <typename T>
double train_one_epoch(ModelParams<T>& params, AdamState<T>& adam,
                       const TrainConfig& cfg, const FeatureSet& train_set,
                       std::uint64_t epoch_seed) {
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (cfg.shuffle) {
    Rng rng(epoch_seed);
    rng.shuffle(order);
  }

  const auto n_threads = static_cast<std::size_t>(detail::max_threads());
  std::vector<Workspace<T>> workspaces(n_threads);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<ModelParams<T>> sample_grads(batch, make_model<T>());
  std::vector<double> sample_losses(batch);
  ModelParams<T> batch_grad = make_model<T>();

  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += batch) {
    const std::size_t b = std::min(batch, order.size() - start);

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(b); ++j) {
      Workspace<T>& ws = workspaces[static_cast<std::size_t>(detail::thread_id())];
      const std::size_t idx = order[start + static_cast<std::size_t>(j)];
      const auto logits =
          forward(params, train_set.gray[idx], train_set.height,
                  train_set.width, ws);
      std::array<T, 2> dlogits;
      sample_losses[static_cast<std::size_t>(j)] = static_cast<double>(
          cross_entropy_single(logits, train_set.labels[idx], &dlogits));
      backward(params, ws, dlogits, sample_grads[static_cast<std::size_t>(j)]);
    }

    const T inv_b = T{1} / static_cast<T>(b);
    std::vector<std::vector<T>*> acc;
    for_each_array(batch_grad,
                   [&acc](const char*, std::vector<T>& a) { acc.push_back(&a); });
    for (std::size_t k = 0; k < acc.size(); ++k) {
      std::fill(acc[k]->begin(), acc[k]->end(), T{0});
    }
    for (std::size_t j = 0; j < b; ++j) {
      std::vector<const std::vector<T>*> src;
      for_each_array(sample_grads[j], [&src](const char*, const std::vector<T>& a) {
        src.push_back(&a);
      });
      for (std::size_t k = 0; k < acc.size(); ++k) {
        std::vector<T>& dst = *acc[k];
        const std::vector<T>& s = *src[k];
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s[i] * inv_b;
      }
      loss_sum += sample_losses[j];
    }
    adam_step(adam, params, batch_grad);
  }
  return loss_sum / static_cast<double>(train_set.size());
}

// Trains from scratch with per-epoch validation; keeps the parameters from
// the epoch with the best validation accuracy (later epoch wins ties).
inline Checkpoint train(const TrainConfig& cfg, const FeatureSet& train_set,
                        const FeatureSet& val_set) {
  if (train_set.size() == 0 || val_set.size() == 0) {
    throw Error(ErrorKind::kTooSmall, "training needs non-empty train/val sets");
  }
  ModelParams<float> params = init_model<float>(cfg.seed);
  AdamState<float> adam = make_adam<float>(cfg.lr);

  Checkpoint ckpt;
  ckpt.params = params;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochStats stats;
    stats.train_loss = train_one_epoch(
        params, adam, cfg, train_set,
        derive_seed(cfg.seed, "train.epoch", static_cast<std::uint64_t>(epoch)));
    const EvalResult val = evaluate(params, val_set);
    stats.val_loss = val.loss;
    stats.val_accuracy = val.accuracy;
    ckpt.history.push_back(stats);
    if (val.accuracy >= ckpt.best_val_accuracy) {
      ckpt.best_val_accuracy = val.accuracy;
      ckpt.best_epoch = epoch;
      ckpt.params = params;
    }
  }
  ckpt.adam = std::move(adam);
  return ckpt;
}

// ---------------------------------------------------------------------------
// Checkpoint file: magic "MGCK", u32 version, u32 array count, then named
// little-endian f64 arrays (u32 name length, name, u64 element count, data),
// then a u64-length-prefixed CSV block with the per-epoch history.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ofstream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt,
                            const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::vector<double>>> arrays;
  const auto add = [&arrays](const std::string& name, const std::vector<float>& v) {
    std::vector<double> d(v.begin(), v.end());
    arrays.emplace_back(name, std::move(d));
  };
  for_each_array(ckpt.params, [&add](const char* name, const std::vector<float>& v) {
    add(std::string("params.") + name, v);
  });
  for_each_array(ckpt.adam.m, [&add](const char* name, const std::vector<float>& v) {
    add(std::string("adam.m.") + name, v);
  });
  for_each_array(ckpt.adam.v, [&add](const char* name, const std::vector<float>& v) {
    add(std::string("adam.v.") + name, v);
  });
  arrays.emplace_back("adam.t",
                      std::vector<double>{static_cast<double>(ckpt.adam.t)});
  arrays.emplace_back("adam.lr", std::vector<double>{ckpt.adam.lr});
  arrays.emplace_back("adam.beta1", std::vector<double>{ckpt.adam.beta1});
  arrays.emplace_back("adam.beta2", std::vector<double>{ckpt.adam.beta2});
  arrays.emplace_back("adam.epsilon", std::vector<double>{ckpt.adam.epsilon});
  arrays.emplace_back("best_epoch",
                      std::vector<double>{static_cast<double>(ckpt.best_epoch)});
  arrays.emplace_back("best_val_accuracy",
                      std::vector<double>{ckpt.best_val_accuracy});

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::kIoFailure, "cannot create " + path.string());
  os.write("MGCK", 4);
  detail::put_u32(os, 1);  // format version
  detail::put_u32(os, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, data] : arrays) {
    detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u64(os, data.size());
    static_assert(sizeof(double) == 8);
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * 8));
  }

  std::ostringstream csv;
  csv << "epoch,train_loss,val_loss,val_accuracy\n";
  csv.precision(17);
  for (std::size_t e = 0; e < ckpt.history.size(); ++e) {
    csv << e << ',' << ckpt.history[e].train_loss << ','
        << ckpt.history[e].val_loss << ',' << ckpt.history[e].val_accuracy
        << '\n';
  }
  const std::string text = csv.str();
  detail::put_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw Error(ErrorKind::kIoFailure, "short write to " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoFailure, "cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "MGCK", 4) != 0) {
    throw Error(ErrorKind::kMalformedHeader, "bad checkpoint magic");
  }
  const std::uint32_t version = detail::get_u32(in);
  if (version != 1) {
    throw Error(ErrorKind::kUnsupportedEncoding,
                "unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = detail::get_u32(in);
  std::map<std::string, std::vector<double>> arrays;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = detail::get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint64_t n = detail::get_u64(in);
    std::vector<double> data(n);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(n * 8));
    if (!in) throw Error(ErrorKind::kTruncatedData, "truncated checkpoint array");
    arrays.emplace(std::move(name), std::move(data));
  }

  Checkpoint ckpt;
  ckpt.params = make_model<float>();
  ckpt.adam = make_adam<float>(1e-4);
  const auto fill = [&arrays](const std::string& name, std::vector<float>& dst) {
    const auto it = arrays.find(name);
    if (it == arrays.end() || it->second.size() != dst.size()) {
      throw Error(ErrorKind::kMalformedHeader,
                  "checkpoint missing or misshapen array " + name);
    }
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] = static_cast<float>(it->second[i]);
    }
  };
  for_each_array(ckpt.params, [&fill](const char* name, std::vector<float>& v) {
    fill(std::string("params.") + name, v);
  });
  for_each_array(ckpt.adam.m, [&fill](const char* name, std::vector<float>& v) {
    fill(std::string("adam.m.") + name, v);
  });
  for_each_array(ckpt.adam.v, [&fill](const char* name, std::vector<float>& v) {
    fill(std::string("adam.v.") + name, v);
  });
  const auto scalar = [&arrays](const std::string& name) {
    const auto it = arrays.find(name);
    if (it == arrays.end() || it->second.size() != 1) {
      throw Error(ErrorKind::kMalformedHeader,
                  "checkpoint missing scalar " + name);
    }
    return it->second.front();
  };
  ckpt.adam.t = static_cast<std::int64_t>(scalar("adam.t"));
  ckpt.adam.lr = scalar("adam.lr");
  ckpt.adam.beta1 = scalar("adam.beta1");
  ckpt.adam.beta2 = scalar("adam.beta2");
  ckpt.adam.epsilon = scalar("adam.epsilon");
  ckpt.best_epoch = static_cast<int>(scalar("best_epoch"));
  ckpt.best_val_accuracy = scalar("best_val_accuracy");

  const std::uint64_t csv_len = detail::get_u64(in);
  std::string text(csv_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(csv_len));
  if (!in) throw Error(ErrorKind::kTruncatedData, "truncated history block");
  std::istringstream csv(text);
  std::string line;
  std::getline(csv, line);  // header
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    EpochStats s;
    int epoch = 0;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf", &epoch, &s.train_loss,
                    &s.val_loss, &s.val_accuracy) == 4) {
      ckpt.history.push_back(s);
    }
  }
  return ckpt;
}

}  // namespace mdd::model

#endif  // MDDETECT_MODEL_HPP_
