/* Copyright 2026 The SpotNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "spotnet/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "spotnet/types.hpp"

namespace spotnet {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void Parameter::zero_grad() {
  if (grad.shape() != value.shape()) {
    grad = Tensor(value.shape());
  } else {
    grad.fill(0.0f);
  }
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, record_gradients_});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::parameter(Parameter& p) {
  nodes_.push_back(Node{{}, {}, {}, &p, record_gradients_});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
  bool needs = false;
  for (Var p : parents) {
    needs = needs || nodes_[p.id].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{},
                        nullptr, needs});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::value(Var v) const {
  const Node& node = nodes_[v.id];
  return node.param != nullptr ? node.param->value : node.value;
}

Tensor& Tape::mutable_value(Var v) {
  Node& node = nodes_[v.id];
  return node.param != nullptr ? node.param->value : node.value;
}

Tensor& Tape::grad(Var v) {
  Node& node = nodes_[v.id];
  Tensor& g = node.param != nullptr ? node.param->grad : node.grad;
  const Shape& s = value(v).shape();
  if (g.shape() != s) {
    g = Tensor(s);
  }
  return g;
}

bool Tape::has_grad(Var v) const {
  const Node& node = nodes_[v.id];
  return node.param != nullptr ? !node.param->grad.empty() : !node.grad.empty();
}

void Tape::backward(const std::vector<std::pair<Var, Tensor>>& seeds) {
  for (const auto& [v, g] : seeds) {
    if (!nodes_[v.id].requires_grad) {
      continue;
    }
    grad(v).add_(g);
  }
  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    Node& node = nodes_[id];
    if (node.backward && !node.grad.empty()) {
      node.backward(*this, Var{id});
    }
  }
}

namespace ops {

namespace {

void im2col(const float* x, int channels, int h, int w, int k, int stride, int pad, int out_h,
            int out_w, float* col) {
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    const float* src = x + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* dst = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * out_plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          float* row = dst + static_cast<std::size_t>(oy) * out_w;
          if (iy < 0 || iy >= h) {
            std::fill(row, row + out_w, 0.0f);
            continue;
          }
          const float* src_row = src + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            row[ox] = (ix >= 0 && ix < w) ? src_row[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* col, int channels, int h, int w, int k, int stride, int pad, int out_h,
            int out_w, float* x) {
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    float* dst = x + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* src = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * out_plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            continue;
          }
          const float* row = src + static_cast<std::size_t>(oy) * out_w;
          float* dst_row = dst + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) {
              dst_row[ix] += row[ox];
            }
          }
        }
      }
    }
  }
}

void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw InvalidArgument(std::string(op) + ": shape " + a.str() + " vs " + b.str());
  }
}

}  // namespace

Var conv2d(Tape& tape, Var x, Parameter& weight, Parameter* bias, int stride, int pad) {
  const Shape in = tape.shape(x);
  const Shape& ws = weight.value.shape();
  const int k = ws.h;
  if (ws.w != k || ws.c != in.c) {
    throw InvalidArgument("conv2d(" + weight.name + "): weight " + ws.str() + " vs input " +
                          in.str());
  }
  const int out_h = (in.h + 2 * pad - k) / stride + 1;
  const int out_w = (in.w + 2 * pad - k) / stride + 1;
  if (out_h <= 0 || out_w <= 0) {
    throw InvalidArgument("conv2d(" + weight.name + "): input too small " + in.str());
  }
  const int cout = ws.n;
  const int kdim = in.c * k * k;
  const int out_plane = out_h * out_w;
  const bool direct = (k == 1 && stride == 1 && pad == 0);

  Tensor out(Shape{in.n, cout, out_h, out_w});
  FloatBuffer col(direct ? 0 : static_cast<std::size_t>(kdim) * out_plane);
  ConstMatrixMap wm(weight.value.raw(), cout, kdim);
  const Tensor& xv = tape.value(x);
  for (int n = 0; n < in.n; ++n) {
    const float* src = xv.plane(n, 0);
    if (!direct) {
      im2col(src, in.c, in.h, in.w, k, stride, pad, out_h, out_w, col.data());
    }
    ConstMatrixMap cm(direct ? src : col.data(), kdim, out_plane);
    MatrixMap om(out.plane(n, 0), cout, out_plane);
    om.noalias() = wm * cm;
    if (bias != nullptr) {
      Eigen::Map<const Eigen::VectorXf> b(bias->value.raw(), cout);
      om.colwise() += b;
    }
  }

  Var wv = tape.parameter(weight);
  Var bv = bias != nullptr ? tape.parameter(*bias) : wv;
  const bool has_bias = bias != nullptr;
  return tape.record(std::move(out), {x, wv, bv},
                     [=](Tape& t, Var self) {
                       const Tensor& g = t.grad(self);
                       const Tensor& xin = t.value(x);
                       const Tensor& wt = t.value(wv);
                       ConstMatrixMap w_mat(wt.raw(), cout, kdim);
                       const bool need_x = t.requires_grad(x);
                       FloatBuffer buf(direct ? 0 : static_cast<std::size_t>(kdim) * out_plane);
                       RowMatrix dcol;
                       Tensor& gw = t.grad(wv);
                       MatrixMap gw_mat(gw.raw(), cout, kdim);
                       for (int n = 0; n < in.n; ++n) {
                         const float* src = xin.plane(n, 0);
                         if (!direct) {
                           im2col(src, in.c, in.h, in.w, k, stride, pad, out_h, out_w, buf.data());
                         }
                         ConstMatrixMap cm(direct ? src : buf.data(), kdim, out_plane);
                         ConstMatrixMap gm(g.plane(n, 0), cout, out_plane);
                         gw_mat.noalias() += gm * cm.transpose();
                         if (has_bias) {
                           Tensor& gb = t.grad(bv);
                           Eigen::Map<Eigen::VectorXf> gbv(gb.raw(), cout);
                           gbv += gm.rowwise().sum();
                         }
                         if (need_x) {
                           Tensor& gx = t.grad(x);
                           if (direct) {
                             MatrixMap gxm(gx.plane(n, 0), kdim, out_plane);
                             gxm.noalias() += w_mat.transpose() * gm;
                           } else {
                             dcol.noalias() = w_mat.transpose() * gm;
                             col2im(dcol.data(), in.c, in.h, in.w, k, stride, pad, out_h, out_w,
                                    gx.plane(n, 0));
                           }
                         }
                       }
                     });
}

Var relu(Tape& tape, Var x) {
  Tensor out = tape.value(x);
  for (float& v : out.data()) {
    v = v > 0.0f ? v : 0.0f;
  }
  return tape.record(std::move(out), {x}, [x](Tape& t, Var self) {
    const Tensor& y = t.value(self);
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(x);
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y.raw()[i] > 0.0f) {
        gx.raw()[i] += g.raw()[i];
      }
    }
  });
}

Var sigmoid(Tape& tape, Var x) {
  Tensor out = tape.value(x);
  for (float& v : out.data()) {
    v = 1.0f / (1.0f + std::exp(-v));
  }
  return tape.record(std::move(out), {x}, [x](Tape& t, Var self) {
    const Tensor& y = t.value(self);
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(x);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const float s = y.raw()[i];
      gx.raw()[i] += g.raw()[i] * s * (1.0f - s);
    }
  });
}

Var add(Tape& tape, Var a, Var b) {
  require_same(tape.shape(a), tape.shape(b), "add");
  Tensor out = tape.value(a);
  out.add_(tape.value(b));
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(a)) {
      t.grad(a).add_(g);
    }
    if (t.requires_grad(b)) {
      t.grad(b).add_(g);
    }
  });
}

Var scale(Tape& tape, Var x, float s) {
  Tensor out = tape.value(x);
  for (float& v : out.data()) {
    v *= s;
  }
  return tape.record(std::move(out), {x}, [x, s](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx.raw()[i] += s * g.raw()[i];
    }
  });
}

Var max_pool2(Tape& tape, Var x) {
  const Shape in = tape.shape(x);
  const int oh = in.h / 2;
  const int ow = in.w / 2;
  if (oh == 0 || ow == 0) {
    throw InvalidArgument("max_pool2: input too small " + in.str());
  }
  Tensor out(Shape{in.n, in.c, oh, ow});
  std::vector<std::uint32_t> argmax(out.size());
  const Tensor& xv = tape.value(x);
  std::size_t o = 0;
  for (int n = 0; n < in.n; ++n) {
    for (int c = 0; c < in.c; ++c) {
      const float* src = xv.plane(n, c);
      const std::size_t base = xv.offset(n, c, 0, 0);
      for (int y = 0; y < oh; ++y) {
        for (int xx = 0; xx < ow; ++xx, ++o) {
          float best = -std::numeric_limits<float>::infinity();
          std::size_t best_i = 0;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const std::size_t i = static_cast<std::size_t>(2 * y + dy) * in.w + 2 * xx + dx;
              if (src[i] > best) {
                best = src[i];
                best_i = i;
              }
            }
          }
          out.raw()[o] = best;
          argmax[o] = static_cast<std::uint32_t>(base + best_i);
        }
      }
    }
  }
  return tape.record(std::move(out), {x}, [x, argmax = std::move(argmax)](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx.raw()[argmax[i]] += g.raw()[i];
    }
  });
}

Var avg_pool(Tape& tape, Var x, int k) {
  const Shape in = tape.shape(x);
  if (k <= 0 || in.h % k != 0 || in.w % k != 0) {
    throw InvalidArgument("avg_pool: " + in.str() + " not divisible by " + std::to_string(k));
  }
  const int oh = in.h / k;
  const int ow = in.w / k;
  const float inv = 1.0f / static_cast<float>(k * k);
  Tensor out(Shape{in.n, in.c, oh, ow});
  const Tensor& xv = tape.value(x);
  for (int n = 0; n < in.n; ++n) {
    for (int c = 0; c < in.c; ++c) {
      for (int y = 0; y < oh; ++y) {
        for (int xx = 0; xx < ow; ++xx) {
          float s = 0.0f;
          for (int dy = 0; dy < k; ++dy) {
            for (int dx = 0; dx < k; ++dx) {
              s += xv.at(n, c, y * k + dy, xx * k + dx);
            }
          }
          out.at(n, c, y, xx) = s * inv;
        }
      }
    }
  }
  return tape.record(std::move(out), {x}, [x, k, inv](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(x);
    const Shape& s = g.shape();
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        for (int y = 0; y < s.h; ++y) {
          for (int xx = 0; xx < s.w; ++xx) {
            const float v = g.at(n, c, y, xx) * inv;
            for (int dy = 0; dy < k; ++dy) {
              for (int dx = 0; dx < k; ++dx) {
                gx.at(n, c, y * k + dy, xx * k + dx) += v;
              }
            }
          }
        }
      }
    }
  });
}

Var upsample_nearest(Tape& tape, Var x, int out_h, int out_w) {
  const Shape in = tape.shape(x);
  auto src_y = [=](int y) { return std::min(y / 2, in.h - 1); };
  auto src_x = [=](int xx) { return std::min(xx / 2, in.w - 1); };
  Tensor out(Shape{in.n, in.c, out_h, out_w});
  const Tensor& xv = tape.value(x);
  for (int n = 0; n < in.n; ++n) {
    for (int c = 0; c < in.c; ++c) {
      for (int y = 0; y < out_h; ++y) {
        for (int xx = 0; xx < out_w; ++xx) {
          out.at(n, c, y, xx) = xv.at(n, c, src_y(y), src_x(xx));
        }
      }
    }
  }
  return tape.record(std::move(out), {x}, [=](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(x);
    for (int n = 0; n < in.n; ++n) {
      for (int c = 0; c < in.c; ++c) {
        for (int y = 0; y < out_h; ++y) {
          for (int xx = 0; xx < out_w; ++xx) {
            gx.at(n, c, src_y(y), src_x(xx)) += g.at(n, c, y, xx);
          }
        }
      }
    }
  });
}

namespace {

struct LinearTap {
  int i0;
  int i1;
  float w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<LinearTap> bilinear_taps(int in_size, int out_size) {
  std::vector<LinearTap> taps(out_size);
  for (int o = 0; o < out_size; ++o) {
    float src = (static_cast<float>(o) + 0.5f) * 0.5f - 0.5f;
    src = std::max(src, 0.0f);
    const int i0 = std::min(static_cast<int>(src), in_size - 1);
    const int i1 = std::min(i0 + 1, in_size - 1);
    taps[o] = LinearTap{i0, i1, src - static_cast<float>(i0)};
  }
  return taps;
}

}  // namespace

Var upsample_bilinear2(Tape& tape, Var x) {
  const Shape in = tape.shape(x);
  const int oh = in.h * 2;
  const int ow = in.w * 2;
  const auto ty = bilinear_taps(in.h, oh);
  const auto tx = bilinear_taps(in.w, ow);
  Tensor out(Shape{in.n, in.c, oh, ow});
  const Tensor& xv = tape.value(x);
  for (int n = 0; n < in.n; ++n) {
    for (int c = 0; c < in.c; ++c) {
      const float* src = xv.plane(n, c);
      float* dst = out.plane(n, c);
      for (int y = 0; y < oh; ++y) {
        const LinearTap& a = ty[y];
        const float* r0 = src + static_cast<std::size_t>(a.i0) * in.w;
        const float* r1 = src + static_cast<std::size_t>(a.i1) * in.w;
        for (int xx = 0; xx < ow; ++xx) {
          const LinearTap& b = tx[xx];
          const float top = r0[b.i0] * (1.0f - b.w1) + r0[b.i1] * b.w1;
          const float bot = r1[b.i0] * (1.0f - b.w1) + r1[b.i1] * b.w1;
          dst[static_cast<std::size_t>(y) * ow + xx] = top * (1.0f - a.w1) + bot * a.w1;
        }
      }
    }
  }
  return tape.record(std::move(out), {x}, [=](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(x);
    for (int n = 0; n < in.n; ++n) {
      for (int c = 0; c < in.c; ++c) {
        const float* src = g.plane(n, c);
        float* dst = gx.plane(n, c);
        for (int y = 0; y < oh; ++y) {
          const LinearTap& a = ty[y];
          float* r0 = dst + static_cast<std::size_t>(a.i0) * in.w;
          float* r1 = dst + static_cast<std::size_t>(a.i1) * in.w;
          for (int xx = 0; xx < ow; ++xx) {
            const LinearTap& b = tx[xx];
            const float v = src[static_cast<std::size_t>(y) * ow + xx];
            const float top = v * (1.0f - a.w1);
            const float bot = v * a.w1;
            r0[b.i0] += top * (1.0f - b.w1);
            r0[b.i1] += top * b.w1;
            r1[b.i0] += bot * (1.0f - b.w1);
            r1[b.i1] += bot * b.w1;
          }
        }
      }
    }
  });
}

Var multiply_channels(Tape& tape, Var f, Var g) {
  const Shape fs = tape.shape(f);
  const Shape gs = tape.shape(g);
  if (gs.c != 1 || gs.n != fs.n || gs.h != fs.h || gs.w != fs.w) {
    throw InvalidArgument("multiply_channels: features " + fs.str() + " vs gate " + gs.str());
  }
  Tensor out = tape.value(f);
  const Tensor& gv = tape.value(g);
  const std::size_t plane = fs.plane();
  for (int n = 0; n < fs.n; ++n) {
    const float* gate = gv.plane(n, 0);
    for (int c = 0; c < fs.c; ++c) {
      float* dst = out.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        dst[i] *= gate[i];
      }
    }
  }
  return tape.record(std::move(out), {f, g}, [=](Tape& t, Var self) {
    const Tensor& grad_out = t.grad(self);
    const Tensor& fv = t.value(f);
    const Tensor& gate_v = t.value(g);
    const bool need_f = t.requires_grad(f);
    const bool need_g = t.requires_grad(g);
    for (int n = 0; n < fs.n; ++n) {
      const float* gate = gate_v.plane(n, 0);
      for (int c = 0; c < fs.c; ++c) {
        const float* go = grad_out.plane(n, c);
        if (need_f) {
          float* gf = t.grad(f).plane(n, c);
          for (std::size_t i = 0; i < plane; ++i) {
            gf[i] += go[i] * gate[i];
          }
        }
        if (need_g) {
          const float* fin = fv.plane(n, c);
          float* gg = t.grad(g).plane(n, 0);
          for (std::size_t i = 0; i < plane; ++i) {
            gg[i] += go[i] * fin[i];
          }
        }
      }
    }
  });
}

}  // namespace ops

}  // namespace spotnet
