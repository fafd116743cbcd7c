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

// Minimal reverse-mode differentiation over NCHW tensors.
//
// A Tape records every operation applied during one forward pass. Node ids
// grow monotonically, so walking the tape backwards visits nodes in reverse
// topological order. Parameters live outside the tape; a parameter leaf
// aliases Parameter::value and accumulates straight into Parameter::grad.

#ifndef SPOTNET_AUTOGRAD_HPP_
#define SPOTNET_AUTOGRAD_HPP_

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "spotnet/tensor.hpp"

namespace spotnet {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad();
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, Var self)>;

  /// With record_gradients = false parameters are treated as constants and
  /// no backward closures are kept (inference).
  explicit Tape(bool record_gradients = true) : record_gradients_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives gradient.
  Var constant(Tensor value);
  /// Leaf whose gradient is kept on the tape (useful for input gradients).
  Var input(Tensor value);
  /// Leaf bound to a parameter; gradient accumulates into p.grad.
  Var parameter(Parameter& p);

  /// Record an op result. `backward` reads grad(result) and accumulates into
  /// the parents' gradients; it is skipped when no parent requires gradient.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward);

  const Tensor& value(Var v) const;
  Tensor& mutable_value(Var v);
  const Shape& shape(Var v) const { return value(v).shape(); }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Gradient buffer of v, allocated as zeros on first access.
  Tensor& grad(Var v);
  bool has_grad(Var v) const;

  /// Seed d(objective)/d(root) for each root and propagate to all leaves.
  void backward(const std::vector<std::pair<Var, Tensor>>& seeds);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  bool record_gradients_ = true;
};

namespace ops {

/// 2-D convolution, square kernel, zero padding. `bias` may be null.
Var conv2d(Tape& tape, Var x, Parameter& weight, Parameter* bias, int stride, int pad);
Var relu(Tape& tape, Var x);
Var sigmoid(Tape& tape, Var x);
Var add(Tape& tape, Var a, Var b);
/// 2x2 max pooling with stride 2 (floor).
Var max_pool2(Tape& tape, Var x);
/// k x k average pooling with stride k; spatial dims must be divisible by k.
Var avg_pool(Tape& tape, Var x, int k);
/// Nearest-neighbour upsampling to an explicit size (source index = dst / 2,
/// clamped), used to merge hourglass branches of possibly odd sizes.
Var upsample_nearest(Tape& tape, Var x, int out_h, int out_w);
/// 2x bilinear upsampling, half-pixel centers (align_corners = false).
Var upsample_bilinear2(Tape& tape, Var x);
/// f[n, c] * g[n, 0] for every channel c; g has a single channel.
Var multiply_channels(Tape& tape, Var f, Var g);
/// x * s for a scalar s.
Var scale(Tape& tape, Var x, float s);

}  // namespace ops

}  // namespace spotnet

#endif  // SPOTNET_AUTOGRAD_HPP_
