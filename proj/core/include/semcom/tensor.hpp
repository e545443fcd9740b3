#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "semcom/error.hpp"
#include "semcom/rng.hpp"

namespace semcom {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::int64_t shape_size(const Shape& s);

class Tape;

// Dense row-major tensor of 64-bit reals. Values are immutable once built;
// every operation returns a fresh tensor. A tensor optionally carries a
// (tape, node) handle that links it into a reverse-mode gradient tape.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from_data(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0);
  // Xavier/Glorot uniform for a [fan_in x fan_out] weight matrix.
  static Tensor xavier(Shape shape, Rng& rng);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const;
  std::int64_t size() const { return data_ ? static_cast<std::int64_t>(data_->size()) : 0; }

  const std::vector<double>& data() const;
  double value() const;  // single-element convenience accessor
  double at(std::initializer_list<int> index) const;

  bool tracked() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int node() const { return node_; }

  // True when both tensors share the same underlying buffer.
  bool shares_data(const Tensor& other) const { return data_ == other.data_; }

 private:
  std::shared_ptr<const std::vector<double>> data_;
  Shape shape_;
  Tape* tape_ = nullptr;
  int node_ = -1;

  friend class Tape;
  friend struct OpRecorder;
};

// Reverse-mode gradient tape. Nodes are appended in execution order, which
// is a topological order by construction; backward() replays the reversed
// list, accumulating into per-node gradient buffers so a value consumed
// twice receives both contributions.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers a leaf (typically a parameter) and returns a tracked view
  // sharing the same buffer.
  Tensor watch(const Tensor& t);

  // Accumulates gradients of `root` (a single-element tensor) with respect
  // to every tracked tensor.
  void backward(const Tensor& root);

  // Gradient of the last backward() pass for a tracked tensor; zeros if the
  // tensor did not influence the root.
  Tensor grad(const Tensor& t) const;

  int num_nodes() const { return static_cast<int>(nodes_.size()); }

  // Gradient accumulation buffer for a node, allocated on first touch.
  // Backward rules add their contributions here.
  std::vector<double>& grad_buffer(int node);

 private:
  struct Node {
    Shape shape;
    const char* op = "";
    // Receives this node's gradient buffer; adds into input node buffers.
    std::function<void(Tape&, const std::vector<double>&)> backward;
  };

  int append(Shape shape, const char* op,
             std::function<void(Tape&, const std::vector<double>&)> fn);

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;

  friend struct OpRecorder;
};

enum class PadMode {
  kSame,        // symmetric zero padding, output length == input length
  kCausalLeft,  // left-only zero padding, position t reads inputs <= t
};

// Integer id matrix [rows x cols], row-major. Used for token ids.
struct IdMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> ids;

  int at(int r, int c) const { return ids[static_cast<std::size_t>(r) * cols + c]; }
};

// ---- Differentiable operations -------------------------------------------
// Every op computes the forward value and, when an input is tracked,
// records the matching backward rule on that input's tape.

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
// Multiply every element by a single-element tensor (both differentiable).
Tensor scale_scalar(const Tensor& x, const Tensor& s);
// x: [B x C x L], gates: [B x C]; scales each channel row, broadcast over L.
Tensor scale_channels(const Tensor& x, const Tensor& gates);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);  // swaps the last two axes
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor softmax(const Tensor& x, int axis);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-6);
Tensor conv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias,
              PadMode pad = PadMode::kSame);
Tensor global_maxpool(const Tensor& x);  // removes the last axis
Tensor cummax_last(const Tensor& x);     // running max along the last axis
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor embedding_lookup(const Tensor& table, const IdMatrix& ids);
Tensor dense(const Tensor& x, const Tensor& weight);
Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor reshape(const Tensor& x, Shape shape);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor rsqrt(const Tensor& x);
// Masked mean token-level cross entropy. logits: [B x L x V], targets/mask:
// [B x L]; positions with mask false are excluded from the mean.
Tensor cross_entropy_with_logits(const Tensor& logits, const IdMatrix& targets,
                                 const std::vector<std::uint8_t>& mask);
// Forward emits `values`; backward passes the incoming gradient through to
// `x` unchanged (identity Jacobian). Shapes must match.
Tensor straight_through(const Tensor& x, const Tensor& values);

}  // namespace semcom
