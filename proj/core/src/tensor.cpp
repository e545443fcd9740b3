#include "semcom/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

namespace semcom {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

std::int64_t prod(const Shape& s, int from, int to) {
  std::int64_t p = 1;
  for (int i = from; i < to; ++i) p *= s[static_cast<std::size_t>(i)];
  return p;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

std::int64_t shape_size(const Shape& s) {
  std::int64_t p = 1;
  for (int d : s) {
    if (d <= 0) throw DimensionError("non-positive dimension in shape " + shape_str(s));
    p *= d;
  }
  return p;
}

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const auto n = shape_size(shape);
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::make_shared<const std::vector<double>>(static_cast<std::size_t>(n), value);
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values) {
  const auto n = shape_size(shape);
  if (n != static_cast<std::int64_t>(values.size())) {
    throw DimensionError("from_data: " + std::to_string(values.size()) +
                         " values for shape " + shape_str(shape));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::make_shared<const std::vector<double>>(std::move(values));
  return t;
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev) {
  const auto n = shape_size(shape);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = rng.normal() * stddev;
  return from_data(std::move(shape), std::move(v));
}

Tensor Tensor::xavier(Shape shape, Rng& rng) {
  double fan_in = 1.0, fan_out = 1.0;
  if (shape.size() == 2) {
    fan_in = shape[0];
    fan_out = shape[1];
  } else if (shape.size() == 3) {  // conv kernels [out x in x k]
    fan_in = static_cast<double>(shape[1]) * shape[2];
    fan_out = static_cast<double>(shape[0]) * shape[2];
  } else {
    throw DimensionError("xavier: expected rank 2 or 3, got " + shape_str(shape));
  }
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  const auto n = shape_size(shape);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = rng.uniform(-limit, limit);
  return from_data(std::move(shape), std::move(v));
}

int Tensor::dim(int axis) const {
  if (axis < 0 || axis >= rank()) {
    throw DimensionError("dim " + std::to_string(axis) + " out of range for " +
                         shape_str(shape_));
  }
  return shape_[static_cast<std::size_t>(axis)];
}

const std::vector<double>& Tensor::data() const {
  require_defined(*this, "data");
  return *data_;
}

double Tensor::value() const {
  require_defined(*this, "value");
  if (size() != 1) throw ContractError("value: tensor has " + std::to_string(size()) + " elements");
  return (*data_)[0];
}

double Tensor::at(std::initializer_list<int> index) const {
  require_defined(*this, "at");
  if (static_cast<int>(index.size()) != rank()) {
    throw DimensionError("at: index rank mismatch for " + shape_str(shape_));
  }
  std::int64_t flat = 0;
  int axis = 0;
  for (int i : index) {
    if (i < 0 || i >= shape_[static_cast<std::size_t>(axis)]) {
      throw DimensionError("at: index out of bounds for " + shape_str(shape_));
    }
    flat = flat * shape_[static_cast<std::size_t>(axis)] + i;
    ++axis;
  }
  return (*data_)[static_cast<std::size_t>(flat)];
}

// ---- Tape -----------------------------------------------------------------

struct OpRecorder {
  // The unique tape shared by all tracked inputs, or nullptr.
  template <typename... Ts>
  static Tape* tape_of(const Ts&... inputs) {
    Tape* tape = nullptr;
    auto visit = [&tape](const Tensor& t) {
      if (!t.tracked()) return;
      if (tape == nullptr) {
        tape = t.tape();
      } else if (tape != t.tape()) {
        throw ContractError("operation mixes tensors from two tapes");
      }
    };
    (visit(inputs), ...);
    return tape;
  }

  static Tape* tape_of_list(const std::vector<Tensor>& inputs) {
    Tape* tape = nullptr;
    for (const auto& t : inputs) {
      if (!t.tracked()) continue;
      if (tape == nullptr) {
        tape = t.tape();
      } else if (tape != t.tape()) {
        throw ContractError("operation mixes tensors from two tapes");
      }
    }
    return tape;
  }

  static Tensor make(Tape* tape, Shape shape, std::vector<double> values, const char* op,
                     std::function<void(Tape&, const std::vector<double>&)> backward) {
    Tensor out = Tensor::from_data(std::move(shape), std::move(values));
    if (tape != nullptr) {
      out.tape_ = tape;
      out.node_ = tape->append(out.shape_, op, std::move(backward));
    }
    return out;
  }

  // Zero-copy variant: the output shares `src`'s buffer under a new shape.
  static Tensor make_view(Tape* tape, Shape shape, const Tensor& src, const char* op,
                          std::function<void(Tape&, const std::vector<double>&)> backward) {
    if (shape_size(shape) != src.size()) {
      throw DimensionError(std::string(op) + ": cannot view " + shape_str(src.shape()) +
                           " as " + shape_str(shape));
    }
    Tensor out;
    out.data_ = src.data_;
    out.shape_ = std::move(shape);
    if (tape != nullptr) {
      out.tape_ = tape;
      out.node_ = tape->append(out.shape_, op, std::move(backward));
    }
    return out;
  }
};

int Tape::append(Shape shape, const char* op,
                 std::function<void(Tape&, const std::vector<double>&)> fn) {
  nodes_.push_back(Node{std::move(shape), op, std::move(fn)});
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor Tape::watch(const Tensor& t) {
  require_defined(t, "watch");
  if (t.tracked()) {
    if (t.tape() == this) return t;
    throw ContractError("watch: tensor already tracked by another tape");
  }
  Tensor view = t;
  view.tape_ = this;
  view.node_ = append(t.shape(), "leaf", nullptr);
  return view;
}

std::vector<double>& Tape::grad_buffer(int node) {
  if (node < 0 || node >= static_cast<int>(nodes_.size())) {
    throw ContractError("grad_buffer: bad node id");
  }
  if (grads_.size() != nodes_.size()) grads_.resize(nodes_.size());
  auto& buf = grads_[static_cast<std::size_t>(node)];
  if (buf.empty()) {
    buf.assign(static_cast<std::size_t>(shape_size(nodes_[static_cast<std::size_t>(node)].shape)), 0.0);
  }
  return buf;
}

void Tape::backward(const Tensor& root) {
  require_defined(root, "backward");
  if (root.tape() != this) throw ContractError("backward: root not on this tape");
  if (root.size() != 1) throw ContractError("backward: root must be a single element");
  grads_.assign(nodes_.size(), {});
  grad_buffer(root.node())[0] = 1.0;
  for (int i = root.node(); i >= 0; --i) {
    const auto& node = nodes_[static_cast<std::size_t>(i)];
    auto& g = grads_[static_cast<std::size_t>(i)];
    if (g.empty() || !node.backward) continue;
    node.backward(*this, g);
  }
}

Tensor Tape::grad(const Tensor& t) const {
  require_defined(t, "grad");
  if (t.tape() != this) throw ContractError("grad: tensor not on this tape");
  const auto idx = static_cast<std::size_t>(t.node());
  if (idx < grads_.size() && !grads_[idx].empty()) {
    return Tensor::from_data(t.shape(), grads_[idx]);
  }
  return Tensor::zeros(t.shape());
}

// ---- elementwise ops ------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  require_same_shape(a, b, "add");
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  Tape* tape = OpRecorder::tape_of(a, b);
  const int an = a.node(), bn = b.node();
  return OpRecorder::make(tape, a.shape(), std::move(out), "add",
                          [an, bn](Tape& t, const std::vector<double>& g) {
                            if (an >= 0) {
                              auto& ga = t.grad_buffer(an);
                              for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                            }
                            if (bn >= 0) {
                              auto& gb = t.grad_buffer(bn);
                              for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                            }
                          });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  require_same_shape(a, b, "mul");
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  Tape* tape = OpRecorder::tape_of(a, b);
  const int an = a.node(), bn = b.node();
  Tensor ac = a, bc = b;
  return OpRecorder::make(tape, a.shape(), std::move(out), "mul",
                          [an, bn, ac, bc](Tape& t, const std::vector<double>& g) {
                            if (an >= 0) {
                              auto& ga = t.grad_buffer(an);
                              const auto& bv2 = bc.data();
                              for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
                            }
                            if (bn >= 0) {
                              auto& gb = t.grad_buffer(bn);
                              const auto& av2 = ac.data();
                              for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
                            }
                          });
}

Tensor scale(const Tensor& x, double factor) {
  require_defined(x, "scale");
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * factor;
  Tape* tape = OpRecorder::tape_of(x);
  const int xn = x.node();
  return OpRecorder::make(tape, x.shape(), std::move(out), "scale",
                          [xn, factor](Tape& t, const std::vector<double>& g) {
                            if (xn < 0) return;
                            auto& gx = t.grad_buffer(xn);
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
                          });
}

Tensor scale_scalar(const Tensor& x, const Tensor& s) {
  require_defined(x, "scale_scalar");
  require_defined(s, "scale_scalar");
  if (s.size() != 1) throw DimensionError("scale_scalar: scale must have one element");
  const double sv = s.data()[0];
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * sv;
  Tape* tape = OpRecorder::tape_of(x, s);
  const int xn = x.node(), sn = s.node();
  Tensor xc = x;
  return OpRecorder::make(tape, x.shape(), std::move(out), "scale_scalar",
                          [xn, sn, sv, xc](Tape& t, const std::vector<double>& g) {
                            if (xn >= 0) {
                              auto& gx = t.grad_buffer(xn);
                              for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * sv;
                            }
                            if (sn >= 0) {
                              auto& gs = t.grad_buffer(sn);
                              const auto& xv2 = xc.data();
                              double acc = 0.0;
                              for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv2[i];
                              gs[0] += acc;
                            }
                          });
}

Tensor scale_channels(const Tensor& x, const Tensor& gates) {
  require_defined(x, "scale_channels");
  require_defined(gates, "scale_channels");
  if (x.rank() != 3 || gates.rank() != 2 || x.dim(0) != gates.dim(0) ||
      x.dim(1) != gates.dim(1)) {
    throw DimensionError("scale_channels: got " + shape_str(x.shape()) + " and " +
                         shape_str(gates.shape()));
  }
  const int B = x.dim(0), C = x.dim(1), L = x.dim(2);
  const auto& xv = x.data();
  const auto& gv = gates.data();
  std::vector<double> out(xv.size());
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      const double gk = gv[static_cast<std::size_t>(b) * C + c];
      const std::size_t base = (static_cast<std::size_t>(b) * C + c) * L;
      for (int l = 0; l < L; ++l) out[base + l] = xv[base + l] * gk;
    }
  }
  Tape* tape = OpRecorder::tape_of(x, gates);
  const int xn = x.node(), gn = gates.node();
  Tensor xc = x, gc = gates;
  return OpRecorder::make(
      tape, x.shape(), std::move(out), "scale_channels",
      [=](Tape& t, const std::vector<double>& g) {
        if (xn >= 0) {
          auto& gx = t.grad_buffer(xn);
          const auto& gv2 = gc.data();
          for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
              const double gk = gv2[static_cast<std::size_t>(b) * C + c];
              const std::size_t base = (static_cast<std::size_t>(b) * C + c) * L;
              for (int l = 0; l < L; ++l) gx[base + l] += g[base + l] * gk;
            }
        }
        if (gn >= 0) {
          auto& gg = t.grad_buffer(gn);
          const auto& xv2 = xc.data();
          for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
              const std::size_t base = (static_cast<std::size_t>(b) * C + c) * L;
              double acc = 0.0;
              for (int l = 0; l < L; ++l) acc += g[base + l] * xv2[base + l];
              gg[static_cast<std::size_t>(b) * C + c] += acc;
            }
        }
      });
}

Tensor sigmoid(const Tensor& x) {
  require_defined(x, "sigmoid");
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  Tape* tape = OpRecorder::tape_of(x);
  const int xn = x.node();
  std::vector<double> ycopy = out;
  return OpRecorder::make(tape, x.shape(), std::move(out), "sigmoid",
                          [xn, ycopy = std::move(ycopy)](Tape& t, const std::vector<double>& g) {
                            if (xn < 0) return;
                            auto& gx = t.grad_buffer(xn);
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              gx[i] += g[i] * ycopy[i] * (1.0 - ycopy[i]);
                            }
                          });
}

Tensor relu(const Tensor& x) {
  require_defined(x, "relu");
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  Tape* tape = OpRecorder::tape_of(x);
  const int xn = x.node();
  Tensor xc = x;
  return OpRecorder::make(tape, x.shape(), std::move(out), "relu",
                          [xn, xc](Tape& t, const std::vector<double>& g) {
                            if (xn < 0) return;
                            auto& gx = t.grad_buffer(xn);
                            const auto& xv2 = xc.data();
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              if (xv2[i] > 0.0) gx[i] += g[i];
                            }
                          });
}

// ---- reductions and views -------------------------------------------------

Tensor sum_all(const Tensor& x) {
  require_defined(x, "sum_all");
  const auto& xv = x.data();
  double acc = 0.0;
  for (double v : xv) acc += v;
  Tape* tape = OpRecorder::tape_of(x);
  const int xn = x.node();
  return OpRecorder::make(tape, {1}, {acc}, "sum_all",
                          [xn](Tape& t, const std::vector<double>& g) {
                            if (xn < 0) return;
                            auto& gx = t.grad_buffer(xn);
                            for (auto& v : gx) v += g[0];
                          });
}

Tensor mean_all(const Tensor& x) {
  require_defined(x, "mean_all");
  const double inv = 1.0 / static_cast<double>(x.size());
  return scale(sum_all(x), inv);
}

Tensor rsqrt(const Tensor& x) {
  require_defined(x, "rsqrt");
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    if (!(xv[i] > 0.0)) {
      throw NumericalError("rsqrt: non-positive input " + std::to_string(xv[i]));
    }
    out[i] = 1.0 / std::sqrt(xv[i]);
  }
  Tape* tape = OpRecorder::tape_of(x);
  const int xn = x.node();
  std::vector<double> ycopy = out;
  return OpRecorder::make(tape, x.shape(), std::move(out), "rsqrt",
                          [xn, ycopy = std::move(ycopy)](Tape& t, const std::vector<double>& g) {
                            if (xn < 0) return;
                            auto& gx = t.grad_buffer(xn);
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              gx[i] += g[i] * -0.5 * ycopy[i] * ycopy[i] * ycopy[i];
                            }
                          });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  Tape* tape = OpRecorder::tape_of(x);
  const int xn = x.node();
  return OpRecorder::make_view(tape, std::move(shape), x, "reshape",
                               [xn](Tape& t, const std::vector<double>& g) {
                                 if (xn < 0) return;
                                 auto& gx = t.grad_buffer(xn);
                                 for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                               });
}

Tensor transpose(const Tensor& x) {
  require_defined(x, "transpose");
  if (x.rank() != 2 && x.rank() != 3) {
    throw DimensionError("transpose: expected rank 2 or 3, got " + shape_str(x.shape()));
  }
  const int B = x.rank() == 3 ? x.dim(0) : 1;
  const int m = x.dim(x.rank() - 2), n = x.dim(x.rank() - 1);
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  for (int b = 0; b < B; ++b) {
    const std::size_t base = static_cast<std::size_t>(b) * m * n;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        out[base + static_cast<std::size_t>(j) * m + i] = xv[base + static_cast<std::size_t>(i) * n + j];
  }
  Shape os = x.shape();
  std::swap(os[os.size() - 2], os[os.size() - 1]);
  Tape* tape = OpRecorder::tape_of(x);
  const int xn = x.node();
  return OpRecorder::make(tape, std::move(os), std::move(out), "transpose",
                          [xn, B, m, n](Tape& t, const std::vector<double>& g) {
                            if (xn < 0) return;
                            auto& gx = t.grad_buffer(xn);
                            for (int b = 0; b < B; ++b) {
                              const std::size_t base = static_cast<std::size_t>(b) * m * n;
                              for (int j = 0; j < n; ++j)
                                for (int i = 0; i < m; ++i)
                                  gx[base + static_cast<std::size_t>(i) * n + j] +=
                                      g[base + static_cast<std::size_t>(j) * m + i];
                            }
                          });
}

// ---- matmul / dense -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.rank() != b.rank() || (a.rank() != 2 && a.rank() != 3)) {
    throw DimensionError("matmul: unsupported ranks " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const int B = a.rank() == 3 ? a.dim(0) : 1;
  const int m = a.dim(a.rank() - 2), k = a.dim(a.rank() - 1);
  const int k2 = b.dim(b.rank() - 2), n = b.dim(b.rank() - 1);
  if (k != k2 || (b.rank() == 3 && b.dim(0) != B)) {
    throw DimensionError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> out(static_cast<std::size_t>(B) * m * n);
  for (int bi = 0; bi < B; ++bi) {
    CMapMat A(av.data() + static_cast<std::size_t>(bi) * m * k, m, k);
    CMapMat Bm(bv.data() + static_cast<std::size_t>(bi) * k * n, k, n);
    MapMat C(out.data() + static_cast<std::size_t>(bi) * m * n, m, n);
    C.noalias() = A * Bm;
  }
  Shape os = a.shape();
  os[os.size() - 1] = n;
  Tape* tape = OpRecorder::tape_of(a, b);
  const int an = a.node(), bn = b.node();
  Tensor ac = a, bc = b;
  return OpRecorder::make(
      tape, std::move(os), std::move(out), "matmul",
      [=](Tape& t, const std::vector<double>& g) {
        for (int bi = 0; bi < B; ++bi) {
          CMapMat G(g.data() + static_cast<std::size_t>(bi) * m * n, m, n);
          if (an >= 0) {
            auto& ga = t.grad_buffer(an);
            CMapMat Bm(bc.data().data() + static_cast<std::size_t>(bi) * k * n, k, n);
            MapMat GA(ga.data() + static_cast<std::size_t>(bi) * m * k, m, k);
            GA.noalias() += G * Bm.transpose();
          }
          if (bn >= 0) {
            auto& gb = t.grad_buffer(bn);
            CMapMat A(ac.data().data() + static_cast<std::size_t>(bi) * m * k, m, k);
            MapMat GB(gb.data() + static_cast<std::size_t>(bi) * k * n, k, n);
            GB.noalias() += A.transpose() * G;
          }
        }
      });
}

Tensor dense(const Tensor& x, const Tensor& weight) {
  return dense(x, weight, Tensor());
}

Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_defined(x, "dense");
  require_defined(weight, "dense");
  if (weight.rank() != 2 || x.rank() < 2) {
    throw DimensionError("dense: " + shape_str(x.shape()) + " with weight " +
                         shape_str(weight.shape()));
  }
  const int di = weight.dim(0), dout = weight.dim(1);
  if (x.dim(x.rank() - 1) != di) {
    throw DimensionError("dense: input " + shape_str(x.shape()) + " incompatible with weight " +
                         shape_str(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != dout)) {
    throw DimensionError("dense: bias " + shape_str(bias.shape()) + " for weight " +
                         shape_str(weight.shape()));
  }
  const std::int64_t rows = x.size() / di;
  const auto& xv = x.data();
  const auto& wv = weight.data();
  std::vector<double> out(static_cast<std::size_t>(rows) * dout);
  {
    CMapMat X(xv.data(), rows, di);
    CMapMat W(wv.data(), di, dout);
    MapMat Y(out.data(), rows, dout);
    Y.noalias() = X * W;
    if (has_bias) {
      const auto& bv = bias.data();
      Eigen::Map<const Eigen::RowVectorXd> Bv(bv.data(), dout);
      Y.rowwise() += Bv;
    }
  }
  Shape os = x.shape();
  os[os.size() - 1] = dout;
  Tape* tape = has_bias ? OpRecorder::tape_of(x, weight, bias) : OpRecorder::tape_of(x, weight);
  const int xn = x.node(), wn = weight.node(), bn2 = has_bias ? bias.node() : -1;
  Tensor xc = x, wc = weight;
  return OpRecorder::make(
      tape, std::move(os), std::move(out), "dense",
      [=](Tape& t, const std::vector<double>& g) {
        CMapMat G(g.data(), rows, dout);
        if (xn >= 0) {
          auto& gx = t.grad_buffer(xn);
          CMapMat W(wc.data().data(), di, dout);
          MapMat GX(gx.data(), rows, di);
          GX.noalias() += G * W.transpose();
        }
        if (wn >= 0) {
          auto& gw = t.grad_buffer(wn);
          CMapMat X(xc.data().data(), rows, di);
          MapMat GW(gw.data(), di, dout);
          GW.noalias() += X.transpose() * G;
        }
        if (bn2 >= 0) {
          auto& gb = t.grad_buffer(bn2);
          Eigen::Map<Eigen::RowVectorXd> GB(gb.data(), dout);
          GB += G.colwise().sum();
        }
      });
}

// ---- softmax / layer norm -------------------------------------------------

Tensor softmax(const Tensor& x, int axis) {
  require_defined(x, "softmax");
  if (axis < 0 || axis >= x.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for " +
                         shape_str(x.shape()));
  }
  const auto& s = x.shape();
  const std::int64_t outer = prod(s, 0, axis);
  const int n = s[static_cast<std::size_t>(axis)];
  const std::int64_t inner = prod(s, axis + 1, x.rank());
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t in = 0; in < inner; ++in) {
      const std::size_t base = static_cast<std::size_t>(o) * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) mx = std::max(mx, xv[base + static_cast<std::size_t>(i) * inner]);
      double denom = 0.0;
      for (int i = 0; i < n; ++i) {
        const double e = std::exp(xv[base + static_cast<std::size_t>(i) * inner] - mx);
        out[base + static_cast<std::size_t>(i) * inner] = e;
        denom += e;
      }
      const double inv = 1.0 / denom;
      for (int i = 0; i < n; ++i) out[base + static_cast<std::size_t>(i) * inner] *= inv;
    }
  }
  Tape* tape = OpRecorder::tape_of(x);
  const int xn = x.node();
  std::vector<double> ycopy = out;
  return OpRecorder::make(
      tape, x.shape(), std::move(out), "softmax",
      [xn, outer, n, inner, ycopy = std::move(ycopy)](Tape& t, const std::vector<double>& g) {
        if (xn < 0) return;
        auto& gx = t.grad_buffer(xn);
        for (std::int64_t o = 0; o < outer; ++o) {
          for (std::int64_t in = 0; in < inner; ++in) {
            const std::size_t base = static_cast<std::size_t>(o) * n * inner + in;
            double dot = 0.0;
            for (int i = 0; i < n; ++i) {
              const std::size_t idx = base + static_cast<std::size_t>(i) * inner;
              dot += g[idx] * ycopy[idx];
            }
            for (int i = 0; i < n; ++i) {
              const std::size_t idx = base + static_cast<std::size_t>(i) * inner;
              gx[idx] += ycopy[idx] * (g[idx] - dot);
            }
          }
        }
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_defined(x, "layer_norm");
  require_defined(gain, "layer_norm");
  require_defined(bias, "layer_norm");
  if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be positive");
  const int d = x.dim(x.rank() - 1);
  if (gain.rank() != 1 || gain.dim(0) != d || bias.rank() != 1 || bias.dim(0) != d) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " for input " + shape_str(x.shape()));
  }
  const std::int64_t rows = x.size() / d;
  const auto& xv = x.data();
  const auto& gv = gain.data();
  const auto& bv = bias.data();
  std::vector<double> out(xv.size());
  std::vector<double> stats(static_cast<std::size_t>(rows) * 2);  // mean, inv-std
  for (std::int64_t r = 0; r < rows; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * d;
    double mean = 0.0;
    for (int i = 0; i < d; ++i) mean += xv[base + i];
    mean /= d;
    double var = 0.0;
    for (int i = 0; i < d; ++i) {
      const double c = xv[base + i] - mean;
      var += c * c;
    }
    var /= d;
    const double inv = 1.0 / std::sqrt(var + eps);
    stats[static_cast<std::size_t>(r) * 2] = mean;
    stats[static_cast<std::size_t>(r) * 2 + 1] = inv;
    for (int i = 0; i < d; ++i) {
      out[base + i] = gv[i] * (xv[base + i] - mean) * inv + bv[i];
    }
  }
  Tape* tape = OpRecorder::tape_of(x, gain, bias);
  const int xn = x.node(), gn = gain.node(), bn = bias.node();
  Tensor xc = x, gc = gain;
  return OpRecorder::make(
      tape, x.shape(), std::move(out), "layer_norm",
      [=, stats = std::move(stats)](Tape& t, const std::vector<double>& g) {
        const auto& xv2 = xc.data();
        const auto& gv2 = gc.data();
        for (std::int64_t r = 0; r < rows; ++r) {
          const std::size_t base = static_cast<std::size_t>(r) * d;
          const double mean = stats[static_cast<std::size_t>(r) * 2];
          const double inv = stats[static_cast<std::size_t>(r) * 2 + 1];
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (int i = 0; i < d; ++i) {
            const double xhat = (xv2[base + i] - mean) * inv;
            const double dxhat = g[base + i] * gv2[i];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
          }
          if (xn >= 0) {
            auto& gx = t.grad_buffer(xn);
            for (int i = 0; i < d; ++i) {
              const double xhat = (xv2[base + i] - mean) * inv;
              const double dxhat = g[base + i] * gv2[i];
              gx[base + i] += inv * (dxhat - sum_dxhat / d - xhat * sum_dxhat_xhat / d);
            }
          }
          if (gn >= 0) {
            auto& gg = t.grad_buffer(gn);
            for (int i = 0; i < d; ++i) {
              const double xhat = (xv2[base + i] - mean) * inv;
              gg[i] += g[base + i] * xhat;
            }
          }
          if (bn >= 0) {
            auto& gb = t.grad_buffer(bn);
            for (int i = 0; i < d; ++i) gb[i] += g[base + i];
          }
        }
      });
}

// ---- conv1d ----------------------------------------------------------------

namespace {

// col[(c*k + j), t] = x[c, t + j - left_pad], zero outside [0, L).
void im2col(const double* x, int ci, int L, int k, int left_pad, std::vector<double>& col) {
  col.assign(static_cast<std::size_t>(ci) * k * L, 0.0);
  for (int c = 0; c < ci; ++c) {
    for (int j = 0; j < k; ++j) {
      const int off = j - left_pad;
      double* dst = col.data() + (static_cast<std::size_t>(c) * k + j) * L;
      const double* src = x + static_cast<std::size_t>(c) * L;
      const int lo = std::max(0, -off);
      const int hi = std::min(L, L - off);
      for (int t = lo; t < hi; ++t) dst[t] = src[t + off];
    }
  }
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias, PadMode pad) {
  require_defined(x, "conv1d");
  require_defined(kernels, "conv1d");
  require_defined(bias, "conv1d");
  if (kernels.rank() != 3) {
    throw DimensionError("conv1d: kernels must be [out x in x k], got " +
                         shape_str(kernels.shape()));
  }
  const int co = kernels.dim(0), ci = kernels.dim(1), k = kernels.dim(2);
  if (pad == PadMode::kSame && k % 2 == 0) {
    throw ConfigError("conv1d: same padding requires an odd kernel size, got " +
                      std::to_string(k));
  }
  if (x.rank() != 2 && x.rank() != 3) {
    throw DimensionError("conv1d: input must be [in x L] or [B x in x L], got " +
                         shape_str(x.shape()));
  }
  const int B = x.rank() == 3 ? x.dim(0) : 1;
  const int xci = x.dim(x.rank() - 2), L = x.dim(x.rank() - 1);
  if (xci != ci) {
    throw DimensionError("conv1d: input channels " + shape_str(x.shape()) +
                         " vs kernels " + shape_str(kernels.shape()));
  }
  if (bias.rank() != 1 || bias.dim(0) != co) {
    throw DimensionError("conv1d: bias " + shape_str(bias.shape()) + " for " +
                         std::to_string(co) + " output channels");
  }
  const int left_pad = pad == PadMode::kSame ? (k - 1) / 2 : k - 1;

  const auto& xv = x.data();
  const auto& wv = kernels.data();
  const auto& bv = bias.data();
  std::vector<double> out(static_cast<std::size_t>(B) * co * L);
  std::vector<double> col;
  for (int b = 0; b < B; ++b) {
    im2col(xv.data() + static_cast<std::size_t>(b) * ci * L, ci, L, k, left_pad, col);
    CMapMat W(wv.data(), co, ci * k);
    CMapMat Col(col.data(), ci * k, L);
    MapMat Y(out.data() + static_cast<std::size_t>(b) * co * L, co, L);
    Y.noalias() = W * Col;
    for (int o = 0; o < co; ++o) Y.row(o).array() += bv[o];
  }
  Shape os = x.shape();
  os[os.size() - 2] = co;
  Tape* tape = OpRecorder::tape_of(x, kernels, bias);
  const int xn = x.node(), wn = kernels.node(), bn = bias.node();
  Tensor xc = x, wc = kernels;
  return OpRecorder::make(
      tape, std::move(os), std::move(out), "conv1d",
      [=](Tape& t, const std::vector<double>& g) {
        std::vector<double> col2;
        const auto& xv2 = xc.data();
        const auto& wv2 = wc.data();
        for (int b = 0; b < B; ++b) {
          CMapMat G(g.data() + static_cast<std::size_t>(b) * co * L, co, L);
          if (wn >= 0) {
            im2col(xv2.data() + static_cast<std::size_t>(b) * ci * L, ci, L, k, left_pad, col2);
            CMapMat Col(col2.data(), ci * k, L);
            auto& gw = t.grad_buffer(wn);
            MapMat GW(gw.data(), co, ci * k);
            GW.noalias() += G * Col.transpose();
          }
          if (bn >= 0) {
            auto& gb = t.grad_buffer(bn);
            for (int o = 0; o < co; ++o) gb[o] += G.row(o).sum();
          }
          if (xn >= 0) {
            CMapMat W(wv2.data(), co, ci * k);
            RowMat GCol = W.transpose() * G;  // [ci*k x L]
            auto& gx = t.grad_buffer(xn);
            double* gxb = gx.data() + static_cast<std::size_t>(b) * ci * L;
            for (int c = 0; c < ci; ++c) {
              for (int j = 0; j < k; ++j) {
                const int off = j - left_pad;
                const int lo = std::max(0, -off);
                const int hi = std::min(L, L - off);
                const double* src = GCol.data() + (static_cast<std::size_t>(c) * k + j) * L;
                for (int tpos = lo; tpos < hi; ++tpos) {
                  gxb[static_cast<std::size_t>(c) * L + tpos + off] += src[tpos];
                }
              }
            }
          }
        }
      });
}

// ---- pooling ----------------------------------------------------------------

Tensor global_maxpool(const Tensor& x) {
  require_defined(x, "global_maxpool");
  if (x.rank() < 1) throw DimensionError("global_maxpool: scalar input");
  const int L = x.dim(x.rank() - 1);
  const std::int64_t outer = x.size() / L;
  const auto& xv = x.data();
  std::vector<double> out(static_cast<std::size_t>(outer));
  std::vector<int> argmax(static_cast<std::size_t>(outer));
  for (std::int64_t o = 0; o < outer; ++o) {
    const std::size_t base = static_cast<std::size_t>(o) * L;
    int best = 0;
    for (int i = 1; i < L; ++i) {
      if (xv[base + i] > xv[base + best]) best = i;
    }
    argmax[static_cast<std::size_t>(o)] = best;
    out[static_cast<std::size_t>(o)] = xv[base + best];
  }
  Shape os(x.shape().begin(), x.shape().end() - 1);
  if (os.empty()) os = {1};
  Tape* tape = OpRecorder::tape_of(x);
  const int xn = x.node();
  return OpRecorder::make(tape, std::move(os), std::move(out), "global_maxpool",
                          [xn, L, outer, argmax = std::move(argmax)](
                              Tape& t, const std::vector<double>& g) {
                            if (xn < 0) return;
                            auto& gx = t.grad_buffer(xn);
                            for (std::int64_t o = 0; o < outer; ++o) {
                              gx[static_cast<std::size_t>(o) * L +
                                 argmax[static_cast<std::size_t>(o)]] += g[static_cast<std::size_t>(o)];
                            }
                          });
}

Tensor cummax_last(const Tensor& x) {
  require_defined(x, "cummax_last");
  if (x.rank() < 1) throw DimensionError("cummax_last: scalar input");
  const int L = x.dim(x.rank() - 1);
  const std::int64_t outer = x.size() / L;
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  std::vector<int> argmax(xv.size());
  for (std::int64_t o = 0; o < outer; ++o) {
    const std::size_t base = static_cast<std::size_t>(o) * L;
    int best = 0;
    for (int i = 0; i < L; ++i) {
      if (xv[base + i] > xv[base + best]) best = i;
      argmax[base + i] = best;
      out[base + i] = xv[base + best];
    }
  }
  Tape* tape = OpRecorder::tape_of(x);
  const int xn = x.node();
  return OpRecorder::make(tape, x.shape(), std::move(out), "cummax_last",
                          [xn, L, outer, argmax = std::move(argmax)](
                              Tape& t, const std::vector<double>& g) {
                            if (xn < 0) return;
                            auto& gx = t.grad_buffer(xn);
                            for (std::int64_t o = 0; o < outer; ++o) {
                              const std::size_t base = static_cast<std::size_t>(o) * L;
                              for (int i = 0; i < L; ++i) {
                                gx[base + argmax[base + i]] += g[base + i];
                              }
                            }
                          });
}

// ---- concat -----------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const int rank = parts[0].rank();
  if (axis < 0 || axis >= rank) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " invalid for rank " +
                         std::to_string(rank));
  }
  int axis_total = 0;
  for (const auto& p : parts) {
    require_defined(p, "concat");
    if (p.rank() != rank) throw DimensionError("concat: rank mismatch");
    for (int i = 0; i < rank; ++i) {
      if (i != axis && p.dim(i) != parts[0].dim(i)) {
        throw DimensionError("concat: " + shape_str(p.shape()) + " vs " +
                             shape_str(parts[0].shape()));
      }
    }
    axis_total += p.dim(axis);
  }
  Shape os = parts[0].shape();
  os[static_cast<std::size_t>(axis)] = axis_total;
  const std::int64_t outer = prod(os, 0, axis);
  const std::int64_t inner = prod(os, axis + 1, rank);

  std::vector<double> out(static_cast<std::size_t>(shape_size(os)));
  std::vector<int> part_axis(parts.size());
  std::vector<int> part_nodes(parts.size());
  for (std::size_t p = 0; p < parts.size(); ++p) {
    part_axis[p] = parts[p].dim(axis);
    part_nodes[p] = parts[p].node();
  }
  std::size_t dst_off = 0;
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const std::size_t chunk = static_cast<std::size_t>(part_axis[p]) * inner;
      const auto& pv = parts[p].data();
      std::memcpy(out.data() + dst_off, pv.data() + static_cast<std::size_t>(o) * chunk,
                  chunk * sizeof(double));
      dst_off += chunk;
    }
  }
  Tape* tape = OpRecorder::tape_of_list(parts);
  return OpRecorder::make(
      tape, std::move(os), std::move(out), "concat",
      [outer, inner, part_axis, part_nodes](Tape& t, const std::vector<double>& g) {
        std::size_t src_off = 0;
        for (std::int64_t o = 0; o < outer; ++o) {
          for (std::size_t p = 0; p < part_axis.size(); ++p) {
            const std::size_t chunk = static_cast<std::size_t>(part_axis[p]) * inner;
            if (part_nodes[p] >= 0) {
              auto& gp = t.grad_buffer(part_nodes[p]);
              double* dst = gp.data() + static_cast<std::size_t>(o) * chunk;
              for (std::size_t i = 0; i < chunk; ++i) dst[i] += g[src_off + i];
            }
            src_off += chunk;
          }
        }
      });
}

// ---- embedding / loss --------------------------------------------------------

Tensor embedding_lookup(const Tensor& table, const IdMatrix& ids) {
  require_defined(table, "embedding_lookup");
  if (table.rank() != 2) {
    throw DimensionError("embedding_lookup: table must be [V x d], got " +
                         shape_str(table.shape()));
  }
  const int V = table.dim(0), d = table.dim(1);
  if (ids.rows <= 0 || ids.cols <= 0 ||
      ids.ids.size() != static_cast<std::size_t>(ids.rows) * ids.cols) {
    throw DimensionError("embedding_lookup: malformed id matrix");
  }
  const auto& tv = table.data();
  std::vector<double> out(static_cast<std::size_t>(ids.rows) * ids.cols * d);
  for (std::size_t i = 0; i < ids.ids.size(); ++i) {
    const int id = ids.ids[i];
    if (id < 0 || id >= V) {
      throw DataError("embedding_lookup: token id " + std::to_string(id) +
                      " outside vocabulary of size " + std::to_string(V));
    }
    std::memcpy(out.data() + i * d, tv.data() + static_cast<std::size_t>(id) * d,
                static_cast<std::size_t>(d) * sizeof(double));
  }
  Tape* tape = OpRecorder::tape_of(table);
  const int tn = table.node();
  std::vector<int> idcopy = ids.ids;
  return OpRecorder::make(tape, {ids.rows, ids.cols, d}, std::move(out), "embedding_lookup",
                          [tn, d, idcopy = std::move(idcopy)](Tape& t,
                                                              const std::vector<double>& g) {
                            if (tn < 0) return;
                            auto& gt = t.grad_buffer(tn);
                            for (std::size_t i = 0; i < idcopy.size(); ++i) {
                              double* dst = gt.data() + static_cast<std::size_t>(idcopy[i]) * d;
                              const double* src = g.data() + i * d;
                              for (int j = 0; j < d; ++j) dst[j] += src[j];
                            }
                          });
}

Tensor cross_entropy_with_logits(const Tensor& logits, const IdMatrix& targets,
                                 const std::vector<std::uint8_t>& mask) {
  require_defined(logits, "cross_entropy_with_logits");
  if (logits.rank() != 3) {
    throw DimensionError("cross_entropy_with_logits: logits must be [B x L x V], got " +
                         shape_str(logits.shape()));
  }
  const int B = logits.dim(0), L = logits.dim(1), V = logits.dim(2);
  if (targets.rows != B || targets.cols != L) {
    throw DimensionError("cross_entropy_with_logits: targets " + std::to_string(targets.rows) +
                         "x" + std::to_string(targets.cols) + " vs logits " +
                         shape_str(logits.shape()));
  }
  if (mask.size() != static_cast<std::size_t>(B) * L) {
    throw DimensionError("cross_entropy_with_logits: mask size mismatch");
  }
  std::int64_t count = 0;
  for (auto m : mask) count += m ? 1 : 0;
  if (count == 0) throw ContractError("cross_entropy_with_logits: every position is masked out");

  const auto& lv = logits.data();
  double total = 0.0;
  for (std::size_t pos = 0; pos < mask.size(); ++pos) {
    if (!mask[pos]) continue;
    const int target = targets.ids[pos];
    if (target < 0 || target >= V) {
      throw DataError("cross_entropy_with_logits: target id " + std::to_string(target) +
                      " outside vocabulary of size " + std::to_string(V));
    }
    const double* row = lv.data() + pos * V;
    double mx = row[0];
    for (int v = 1; v < V; ++v) mx = std::max(mx, row[v]);
    double denom = 0.0;
    for (int v = 0; v < V; ++v) denom += std::exp(row[v] - mx);
    total += mx + std::log(denom) - row[target];
  }
  const double mean_loss = total / static_cast<double>(count);

  Tape* tape = OpRecorder::tape_of(logits);
  const int ln = logits.node();
  Tensor lc = logits;
  std::vector<int> tcopy = targets.ids;
  std::vector<std::uint8_t> mcopy = mask;
  return OpRecorder::make(
      tape, {1}, {mean_loss}, "cross_entropy_with_logits",
      [ln, V, count, lc, tcopy = std::move(tcopy), mcopy = std::move(mcopy)](
          Tape& t, const std::vector<double>& g) {
        if (ln < 0) return;
        auto& gl = t.grad_buffer(ln);
        const auto& lv2 = lc.data();
        const double w = g[0] / static_cast<double>(count);
        for (std::size_t pos = 0; pos < mcopy.size(); ++pos) {
          if (!mcopy[pos]) continue;
          const double* row = lv2.data() + pos * V;
          double* grow = gl.data() + pos * V;
          double mx = row[0];
          for (int v = 1; v < V; ++v) mx = std::max(mx, row[v]);
          double denom = 0.0;
          for (int v = 0; v < V; ++v) denom += std::exp(row[v] - mx);
          const double inv = 1.0 / denom;
          for (int v = 0; v < V; ++v) {
            grow[v] += w * (std::exp(row[v] - mx) * inv - (v == tcopy[pos] ? 1.0 : 0.0));
          }
        }
      });
}

Tensor straight_through(const Tensor& x, const Tensor& values) {
  require_defined(x, "straight_through");
  require_defined(values, "straight_through");
  require_same_shape(x, values, "straight_through");
  Tape* tape = OpRecorder::tape_of(x);
  const int xn = x.node();
  return OpRecorder::make_view(tape, x.shape(), values, "straight_through",
                               [xn](Tape& t, const std::vector<double>& g) {
                                 if (xn < 0) return;
                                 auto& gx = t.grad_buffer(xn);
                                 for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                               });
}

}  // namespace semcom
