#include "svl/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "svl/error.hpp"

namespace svl {

namespace {

std::atomic<std::uint64_t> g_next_id{1};
thread_local Tape* t_active_tape = nullptr;

void require(bool ok, const char* kind, const std::string& message) {
  if (!ok) throw Error(kind, message);
}

bool any_grad(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts)
    if (t->requires_grad()) return true;
  return false;
}

// Records only when someone downstream can use the gradient.
void maybe_record(std::vector<Tensor> inputs, const Tensor& out, BackwardRule rule) {
  Tape* tape = Tape::active();
  if (tape == nullptr || !out.requires_grad()) return;
  tape->record(std::move(inputs), out, std::move(rule));
}

// Splits a shape around `axis` into (outer, extent, inner) for strided loops.
struct AxisView {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

void check_axis(const Tensor& t, std::size_t axis) {
  require(axis < t.rank(), err::kRange,
          "axis " + std::to_string(axis) + " out of range for shape " +
              shape_str(t.shape()));
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  for (std::size_t d : shape)
    require(d >= 1, err::kShape, "zero-sized dimension in " + shape_str(shape));
  require(values.size() == shape_size(shape), err::kShape,
          "shape " + shape_str(shape) + " needs " +
              std::to_string(shape_size(shape)) + " values, got " +
              std::to_string(values.size()));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  node->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  node_ = std::move(node);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({}, {value}, requires_grad);
}

double Tensor::item() const {
  require(size() == 1, err::kShape, "item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

Tensor Tensor::detach() const { return Tensor(shape(), values(), false); }

Tensor make_result(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

// ---- Gradients ------------------------------------------------------------

const std::vector<double>* Gradients::find(const Tensor& t) const {
  return find_id(t.id());
}

const std::vector<double>* Gradients::find_id(std::uint64_t id) const {
  auto it = grads_.find(id);
  return it == grads_.end() ? nullptr : &it->second;
}

std::vector<double> Gradients::get(const Tensor& t) const {
  const auto* g = find(t);
  return g ? *g : std::vector<double>(t.size(), 0.0);
}

std::vector<double>& Gradients::slot(std::uint64_t id, std::size_t size) {
  auto& g = grads_[id];
  if (g.empty()) g.assign(size, 0.0);
  return g;
}

// ---- Tape -----------------------------------------------------------------

Tape::Scope::Scope(Tape& tape) : previous_(t_active_tape) { t_active_tape = &tape; }
Tape::Scope::~Scope() { t_active_tape = previous_; }

Tape* Tape::active() { return t_active_tape; }

void Tape::record(std::vector<Tensor> inputs, const Tensor& output, BackwardRule rule) {
  records_.push_back(Record{std::move(inputs), output.id(), output.size(), std::move(rule)});
}

Gradients Tape::backward(const Tensor& loss) const {
  require(loss.size() == 1, err::kShape,
          "backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  Gradients grads;
  grads.slot(loss.id(), 1)[0] = 1.0;
  std::vector<std::vector<double>*> slots;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    const Record& rec = *it;
    // unordered_map nodes are address-stable, so this stays valid while
    // input slots are inserted below.
    const std::vector<double>* gout = grads.find_id(rec.output_id);
    if (gout == nullptr) continue;
    slots.assign(rec.inputs.size(), nullptr);
    for (std::size_t i = 0; i < rec.inputs.size(); ++i) {
      const Tensor& in = rec.inputs[i];
      if (in.requires_grad()) slots[i] = &grads.slot(in.id(), in.size());
    }
    rec.rule(*gout, slots);
  }
  return grads;
}

bool Tape::topological() const {
  std::unordered_map<std::uint64_t, std::size_t> producer;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    for (const Tensor& in : records_[i].inputs) {
      auto it = producer.find(in.id());
      if (it != producer.end() && it->second >= i) return false;
    }
    if (!producer.emplace(records_[i].output_id, i).second) return false;
  }
  return true;
}

// ---- elementwise ----------------------------------------------------------

Tensor ew(EwKind kind, const Tensor& a, const Tensor& b) {
  const bool bcast = b.rank() == 0 && a.rank() != 0;
  if (kind != EwKind::square) {
    require(bcast || a.shape() == b.shape(), err::kShape,
            "elementwise shapes " + shape_str(a.shape()) + " and " +
                shape_str(b.shape()) + " differ");
  }
  const std::size_t n = a.size();
  auto bv = [&](std::size_t i) { return bcast ? b[0] : b[i]; };
  std::vector<double> out(n);
  switch (kind) {
    case EwKind::add:
      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + bv(i);
      break;
    case EwKind::sub:
      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - bv(i);
      break;
    case EwKind::mul:
    case EwKind::scale:
      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * bv(i);
      break;
    case EwKind::square:
      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * a[i];
      break;
  }
  const bool rg = kind == EwKind::square ? a.requires_grad() : any_grad({&a, &b});
  Tensor result = make_result(a.shape(), std::move(out), rg);
  if (kind == EwKind::square) {
    maybe_record({a}, result, [a](std::span<const double> g, std::span<std::vector<double>*> gi) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += 2.0 * a[i] * g[i];
    });
    return result;
  }
  maybe_record({a, b}, result,
               [a, b, kind, bcast](std::span<const double> g, std::span<std::vector<double>*> gi) {
                 auto bv = [&](std::size_t i) { return bcast ? b[0] : b[i]; };
                 auto acc_b = [&](std::size_t i, double v) {
                   (*gi[1])[bcast ? 0 : i] += v;
                 };
                 for (std::size_t i = 0; i < g.size(); ++i) {
                   switch (kind) {
                     case EwKind::add:
                       if (gi[0]) (*gi[0])[i] += g[i];
                       if (gi[1]) acc_b(i, g[i]);
                       break;
                     case EwKind::sub:
                       if (gi[0]) (*gi[0])[i] += g[i];
                       if (gi[1]) acc_b(i, -g[i]);
                       break;
                     default:
                       if (gi[0]) (*gi[0])[i] += bv(i) * g[i];
                       if (gi[1]) acc_b(i, a[i] * g[i]);
                       break;
                   }
                 }
               });
  return result;
}

Tensor ew(EwKind kind, const Tensor& a, double b) {
  return ew(kind, a, Tensor::scalar(b));
}

Tensor add(const Tensor& a, const Tensor& b) { return ew(EwKind::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return ew(EwKind::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return ew(EwKind::mul, a, b); }
Tensor scale(const Tensor& a, double s) { return ew(EwKind::scale, a, s); }
Tensor square(const Tensor& a) { return ew(EwKind::square, a, 0.0); }
Tensor add_scalar(const Tensor& a, double s) { return ew(EwKind::add, a, s); }

Tensor exp(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a[i]);
  Tensor result = make_result(a.shape(), out, a.requires_grad());
  maybe_record({a}, result, [out](std::span<const double> g, std::span<std::vector<double>*> gi) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += out[i] * g[i];
  });
  return result;
}

// ---- linear algebra -------------------------------------------------------

namespace {

// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() >= 2 && b.rank() == 2, err::kShape,
          "matmul needs ...xMxK and KxN, got " + shape_str(a.shape()) + " and " +
              shape_str(b.shape()));
  const std::size_t k = a.shape().back();
  require(k == b.dim(0), err::kShape,
          "matmul inner dimensions differ: " + shape_str(a.shape()) + " vs " +
              shape_str(b.shape()));
  const std::size_t m = a.size() / k;
  const std::size_t n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  Shape shape = a.shape();
  shape.back() = n;
  Tensor result = make_result(shape, std::move(out), any_grad({&a, &b}));
  maybe_record({a, b}, result,
               [a, b, m, k, n](std::span<const double> g, std::span<std::vector<double>*> gi) {
                 const double* ad = a.data().data();
                 const double* bd = b.data().data();
                 if (gi[0]) {
                   // grad_a = g * b^T
                   auto& ga = *gi[0];
                   for (std::size_t i = 0; i < m; ++i)
                     for (std::size_t p = 0; p < k; ++p) {
                       double s = 0.0;
                       const double* bp = bd + p * n;
                       const double* gr = g.data() + i * n;
                       for (std::size_t j = 0; j < n; ++j) s += gr[j] * bp[j];
                       ga[i * k + p] += s;
                     }
                 }
                 if (gi[1]) {
                   // grad_b = a^T * g
                   auto& gb = *gi[1];
                   for (std::size_t i = 0; i < m; ++i)
                     for (std::size_t p = 0; p < k; ++p) {
                       const double av = ad[i * k + p];
                       if (av == 0.0) continue;
                       const double* gr = g.data() + i * n;
                       double* gbp = gb.data() + p * n;
                       for (std::size_t j = 0; j < n; ++j) gbp[j] += av * gr[j];
                     }
                 }
               });
  return result;
}

Tensor transpose(const Tensor& a) {
  require(a.rank() == 2, err::kShape, "transpose needs rank 2, got " + shape_str(a.shape()));
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  Tensor result = make_result({c, r}, std::move(out), a.requires_grad());
  maybe_record({a}, result, [r, c](std::span<const double> g, std::span<std::vector<double>*> gi) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*gi[0])[i * c + j] += g[j * r + i];
  });
  return result;
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(shape_size(shape) == a.size(), err::kShape,
          "cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
  Tensor result = make_result(std::move(shape), a.values(), a.requires_grad());
  maybe_record({a}, result, [](std::span<const double> g, std::span<std::vector<double>*> gi) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
  });
  return result;
}

Tensor add_row_bias(const Tensor& a, const Tensor& bias) {
  require(a.rank() == 2 && bias.rank() == 1 && bias.dim(0) == a.dim(1), err::kShape,
          "row bias " + shape_str(bias.shape()) + " does not fit " + shape_str(a.shape()));
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(a.values());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bias[j];
  Tensor result = make_result(a.shape(), std::move(out), any_grad({&a, &bias}));
  maybe_record({a, bias}, result,
               [r, c](std::span<const double> g, std::span<std::vector<double>*> gi) {
                 if (gi[0])
                   for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
                 if (gi[1])
                   for (std::size_t i = 0; i < r; ++i)
                     for (std::size_t j = 0; j < c; ++j) (*gi[1])[j] += g[i * c + j];
               });
  return result;
}

// ---- reductions -----------------------------------------------------------

Tensor reduce(const Tensor& t, std::size_t axis, ReduceKind kind) {
  check_axis(t, axis);
  const AxisView v = axis_view(t.shape(), axis);
  Shape out_shape = t.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<double> out(v.outer * v.inner, 0.0);
  std::vector<std::size_t> argmax;
  if (kind == ReduceKind::max) argmax.assign(out.size(), 0);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.extent * v.inner + in;
      const std::size_t dst = o * v.inner + in;
      if (kind == ReduceKind::max) {
        std::size_t best = base;
        for (std::size_t e = 1; e < v.extent; ++e) {
          const std::size_t idx = base + e * v.inner;
          if (t[idx] > t[best]) best = idx;  // strict: first maximum wins
        }
        out[dst] = t[best];
        argmax[dst] = best;
      } else {
        double s = 0.0;
        for (std::size_t e = 0; e < v.extent; ++e) s += t[base + e * v.inner];
        out[dst] = kind == ReduceKind::mean ? s / static_cast<double>(v.extent) : s;
      }
    }
  Tensor result = make_result(std::move(out_shape), std::move(out), t.requires_grad());
  maybe_record({t}, result,
               [v, kind, argmax = std::move(argmax)](std::span<const double> g,
                                                     std::span<std::vector<double>*> gi) {
                 auto& gt = *gi[0];
                 if (kind == ReduceKind::max) {
                   for (std::size_t i = 0; i < g.size(); ++i) gt[argmax[i]] += g[i];
                   return;
                 }
                 const double f = kind == ReduceKind::mean ? 1.0 / static_cast<double>(v.extent) : 1.0;
                 for (std::size_t o = 0; o < v.outer; ++o)
                   for (std::size_t in = 0; in < v.inner; ++in) {
                     const double gv = g[o * v.inner + in] * f;
                     const std::size_t base = o * v.extent * v.inner + in;
                     for (std::size_t e = 0; e < v.extent; ++e) gt[base + e * v.inner] += gv;
                   }
               });
  return result;
}

Tensor sum(const Tensor& t, std::size_t axis) { return reduce(t, axis, ReduceKind::sum); }
Tensor mean(const Tensor& t, std::size_t axis) { return reduce(t, axis, ReduceKind::mean); }
Tensor max(const Tensor& t, std::size_t axis) { return reduce(t, axis, ReduceKind::max); }

Tensor sum_all(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  Tensor result = make_result({}, {s}, t.requires_grad());
  maybe_record({t}, result, [](std::span<const double> g, std::span<std::vector<double>*> gi) {
    for (double& v : *gi[0]) v += g[0];
  });
  return result;
}

// ---- normalization and softmax --------------------------------------------

Tensor normalize_l2(const Tensor& t, std::size_t axis) {
  check_axis(t, axis);
  constexpr double kEps = 1e-12;
  const AxisView v = axis_view(t.shape(), axis);
  std::vector<double> out(t.size());
  std::vector<double> norms(v.outer * v.inner);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.extent * v.inner + in;
      double ss = 0.0;
      for (std::size_t e = 0; e < v.extent; ++e) ss += t[base + e * v.inner] * t[base + e * v.inner];
      const double norm = std::sqrt(ss);
      require(norm > kEps, err::kDegenerate, "cannot normalize a zero-norm slice");
      norms[o * v.inner + in] = norm;
      for (std::size_t e = 0; e < v.extent; ++e)
        out[base + e * v.inner] = t[base + e * v.inner] / norm;
    }
  Tensor result = make_result(t.shape(), out, t.requires_grad());
  // d(x/|x|) = (g - y (y.g)) / |x|
  maybe_record({t}, result,
               [v, out, norms](std::span<const double> g, std::span<std::vector<double>*> gi) {
                 auto& gt = *gi[0];
                 for (std::size_t o = 0; o < v.outer; ++o)
                   for (std::size_t in = 0; in < v.inner; ++in) {
                     const std::size_t base = o * v.extent * v.inner + in;
                     double dot = 0.0;
                     for (std::size_t e = 0; e < v.extent; ++e)
                       dot += out[base + e * v.inner] * g[base + e * v.inner];
                     const double inv = 1.0 / norms[o * v.inner + in];
                     for (std::size_t e = 0; e < v.extent; ++e) {
                       const std::size_t idx = base + e * v.inner;
                       gt[idx] += (g[idx] - out[idx] * dot) * inv;
                     }
                   }
               });
  return result;
}

namespace {

std::vector<double> log_softmax_values(const Tensor& t, const AxisView& v) {
  for (double x : t.data())
    require(std::isfinite(x), err::kNumeric, "softmax input contains NaN or Inf");
  std::vector<double> out(t.size());
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.extent * v.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < v.extent; ++e) mx = std::max(mx, t[base + e * v.inner]);
      double s = 0.0;
      for (std::size_t e = 0; e < v.extent; ++e) s += std::exp(t[base + e * v.inner] - mx);
      const double lse = mx + std::log(s);
      for (std::size_t e = 0; e < v.extent; ++e)
        out[base + e * v.inner] = t[base + e * v.inner] - lse;
    }
  return out;
}

}  // namespace

Tensor softmax(const Tensor& t, std::size_t axis) {
  check_axis(t, axis);
  const AxisView v = axis_view(t.shape(), axis);
  std::vector<double> out = log_softmax_values(t, v);
  for (double& x : out) x = std::exp(x);
  Tensor result = make_result(t.shape(), out, t.requires_grad());
  // dx = y * (g - sum(y g))
  maybe_record({t}, result, [v, out](std::span<const double> g, std::span<std::vector<double>*> gi) {
    auto& gt = *gi[0];
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t in = 0; in < v.inner; ++in) {
        const std::size_t base = o * v.extent * v.inner + in;
        double dot = 0.0;
        for (std::size_t e = 0; e < v.extent; ++e) dot += out[base + e * v.inner] * g[base + e * v.inner];
        for (std::size_t e = 0; e < v.extent; ++e) {
          const std::size_t idx = base + e * v.inner;
          gt[idx] += out[idx] * (g[idx] - dot);
        }
      }
  });
  return result;
}

Tensor log_softmax(const Tensor& t, std::size_t axis) {
  check_axis(t, axis);
  const AxisView v = axis_view(t.shape(), axis);
  std::vector<double> out = log_softmax_values(t, v);
  Tensor result = make_result(t.shape(), out, t.requires_grad());
  // dx = g - softmax * sum(g)
  maybe_record({t}, result, [v, out](std::span<const double> g, std::span<std::vector<double>*> gi) {
    auto& gt = *gi[0];
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t in = 0; in < v.inner; ++in) {
        const std::size_t base = o * v.extent * v.inner + in;
        double gs = 0.0;
        for (std::size_t e = 0; e < v.extent; ++e) gs += g[base + e * v.inner];
        for (std::size_t e = 0; e < v.extent; ++e) {
          const std::size_t idx = base + e * v.inner;
          gt[idx] += g[idx] - std::exp(out[idx]) * gs;
        }
      }
  });
  return result;
}

// ---- structural -----------------------------------------------------------

Tensor stack(std::span<const Tensor> parts) {
  require(!parts.empty(), err::kShape, "stack of zero tensors");
  const Shape& inner = parts[0].shape();
  std::vector<double> out;
  out.reserve(parts.size() * parts[0].size());
  bool rg = false;
  for (const Tensor& p : parts) {
    require(p.shape() == inner, err::kShape,
            "stack shapes differ: " + shape_str(inner) + " vs " + shape_str(p.shape()));
    out.insert(out.end(), p.data().begin(), p.data().end());
    rg = rg || p.requires_grad();
  }
  Shape shape{parts.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  Tensor result = make_result(std::move(shape), std::move(out), rg);
  const std::size_t chunk = parts[0].size();
  maybe_record(std::vector<Tensor>(parts.begin(), parts.end()), result,
               [chunk](std::span<const double> g, std::span<std::vector<double>*> gi) {
                 for (std::size_t p = 0; p < gi.size(); ++p) {
                   if (!gi[p]) continue;
                   for (std::size_t i = 0; i < chunk; ++i) (*gi[p])[i] += g[p * chunk + i];
                 }
               });
  return result;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  require(!parts.empty(), err::kShape, "concat of zero tensors");
  const std::size_t rows = parts[0].dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    require(p.rank() == 2 && p.dim(0) == rows, err::kShape,
            "concat_cols row counts differ: " + shape_str(p.shape()));
    widths.push_back(p.dim(1));
    total += p.dim(1);
    rg = rg || p.requires_grad();
  }
  std::vector<double> out(rows * total);
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < widths[p]; ++c)
        out[r * total + off + c] = parts[p][r * widths[p] + c];
    off += widths[p];
  }
  Tensor result = make_result({rows, total}, std::move(out), rg);
  maybe_record(std::vector<Tensor>(parts.begin(), parts.end()), result,
               [rows, total, widths](std::span<const double> g, std::span<std::vector<double>*> gi) {
                 std::size_t off = 0;
                 for (std::size_t p = 0; p < gi.size(); ++p) {
                   if (gi[p])
                     for (std::size_t r = 0; r < rows; ++r)
                       for (std::size_t c = 0; c < widths[p]; ++c)
                         (*gi[p])[r * widths[p] + c] += g[r * total + off + c];
                   off += widths[p];
                 }
               });
  return result;
}

Tensor slice_cols(const Tensor& t, std::size_t begin, std::size_t count) {
  require(t.rank() == 2 && count >= 1 && begin + count <= t.dim(1), err::kRange,
          "column slice out of range for " + shape_str(t.shape()));
  const std::size_t rows = t.dim(0), cols = t.dim(1);
  std::vector<double> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < count; ++c) out[r * count + c] = t[r * cols + begin + c];
  Tensor result = make_result({rows, count}, std::move(out), t.requires_grad());
  maybe_record({t}, result,
               [rows, cols, begin, count](std::span<const double> g, std::span<std::vector<double>*> gi) {
                 for (std::size_t r = 0; r < rows; ++r)
                   for (std::size_t c = 0; c < count; ++c)
                     (*gi[0])[r * cols + begin + c] += g[r * count + c];
               });
  return result;
}

Tensor row(const Tensor& t, std::size_t r) {
  require(t.rank() == 2 && r < t.dim(0), err::kRange,
          "row " + std::to_string(r) + " out of range for " + shape_str(t.shape()));
  const std::size_t cols = t.dim(1);
  std::vector<double> out(t.data().begin() + static_cast<std::ptrdiff_t>(r * cols),
                          t.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
  Tensor result = make_result({cols}, std::move(out), t.requires_grad());
  maybe_record({t}, result, [r, cols](std::span<const double> g, std::span<std::vector<double>*> gi) {
    for (std::size_t c = 0; c < cols; ++c) (*gi[0])[r * cols + c] += g[c];
  });
  return result;
}

Tensor custom_unary(const Tensor& input, std::vector<double> values,
                    std::vector<double> local_grad) {
  require(values.size() == input.size() && local_grad.size() == input.size(), err::kShape,
          "custom_unary value/gradient sizes must match the input");
  Tensor result = make_result(input.shape(), std::move(values), input.requires_grad());
  maybe_record({input}, result,
               [lg = std::move(local_grad)](std::span<const double> g, std::span<std::vector<double>*> gi) {
                 for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += lg[i] * g[i];
               });
  return result;
}

// ---- gradient checking ----------------------------------------------------

double GradCheckReport::worst() const {
  double w = 0.0;
  for (double e : max_rel_error) w = std::max(w, e);
  return w;
}

GradCheckReport grad_check(const ScalarFn& fn, const std::vector<Tensor>& params, double eps) {
  std::vector<Tensor> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.emplace_back(p.shape(), p.values(), true);

  Tape tape;
  Gradients grads;
  {
    Tape::Scope scope(tape);
    grads = tape.backward(fn(leaves));
  }

  auto eval_at = [&](std::size_t which, std::size_t idx, double delta) {
    std::vector<Tensor> probe;
    probe.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      std::vector<double> v = params[i].values();
      if (i == which) v[idx] += delta;
      probe.emplace_back(params[i].shape(), std::move(v), false);
    }
    return fn(probe).item();
  };

  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const std::vector<double> analytic = grads.get(leaves[p]);
    double worst = 0.0;
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double numeric = (eval_at(p, i, eps) - eval_at(p, i, -eps)) / (2.0 * eps);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-3});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    report.max_rel_error.push_back(worst);
  }
  return report;
}

}  // namespace svl
