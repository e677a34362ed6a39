#include "dgif/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dgif/error.hpp"

namespace dgif {

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

static std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
  impl_ = std::make_shared<Impl>();
  impl_->values.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor init: shape " + shape_str(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  }
  impl_ = std::make_shared<Impl>();
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

Tensor Tensor::vec(std::vector<double> values) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor::Impl& Tensor::impl() {
  if (!impl_) throw ContractError("use of undefined tensor");
  return *impl_;
}

const Tensor::Impl& Tensor::impl() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }
std::size_t Tensor::size() const { return impl().values.size(); }

std::size_t Tensor::rows() const {
  const Shape& s = shape();
  if (s.size() == 1) return 1;
  if (s.size() == 2) return s[0];
  throw DimensionError("rows() on tensor of shape " + shape_str(s));
}

std::size_t Tensor::cols() const {
  const Shape& s = shape();
  if (s.size() == 1) return s[0];
  if (s.size() == 2) return s[1];
  throw DimensionError("cols() on tensor of shape " + shape_str(s));
}

std::span<double> Tensor::values() { return impl().values; }
std::span<const double> Tensor::values() const { return impl().values; }

double Tensor::value_at(std::size_t i) const { return impl().values.at(i); }
double Tensor::value_at(std::size_t r, std::size_t c) const {
  return impl().values.at(r * cols() + c);
}
double& Tensor::at(std::size_t i) { return impl().values.at(i); }
double& Tensor::at(std::size_t r, std::size_t c) { return impl().values.at(r * cols() + c); }

bool Tensor::requires_grad() const { return impl().requires_grad; }
Tensor& Tensor::set_requires_grad(bool on) {
  impl().requires_grad = on;
  return *this;
}

std::span<double> Tensor::grad() {
  Impl& im = impl();
  if (im.grad.size() != im.values.size()) im.grad.assign(im.values.size(), 0.0);
  return im.grad;
}

std::span<const double> Tensor::grad_or_empty() const {
  const Impl& im = impl();
  if (im.grad.size() != im.values.size()) return {};
  return im.grad;
}

void Tensor::zero_grad() {
  Impl& im = impl();
  std::fill(im.grad.begin(), im.grad.end(), 0.0);
}

bool Tensor::all_finite() const {
  for (double v : impl().values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor Tensor::clone() const {
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = impl().shape;
  t.impl_->values = impl().values;
  t.impl_->requires_grad = impl().requires_grad;
  return t;
}

// ---- Tape -----------------------------------------------------------------

void Tape::record(std::function<void()> backward_step) {
  steps_.push_back(std::move(backward_step));
}

void Tape::backward(Tensor loss) {
  if (backward_done_) {
    throw ContractError("tape: backward already run; call reset() first");
  }
  if (loss.size() != 1) {
    throw ContractError("tape: backward requires a scalar, got shape " +
                        shape_str(loss.shape()));
  }
  backward_done_ = true;
  loss.grad()[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

void Tape::reset() {
  steps_.clear();
  backward_done_ = false;
}

// ---- op helpers -----------------------------------------------------------

static bool track(const Tape& tape, std::initializer_list<const Tensor*> ins) {
  if (!tape.recording()) return false;
  for (const Tensor* t : ins) {
    if (t->requires_grad()) return true;
  }
  return false;
}

static void check_2d(const Tensor& t, const char* op) {
  if (t.ndim() != 2) {
    throw DimensionError(std::string(op) + ": expected matrix, got " + shape_str(t.shape()));
  }
}

// ---- matmul / transpose / linear ------------------------------------------

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  check_2d(a, "matmul");
  check_2d(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tensor out(Shape{m, n});
  {
    auto av = a.values();
    auto bv = b.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = av[i * k + p];
        if (aip == 0.0) continue;
        const double* brow = &bv[p * n];
        double* orow = &ov[i * n];
        for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
      }
    }
  }
  const bool tracked = track(tape, {&a, &b});
  out.set_requires_grad(tracked);
  if (tracked) {
    Tensor ac = a, bc = b, oc = out;
    tape.record([ac, bc, oc, m, k, n]() mutable {
      auto g = oc.grad_or_empty();
      if (g.empty()) return;
      if (ac.requires_grad()) {
        auto ag = ac.grad();
        auto bv = bc.values();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const double gij = g[i * n + j];
            if (gij == 0.0) continue;
            for (std::size_t p = 0; p < k; ++p) ag[i * k + p] += gij * bv[p * n + j];
          }
        }
      }
      if (bc.requires_grad()) {
        auto bg = bc.grad();
        auto av = ac.values();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) bg[p * n + j] += aip * g[i * n + j];
          }
        }
      }
    });
  }
  return out;
}

Tensor transpose(Tape& tape, const Tensor& a) {
  check_2d(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out(Shape{n, m});
  {
    auto av = a.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ov[j * m + i] = av[i * n + j];
  }
  const bool tracked = track(tape, {&a});
  out.set_requires_grad(tracked);
  if (tracked) {
    Tensor ac = a, oc = out;
    tape.record([ac, oc, m, n]() mutable {
      auto g = oc.grad_or_empty();
      if (g.empty()) return;
      auto ag = ac.grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ag[i * n + j] += g[j * m + i];
    });
  }
  return out;
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
  const bool x_vec = x.ndim() == 1;
  if (!x_vec) check_2d(x, "linear");
  check_2d(w, "linear");
  const std::size_t m = x.rows(), k = x.cols(), n = w.cols();
  if (w.rows() != k || b.ndim() != 1 || b.size() != n) {
    throw DimensionError("linear: x " + shape_str(x.shape()) + ", w " + shape_str(w.shape()) +
                         ", b " + shape_str(b.shape()));
  }
  Tensor out(x_vec ? Shape{n} : Shape{m, n});
  {
    auto xv = x.values();
    auto wv = w.values();
    auto bvv = b.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < m; ++i) {
      double* orow = &ov[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] = bvv[j];
      for (std::size_t p = 0; p < k; ++p) {
        const double xip = xv[i * k + p];
        if (xip == 0.0) continue;
        const double* wrow = &wv[p * n];
        for (std::size_t j = 0; j < n; ++j) orow[j] += xip * wrow[j];
      }
    }
  }
  const bool tracked = track(tape, {&x, &w, &b});
  out.set_requires_grad(tracked);
  if (tracked) {
    Tensor xc = x, wc = w, bc = b, oc = out;
    tape.record([xc, wc, bc, oc, m, k, n]() mutable {
      auto g = oc.grad_or_empty();
      if (g.empty()) return;
      if (xc.requires_grad()) {
        auto xg = xc.grad();
        auto wv = wc.values();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const double gij = g[i * n + j];
            if (gij == 0.0) continue;
            for (std::size_t p = 0; p < k; ++p) xg[i * k + p] += gij * wv[p * n + j];
          }
        }
      }
      if (wc.requires_grad()) {
        auto wg = wc.grad();
        auto xv = xc.values();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double xip = xv[i * k + p];
            if (xip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) wg[p * n + j] += xip * g[i * n + j];
          }
        }
      }
      if (bc.requires_grad()) {
        auto bg = bc.grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) bg[j] += g[i * n + j];
      }
    });
  }
  return out;
}

// ---- elementwise ----------------------------------------------------------

namespace {

// Shapes must match exactly or one operand must be a single element, which is
// broadcast against the other.
template <typename F, typename DA, typename DB>
Tensor binary_op(Tape& tape, const Tensor& a, const Tensor& b, const char* name, F fwd, DA da,
                 DB db) {
  const bool a_scalar = a.size() == 1;
  const bool b_scalar = b.size() == 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) {
    throw DimensionError(std::string(name) + ": incompatible shapes " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
  const Tensor& shaped = (a_scalar && !b_scalar) ? b : a;
  Tensor out(shaped.shape());
  const std::size_t n = out.size();
  {
    auto av = a.values();
    auto bv = b.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < n; ++i) {
      ov[i] = fwd(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
    }
  }
  const bool tracked = track(tape, {&a, &b});
  out.set_requires_grad(tracked);
  if (tracked) {
    Tensor ac = a, bc = b, oc = out;
    tape.record([ac, bc, oc, a_scalar, b_scalar, n, da, db]() mutable {
      auto g = oc.grad_or_empty();
      if (g.empty()) return;
      auto av = ac.values();
      auto bv = bc.values();
      if (ac.requires_grad()) {
        auto ag = ac.grad();
        for (std::size_t i = 0; i < n; ++i) {
          ag[a_scalar ? 0 : i] += g[i] * da(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
        }
      }
      if (bc.requires_grad()) {
        auto bg = bc.grad();
        for (std::size_t i = 0; i < n; ++i) {
          bg[b_scalar ? 0 : i] += g[i] * db(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
        }
      }
    });
  }
  return out;
}

template <typename F, typename D>
Tensor unary_op(Tape& tape, const Tensor& x, F fwd, D dfn) {
  Tensor out(x.shape());
  const std::size_t n = out.size();
  {
    auto xv = x.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < n; ++i) ov[i] = fwd(xv[i]);
  }
  const bool tracked = track(tape, {&x});
  out.set_requires_grad(tracked);
  if (tracked) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc, n, dfn]() mutable {
      auto g = oc.grad_or_empty();
      if (g.empty()) return;
      auto xv = xc.values();
      auto ov = oc.values();
      auto xg = xc.grad();
      for (std::size_t i = 0; i < n; ++i) xg[i] += g[i] * dfn(xv[i], ov[i]);
    });
  }
  return out;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_op(
      tape, a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_op(
      tape, a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_op(
      tape, a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_op(
      tape, a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  return unary_op(
      tape, x,
      [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(Tape& tape, const Tensor& x) {
  return unary_op(
      tape, x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor leaky_relu(Tape& tape, const Tensor& x, double slope) {
  return unary_op(
      tape, x, [slope](double v) { return v >= 0.0 ? v : slope * v; },
      [slope](double v, double) { return v >= 0.0 ? 1.0 : slope; });
}

Tensor log(Tape& tape, const Tensor& x) {
  return unary_op(
      tape, x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(Tape& tape, const Tensor& x) {
  return unary_op(
      tape, x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Tensor scale(Tape& tape, const Tensor& x, double c) {
  return unary_op(
      tape, x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

// ---- softmax --------------------------------------------------------------

Tensor softmax(Tape& tape, const Tensor& x, std::size_t axis, std::size_t valid) {
  if (x.ndim() != 1 && x.ndim() != 2) {
    throw DimensionError("softmax: expected 1-D or 2-D, got " + shape_str(x.shape()));
  }
  if (axis >= x.ndim()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(x.shape()));
  }
  // Slices run along `axis`; one independent softmax per slice.
  std::size_t extent, slices, stride, slice_stride;
  if (x.ndim() == 1) {
    extent = x.size();
    slices = 1;
    stride = 1;
    slice_stride = 0;
  } else if (axis == 1) {
    extent = x.cols();
    slices = x.rows();
    stride = 1;
    slice_stride = x.cols();
  } else {
    extent = x.rows();
    slices = x.cols();
    stride = x.cols();
    slice_stride = 1;
  }
  const std::size_t v = valid == kNoMask ? extent : valid;
  if (v == 0 || v > extent) {
    throw DimensionError("softmax: valid count " + std::to_string(v) + " out of range for extent " +
                         std::to_string(extent));
  }
  Tensor out(x.shape());
  {
    auto xv = x.values();
    auto ov = out.values();
    for (std::size_t s = 0; s < slices; ++s) {
      const std::size_t base = s * slice_stride;
      double mx = xv[base];
      for (std::size_t i = 1; i < v; ++i) mx = std::max(mx, xv[base + i * stride]);
      double total = 0.0;
      for (std::size_t i = 0; i < v; ++i) {
        const double e = std::exp(xv[base + i * stride] - mx);
        ov[base + i * stride] = e;
        total += e;
      }
      for (std::size_t i = 0; i < v; ++i) ov[base + i * stride] /= total;
      for (std::size_t i = v; i < extent; ++i) ov[base + i * stride] = 0.0;
    }
  }
  const bool tracked = track(tape, {&x});
  out.set_requires_grad(tracked);
  if (tracked) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc, slices, v, stride, slice_stride]() mutable {
      auto g = oc.grad_or_empty();
      if (g.empty()) return;
      auto ov = oc.values();
      auto xg = xc.grad();
      for (std::size_t s = 0; s < slices; ++s) {
        const std::size_t base = s * slice_stride;
        double inner = 0.0;
        for (std::size_t i = 0; i < v; ++i) {
          inner += g[base + i * stride] * ov[base + i * stride];
        }
        for (std::size_t i = 0; i < v; ++i) {
          const std::size_t idx = base + i * stride;
          xg[idx] += ov[idx] * (g[idx] - inner);
        }
      }
    });
  }
  return out;
}

// ---- SPD solve ------------------------------------------------------------

namespace {

// Lower-triangular Cholesky factor of S, throwing on a non-positive pivot.
std::vector<double> cholesky(const std::vector<double>& s, std::size_t n) {
  std::vector<double> l(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = s[i * n + j];
      for (std::size_t p = 0; p < j; ++p) acc -= l[i * n + p] * l[j * n + p];
      if (i == j) {
        if (acc <= 0.0 || !std::isfinite(acc)) {
          throw SingularError("solve_spd: matrix not positive definite", i);
        }
        l[i * n + i] = std::sqrt(acc);
      } else {
        l[i * n + j] = acc / l[j * n + j];
      }
    }
  }
  return l;
}

std::vector<double> cholesky_solve(const std::vector<double>& l, std::size_t n,
                                   std::span<const double> b) {
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = b[i];
    for (std::size_t p = 0; p < i; ++p) acc -= l[i * n + p] * y[p];
    y[i] = acc / l[i * n + i];
  }
  std::vector<double> x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double acc = y[ii];
    for (std::size_t p = ii + 1; p < n; ++p) acc -= l[p * n + ii] * x[p];
    x[ii] = acc / l[ii * n + ii];
  }
  return x;
}

}  // namespace

Tensor solve_spd(Tape& tape, const Tensor& gram, const Tensor& rhs, double ridge) {
  check_2d(gram, "solve_spd");
  const std::size_t n = gram.rows();
  if (gram.cols() != n) {
    throw DimensionError("solve_spd: matrix not square: " + shape_str(gram.shape()));
  }
  if (rhs.ndim() != 1 || rhs.size() != n) {
    throw DimensionError("solve_spd: rhs " + shape_str(rhs.shape()) + " vs matrix " +
                         shape_str(gram.shape()));
  }
  if (ridge < 0.0) throw ContractError("solve_spd: ridge must be >= 0");
  auto gv = gram.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(gv[i * n + j] - gv[j * n + i]) > 1e-9) {
        throw ContractError("solve_spd: matrix not symmetric at (" + std::to_string(i) + "," +
                            std::to_string(j) + ")");
      }
    }
  }
  std::vector<double> s(gv.begin(), gv.end());
  for (std::size_t i = 0; i < n; ++i) s[i * n + i] += ridge;
  auto factor = std::make_shared<std::vector<double>>(cholesky(s, n));
  Tensor out(Shape{n}, cholesky_solve(*factor, n, rhs.values()));

  const bool tracked = track(tape, {&gram, &rhs});
  out.set_requires_grad(tracked);
  if (tracked) {
    Tensor gc = gram, bc = rhs, oc = out;
    tape.record([gc, bc, oc, factor, n]() mutable {
      auto g = oc.grad_or_empty();
      if (g.empty()) return;
      const std::vector<double> u = cholesky_solve(*factor, n, g);
      if (bc.requires_grad()) {
        auto bg = bc.grad();
        for (std::size_t i = 0; i < n; ++i) bg[i] += u[i];
      }
      if (gc.requires_grad()) {
        auto gg = gc.grad();
        auto w = oc.values();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            gg[i * n + j] -= 0.5 * (u[i] * w[j] + w[i] * u[j]);
          }
        }
      }
    });
  }
  return out;
}

// ---- gather / slicing / stacking ------------------------------------------

Tensor rows(Tape& tape, const Tensor& m, std::span<const std::size_t> ids) {
  check_2d(m, "rows");
  const std::size_t c = m.cols();
  for (std::size_t id : ids) {
    if (id >= m.rows()) {
      throw DimensionError("rows: index " + std::to_string(id) + " out of range for " +
                           shape_str(m.shape()));
    }
  }
  Tensor out(Shape{ids.size(), c});
  {
    auto mv = m.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      std::copy_n(&mv[ids[i] * c], c, &ov[i * c]);
    }
  }
  const bool tracked = track(tape, {&m});
  out.set_requires_grad(tracked);
  if (tracked) {
    Tensor mc = m, oc = out;
    std::vector<std::size_t> idv(ids.begin(), ids.end());
    tape.record([mc, oc, idv, c]() mutable {
      auto g = oc.grad_or_empty();
      if (g.empty()) return;
      auto mg = mc.grad();
      for (std::size_t i = 0; i < idv.size(); ++i) {
        for (std::size_t j = 0; j < c; ++j) mg[idv[i] * c + j] += g[i * c + j];
      }
    });
  }
  return out;
}

Tensor row_range(Tape& tape, const Tensor& m, std::size_t first, std::size_t count) {
  check_2d(m, "row_range");
  if (first + count > m.rows()) {
    throw DimensionError("row_range: [" + std::to_string(first) + "," +
                         std::to_string(first + count) + ") out of range for " +
                         shape_str(m.shape()));
  }
  const std::size_t c = m.cols();
  Tensor out(Shape{count, c});
  std::copy_n(&m.values()[first * c], count * c, out.values().begin());
  const bool tracked = track(tape, {&m});
  out.set_requires_grad(tracked);
  if (tracked) {
    Tensor mc = m, oc = out;
    tape.record([mc, oc, first, count, c]() mutable {
      auto g = oc.grad_or_empty();
      if (g.empty()) return;
      auto mg = mc.grad();
      for (std::size_t i = 0; i < count * c; ++i) mg[first * c + i] += g[i];
    });
  }
  return out;
}

Tensor col_range(Tape& tape, const Tensor& m, std::size_t first, std::size_t count) {
  check_2d(m, "col_range");
  if (first + count > m.cols()) {
    throw DimensionError("col_range: [" + std::to_string(first) + "," +
                         std::to_string(first + count) + ") out of range for " +
                         shape_str(m.shape()));
  }
  const std::size_t r = m.rows(), c = m.cols();
  Tensor out(Shape{r, count});
  {
    auto mv = m.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < r; ++i) {
      std::copy_n(&mv[i * c + first], count, &ov[i * count]);
    }
  }
  const bool tracked = track(tape, {&m});
  out.set_requires_grad(tracked);
  if (tracked) {
    Tensor mc = m, oc = out;
    tape.record([mc, oc, first, count, r, c]() mutable {
      auto g = oc.grad_or_empty();
      if (g.empty()) return;
      auto mg = mc.grad();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < count; ++j) mg[i * c + first + j] += g[i * count + j];
      }
    });
  }
  return out;
}

Tensor vstack(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("vstack: no parts");
  const std::size_t c = parts.front().cols();
  std::size_t total = 0;
  bool any_grad = false;
  for (const Tensor& p : parts) {
    if (p.cols() != c) {
      throw DimensionError("vstack: width mismatch, " + shape_str(p.shape()) + " vs width " +
                           std::to_string(c));
    }
    total += p.rows();
    any_grad = any_grad || p.requires_grad();
  }
  Tensor out(Shape{total, c});
  {
    auto ov = out.values();
    std::size_t r = 0;
    for (const Tensor& p : parts) {
      std::copy_n(p.values().begin(), p.size(), &ov[r * c]);
      r += p.rows();
    }
  }
  const bool tracked = tape.recording() && any_grad;
  out.set_requires_grad(tracked);
  if (tracked) {
    std::vector<Tensor> pc(parts.begin(), parts.end());
    Tensor oc = out;
    tape.record([pc, oc, c]() mutable {
      auto g = oc.grad_or_empty();
      if (g.empty()) return;
      std::size_t r = 0;
      for (Tensor& p : pc) {
        if (p.requires_grad()) {
          auto pg = p.grad();
          for (std::size_t i = 0; i < p.size(); ++i) pg[i] += g[r * c + i];
        }
        r += p.rows();
      }
    });
  }
  return out;
}

Tensor hstack(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("hstack: no parts");
  const std::size_t r = parts.front().rows();
  std::size_t total = 0;
  bool any_grad = false;
  for (const Tensor& p : parts) {
    if (p.rows() != r) {
      throw DimensionError("hstack: row mismatch, " + shape_str(p.shape()) + " vs rows " +
                           std::to_string(r));
    }
    total += p.cols();
    any_grad = any_grad || p.requires_grad();
  }
  Tensor out(Shape{r, total});
  {
    auto ov = out.values();
    std::size_t base = 0;
    for (const Tensor& p : parts) {
      auto pv = p.values();
      const std::size_t pc = p.cols();
      for (std::size_t i = 0; i < r; ++i) {
        std::copy_n(&pv[i * pc], pc, &ov[i * total + base]);
      }
      base += pc;
    }
  }
  const bool tracked = tape.recording() && any_grad;
  out.set_requires_grad(tracked);
  if (tracked) {
    std::vector<Tensor> pc(parts.begin(), parts.end());
    Tensor oc = out;
    tape.record([pc, oc, r, total]() mutable {
      auto g = oc.grad_or_empty();
      if (g.empty()) return;
      std::size_t base = 0;
      for (Tensor& p : pc) {
        const std::size_t w = p.cols();
        if (p.requires_grad()) {
          auto pg = p.grad();
          for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < w; ++j) pg[i * w + j] += g[i * total + base + j];
          }
        }
        base += w;
      }
    });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  Tensor out(std::move(shape), std::vector<double>(x.values().begin(), x.values().end()));
  const bool tracked = track(tape, {&x});
  out.set_requires_grad(tracked);
  if (tracked) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc]() mutable {
      auto g = oc.grad_or_empty();
      if (g.empty()) return;
      auto xg = xc.grad();
      for (std::size_t i = 0; i < g.size(); ++i) xg[i] += g[i];
    });
  }
  return out;
}

// ---- reductions -----------------------------------------------------------

Tensor sum(Tape& tape, const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor out = Tensor::scalar(total);
  const bool tracked = track(tape, {&x});
  out.set_requires_grad(tracked);
  if (tracked) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc]() mutable {
      auto g = oc.grad_or_empty();
      if (g.empty()) return;
      auto xg = xc.grad();
      for (std::size_t i = 0; i < xg.size(); ++i) xg[i] += g[0];
    });
  }
  return out;
}

Tensor mean(Tape& tape, const Tensor& x) {
  const double inv = 1.0 / static_cast<double>(x.size());
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor out = Tensor::scalar(total * inv);
  const bool tracked = track(tape, {&x});
  out.set_requires_grad(tracked);
  if (tracked) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc, inv]() mutable {
      auto g = oc.grad_or_empty();
      if (g.empty()) return;
      auto xg = xc.grad();
      for (std::size_t i = 0; i < xg.size(); ++i) xg[i] += g[0] * inv;
    });
  }
  return out;
}

Tensor dot(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.ndim() != 1 || b.ndim() != 1 || a.size() != b.size()) {
    throw DimensionError("dot: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  double total = 0.0;
  {
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) total += av[i] * bv[i];
  }
  Tensor out = Tensor::scalar(total);
  const bool tracked = track(tape, {&a, &b});
  out.set_requires_grad(tracked);
  if (tracked) {
    Tensor ac = a, bc = b, oc = out;
    tape.record([ac, bc, oc]() mutable {
      auto g = oc.grad_or_empty();
      if (g.empty()) return;
      const double g0 = g[0];
      if (ac.requires_grad()) {
        auto ag = ac.grad();
        auto bv = bc.values();
        for (std::size_t i = 0; i < ag.size(); ++i) ag[i] += g0 * bv[i];
      }
      if (bc.requires_grad()) {
        auto bg = bc.grad();
        auto av = ac.values();
        for (std::size_t i = 0; i < bg.size(); ++i) bg[i] += g0 * av[i];
      }
    });
  }
  return out;
}

// ---- fused losses ---------------------------------------------------------

Tensor bce_with_logits(Tape& tape, const Tensor& logits, std::span<const double> targets) {
  if (logits.size() != targets.size()) {
    throw DimensionError("bce_with_logits: " + shape_str(logits.shape()) + " vs " +
                         std::to_string(targets.size()) + " targets");
  }
  const std::size_t n = logits.size();
  const double inv = 1.0 / static_cast<double>(n);
  double total = 0.0;
  {
    auto zv = logits.values();
    for (std::size_t i = 0; i < n; ++i) {
      const double z = zv[i];
      total += std::max(z, 0.0) - z * targets[i] + std::log1p(std::exp(-std::abs(z)));
    }
  }
  Tensor out = Tensor::scalar(total * inv);
  const bool tracked = track(tape, {&logits});
  out.set_requires_grad(tracked);
  if (tracked) {
    Tensor zc = logits, oc = out;
    std::vector<double> tv(targets.begin(), targets.end());
    tape.record([zc, oc, tv, inv]() mutable {
      auto g = oc.grad_or_empty();
      if (g.empty()) return;
      auto zv = zc.values();
      auto zg = zc.grad();
      for (std::size_t i = 0; i < zv.size(); ++i) {
        const double z = zv[i];
        const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        zg[i] += g[0] * (s - tv[i]) * inv;
      }
    });
  }
  return out;
}

Tensor ce_with_logits(Tape& tape, const Tensor& logits, std::size_t target) {
  if (logits.ndim() != 1) {
    throw DimensionError("ce_with_logits: logits must be 1-D, got " + shape_str(logits.shape()));
  }
  if (target >= logits.size()) {
    throw ContractError("ce_with_logits: target " + std::to_string(target) + " out of range " +
                        std::to_string(logits.size()));
  }
  auto zv = logits.values();
  double mx = zv[0];
  for (double z : zv) mx = std::max(mx, z);
  double total = 0.0;
  for (double z : zv) total += std::exp(z - mx);
  const double lse = mx + std::log(total);
  Tensor out = Tensor::scalar(lse - zv[target]);
  const bool tracked = track(tape, {&logits});
  out.set_requires_grad(tracked);
  if (tracked) {
    Tensor zc = logits, oc = out;
    tape.record([zc, oc, target, mx, total]() mutable {
      auto g = oc.grad_or_empty();
      if (g.empty()) return;
      auto zv2 = zc.values();
      auto zg = zc.grad();
      for (std::size_t i = 0; i < zv2.size(); ++i) {
        const double p = std::exp(zv2[i] - mx) / total;
        zg[i] += g[0] * (p - (i == target ? 1.0 : 0.0));
      }
    });
  }
  return out;
}

// ---- gradient checking ----------------------------------------------------

std::string GradCheckResult::summary() const {
  std::ostringstream os;
  for (const Entry& e : entries) {
    os << (e.max_rel_err <= tolerance ? "ok   " : "FAIL ") << e.name << "  max_rel_err="
       << e.max_rel_err << "  coords=" << e.coords << "\n";
  }
  os << (pass ? "pass" : "fail") << " (tol=" << tolerance << ")\n";
  return os.str();
}

GradCheckResult grad_check(const std::function<Tensor(Tape&)>& objective,
                           std::span<const std::pair<std::string, Tensor>> params,
                           double eps, double tol) {
  if (eps <= 0.0) throw ContractError("grad_check: eps must be > 0");
  GradCheckResult result;
  result.tolerance = tol;

  for (const auto& [name, p] : params) {
    Tensor t = p;
    t.zero_grad();
  }
  Tape tape;
  Tensor loss = objective(tape);
  if (loss.size() != 1) {
    throw ContractError("grad_check: objective must produce a scalar, got " +
                        shape_str(loss.shape()));
  }
  tape.backward(loss);

  for (const auto& [name, p] : params) {
    GradCheckResult::Entry entry;
    entry.name = name;
    entry.coords = p.size();
    if (p.requires_grad()) {
      Tensor t = p;
      const std::vector<double> analytic(t.grad().begin(), t.grad().end());
      auto vals = t.values();
      for (std::size_t i = 0; i < vals.size(); ++i) {
        const double orig = vals[i];
        vals[i] = orig + eps;
        Tape fwd1;
        fwd1.set_recording(false);
        const double lp = objective(fwd1).value_at(0);
        vals[i] = orig - eps;
        Tape fwd2;
        fwd2.set_recording(false);
        const double lm = objective(fwd2).value_at(0);
        vals[i] = orig;
        const double numeric = (lp - lm) / (2.0 * eps);
        const double a = analytic[i];
        const double rel =
            std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
        entry.max_rel_err = std::max(entry.max_rel_err, rel);
      }
    }
    if (entry.max_rel_err > tol) result.pass = false;
    result.entries.push_back(std::move(entry));
  }
  return result;
}

}  // namespace dgif
