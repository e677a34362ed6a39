#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dgif {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

/// Dense 64-bit tensor with a lazily allocated gradient buffer. Copies are
/// shallow: two Tensor handles to the same storage see each other's values and
/// gradients, which is what lets tape closures and parameter registries share
/// state without bookkeeping.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double v);
  static Tensor vec(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor identity(std::size_t n);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t size() const;
  /// Row/col accessors require a 2-D tensor (1-D counts as a single row).
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> values();
  std::span<const double> values() const;
  double value_at(std::size_t i) const;
  double value_at(std::size_t r, std::size_t c) const;
  double& at(std::size_t i);
  double& at(std::size_t r, std::size_t c);

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);

  /// Allocates (zero-filled) on first touch.
  std::span<double> grad();
  /// Empty span when no gradient has been accumulated yet.
  std::span<const double> grad_or_empty() const;
  void zero_grad();

  bool all_finite() const;
  Tensor clone() const;  // deep copy of values; fresh grad

 private:
  struct Impl {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
  Impl& impl();
  const Impl& impl() const;
};

/// Ordered record of executed operations. Forward functions append one closure
/// per differentiable op; backward() replays them in exact reverse order.
class Tape {
 public:
  void record(std::function<void()> backward_step);
  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

  /// Seeds d(loss)/d(loss) = 1 and runs all recorded steps in reverse.
  /// Rejects a second call until reset().
  void backward(Tensor loss);
  void reset();
  std::size_t num_ops() const { return steps_.size(); }

 private:
  std::vector<std::function<void()>> steps_;
  bool recording_ = true;
  bool backward_done_ = false;
};

inline constexpr std::size_t kNoMask = std::numeric_limits<std::size_t>::max();

// ---- differentiable operations -------------------------------------------
// Every function validates shapes up front (DimensionError naming both
// shapes), computes the forward result, and, when the tape is recording and
// the result requires grad, records the matching adjoint step.

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor transpose(Tape& tape, const Tensor& a);
/// y = x.w + b with b broadcast over rows; x may be 1-D (treated as one row).
Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor div(Tape& tape, const Tensor& a, const Tensor& b);

Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor tanh(Tape& tape, const Tensor& x);
Tensor leaky_relu(Tape& tape, const Tensor& x, double slope);
Tensor log(Tape& tape, const Tensor& x);
Tensor sqrt(Tape& tape, const Tensor& x);
Tensor scale(Tape& tape, const Tensor& x, double c);

/// Max-subtracted softmax along `axis` of a 1-D or 2-D tensor. When
/// `valid != kNoMask` only the leading `valid` entries of each slice take part;
/// the rest of the output is exactly zero (used to mask padding).
Tensor softmax(Tape& tape, const Tensor& x, std::size_t axis, std::size_t valid = kNoMask);

/// Solves (G + ridge.I) w = b through a Cholesky factorization. G must be
/// symmetric within 1e-9. The adjoint reuses the factor: with u solving
/// (G + ridge.I) u = dL/dw, dL/db = u and dL/dG = -(u w^T + w u^T)/2.
Tensor solve_spd(Tape& tape, const Tensor& gram, const Tensor& rhs, double ridge);

/// Gathers rows of a matrix (duplicates allowed; backward accumulates).
Tensor rows(Tape& tape, const Tensor& m, std::span<const std::size_t> ids);
Tensor row_range(Tape& tape, const Tensor& m, std::size_t first, std::size_t count);
Tensor col_range(Tape& tape, const Tensor& m, std::size_t first, std::size_t count);
/// Stacks 1-D tensors (and/or matrices of equal width) into one matrix.
Tensor vstack(Tape& tape, std::span<const Tensor> parts);
/// Concatenates matrices of equal row count along columns.
Tensor hstack(Tape& tape, std::span<const Tensor> parts);
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);
Tensor dot(Tape& tape, const Tensor& a, const Tensor& b);

/// mean_i [ max(z,0) - z.y + log(1+exp(-|z|)) ] over all entries; numerically
/// stable for any logit magnitude.
Tensor bce_with_logits(Tape& tape, const Tensor& logits, std::span<const double> targets);
/// logsumexp(z) - z[target] for a 1-D logit vector.
Tensor ce_with_logits(Tape& tape, const Tensor& logits, std::size_t target);

// ---- finite-difference gradient checking ---------------------------------

struct GradCheckResult {
  struct Entry {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t coords = 0;
  };
  std::vector<Entry> entries;
  double tolerance = 0.0;
  bool pass = true;
  std::string summary() const;
};

/// Central-difference check of a scalar objective against tape gradients.
/// `objective` must rebuild the computation from the given parameter tensors
/// on every call. Relative error per coordinate is |a-n| / max(1, |a|, |n|);
/// frozen collections (requires_grad == false) report exactly 0.
GradCheckResult grad_check(const std::function<Tensor(Tape&)>& objective,
                           std::span<const std::pair<std::string, Tensor>> params,
                           double eps, double tol);

}  // namespace dgif
