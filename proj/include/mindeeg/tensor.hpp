// Dense f64 tensors with reverse-mode differentiation recorded on a dynamic tape.
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mindeeg/errors.hpp"

namespace mindeeg {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  // Empty until something accumulates into it.
  std::vector<double> grad;
  bool requires_grad = false;

  std::vector<double>& grad_buffer();
  void accumulate(std::span<const double> g);
  // Takes ownership when no gradient exists yet.
  void accumulate(std::vector<double>&& g);
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::initializer_list<double> values, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);
  static Tensor identity(std::size_t n, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }
  // Rank-1 tensors are viewed as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double item() const;
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double operator()(std::size_t r, std::size_t c) const { return impl_->data[r * cols() + c]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag) { impl_->requires_grad = flag; }
  // Zero-filled when no gradient has reached this tensor.
  std::span<const double> grad() const { return impl_->grad_buffer(); }
  bool has_grad() const { return !impl_->grad.empty(); }
  void zero_grad();

  // Fresh leaf holding a copy of the values.
  Tensor detach() const;
  bool same_node(const Tensor& other) const { return impl_ == other.impl_; }

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Record-on-execute operation log for one thread. Operations executed while a
// tape is current (see TapeGuard) and touching a tensor that requires grad are
// appended; backward() replays the adjoints in reverse order.
class Tape {
 public:
  using Backward = std::function<void(std::span<const double> out_grad)>;

  struct Entry {
    std::string op;
    std::shared_ptr<TensorImpl> output;
    Backward backward;
  };

  void record(std::string op, const Tensor& output, Backward backward);
  void backward(const Tensor& root, double seed = 1.0);
  void clear() { entries_.clear(); }

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  // Number of adjoint functions run by the last backward().
  std::size_t last_replay_count() const { return last_replay_count_; }
  // Name of the earliest recorded op whose output holds a NaN or Inf.
  std::optional<std::string> first_non_finite() const;

  static Tape* current();

 private:
  friend class TapeGuard;
  std::vector<Entry> entries_;
  std::size_t last_replay_count_ = 0;
};

class TapeGuard {
 public:
  explicit TapeGuard(Tape& tape);
  ~TapeGuard();
  TapeGuard(const TapeGuard&) = delete;
  TapeGuard& operator=(const TapeGuard&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording for the current thread (inference passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* previous_;
};

}  // namespace mindeeg
