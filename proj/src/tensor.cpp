#include "mindeeg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mindeeg {

namespace {
thread_local Tape* g_current_tape = nullptr;
}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::vector<double>& TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

void TensorImpl::accumulate(std::span<const double> g) {
  auto& buf = grad_buffer();
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

void TensorImpl::accumulate(std::vector<double>&& g) {
  if (grad.empty() && g.size() == data.size()) {
    grad = std::move(g);
    return;
  }
  accumulate(std::span<const double>(g));
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  if (shape.empty()) shape = {1};
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("shape " + shape_string(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return filled(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

Tensor Tensor::vector(std::initializer_list<double> values, bool requires_grad) {
  return Tensor({values.size()}, std::vector<double>(values), requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
  std::vector<double> data;
  std::size_t width = rows.size() ? rows.begin()->size() : 0;
  for (const auto& row : rows) {
    if (row.size() != width) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), width}, std::move(data), requires_grad);
}

Tensor Tensor::identity(std::size_t n, bool requires_grad) {
  std::vector<double> data(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) data[i * n + i] = 1.0;
  return Tensor({n, n}, std::move(data), requires_grad);
}

std::size_t Tensor::rows() const {
  const auto& s = impl_->shape;
  if (s.size() == 1) return 1;
  if (s.size() == 2) return s[0];
  throw ShapeError("rows() needs rank <= 2, got " + shape_string(s));
}

std::size_t Tensor::cols() const {
  const auto& s = impl_->shape;
  if (s.size() == 1) return s[0];
  if (s.size() == 2) return s[1];
  throw ShapeError("cols() needs rank <= 2, got " + shape_string(s));
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
  return impl_->data[0];
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->data, false); }

void Tape::record(std::string op, const Tensor& output, Backward backward) {
  entries_.push_back(Entry{std::move(op), output.impl(), std::move(backward)});
}

void Tape::backward(const Tensor& root, double seed) {
  if (root.numel() != 1) {
    throw ShapeError("backward() needs a scalar root, got " + shape_string(root.shape()));
  }
  root.impl()->grad_buffer()[0] += seed;
  last_replay_count_ = 0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    ++last_replay_count_;
    auto& out = *it->output;
    if (out.grad.empty()) continue;
    it->backward(out.grad);
  }
}

std::optional<std::string> Tape::first_non_finite() const {
  for (const auto& e : entries_) {
    for (double v : e.output->data) {
      if (!std::isfinite(v)) return e.op;
    }
  }
  return std::nullopt;
}

Tape* Tape::current() { return g_current_tape; }

TapeGuard::TapeGuard(Tape& tape) : previous_(g_current_tape) { g_current_tape = &tape; }
TapeGuard::~TapeGuard() { g_current_tape = previous_; }

NoGradGuard::NoGradGuard() : previous_(g_current_tape) { g_current_tape = nullptr; }
NoGradGuard::~NoGradGuard() { g_current_tape = previous_; }

}  // namespace mindeeg
