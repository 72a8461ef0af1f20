#include "mindeeg/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mindeeg {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

using ImplPtr = std::shared_ptr<TensorImpl>;

Tape* tape_for(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = Tape::current();
  if (!tape) return nullptr;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return tape;
  }
  return nullptr;
}

Tensor make_output(Shape shape, std::vector<double> data, Tape* tape) {
  return Tensor(std::move(shape), std::move(data), tape != nullptr);
}


void require_rank2(const Tensor& x, const char* op) {
  if (x.rank() > 2) {
    throw ShapeError(std::string(op) + " needs rank <= 2, got " + shape_string(x.shape()));
  }
}

void check_axis(const Tensor& x, std::size_t axis, const char* op) {
  require_rank2(x, op);
  if (axis >= x.rank()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for shape " +
                     shape_string(x.shape()));
  }
}

// Rank-1 axis 0 runs along the row, like axis 1 of a matrix.
bool along_columns(const Tensor& x, std::size_t axis) { return x.rank() == 1 || axis == 1; }

Shape reduced_shape(const Tensor& x, std::size_t axis) {
  if (x.rank() == 1) return {1};
  return axis == 0 ? Shape{1, x.cols()} : Shape{x.rows(), 1};
}

// Visits every reduction group of `x` along `axis`: f(group, index_of(k)).
template <typename F>
void for_each_group(const Tensor& x, std::size_t axis, F&& f) {
  const std::size_t R = x.rows(), C = x.cols();
  if (along_columns(x, axis)) {
    for (std::size_t r = 0; r < R; ++r) f(r, C, [=](std::size_t k) { return r * C + k; });
  } else {
    for (std::size_t c = 0; c < C; ++c) f(c, R, [=](std::size_t k) { return k * C + c; });
  }
}

enum class BinaryKind { Add, Sub, Mul };

Tensor broadcast_binary(const Tensor& a, const Tensor& b, BinaryKind kind, const char* name) {
  require_rank2(a, name);
  require_rank2(b, name);
  const std::size_t ar = a.rows(), ac = a.cols(), br = b.rows(), bc = b.cols();
  auto compatible = [](std::size_t x, std::size_t y) { return x == y || x == 1 || y == 1; };
  if (!compatible(ar, br) || !compatible(ac, bc)) {
    throw ShapeError(std::string(name) + ": cannot broadcast " + shape_string(a.shape()) + " with " +
                     shape_string(b.shape()));
  }
  const std::size_t R = std::max(ar, br), C = std::max(ac, bc);
  Shape out_shape = a.shape() == b.shape() ? a.shape() : Shape{R, C};
  if (a.shape() != b.shape() && a.numel() == R * C && a.rank() == 1 && b.numel() == 1) out_shape = a.shape();

  auto ai = [=](std::size_t r, std::size_t c) { return (ar == 1 ? 0 : r) * ac + (ac == 1 ? 0 : c); };
  auto bi = [=](std::size_t r, std::size_t c) { return (br == 1 ? 0 : r) * bc + (bc == 1 ? 0 : c); };

  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(R * C);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      const double x = ad[ai(r, c)], y = bd[bi(r, c)];
      double v = 0.0;
      switch (kind) {
        case BinaryKind::Add: v = x + y; break;
        case BinaryKind::Sub: v = x - y; break;
        case BinaryKind::Mul: v = x * y; break;
      }
      out[r * C + c] = v;
    }
  }
  Tape* tape = tape_for({&a, &b});
  Tensor result = make_output(std::move(out_shape), std::move(out), tape);
  if (tape) {
    ImplPtr pa = a.impl(), pb = b.impl();
    tape->record(name, result, [=](std::span<const double> g) {
      std::vector<double> ga(pa->requires_grad ? pa->data.size() : 0, 0.0);
      std::vector<double> gb(pb->requires_grad ? pb->data.size() : 0, 0.0);
      for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t c = 0; c < C; ++c) {
          const double gv = g[r * C + c];
          const std::size_t ia = ai(r, c), ib = bi(r, c);
          switch (kind) {
            case BinaryKind::Add:
              if (!ga.empty()) ga[ia] += gv;
              if (!gb.empty()) gb[ib] += gv;
              break;
            case BinaryKind::Sub:
              if (!ga.empty()) ga[ia] += gv;
              if (!gb.empty()) gb[ib] -= gv;
              break;
            case BinaryKind::Mul:
              if (!ga.empty()) ga[ia] += gv * pb->data[ib];
              if (!gb.empty()) gb[ib] += gv * pa->data[ia];
              break;
          }
        }
      }
      if (!ga.empty()) pa->accumulate(std::move(ga));
      if (!gb.empty()) pb->accumulate(std::move(gb));
    });
  }
  return result;
}

// Elementwise map whose derivative is expressed through input and output values.
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, const char* name, Fwd fwd, Deriv deriv) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = fwd(xd[i]);
  Tape* tape = tape_for({&x});
  Tensor result = make_output(x.shape(), std::move(out), tape);
  if (tape) {
    ImplPtr px = x.impl();
    std::weak_ptr<TensorImpl> wout = result.impl();
    tape->record(name, result, [=](std::span<const double> g) {
      auto pout = wout.lock();
      std::vector<double> gx(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * deriv(px->data[i], pout->data[i]);
      px->accumulate(std::move(gx));
    });
  }
  return result;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner dimensions differ for " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  Tape* tape = tape_for({&a, &b});
  Tensor result = make_output({m, n}, std::move(out), tape);
  if (tape) {
    ImplPtr pa = a.impl(), pb = b.impl();
    tape->record("matmul", result, [=](std::span<const double> g) {
      ConstMap dc(g.data(), m, n);
      if (pa->requires_grad) {
        MutMap(pa->grad_buffer().data(), m, k).noalias() += dc * ConstMap(pb->data.data(), k, n).transpose();
      }
      if (pb->requires_grad) {
        MutMap(pb->grad_buffer().data(), k, n).noalias() += ConstMap(pa->data.data(), m, k).transpose() * dc;
      }
    });
  }
  return result;
}

Tensor transpose(const Tensor& x) {
  require_rank2(x, "transpose");
  const std::size_t R = x.rows(), C = x.cols();
  std::vector<double> out(R * C);
  const auto xd = x.data();
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out[c * R + r] = xd[r * C + c];
  Tape* tape = tape_for({&x});
  Tensor result = make_output({C, R}, std::move(out), tape);
  if (tape) {
    ImplPtr px = x.impl();
    tape->record("transpose", result, [=](std::span<const double> g) {
      std::vector<double> gx(R * C);
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) gx[r * C + c] = g[c * R + r];
      px->accumulate(std::move(gx));
    });
  }
  return result;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  Tape* tape = tape_for({&x});
  Tensor result = make_output(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()), tape);
  if (tape) {
    ImplPtr px = x.impl();
    tape->record("reshape", result, [=](std::span<const double> g) { px->accumulate(g); });
  }
  return result;
}

Tensor add(const Tensor& a, const Tensor& b) { return broadcast_binary(a, b, BinaryKind::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return broadcast_binary(a, b, BinaryKind::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return broadcast_binary(a, b, BinaryKind::Mul, "mul"); }

Tensor scale(const Tensor& x, double factor) {
  return unary(x, "scale", [=](double v) { return v * factor; }, [=](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(x, "add_scalar", [=](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor elu(const Tensor& x) {
  return unary(
      x, "elu", [](double v) { return v > 0.0 ? v : std::expm1(v); },
      [](double in, double out) { return in > 0.0 ? 1.0 : out + 1.0; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; }, [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double out) { return out * (1.0 - out); });
}

Tensor exp(const Tensor& x) {
  return unary(x, "exp", [](double v) { return std::exp(v); }, [](double, double out) { return out; });
}

Tensor log(const Tensor& x) {
  return unary(x, "log", [](double v) { return std::log(v); }, [](double in, double) { return 1.0 / in; });
}

Tensor rsqrt_or_zero(const Tensor& x) {
  return unary(
      x, "rsqrt_or_zero", [](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 0.0; },
      [](double in, double out) { return in > 0.0 ? -0.5 * out / in : 0.0; });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  check_axis(x, axis, "softmax");
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for_each_group(x, axis, [&](std::size_t, std::size_t len, auto idx) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < len; ++k) hi = std::max(hi, xd[idx(k)]);
    double total = 0.0;
    for (std::size_t k = 0; k < len; ++k) total += out[idx(k)] = std::exp(xd[idx(k)] - hi);
    for (std::size_t k = 0; k < len; ++k) out[idx(k)] /= total;
  });
  Tape* tape = tape_for({&x});
  Tensor result = make_output(x.shape(), std::move(out), tape);
  if (tape) {
    ImplPtr px = x.impl();
    std::weak_ptr<TensorImpl> wout = result.impl();
    Tensor shape_probe = x.detach();
    tape->record("softmax", result, [=](std::span<const double> g) {
      const auto& y = wout.lock()->data;
      std::vector<double> gx(g.size());
      for_each_group(shape_probe, axis, [&](std::size_t, std::size_t len, auto idx) {
        double dot = 0.0;
        for (std::size_t k = 0; k < len; ++k) dot += g[idx(k)] * y[idx(k)];
        for (std::size_t k = 0; k < len; ++k) gx[idx(k)] = y[idx(k)] * (g[idx(k)] - dot);
      });
      px->accumulate(std::move(gx));
    });
  }
  return result;
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  Tape* tape = tape_for({&x});
  Tensor result = make_output({1}, {total}, tape);
  if (tape) {
    ImplPtr px = x.impl();
    tape->record("sum", result, [=](std::span<const double> g) {
      px->accumulate(std::vector<double>(px->data.size(), g[0]));
    });
  }
  return result;
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum(const Tensor& x, std::size_t axis) {
  check_axis(x, axis, "sum");
  const auto xd = x.data();
  Shape shape = reduced_shape(x, axis);
  std::vector<double> out(shape_numel(shape), 0.0);
  for_each_group(x, axis, [&](std::size_t group, std::size_t len, auto idx) {
    for (std::size_t k = 0; k < len; ++k) out[group] += xd[idx(k)];
  });
  Tape* tape = tape_for({&x});
  Tensor result = make_output(std::move(shape), std::move(out), tape);
  if (tape) {
    ImplPtr px = x.impl();
    Tensor shape_probe = x.detach();
    tape->record("sum_axis", result, [=](std::span<const double> g) {
      std::vector<double> gx(px->data.size());
      for_each_group(shape_probe, axis, [&](std::size_t group, std::size_t len, auto idx) {
        for (std::size_t k = 0; k < len; ++k) gx[idx(k)] = g[group];
      });
      px->accumulate(std::move(gx));
    });
  }
  return result;
}

Tensor mean(const Tensor& x, std::size_t axis) {
  check_axis(x, axis, "mean");
  const std::size_t len = along_columns(x, axis) ? x.cols() : x.rows();
  return scale(sum(x, axis), 1.0 / static_cast<double>(len));
}

Tensor max(const Tensor& x, std::size_t axis) {
  check_axis(x, axis, "max");
  const auto xd = x.data();
  Shape shape = reduced_shape(x, axis);
  std::vector<double> out(shape_numel(shape));
  std::vector<std::size_t> argmax(out.size());
  for_each_group(x, axis, [&](std::size_t group, std::size_t len, auto idx) {
    std::size_t best = idx(0);
    for (std::size_t k = 1; k < len; ++k) {
      if (xd[idx(k)] > xd[best]) best = idx(k);
    }
    argmax[group] = best;
    out[group] = xd[best];
  });
  Tape* tape = tape_for({&x});
  Tensor result = make_output(std::move(shape), std::move(out), tape);
  if (tape) {
    ImplPtr px = x.impl();
    tape->record("max_axis", result, [=](std::span<const double> g) {
      std::vector<double> gx(px->data.size(), 0.0);
      for (std::size_t group = 0; group < argmax.size(); ++group) gx[argmax[group]] += g[group];
      px->accumulate(std::move(gx));
    });
  }
  return result;
}

Tensor squared_norm(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v * v;
  Tape* tape = tape_for({&x});
  Tensor result = make_output({1}, {total}, tape);
  if (tape) {
    ImplPtr px = x.impl();
    tape->record("squared_norm", result, [=](std::span<const double> g) {
      std::vector<double> gx(px->data.size());
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = 2.0 * px->data[i] * g[0];
      px->accumulate(std::move(gx));
    });
  }
  return result;
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis > 1) throw ShapeError("concat: axis must be 0 or 1");
  for (const auto& p : parts) require_rank2(p, "concat");
  const bool rows_axis = axis == 0;
  const std::size_t fixed = rows_axis ? parts[0].cols() : parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    const std::size_t f = rows_axis ? p.cols() : p.rows();
    if (f != fixed) {
      throw ShapeError("concat: mismatched shapes " + shape_string(parts[0].shape()) + " and " +
                       shape_string(p.shape()));
    }
    total += rows_axis ? p.rows() : p.cols();
  }
  const std::size_t R = rows_axis ? total : fixed, C = rows_axis ? fixed : total;
  std::vector<double> out(R * C);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t pr = p.rows(), pc = p.cols();
    const auto pd = p.data();
    for (std::size_t r = 0; r < pr; ++r)
      for (std::size_t c = 0; c < pc; ++c) {
        const std::size_t orow = rows_axis ? offset + r : r, ocol = rows_axis ? c : offset + c;
        out[orow * C + ocol] = pd[r * pc + c];
      }
    offset += rows_axis ? pr : pc;
  }
  Tape* tape = Tape::current();
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (!any) tape = nullptr;
  Tensor result = make_output({R, C}, std::move(out), tape);
  if (tape) {
    std::vector<ImplPtr> impls;
    std::vector<std::pair<std::size_t, std::size_t>> dims;
    for (const auto& p : parts) {
      impls.push_back(p.impl());
      dims.emplace_back(p.rows(), p.cols());
    }
    tape->record("concat", result, [=](std::span<const double> g) {
      for (std::size_t i = 0; i < impls.size(); ++i) {
        if (!impls[i]->requires_grad) continue;
        const auto [pr, pc] = dims[i];
        std::vector<double> gp(pr * pc);
        for (std::size_t r = 0; r < pr; ++r)
          for (std::size_t c = 0; c < pc; ++c) {
            const std::size_t orow = rows_axis ? offsets[i] + r : r, ocol = rows_axis ? c : offsets[i] + c;
            gp[r * pc + c] = g[orow * C + ocol];
          }
        impls[i]->accumulate(std::move(gp));
      }
    });
  }
  return result;
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  check_axis(x, axis, "slice");
  const std::size_t R = x.rows(), C = x.cols();
  const bool cols_axis = along_columns(x, axis);
  const std::size_t extent = cols_axis ? C : R;
  if (length == 0 || start + length > extent) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") outside " + shape_string(x.shape()));
  }
  const std::size_t outR = cols_axis ? R : length, outC = cols_axis ? length : C;
  const std::size_t row0 = cols_axis ? 0 : start, col0 = cols_axis ? start : 0;
  std::vector<double> out(outR * outC);
  const auto xd = x.data();
  for (std::size_t r = 0; r < outR; ++r)
    for (std::size_t c = 0; c < outC; ++c) out[r * outC + c] = xd[(row0 + r) * C + col0 + c];
  Tape* tape = tape_for({&x});
  Tensor result = make_output({outR, outC}, std::move(out), tape);
  if (tape) {
    ImplPtr px = x.impl();
    tape->record("slice", result, [=](std::span<const double> g) {
      std::vector<double> gx(px->data.size(), 0.0);
      for (std::size_t r = 0; r < outR; ++r)
        for (std::size_t c = 0; c < outC; ++c) gx[(row0 + r) * C + col0 + c] = g[r * outC + c];
      px->accumulate(std::move(gx));
    });
  }
  return result;
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  require_rank2(table, "gather_rows");
  if (indices.empty()) throw ShapeError("gather_rows: empty index list");
  const std::size_t R = table.rows(), C = table.cols();
  std::vector<double> out(indices.size() * C);
  const auto td = table.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= R) {
      throw std::out_of_range("gather_rows: index " + std::to_string(indices[i]) + " outside " +
                              std::to_string(R) + " rows");
    }
    std::copy_n(td.begin() + static_cast<std::ptrdiff_t>(indices[i] * C), C,
                out.begin() + static_cast<std::ptrdiff_t>(i * C));
  }
  Tape* tape = tape_for({&table});
  Tensor result = make_output({indices.size(), C}, std::move(out), tape);
  if (tape) {
    ImplPtr pt = table.impl();
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    tape->record("gather_rows", result, [=](std::span<const double> g) {
      std::vector<double> gt(pt->data.size(), 0.0);
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t c = 0; c < C; ++c) gt[idx[i] * C + c] += g[i * C + c];
      pt->accumulate(std::move(gt));
    });
  }
  return result;
}

Tensor straight_through(const Tensor& input, const Tensor& quantized) {
  if (input.shape() != quantized.shape()) {
    throw ShapeError("straight_through: shapes " + shape_string(input.shape()) + " and " +
                     shape_string(quantized.shape()) + " differ");
  }
  Tape* tape = tape_for({&input});
  Tensor result = make_output(input.shape(), std::vector<double>(quantized.data().begin(), quantized.data().end()), tape);
  if (tape) {
    ImplPtr pi = input.impl();
    tape->record("straight_through", result, [=](std::span<const double> g) { pi->accumulate(g); });
  }
  return result;
}

Tensor stop_gradient(const Tensor& x) { return x.detach(); }

Tensor cross_entropy(const Tensor& logits, std::size_t label) {
  const auto z = logits.data();
  if (label >= z.size()) {
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " outside " +
                            std::to_string(z.size()) + " classes");
  }
  const double hi = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - hi);
  const double lse = hi + std::log(total);
  Tape* tape = tape_for({&logits});
  Tensor result = make_output({1}, {lse - z[label]}, tape);
  if (tape) {
    ImplPtr pz = logits.impl();
    tape->record("cross_entropy", result, [=](std::span<const double> g) {
      std::vector<double> gz(pz->data.size());
      for (std::size_t i = 0; i < gz.size(); ++i) {
        gz[i] = g[0] * (std::exp(pz->data[i] - lse) - (i == label ? 1.0 : 0.0));
      }
      pz->accumulate(std::move(gz));
    });
  }
  return result;
}

}  // namespace mindeeg
