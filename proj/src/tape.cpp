#include "omahgnn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "omahgnn/error.hpp"

namespace omahgnn {

namespace {

std::string shape(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ContractError(std::string(op) + ": shapes " + shape(a) + " and " + shape(b) + " differ");
  }
}

void require_segments(std::span<const std::uint32_t> segment, std::size_t rows,
                      std::size_t num_segments, const char* op) {
  if (segment.size() != rows) {
    throw ContractError(std::string(op) + ": " + std::to_string(segment.size()) +
                        " segment ids for " + std::to_string(rows) + " rows");
  }
  for (auto s : segment) {
    if (s >= num_segments) {
      throw ContractError(std::string(op) + ": segment id " + std::to_string(s) +
                          " out of range " + std::to_string(num_segments));
    }
  }
}

}  // namespace

Var Tape::push(Tensor value, bool requires_grad, Backprop backprop, const char* op) {
  require_finite(value, op);
  records_.push_back(Record{std::move(value), Tensor{}, requires_grad, std::move(backprop)});
  return Var{records_.size() - 1};
}

void Tape::check(Var v) const {
  if (v.id >= records_.size()) throw ContractError("Var does not belong to this tape");
}

Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr, "constant"); }

Var Tape::parameter(Tensor value) {
  Var v = push(std::move(value), true, nullptr, "parameter");
  parameters_.push_back(v);
  return v;
}

Tensor Tape::grad(Var v) const {
  check(v);
  const Record& r = records_[v.id];
  if (!r.grad.same_shape(r.value)) return Tensor(r.value.rows(), r.value.cols());
  return r.grad;
}

void Tape::backward(Var loss) {
  check(loss);
  const Tensor& v = records_[loss.id].value;
  if (v.rows() != 1 || v.cols() != 1) {
    throw ContractError("backward: loss must be 1x1, got " + shape(v));
  }
  backward(loss, Tensor::scalar(1.0));
}

void Tape::backward(Var output, const Tensor& seed) {
  check(output);
  require_same_shape(records_[output.id].value, seed, "backward seed");
  for (auto& r : records_) {
    if (r.requires_grad) {
      if (r.grad.same_shape(r.value)) {
        r.grad.fill(0.0);
      } else {
        r.grad = Tensor(r.value.rows(), r.value.cols());
      }
    }
  }
  if (!records_[output.id].requires_grad) return;
  records_[output.id].grad = seed;
  for (std::size_t id = output.id + 1; id-- > 0;) {
    Record& r = records_[id];
    if (r.requires_grad && r.backprop) r.backprop(*this, id);
  }
}

Var Tape::matmul(Var a, Var b) {
  check(a);
  check(b);
  Tensor out = omahgnn::matmul(value(a), value(b));
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg,
              [a, b](Tape& t, std::size_t self) {
                const Tensor& g = t.records_[self].grad;
                if (t.requires_grad(a)) t.grad_ref(a.id) += matmul_nt(g, t.value(b));
                if (t.requires_grad(b)) t.grad_ref(b.id) += matmul_tn(t.value(a), g);
              },
              "matmul");
}

Var Tape::add(Var a, Var b) {
  check(a);
  check(b);
  require_same_shape(value(a), value(b), "add");
  Tensor out = value(a);
  out += value(b);
  return push(std::move(out), requires_grad(a) || requires_grad(b),
              [a, b](Tape& t, std::size_t self) {
                const Tensor& g = t.records_[self].grad;
                if (t.requires_grad(a)) t.grad_ref(a.id) += g;
                if (t.requires_grad(b)) t.grad_ref(b.id) += g;
              },
              "add");
}

Var Tape::add_row(Var a, Var row) {
  check(a);
  check(row);
  const Tensor& av = value(a);
  const Tensor& rv = value(row);
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ContractError("add_row: row " + shape(rv) + " does not broadcast over " + shape(av));
  }
  Tensor out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += rv(0, j);
  return push(std::move(out), requires_grad(a) || requires_grad(row),
              [a, row](Tape& t, std::size_t self) {
                const Tensor& g = t.records_[self].grad;
                if (t.requires_grad(a)) t.grad_ref(a.id) += g;
                if (t.requires_grad(row)) {
                  Tensor& gr = t.grad_ref(row.id);
                  for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
                }
              },
              "add_row");
}

Var Tape::scale(Var a, double factor) {
  check(a);
  Tensor out = value(a);
  for (auto& x : out.values()) x *= factor;
  return push(std::move(out), requires_grad(a),
              [a, factor](Tape& t, std::size_t self) {
                const Tensor& g = t.records_[self].grad;
                Tensor& ga = t.grad_ref(a.id);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
              },
              "scale");
}

Var Tape::concat_cols(Var a, Var b) {
  check(a);
  check(b);
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.rows() != bv.rows()) {
    throw ContractError("concat_cols: row counts " + shape(av) + " and " + shape(bv) + " differ");
  }
  const std::size_t ca = av.cols();
  Tensor out(av.rows(), ca + bv.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    std::copy_n(av.row(i).data(), ca, out.row(i).data());
    std::copy_n(bv.row(i).data(), bv.cols(), out.row(i).data() + ca);
  }
  return push(std::move(out), requires_grad(a) || requires_grad(b),
              [a, b, ca](Tape& t, std::size_t self) {
                const Tensor& g = t.records_[self].grad;
                if (t.requires_grad(a)) {
                  Tensor& ga = t.grad_ref(a.id);
                  for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < ca; ++j) ga(i, j) += g(i, j);
                }
                if (t.requires_grad(b)) {
                  Tensor& gb = t.grad_ref(b.id);
                  for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < gb.cols(); ++j) gb(i, j) += g(i, ca + j);
                }
              },
              "concat_cols");
}

Var Tape::mul_rows(Var a, Var coeff) {
  check(a);
  check(coeff);
  const Tensor& av = value(a);
  const Tensor& cv = value(coeff);
  if (cv.cols() != 1 || cv.rows() != av.rows()) {
    throw ContractError("mul_rows: coefficients " + shape(cv) + " do not match " + shape(av));
  }
  Tensor out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (auto& x : out.row(i)) x *= cv(i, 0);
  return push(std::move(out), requires_grad(a) || requires_grad(coeff),
              [a, coeff](Tape& t, std::size_t self) {
                const Tensor& g = t.records_[self].grad;
                const Tensor& av = t.value(a);
                const Tensor& cv = t.value(coeff);
                if (t.requires_grad(a)) {
                  Tensor& ga = t.grad_ref(a.id);
                  for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) += g(i, j) * cv(i, 0);
                }
                if (t.requires_grad(coeff)) {
                  Tensor& gc = t.grad_ref(coeff.id);
                  for (std::size_t i = 0; i < g.rows(); ++i) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < g.cols(); ++j) acc += g(i, j) * av(i, j);
                    gc(i, 0) += acc;
                  }
                }
              },
              "mul_rows");
}

Var Tape::elu(Var a) {
  check(a);
  Tensor out = value(a);
  for (auto& x : out.values()) x = x > 0.0 ? x : std::expm1(x);
  return push(std::move(out), requires_grad(a),
              [a](Tape& t, std::size_t self) {
                const Tensor& g = t.records_[self].grad;
                const Tensor& y = t.records_[self].value;
                Tensor& ga = t.grad_ref(a.id);
                for (std::size_t i = 0; i < g.size(); ++i) {
                  const double d = t.value(a)[i] > 0.0 ? 1.0 : y[i] + 1.0;
                  ga[i] += g[i] * d;
                }
              },
              "elu");
}

Var Tape::leaky_relu(Var a, double slope) {
  check(a);
  Tensor out = value(a);
  for (auto& x : out.values()) x = x > 0.0 ? x : slope * x;
  return push(std::move(out), requires_grad(a),
              [a, slope](Tape& t, std::size_t self) {
                const Tensor& g = t.records_[self].grad;
                const Tensor& x = t.value(a);
                Tensor& ga = t.grad_ref(a.id);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (x[i] > 0.0 ? 1.0 : slope);
              },
              "leaky_relu");
}

Var Tape::sigmoid(Var a) {
  check(a);
  Tensor out = value(a);
  for (auto& x : out.values()) {
    // Split by sign so exp never overflows.
    x = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  return push(std::move(out), requires_grad(a),
              [a](Tape& t, std::size_t self) {
                const Tensor& g = t.records_[self].grad;
                const Tensor& y = t.records_[self].value;
                Tensor& ga = t.grad_ref(a.id);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
              },
              "sigmoid");
}

Var Tape::gather_rows(Var a, std::span<const std::uint32_t> index) {
  check(a);
  const Tensor& av = value(a);
  for (auto r : index) {
    if (r >= av.rows()) {
      throw ContractError("gather_rows: row " + std::to_string(r) + " out of range " +
                          std::to_string(av.rows()));
    }
  }
  Tensor out(index.size(), av.cols());
  for (std::size_t i = 0; i < index.size(); ++i)
    std::copy_n(av.row(index[i]).data(), av.cols(), out.row(i).data());
  std::vector<std::uint32_t> idx(index.begin(), index.end());
  return push(std::move(out), requires_grad(a),
              [a, idx = std::move(idx)](Tape& t, std::size_t self) {
                const Tensor& g = t.records_[self].grad;
                Tensor& ga = t.grad_ref(a.id);
                for (std::size_t i = 0; i < idx.size(); ++i) {
                  auto dst = ga.row(idx[i]);
                  auto src = g.row(i);
                  for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
                }
              },
              "gather_rows");
}

Var Tape::segment_sum(Var values, std::span<const std::uint32_t> segment,
                      std::size_t num_segments) {
  check(values);
  const Tensor& v = value(values);
  require_segments(segment, v.rows(), num_segments, "segment_sum");
  Tensor out(num_segments, v.cols());
  for (std::size_t i = 0; i < segment.size(); ++i) {
    auto dst = out.row(segment[i]);
    auto src = v.row(i);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
  std::vector<std::uint32_t> seg(segment.begin(), segment.end());
  return push(std::move(out), requires_grad(values),
              [values, seg = std::move(seg)](Tape& t, std::size_t self) {
                const Tensor& g = t.records_[self].grad;
                Tensor& gv = t.grad_ref(values.id);
                for (std::size_t i = 0; i < seg.size(); ++i) {
                  auto dst = gv.row(i);
                  auto src = g.row(seg[i]);
                  for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
                }
              },
              "segment_sum");
}

Var Tape::segment_mean(Var values, std::span<const std::uint32_t> segment,
                       std::size_t num_segments) {
  check(values);
  const Tensor& v = value(values);
  require_segments(segment, v.rows(), num_segments, "segment_mean");
  std::vector<double> count(num_segments, 0.0);
  for (auto s : segment) count[s] += 1.0;
  for (std::size_t s = 0; s < num_segments; ++s) {
    if (count[s] == 0.0) {
      throw ContractError("segment_mean: segment " + std::to_string(s) + " is empty");
    }
  }
  Tensor out(num_segments, v.cols());
  for (std::size_t i = 0; i < segment.size(); ++i) {
    auto dst = out.row(segment[i]);
    auto src = v.row(i);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
  for (std::size_t s = 0; s < num_segments; ++s)
    for (auto& x : out.row(s)) x /= count[s];
  std::vector<std::uint32_t> seg(segment.begin(), segment.end());
  return push(std::move(out), requires_grad(values),
              [values, seg = std::move(seg), count = std::move(count)](Tape& t, std::size_t self) {
                const Tensor& g = t.records_[self].grad;
                Tensor& gv = t.grad_ref(values.id);
                for (std::size_t i = 0; i < seg.size(); ++i) {
                  auto dst = gv.row(i);
                  auto src = g.row(seg[i]);
                  const double inv = 1.0 / count[seg[i]];
                  for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j] * inv;
                }
              },
              "segment_mean");
}

Var Tape::segment_softmax(Var scores, std::span<const std::uint32_t> segment,
                          std::size_t num_segments) {
  check(scores);
  const Tensor& s = value(scores);
  if (s.cols() != 1) throw ContractError("segment_softmax: scores must be a column, got " + shape(s));
  require_segments(segment, s.rows(), num_segments, "segment_softmax");
  std::vector<double> seg_max(num_segments, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < segment.size(); ++i)
    seg_max[segment[i]] = std::max(seg_max[segment[i]], s(i, 0));
  std::vector<double> seg_sum(num_segments, 0.0);
  Tensor out(s.rows(), 1);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    out(i, 0) = std::exp(s(i, 0) - seg_max[segment[i]]);
    seg_sum[segment[i]] += out(i, 0);
  }
  for (std::size_t i = 0; i < segment.size(); ++i) out(i, 0) /= seg_sum[segment[i]];
  std::vector<std::uint32_t> seg(segment.begin(), segment.end());
  return push(std::move(out), requires_grad(scores),
              [scores, seg = std::move(seg), num_segments](Tape& t, std::size_t self) {
                const Tensor& g = t.records_[self].grad;
                const Tensor& y = t.records_[self].value;
                std::vector<double> dot(num_segments, 0.0);
                for (std::size_t i = 0; i < seg.size(); ++i) dot[seg[i]] += y(i, 0) * g(i, 0);
                Tensor& gs = t.grad_ref(scores.id);
                for (std::size_t i = 0; i < seg.size(); ++i)
                  gs(i, 0) += y(i, 0) * (g(i, 0) - dot[seg[i]]);
              },
              "segment_softmax");
}

Var Tape::row_log_softmax(Var a) {
  check(a);
  const Tensor& av = value(a);
  if (av.cols() == 0) throw ContractError("row_log_softmax: zero columns");
  Tensor out = av;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double acc = 0.0;
    for (double x : row) acc += std::exp(x - mx);
    const double lse = mx + std::log(acc);
    for (auto& x : row) x -= lse;
  }
  return push(std::move(out), requires_grad(a),
              [a](Tape& t, std::size_t self) {
                const Tensor& g = t.records_[self].grad;
                const Tensor& y = t.records_[self].value;
                Tensor& ga = t.grad_ref(a.id);
                for (std::size_t i = 0; i < g.rows(); ++i) {
                  double gsum = 0.0;
                  for (double x : g.row(i)) gsum += x;
                  for (std::size_t j = 0; j < g.cols(); ++j)
                    ga(i, j) += g(i, j) - std::exp(y(i, j)) * gsum;
                }
              },
              "row_log_softmax");
}

Var Tape::select_cols(Var a, std::span<const std::uint32_t> cols) {
  check(a);
  const Tensor& av = value(a);
  if (cols.size() != av.rows()) {
    throw ContractError("select_cols: " + std::to_string(cols.size()) + " indices for " +
                        std::to_string(av.rows()) + " rows");
  }
  Tensor out(av.rows(), 1);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] >= av.cols()) {
      throw ContractError("select_cols: column " + std::to_string(cols[i]) + " out of range " +
                          std::to_string(av.cols()));
    }
    out(i, 0) = av(i, cols[i]);
  }
  std::vector<std::uint32_t> c(cols.begin(), cols.end());
  return push(std::move(out), requires_grad(a),
              [a, c = std::move(c)](Tape& t, std::size_t self) {
                const Tensor& g = t.records_[self].grad;
                Tensor& ga = t.grad_ref(a.id);
                for (std::size_t i = 0; i < c.size(); ++i) ga(i, c[i]) += g(i, 0);
              },
              "select_cols");
}

Var Tape::sum(Var a) {
  check(a);
  double acc = 0.0;
  for (double x : value(a).values()) acc += x;
  return push(Tensor::scalar(acc), requires_grad(a),
              [a](Tape& t, std::size_t self) {
                const double g = t.records_[self].grad[0];
                for (auto& x : t.grad_ref(a.id).values()) x += g;
              },
              "sum");
}

}  // namespace omahgnn
