#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "omahgnn/tensor.hpp"

namespace omahgnn {

/// Handle to a value recorded on a Tape. Only meaningful for the tape that made it.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode differentiation record.
///
/// Records are appended in evaluation order, so a reverse sweep over the record
/// list is a reverse topological order. Gradients accumulate additively into each
/// record and are reset at the start of every backward call, which lets callers
/// run several backward passes (one per seed) over a single forward recording.
///
/// Every op checks its output for NaN/Inf and throws NumericError.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Tensor value);
  /// Trainable slot; gradients are available after backward.
  Var parameter(Tensor value);

  const Tensor& value(Var v) const { return records_.at(v.id).value; }
  /// Gradient of the last backward's output w.r.t. `v`. Zero when `v` did not
  /// influence the output.
  Tensor grad(Var v) const;
  std::span<const Var> parameters() const { return parameters_; }
  std::size_t size() const noexcept { return records_.size(); }

  /// Backward from a 1x1 output. ContractError when `loss` is not scalar.
  void backward(Var loss);
  /// Backward from any output seeded with d(objective)/d(output) = seed.
  void backward(Var output, const Tensor& seed);

  // Primitive ops.
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  /// a (n x c) + row (1 x c), broadcast over rows.
  Var add_row(Var a, Var row);
  Var scale(Var a, double factor);
  Var concat_cols(Var a, Var b);
  /// Row r of `a` multiplied by coeff(r, 0).
  Var mul_rows(Var a, Var coeff);
  Var elu(Var a);
  Var leaky_relu(Var a, double slope = 0.2);
  Var sigmoid(Var a);
  Var gather_rows(Var a, std::span<const std::uint32_t> index);
  /// Mean of rows sharing a segment id. Every segment must be nonempty.
  Var segment_mean(Var values, std::span<const std::uint32_t> segment, std::size_t num_segments);
  /// Sum of rows sharing a segment id; empty segments give zero rows.
  Var segment_sum(Var values, std::span<const std::uint32_t> segment, std::size_t num_segments);
  /// Softmax of a column of scores within each segment.
  Var segment_softmax(Var scores, std::span<const std::uint32_t> segment,
                      std::size_t num_segments);
  Var row_log_softmax(Var a);
  /// Column vector out(r) = a(r, cols[r]).
  Var select_cols(Var a, std::span<const std::uint32_t> cols);
  Var sum(Var a);

 private:
  using Backprop = std::function<void(Tape&, std::size_t)>;

  struct Record {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backprop backprop;
  };

  Var push(Tensor value, bool requires_grad, Backprop backprop, const char* op);
  bool requires_grad(Var v) const { return records_[v.id].requires_grad; }
  Tensor& grad_ref(std::size_t id) { return records_[id].grad; }
  void check(Var v) const;

  std::vector<Record> records_;
  std::vector<Var> parameters_;
};

}  // namespace omahgnn
