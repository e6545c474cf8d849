#pragma once

#include <cstddef>
#include <cstdint>

#include "omahgnn/dataset.hpp"
#include "omahgnn/gradcheck.hpp"
#include "omahgnn/hgnn.hpp"

namespace omahgnn {

inline constexpr double kHgnnGradTolerance = 1e-4;
inline constexpr double kMetaGradTolerance = 1e-3;

/// Toy problem for gradient verification.
struct ToySpec {
  std::size_t nodes = 8;
  std::size_t hyperedges = 6;
  std::size_t classes = 2;
  std::size_t features = 4;
  std::size_t hidden = 4;
  std::size_t mwn_hidden = 8;
  std::size_t k = 2;
  double lr_external = 0.1;
  std::uint64_t seed = 1;
};

struct CheckOptions {
  double eps = 1e-4;
  /// Scales the analytic gradients by 1.01 so a correct oracle must reject them.
  bool inject_fault = false;
};

Dataset make_toy(const ToySpec& spec);

/// Backward vs central differences of the mean branch loss over the toy's
/// training nodes, w.r.t. every HGNN parameter.
GradCheckReport hgnn_gradient_check(const ToySpec& spec, Branch branch, const CheckOptions& options = {});

struct MetaCheckReport {
  GradCheckReport fd;
  double max_abs_analytic = 0.0;
};

/// The trainer's meta-gradient vs central differences of the meta loss through
/// one intermediate step, with Theta drawn at random. The oracle rebuilds the
/// intermediate weights from the gradient of the weighted total loss instead of
/// the trainer's per-sample gradients.
MetaCheckReport meta_gradient_check(const ToySpec& spec, const CheckOptions& options = {});

struct GradCheckSummary {
  double hgnn_ss = 0.0;
  double hgnn_fs = 0.0;
  double meta = 0.0;
  double meta_max_abs = 0.0;
  bool passed = false;
};

GradCheckSummary run_grad_check(const ToySpec& spec, const CheckOptions& options = {});

}  // namespace omahgnn
