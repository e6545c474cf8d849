#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "omahgnn/tape.hpp"
#include "omahgnn/tensor.hpp"

namespace omahgnn {

enum class MwnOutputMode {
  kComplementary,  // alpha = sigmoid(raw), beta = 1 - alpha
  kIndependent,    // alpha = sigmoid(raw_1), beta = sigmoid(raw_2)
};

const char* to_string(MwnOutputMode mode);

struct MwnConfig {
  std::size_t hidden = 100;
  MwnOutputMode mode = MwnOutputMode::kComplementary;
  bool log1p_inputs = false;
};

struct MwnHead {
  Tensor weight;  // hidden x outputs
  Tensor bias;    // 1 x outputs

  friend bool operator==(const MwnHead&, const MwnHead&) = default;
};

/// Internal model: a shared elu layer over the two branch losses followed by
/// one head per overlap level.
struct MwnParams {
  Tensor shared_weight;  // 2 x hidden
  Tensor shared_bias;    // 1 x hidden
  std::vector<MwnHead> heads;
  MwnOutputMode mode = MwnOutputMode::kComplementary;
  bool log1p_inputs = false;

  /// Glorot-uniform shared layer, zero heads (so alpha = beta = 0.5 initially).
  static MwnParams init(std::size_t num_tasks, const MwnConfig& config, std::uint64_t seed);

  std::size_t num_tasks() const noexcept { return heads.size(); }
  std::size_t hidden() const noexcept { return shared_weight.cols(); }
  std::size_t outputs_per_head() const noexcept {
    return mode == MwnOutputMode::kComplementary ? 1 : 2;
  }
  std::size_t num_scalars() const;
  /// shared weight, shared bias, then each head's weight and bias.
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  friend bool operator==(const MwnParams&, const MwnParams&) = default;
};

struct SampleWeights {
  double alpha = 0.5;
  double beta = 0.5;
};

SampleWeights mwn_forward(double l1, double l2, std::size_t task, const MwnParams& params);
std::vector<SampleWeights> mwn_forward(std::span<const double> l1, std::span<const double> l2,
                                       std::span<const std::size_t> tasks, const MwnParams& params);

struct MwnGrad {
  std::vector<double> alpha_theta;     // d alpha / d Theta, flatten order
  std::vector<double> beta_theta;      // d beta / d Theta
  std::array<double, 2> alpha_losses{};  // d alpha / d (l1, l2)
  std::array<double, 2> beta_losses{};   // d beta / d (l1, l2)
};

MwnGrad mwn_grad(double l1, double l2, std::size_t task, const MwnParams& params);

/// sum_j (alpha_seed_j dalpha_j/dTheta + beta_seed_j dbeta_j/dTheta) in one backward pass.
std::vector<double> mwn_vjp(std::span<const double> l1, std::span<const double> l2,
                            std::span<const std::size_t> tasks, const MwnParams& params,
                            std::span<const double> alpha_seed, std::span<const double> beta_seed);

}  // namespace omahgnn
