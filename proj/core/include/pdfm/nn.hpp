#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pdfm/matrix.hpp"
#include "pdfm/rng.hpp"

namespace pdfm::nn {

enum class Activation { identity, relu, gelu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// x * Phi(x) with the exact Gaussian CDF.
double gelu(double x);
/// d/dx gelu(x) = Phi(x) + x * phi(x).
double gelu_grad(double x);

/// Fully-connected layer. Weights are (out x in); forward computes
/// act(x W^T + b) row-wise over a batch.
struct DenseLayer {
  Matrix weight;
  std::vector<double> bias;
  Activation act = Activation::identity;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

/// Glorot-uniform initialized layer with zero bias.
DenseLayer make_dense(std::size_t out, std::size_t in, Activation act, Rng& rng);

/// Saved forward state needed by the backward pass.
struct DenseCache {
  Matrix input;
  Matrix preact;
};

Matrix dense_forward(const DenseLayer& layer, const Matrix& input,
                     DenseCache* cache = nullptr);

struct DenseGrads {
  Matrix dweight;
  std::vector<double> dbias;
};

/// Exact analytic gradients. `dinput`, when non-null, receives dL/dinput.
DenseGrads dense_backward(const DenseLayer& layer, const DenseCache& cache,
                          const Matrix& dout, Matrix* dinput = nullptr);

/// Inverted dropout: units zeroed with probability `rate` during training and
/// survivors scaled by 1/(1-rate); identity at inference.
Matrix dropout(const Matrix& batch, double rate, bool training, Rng& rng,
               Matrix* mask = nullptr);

struct HuberResult {
  double loss = 0.0;                // mean over elements
  std::vector<double> grad;         // dL/dpred, |grad_i| <= delta / n
};

HuberResult huber_loss(std::span<const double> pred, std::span<const double> target,
                       double delta);

/// Adam moment accumulators for one parameter tensor.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Standard bias-corrected Adam update, in place.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr);

struct CosineSchedule {
  double lr_max = 1e-3;
  double lr_min = 0.0;
  long total_steps = 1;
};

/// lr_min + (lr_max - lr_min) * (1 + cos(pi t / T)) / 2, clamped to lr_min past T.
double cosine_lr(long step, const CosineSchedule& schedule);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;  // flat index across all spans
};

/// Central finite differences of `loss` against the provided analytic
/// gradients. Parameters are perturbed in place and restored.
GradCheckResult grad_check(const std::function<double()>& loss,
                           std::span<const std::span<double>> params,
                           std::span<const std::span<const double>> grads,
                           double eps = 1e-5);

/// Convenience overload for a single parameter span.
GradCheckResult grad_check(const std::function<double()>& loss,
                           std::span<double> params, std::span<const double> grads,
                           double eps = 1e-5);

}  // namespace pdfm::nn
