#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pdfm/matrix.hpp"
#include "pdfm/nn.hpp"

namespace pdfm::downstream {

enum class Family { ridge, mlp, gbdt };

std::string to_string(Family f);
Family family_from_string(const std::string& s);

struct RegressorSpec {
  Family family = Family::ridge;
  double ridge_lambda = 1.0;
  std::vector<int> mlp_dims = {512, 256, 128};
  double mlp_dropout = 0.2;
  double mlp_lr = 0.005;
  int mlp_epochs = 40;
  int mlp_batch = 256;
  int gbdt_max_trees = 3000;
  int gbdt_max_leaves = 31;
  int gbdt_min_samples_leaf = 40;
  double gbdt_lr = 0.02;
  int gbdt_patience = 50;  // early-stopping rounds on validation; 0 disables
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf mean residual
  int n_samples = 0;
};

/// Plain multilayer perceptron with ReLU hidden layers and a scalar linear
/// output; reused by the downstream MLP and the forecast adapter.
struct MlpNet {
  std::vector<nn::DenseLayer> layers;
  std::vector<double> x_mean;  // input standardization (training stats)
  std::vector<double> x_std;

  std::vector<double> predict(const Matrix& x) const;
};

struct MlpFitOptions {
  std::vector<int> hidden_dims = {512, 256, 128};
  double dropout = 0.2;
  double lr = 0.005;
  int epochs = 40;
  int batch = 256;
  std::uint64_t rng_seed = 0;
};

/// Squared-error regression with Adam and a cosine-decayed learning rate.
/// Inputs are standardized with training-set stats. Deterministic under seed.
MlpNet fit_mlp_regression(const Matrix& x, std::span<const double> y,
                          const MlpFitOptions& options);

struct TrainedRegressor {
  Family family = Family::ridge;
  std::size_t feature_width = 0;
  // ridge
  std::vector<double> coef;
  double intercept = 0.0;
  // mlp
  MlpNet net;
  // gbdt
  double base_score = 0.0;
  double learning_rate = 0.0;
  std::vector<std::vector<TreeNode>> trees;
  int best_iteration = 0;
};

/// Ridge with unpenalized intercept: coefficients solve
/// (Xc^T Xc + lambda I) w = Xc^T yc on centered data (Cholesky).
TrainedRegressor ridge_fit(const Matrix& x, std::span<const double> y, double lambda);

TrainedRegressor mlp_fit(const Matrix& x, std::span<const double> y,
                         const RegressorSpec& spec);

/// Leaf-wise gradient boosting on residuals with exact split search.
/// Validation pair drives early stopping when spec.gbdt_patience > 0.
TrainedRegressor gbdt_fit(const Matrix& x, std::span<const double> y,
                          const Matrix& x_val, std::span<const double> y_val,
                          const RegressorSpec& spec);

std::vector<double> predict(const TrainedRegressor& model, const Matrix& x);

/// Audit dump: trees as JSON, ridge/MLP as weight manifests.
void dump_regressor(const TrainedRegressor& model, const std::filesystem::path& path);

}  // namespace pdfm::downstream
