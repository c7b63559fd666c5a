#include "pdfm/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "pdfm/csv.hpp"
#include "pdfm/errors.hpp"
#include "pdfm/rng.hpp"

namespace pdfm::downstream {

using nlohmann::json;

std::string to_string(Family f) {
  switch (f) {
    case Family::ridge: return "ridge";
    case Family::mlp: return "mlp";
    case Family::gbdt: return "gbdt";
  }
  return "ridge";
}

Family family_from_string(const std::string& s) {
  if (s == "ridge") return Family::ridge;
  if (s == "mlp") return Family::mlp;
  if (s == "gbdt") return Family::gbdt;
  throw ConfigError("unknown regressor family: " + s);
}

void RegressorSpec::validate() const {
  if (ridge_lambda < 0.0) throw ConfigError("regressor.ridge_lambda must be >= 0");
  if (mlp_dims.size() != 3) throw ConfigError("regressor.mlp_dims must list 3 hidden layers");
  for (int d : mlp_dims)
    if (d < 1) throw ConfigError("regressor.mlp_dims entries must be >= 1");
  if (mlp_dropout < 0.0 || mlp_dropout >= 1.0)
    throw ConfigError("regressor.mlp_dropout must be in [0, 1)");
  if (mlp_lr <= 0.0) throw ConfigError("regressor.mlp_lr must be positive");
  if (mlp_epochs < 0) throw ConfigError("regressor.mlp_epochs must be >= 0");
  if (mlp_batch < 1) throw ConfigError("regressor.mlp_batch must be >= 1");
  if (gbdt_max_trees < 0) throw ConfigError("regressor.gbdt_max_trees must be >= 0");
  if (gbdt_max_leaves < 2) throw ConfigError("regressor.gbdt_max_leaves must be >= 2");
  if (gbdt_min_samples_leaf < 1)
    throw ConfigError("regressor.gbdt_min_samples_leaf must be >= 1");
  if (gbdt_lr < 0.0) throw ConfigError("regressor.gbdt_lr must be >= 0");
  if (gbdt_patience < 0) throw ConfigError("regressor.gbdt_patience must be >= 0");
}

// ---------------------------------------------------------------------------
// Ridge

namespace {

/// Cholesky solve of A w = b for symmetric positive-definite A (in place).
std::vector<double> cholesky_solve(Matrix a, std::vector<double> b) {
  const std::size_t n = a.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double d = a.at(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a.at(j, k) * a.at(j, k);
    if (d <= 0.0)
      throw ValidationError("ridge_fit: normal equations are singular");
    a.at(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a.at(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a.at(i, k) * a.at(j, k);
      a.at(i, j) = s / a.at(j, j);
    }
  }
  // forward substitution L z = b
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a.at(i, k) * b[k];
    b[i] = s / a.at(i, i);
  }
  // back substitution L^T w = z
  for (std::size_t ii = n; ii > 0; --ii) {
    const std::size_t i = ii - 1;
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a.at(k, i) * b[k];
    b[i] = s / a.at(i, i);
  }
  return b;
}

}  // namespace

TrainedRegressor ridge_fit(const Matrix& x, std::span<const double> y, double lambda) {
  if (x.rows() != y.size()) throw SchemaError("ridge_fit: row count mismatch");
  if (x.rows() < 2) throw ValidationError("ridge_fit: needs at least 2 rows");
  const std::size_t n = x.rows(), p = x.cols();

  std::vector<double> x_mean(p, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) x_mean[j] += x.at(i, j);
  for (double& m : x_mean) m /= static_cast<double>(n);
  const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

  Matrix gram(p, p);
  std::vector<double> xty(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double xj = x.at(i, j) - x_mean[j];
      xty[j] += xj * (y[i] - y_mean);
      for (std::size_t k = j; k < p; ++k)
        gram.at(j, k) += xj * (x.at(i, k) - x_mean[k]);
    }
  }
  for (std::size_t j = 0; j < p; ++j) {
    gram.at(j, j) += lambda;
    for (std::size_t k = 0; k < j; ++k) gram.at(j, k) = gram.at(k, j);
  }

  TrainedRegressor model;
  model.family = Family::ridge;
  model.feature_width = p;
  model.coef = cholesky_solve(std::move(gram), std::move(xty));
  double dot = 0.0;
  for (std::size_t j = 0; j < p; ++j) dot += model.coef[j] * x_mean[j];
  model.intercept = y_mean - dot;
  return model;
}

// ---------------------------------------------------------------------------
// MLP

namespace {

void fit_standardizer_rows(const Matrix& x, std::vector<double>& mean,
                           std::vector<double>& std) {
  const std::size_t n = x.rows(), p = x.cols();
  mean.assign(p, 0.0);
  std.assign(p, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) mean[j] += x.at(i, j);
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      const double d = x.at(i, j) - mean[j];
      std[j] += d * d;
    }
  for (double& s : std) s = std::max(std::sqrt(s / static_cast<double>(n)), 1e-8);
}

Matrix standardize_rows(const Matrix& x, const std::vector<double>& mean,
                        const std::vector<double>& std) {
  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j)
      out.at(i, j) = (out.at(i, j) - mean[j]) / std[j];
  return out;
}

}  // namespace

std::vector<double> MlpNet::predict(const Matrix& x) const {
  if (layers.empty()) throw ValidationError("MlpNet::predict on an empty net");
  if (x.cols() != layers.front().in_dim())
    throw SchemaError("MlpNet::predict: feature width mismatch");
  Matrix h = x_mean.empty() ? x : standardize_rows(x, x_mean, x_std);
  for (const auto& layer : layers) h = nn::dense_forward(layer, h);
  std::vector<double> out(h.rows());
  for (std::size_t i = 0; i < h.rows(); ++i) out[i] = h.at(i, 0);
  return out;
}

MlpNet fit_mlp_regression(const Matrix& x, std::span<const double> y,
                          const MlpFitOptions& options) {
  if (x.rows() != y.size()) throw SchemaError("fit_mlp_regression: row count mismatch");
  if (x.rows() == 0) throw ValidationError("fit_mlp_regression: empty input");

  MlpNet net;
  fit_standardizer_rows(x, net.x_mean, net.x_std);
  const Matrix xs = standardize_rows(x, net.x_mean, net.x_std);

  Rng init_rng(Rng::derive(options.rng_seed, "mlp-init"));
  std::size_t in = x.cols();
  for (int dim : options.hidden_dims) {
    net.layers.push_back(nn::make_dense(dim, in, nn::Activation::relu, init_rng));
    in = dim;
  }
  net.layers.push_back(nn::make_dense(1, in, nn::Activation::identity, init_rng));
  // Output bias starts at the target mean so the net learns residuals and
  // target scale never gates the learning rate.
  net.layers.back().bias[0] =
      std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());

  const std::size_t n = x.rows();
  const std::size_t batch = std::min<std::size_t>(options.batch, n);
  const long batches_per_epoch = static_cast<long>((n + batch - 1) / batch);
  nn::CosineSchedule schedule{options.lr, 0.0, options.epochs * batches_per_epoch};

  std::vector<nn::AdamState> adam(net.layers.size() * 2);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng drop_rng(Rng::derive(options.rng_seed, "mlp-dropout"));

  long step = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    Rng epoch_rng(Rng::derive(options.rng_seed, "mlp-epoch:" + std::to_string(epoch)));
    shuffle(order, epoch_rng);
    for (long b = 0; b < batches_per_epoch; ++b) {
      const std::size_t lo = b * batch;
      const std::size_t hi = std::min(n, lo + batch);
      const std::size_t bs = hi - lo;
      Matrix xb(bs, x.cols());
      std::vector<double> yb(bs);
      for (std::size_t i = 0; i < bs; ++i) {
        std::copy(xs.row(order[lo + i]).begin(), xs.row(order[lo + i]).end(),
                  xb.row(i).begin());
        yb[i] = y[order[lo + i]];
      }

      // Forward with dropout after every hidden layer.
      std::vector<nn::DenseCache> caches(net.layers.size());
      std::vector<Matrix> masks(net.layers.size());
      Matrix h = xb;
      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        h = nn::dense_forward(net.layers[l], h, &caches[l]);
        if (l + 1 < net.layers.size())
          h = nn::dropout(h, options.dropout, true, drop_rng, &masks[l]);
      }

      double loss = 0.0;
      Matrix dh(bs, 1);
      for (std::size_t i = 0; i < bs; ++i) {
        const double r = h.at(i, 0) - yb[i];
        loss += r * r;
        dh.at(i, 0) = 2.0 * r / static_cast<double>(bs);
      }
      loss /= static_cast<double>(bs);
      if (!std::isfinite(loss))
        throw TrainingError("mlp training diverged at step " + std::to_string(step));

      const double lr = nn::cosine_lr(step, schedule);
      for (std::size_t li = net.layers.size(); li > 0; --li) {
        const std::size_t l = li - 1;
        Matrix dinput;
        auto grads = nn::dense_backward(net.layers[l], caches[l], dh, &dinput);
        nn::adam_step(net.layers[l].weight.flat(), grads.dweight.flat(), adam[2 * l], lr);
        nn::adam_step(net.layers[l].bias, grads.dbias, adam[2 * l + 1], lr);
        if (l > 0) {
          // Undo dropout scaling on the way down.
          for (std::size_t i = 0; i < dinput.size(); ++i)
            dinput.flat()[i] *= masks[l - 1].flat()[i];
          dh = std::move(dinput);
        }
      }
      ++step;
    }
  }
  return net;
}

TrainedRegressor mlp_fit(const Matrix& x, std::span<const double> y,
                         const RegressorSpec& spec) {
  spec.validate();
  MlpFitOptions options;
  options.hidden_dims = spec.mlp_dims;
  options.dropout = spec.mlp_dropout;
  options.lr = spec.mlp_lr;
  options.epochs = spec.mlp_epochs;
  options.batch = spec.mlp_batch;
  options.rng_seed = spec.rng_seed;
  TrainedRegressor model;
  model.family = Family::mlp;
  model.feature_width = x.cols();
  model.net = fit_mlp_regression(x, y, options);
  return model;
}

// ---------------------------------------------------------------------------
// GBDT

namespace {

struct SplitChoice {
  bool valid = false;
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

/// Exact best squared-error split over sorted feature values.
/// Gain = S_L^2/n_L + S_R^2/n_R - S^2/n; ties resolved by lowest feature
/// index then lowest threshold.
SplitChoice best_split(const Matrix& x, const std::vector<double>& residual,
                       const std::vector<std::uint32_t>& rows, int min_leaf) {
  SplitChoice best;
  const std::size_t n = rows.size();
  if (n < 2 * static_cast<std::size_t>(min_leaf)) return best;
  double total = 0.0;
  for (auto r : rows) total += residual[r];
  const double parent = total * total / static_cast<double>(n);

  std::vector<std::pair<double, std::uint32_t>> sorted(n);
  for (std::size_t f = 0; f < x.cols(); ++f) {
    for (std::size_t i = 0; i < n; ++i) sorted[i] = {x.at(rows[i], f), rows[i]};
    std::sort(sorted.begin(), sorted.end());
    double left_sum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_sum += residual[sorted[i].second];
      if (sorted[i].first == sorted[i + 1].first) continue;  // no split inside ties
      const std::size_t nl = i + 1, nr = n - nl;
      if (nl < static_cast<std::size_t>(min_leaf) || nr < static_cast<std::size_t>(min_leaf))
        continue;
      const double right_sum = total - left_sum;
      const double gain = left_sum * left_sum / static_cast<double>(nl) +
                          right_sum * right_sum / static_cast<double>(nr) - parent;
      // Features and thresholds scan in ascending order, so keeping the
      // strictly-better gain resolves ties toward the lowest feature index
      // and lowest threshold.
      if (gain > best.gain) {
        best.valid = true;
        best.gain = gain;
        best.feature = static_cast<int>(f);
        best.threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
      }
    }
  }
  return best;
}

std::vector<TreeNode> grow_tree(const Matrix& x, const std::vector<double>& residual,
                                const RegressorSpec& spec) {
  struct Open {
    int node;
    std::vector<std::uint32_t> rows;
    SplitChoice split;
  };
  std::vector<TreeNode> nodes;
  std::vector<Open> open;

  std::vector<std::uint32_t> all(x.rows());
  std::iota(all.begin(), all.end(), 0);
  double mean = 0.0;
  for (auto r : all) mean += residual[r];
  mean /= static_cast<double>(std::max<std::size_t>(all.size(), 1));
  nodes.push_back({-1, 0.0, -1, -1, mean, static_cast<int>(all.size())});
  open.push_back({0, std::move(all), {}});
  open[0].split = best_split(x, residual, open[0].rows, spec.gbdt_min_samples_leaf);

  int leaves = 1;
  while (leaves < spec.gbdt_max_leaves) {
    // Highest-gain splittable leaf; ties go to the earliest-created node.
    int pick = -1;
    for (std::size_t i = 0; i < open.size(); ++i) {
      if (!open[i].split.valid) continue;
      if (pick < 0 || open[i].split.gain > open[pick].split.gain ||
          (open[i].split.gain == open[pick].split.gain &&
           open[i].node < open[pick].node))
        pick = static_cast<int>(i);
    }
    if (pick < 0) break;

    Open leaf = std::move(open[pick]);
    open.erase(open.begin() + pick);

    std::vector<std::uint32_t> left_rows, right_rows;
    for (auto r : leaf.rows) {
      if (x.at(r, leaf.split.feature) <= leaf.split.threshold)
        left_rows.push_back(r);
      else
        right_rows.push_back(r);
    }
    auto leaf_value = [&](const std::vector<std::uint32_t>& rows) {
      double s = 0.0;
      for (auto r : rows) s += residual[r];
      return s / static_cast<double>(rows.size());
    };
    const int li = static_cast<int>(nodes.size());
    nodes.push_back({-1, 0.0, -1, -1, leaf_value(left_rows), static_cast<int>(left_rows.size())});
    const int ri = static_cast<int>(nodes.size());
    nodes.push_back({-1, 0.0, -1, -1, leaf_value(right_rows), static_cast<int>(right_rows.size())});
    nodes[leaf.node].feature = leaf.split.feature;
    nodes[leaf.node].threshold = leaf.split.threshold;
    nodes[leaf.node].left = li;
    nodes[leaf.node].right = ri;

    Open lo{li, std::move(left_rows), {}};
    lo.split = best_split(x, residual, lo.rows, spec.gbdt_min_samples_leaf);
    Open ro{ri, std::move(right_rows), {}};
    ro.split = best_split(x, residual, ro.rows, spec.gbdt_min_samples_leaf);
    open.push_back(std::move(lo));
    open.push_back(std::move(ro));
    ++leaves;
  }
  return nodes;
}

double tree_predict(const std::vector<TreeNode>& nodes, std::span<const double> row) {
  int i = 0;
  while (nodes[i].feature >= 0)
    i = row[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  return nodes[i].value;
}

}  // namespace

TrainedRegressor gbdt_fit(const Matrix& x, std::span<const double> y,
                          const Matrix& x_val, std::span<const double> y_val,
                          const RegressorSpec& spec) {
  spec.validate();
  if (x.rows() != y.size()) throw SchemaError("gbdt_fit: row count mismatch");
  if (x.rows() < 2 * static_cast<std::size_t>(spec.gbdt_min_samples_leaf))
    throw ValidationError("gbdt_fit: needs at least 2 * min_samples_leaf rows, got " +
                          std::to_string(x.rows()));
  if (spec.gbdt_patience > 0 && y_val.empty())
    throw ConfigError("gbdt_fit: early stopping requires a validation set");
  if (x_val.rows() != y_val.size()) throw SchemaError("gbdt_fit: validation mismatch");

  TrainedRegressor model;
  model.family = Family::gbdt;
  model.feature_width = x.cols();
  model.learning_rate = spec.gbdt_lr;
  model.base_score =
      std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());

  std::vector<double> train_pred(y.size(), model.base_score);
  std::vector<double> val_pred(y_val.size(), model.base_score);
  std::vector<double> residual(y.size());

  double best_val = std::numeric_limits<double>::infinity();
  int best_round = 0;
  for (int round = 0; round < spec.gbdt_max_trees; ++round) {
    for (std::size_t i = 0; i < y.size(); ++i) residual[i] = y[i] - train_pred[i];
    auto tree = grow_tree(x, residual, spec);
    for (std::size_t i = 0; i < y.size(); ++i)
      train_pred[i] += spec.gbdt_lr * tree_predict(tree, x.row(i));
    for (std::size_t i = 0; i < y_val.size(); ++i)
      val_pred[i] += spec.gbdt_lr * tree_predict(tree, x_val.row(i));
    model.trees.push_back(std::move(tree));

    if (spec.gbdt_patience > 0) {
      double mse = 0.0;
      for (std::size_t i = 0; i < y_val.size(); ++i) {
        const double r = y_val[i] - val_pred[i];
        mse += r * r;
      }
      mse /= static_cast<double>(y_val.size());
      if (mse < best_val - 1e-15) {
        best_val = mse;
        best_round = round + 1;
      } else if (round + 1 - best_round >= spec.gbdt_patience) {
        break;
      }
    } else {
      best_round = round + 1;
    }
  }
  model.trees.resize(best_round);
  model.best_iteration = best_round;
  return model;
}

std::vector<double> predict(const TrainedRegressor& model, const Matrix& x) {
  if (x.cols() != model.feature_width)
    throw SchemaError("predict: feature width " + std::to_string(x.cols()) +
                      " != model width " + std::to_string(model.feature_width));
  std::vector<double> out(x.rows(), 0.0);
  switch (model.family) {
    case Family::ridge:
      for (std::size_t i = 0; i < x.rows(); ++i) {
        double s = model.intercept;
        for (std::size_t j = 0; j < x.cols(); ++j) s += model.coef[j] * x.at(i, j);
        out[i] = s;
      }
      break;
    case Family::mlp:
      out = model.net.predict(x);
      break;
    case Family::gbdt:
      for (std::size_t i = 0; i < x.rows(); ++i) {
        double s = model.base_score;
        for (const auto& tree : model.trees)
          s += model.learning_rate * tree_predict(tree, x.row(i));
        out[i] = s;
      }
      break;
  }
  return out;
}

void dump_regressor(const TrainedRegressor& model, const std::filesystem::path& path) {
  json j;
  j["family"] = to_string(model.family);
  j["feature_width"] = model.feature_width;
  switch (model.family) {
    case Family::ridge:
      j["coef"] = model.coef;
      j["intercept"] = model.intercept;
      break;
    case Family::mlp: {
      json layers = json::array();
      for (const auto& l : model.net.layers) {
        layers.push_back({{"out", l.weight.rows()},
                          {"in", l.weight.cols()},
                          {"act", nn::to_string(l.act)},
                          {"w", std::vector<double>(l.weight.flat().begin(),
                                                    l.weight.flat().end())},
                          {"b", l.bias}});
      }
      j["layers"] = std::move(layers);
      j["x_mean"] = model.net.x_mean;
      j["x_std"] = model.net.x_std;
      break;
    }
    case Family::gbdt: {
      j["base_score"] = model.base_score;
      j["learning_rate"] = model.learning_rate;
      j["best_iteration"] = model.best_iteration;
      json trees = json::array();
      for (const auto& tree : model.trees) {
        json nodes = json::array();
        for (const auto& n : tree)
          nodes.push_back({{"feature", n.feature},
                           {"threshold", n.threshold},
                           {"left", n.left},
                           {"right", n.right},
                           {"value", n.value},
                           {"n", n.n_samples}});
        trees.push_back(std::move(nodes));
      }
      j["trees"] = std::move(trees);
      break;
    }
  }
  write_text_file(path, j.dump() + "\n");
}

}  // namespace pdfm::downstream
