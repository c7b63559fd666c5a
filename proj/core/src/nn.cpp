#include "pdfm/nn.hpp"

#include <cmath>

#include "pdfm/errors.hpp"

namespace pdfm::nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::gelu: return "gelu";
  }
  return "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "gelu") return Activation::gelu;
  throw ConfigError("unknown activation: " + s);
}

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }
double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double activate(Activation act, double x) {
  switch (act) {
    case Activation::identity: return x;
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::gelu: return gelu(x);
  }
  return x;
}

double activate_grad(Activation act, double x) {
  switch (act) {
    case Activation::identity: return 1.0;
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::gelu: return gelu_grad(x);
  }
  return 1.0;
}

}  // namespace

double gelu(double x) { return x * norm_cdf(x); }

double gelu_grad(double x) { return norm_cdf(x) + x * norm_pdf(x); }

DenseLayer make_dense(std::size_t out, std::size_t in, Activation act, Rng& rng) {
  DenseLayer layer;
  layer.weight = Matrix(out, in);
  layer.bias.assign(out, 0.0);
  layer.act = act;
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& w : layer.weight.flat()) w = rng.uniform(-limit, limit);
  return layer;
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& input, DenseCache* cache) {
  if (input.cols() != layer.in_dim())
    throw SchemaError("dense_forward: input width " + std::to_string(input.cols()) +
                      " != layer in_dim " + std::to_string(layer.in_dim()));
  Matrix pre = matmul_nt(input, layer.weight);
  for (std::size_t i = 0; i < pre.rows(); ++i)
    for (std::size_t j = 0; j < pre.cols(); ++j) pre.at(i, j) += layer.bias[j];
  if (cache) {
    cache->input = input;
    cache->preact = pre;
  }
  Matrix out = pre;
  if (layer.act != Activation::identity)
    for (double& v : out.flat()) v = activate(layer.act, v);
  return out;
}

DenseGrads dense_backward(const DenseLayer& layer, const DenseCache& cache,
                          const Matrix& dout, Matrix* dinput) {
  if (dout.rows() != cache.preact.rows() || dout.cols() != cache.preact.cols())
    throw SchemaError("dense_backward: upstream gradient shape mismatch");
  Matrix dpre = dout;
  if (layer.act != Activation::identity) {
    for (std::size_t i = 0; i < dpre.size(); ++i)
      dpre.flat()[i] *= activate_grad(layer.act, cache.preact.flat()[i]);
  }
  DenseGrads grads;
  grads.dweight = matmul_tn(dpre, cache.input);
  grads.dbias.assign(layer.out_dim(), 0.0);
  for (std::size_t i = 0; i < dpre.rows(); ++i)
    for (std::size_t j = 0; j < dpre.cols(); ++j) grads.dbias[j] += dpre.at(i, j);
  if (dinput) *dinput = matmul(dpre, layer.weight);
  return grads;
}

Matrix dropout(const Matrix& batch, double rate, bool training, Rng& rng, Matrix* mask) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) {
    if (mask) *mask = Matrix(batch.rows(), batch.cols(), 1.0);
    return batch;
  }
  const double scale = 1.0 / (1.0 - rate);
  Matrix out(batch.rows(), batch.cols());
  Matrix m(batch.rows(), batch.cols());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double keep = rng.uniform() >= rate ? scale : 0.0;
    m.flat()[i] = keep;
    out.flat()[i] = batch.flat()[i] * keep;
  }
  if (mask) *mask = std::move(m);
  return out;
}

HuberResult huber_loss(std::span<const double> pred, std::span<const double> target,
                       double delta) {
  if (pred.size() != target.size())
    throw SchemaError("huber_loss: length mismatch");
  if (delta <= 0.0) throw ConfigError("huber delta must be positive");
  if (pred.empty()) throw SchemaError("huber_loss: empty input");
  HuberResult res;
  res.grad.assign(pred.size(), 0.0);
  const double n = static_cast<double>(pred.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - target[i];
    const double a = std::abs(r);
    if (a <= delta) {
      total += 0.5 * r * r;
      res.grad[i] = r / n;
    } else {
      total += delta * (a - 0.5 * delta);
      res.grad[i] = (r > 0.0 ? delta : -delta) / n;
    }
  }
  res.loss = total / n;
  return res;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr) {
  if (params.size() != grads.size())
    throw SchemaError("adam_step: gradient shape mismatch");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

double cosine_lr(long step, const CosineSchedule& schedule) {
  if (schedule.total_steps < 1) throw ConfigError("cosine schedule needs total_steps >= 1");
  if (schedule.lr_max < schedule.lr_min || schedule.lr_min < 0.0)
    throw ConfigError("cosine schedule needs lr_max >= lr_min >= 0");
  if (step >= schedule.total_steps) return schedule.lr_min;
  if (step < 0) step = 0;
  const double frac = static_cast<double>(step) / static_cast<double>(schedule.total_steps);
  return schedule.lr_min +
         0.5 * (schedule.lr_max - schedule.lr_min) * (1.0 + std::cos(3.14159265358979323846 * frac));
}

GradCheckResult grad_check(const std::function<double()>& loss,
                           std::span<const std::span<double>> params,
                           std::span<const std::span<const double>> grads,
                           double eps) {
  if (params.size() != grads.size())
    throw SchemaError("grad_check: parameter/gradient group count mismatch");
  GradCheckResult result;
  std::size_t flat = 0;
  for (std::size_t g = 0; g < params.size(); ++g) {
    auto p = params[g];
    auto a = grads[g];
    if (p.size() != a.size()) throw SchemaError("grad_check: group size mismatch");
    for (std::size_t i = 0; i < p.size(); ++i, ++flat) {
      const double saved = p[i];
      p[i] = saved + eps;
      const double lp = loss();
      p[i] = saved - eps;
      const double lm = loss();
      p[i] = saved;
      const double numeric = (lp - lm) / (2.0 * eps);
      const double analytic = a[i];
      double rel = 0.0;
      if (std::abs(analytic) > 1e-10 || std::abs(numeric) > 1e-10)
        rel = std::abs(analytic - numeric) / std::max(std::abs(numeric), 1e-10);
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = flat;
      }
    }
  }
  return result;
}

GradCheckResult grad_check(const std::function<double()>& loss,
                           std::span<double> params, std::span<const double> grads,
                           double eps) {
  std::span<double> p[1] = {params};
  std::span<const double> g[1] = {grads};
  return grad_check(loss, std::span<const std::span<double>>(p, 1),
                    std::span<const std::span<const double>>(g, 1), eps);
}

}  // namespace pdfm::nn
