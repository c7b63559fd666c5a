#include "pdfm/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "pdfm/csv.hpp"
#include "pdfm/errors.hpp"

namespace pdfm::forecast {

void ThreePartSplit::validate(std::size_t n_steps) const {
  if (!(p1_end > 0 && p1_end < p2_end && p2_end < p3_end && p3_end <= n_steps))
    throw ConfigError("forecast split parts must be contiguous, ordered and fit the panel");
}

std::string to_string(ForecastFamily f) {
  switch (f) {
    case ForecastFamily::naive_last: return "naive_last";
    case ForecastFamily::seasonal_naive: return "seasonal_naive";
    case ForecastFamily::ar: return "ar";
    case ForecastFamily::arima: return "arima";
  }
  return "naive_last";
}

ForecastFamily forecast_family_from_string(const std::string& s) {
  if (s == "naive_last") return ForecastFamily::naive_last;
  if (s == "seasonal_naive") return ForecastFamily::seasonal_naive;
  if (s == "ar") return ForecastFamily::ar;
  if (s == "arima") return ForecastFamily::arima;
  throw ConfigError("unknown forecaster family: " + s);
}

void ForecasterSpec::validate() const {
  if (p < 0 || d < 0 || q < 0) throw ConfigError("forecaster orders must be >= 0");
  if ((family == ForecastFamily::ar || family == ForecastFamily::arima) && p + q < 1)
    throw ConfigError("ar/arima forecaster needs p + q >= 1");
  if (family == ForecastFamily::seasonal_naive && seasonal_period < 1)
    throw ConfigError("seasonal_naive needs a positive period");
}

// ---------------------------------------------------------------------------
// ARIMA

namespace {

// MA coefficients are kept strictly inside the invertible region; exact for
// q = 1, a pragmatic elementwise bound for higher orders.
constexpr double kMaBound = 0.98;

std::vector<double> difference(std::span<const double> y, int d,
                               std::vector<double>* last_levels) {
  std::vector<double> w(y.begin(), y.end());
  if (last_levels) last_levels->clear();
  for (int i = 0; i < d; ++i) {
    if (w.size() < 2) throw ValidationError("arima_fit: series too short to difference");
    if (last_levels) last_levels->push_back(w.back());
    std::vector<double> next(w.size() - 1);
    for (std::size_t t = 1; t < w.size(); ++t) next[t - 1] = w[t] - w[t - 1];
    w = std::move(next);
  }
  return w;
}

/// OLS with intercept: y_t ~ 1 + regressors. Returns {intercept, coefs...}.
std::vector<double> ols(const std::vector<std::vector<double>>& rows,
                        const std::vector<double>& targets) {
  const std::size_t n = rows.size();
  const std::size_t p = rows.empty() ? 0 : rows[0].size();
  Matrix x(n, p + 1);
  for (std::size_t i = 0; i < n; ++i) {
    x.at(i, 0) = 1.0;
    for (std::size_t j = 0; j < p; ++j) x.at(i, j + 1) = rows[i][j];
  }
  Matrix gram = matmul_tn(x, x);
  for (std::size_t j = 0; j <= p; ++j) gram.at(j, j) += 1e-10;  // ridge jitter
  std::vector<double> xty(p + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= p; ++j) xty[j] += x.at(i, j) * targets[i];
  // Gaussian elimination (small, symmetric positive definite after jitter).
  Matrix a = gram;
  std::vector<double> b = xty;
  const std::size_t m = p + 1;
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < m; ++r)
      if (std::abs(a.at(r, col)) > std::abs(a.at(pivot, col))) pivot = r;
    if (std::abs(a.at(pivot, col)) < 1e-300)
      throw TrainingError("arima_fit: singular regression");
    if (pivot != col) {
      for (std::size_t c2 = 0; c2 < m; ++c2) std::swap(a.at(pivot, c2), a.at(col, c2));
      std::swap(b[pivot], b[col]);
    }
    for (std::size_t r = col + 1; r < m; ++r) {
      const double f = a.at(r, col) / a.at(col, col);
      for (std::size_t c2 = col; c2 < m; ++c2) a.at(r, c2) -= f * a.at(col, c2);
      b[r] -= f * b[col];
    }
  }
  for (std::size_t ri = m; ri > 0; --ri) {
    const std::size_t r = ri - 1;
    double s = b[r];
    for (std::size_t c2 = r + 1; c2 < m; ++c2) s -= a.at(r, c2) * b[c2];
    b[r] = s / a.at(r, r);
  }
  return b;
}

struct CssWork {
  std::vector<double> eps;
  // d eps / d param, one column per parameter (c, phi..., theta...)
  std::vector<std::vector<double>> deps;
};

double css_objective(std::span<const double> w, double c, std::span<const double> phi,
                     std::span<const double> theta, CssWork* work) {
  const int p = static_cast<int>(phi.size());
  const int q = static_cast<int>(theta.size());
  const int n = static_cast<int>(w.size());
  const int nparam = 1 + p + q;
  std::vector<double> eps(n, 0.0);
  std::vector<std::vector<double>> deps;
  if (work) deps.assign(nparam, std::vector<double>(n, 0.0));
  double s = 0.0;
  for (int t = p; t < n; ++t) {
    double e = w[t] - c;
    for (int i = 0; i < p; ++i) e -= phi[i] * w[t - 1 - i];
    for (int j = 0; j < q; ++j) e -= theta[j] * (t - 1 - j >= 0 ? eps[t - 1 - j] : 0.0);
    eps[t] = e;
    s += e * e;
    if (work) {
      for (int k = 0; k < nparam; ++k) {
        double g;
        if (k == 0) {
          g = -1.0;
        } else if (k <= p) {
          g = -w[t - k];  // k-1 is the AR lag index
        } else {
          const int j = k - 1 - p;
          g = t - 1 - j >= 0 ? -eps[t - 1 - j] : 0.0;
        }
        for (int j = 0; j < q; ++j)
          if (t - 1 - j >= 0) g -= theta[j] * deps[k][t - 1 - j];
        deps[k][t] = g;
      }
    }
  }
  if (work) {
    work->eps = std::move(eps);
    work->deps = std::move(deps);
  }
  return s;
}

/// Durand-Kerner root finding for the AR characteristic polynomial
/// 1 - phi_1 z - ... - phi_p z^p; stationary iff all roots lie outside the
/// unit circle.
bool ar_stable(std::span<const double> phi) {
  const int p = static_cast<int>(phi.size());
  if (p == 0) return true;
  std::vector<std::complex<double>> coef(p + 1);
  coef[0] = 1.0;
  for (int i = 0; i < p; ++i) coef[i + 1] = -phi[i];
  while (coef.size() > 1 && std::abs(coef.back()) < 1e-14) coef.pop_back();
  const int deg = static_cast<int>(coef.size()) - 1;
  if (deg == 0) return true;
  std::vector<std::complex<double>> roots(deg);
  for (int i = 0; i < deg; ++i)
    roots[i] = std::pow(std::complex<double>(0.4, 0.9), i + 1);
  for (int iter = 0; iter < 200; ++iter) {
    double moved = 0.0;
    for (int i = 0; i < deg; ++i) {
      std::complex<double> num = coef[deg];
      for (int k = deg - 1; k >= 0; --k) num = num * roots[i] + coef[k];
      std::complex<double> den = coef[deg];
      for (int j = 0; j < deg; ++j)
        if (j != i) den *= roots[i] - roots[j];
      if (std::abs(den) < 1e-300) continue;
      const auto delta = num / den;
      roots[i] -= delta;
      moved = std::max(moved, std::abs(delta));
    }
    if (moved < 1e-12) break;
  }
  for (const auto& r : roots)
    if (std::abs(r) <= 1.0 + 1e-9) return false;
  return true;
}

}  // namespace

ArimaModel arima_fit(std::span<const double> series, int p, int d, int q) {
  if (p < 0 || d < 0 || q < 0) throw ConfigError("arima orders must be >= 0");
  ArimaModel model;
  model.p = p;
  model.d = d;
  model.q = q;

  std::vector<double> w = difference(series, d, &model.last_levels);
  const int n = static_cast<int>(w.size());
  if (n < std::max({10 * (p + q), p + q + 2, 3}))
    throw ValidationError("arima_fit: differenced series of length " + std::to_string(n) +
                          " is too short for orders (" + std::to_string(p) + "," +
                          std::to_string(d) + "," + std::to_string(q) + ")");

  model.ar.assign(p, 0.0);
  model.ma.assign(q, 0.0);

  if (p + q == 0) {
    model.intercept = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(n);
  } else {
    // Hannan-Rissanen: long-AR residuals, then one joint regression.
    std::vector<double> eps0(n, 0.0);
    if (q > 0) {
      const int m = std::min(std::max(p, q) + 5, std::max(1, n / 4));
      if (n - m >= m + 2) {
        std::vector<std::vector<double>> rows;
        std::vector<double> targets;
        for (int t = m; t < n; ++t) {
          std::vector<double> row(m);
          for (int i = 0; i < m; ++i) row[i] = w[t - 1 - i];
          rows.push_back(std::move(row));
          targets.push_back(w[t]);
        }
        auto beta = ols(rows, targets);
        for (int t = m; t < n; ++t) {
          double fitted = beta[0];
          for (int i = 0; i < m; ++i) fitted += beta[i + 1] * w[t - 1 - i];
          eps0[t] = w[t] - fitted;
        }
      }
    }
    {
      const int t0 = std::max(p, q);
      std::vector<std::vector<double>> rows;
      std::vector<double> targets;
      for (int t = t0; t < n; ++t) {
        std::vector<double> row;
        for (int i = 0; i < p; ++i) row.push_back(w[t - 1 - i]);
        for (int j = 0; j < q; ++j) row.push_back(eps0[t - 1 - j]);
        rows.push_back(std::move(row));
        targets.push_back(w[t]);
      }
      auto beta = ols(rows, targets);
      model.intercept = beta[0];
      for (int i = 0; i < p; ++i) model.ar[i] = beta[1 + i];
      // MA coefficients stay inside the invertible region; an over-differenced
      // series otherwise drives theta onto the |theta| = 1 boundary and the
      // CSS minimum becomes unreachable.
      for (int j = 0; j < q; ++j)
        model.ma[j] = std::clamp(beta[1 + p + j], -kMaBound, kMaBound);
    }

    // CSS refinement by gradient descent with backtracking line search.
    if (q > 0) {
      const int nparam = 1 + p + q;
      std::vector<double> theta_v(nparam);
      theta_v[0] = model.intercept;
      for (int i = 0; i < p; ++i) theta_v[1 + i] = model.ar[i];
      for (int j = 0; j < q; ++j) theta_v[1 + p + j] = model.ma[j];

      auto eval = [&](const std::vector<double>& v, CssWork* work) {
        return css_objective(w, v[0],
                             std::span<const double>(v.data() + 1, p),
                             std::span<const double>(v.data() + 1 + p, q), work);
      };
      CssWork work;
      double obj = eval(theta_v, &work);
      model.objective_trace.push_back(obj);
      bool converged = false;
      for (int iter = 0; iter < 500; ++iter) {
        // Gradient and a diagonal curvature estimate (Gauss-Newton style)
        // from the same sensitivity recursion.
        std::vector<double> grad(nparam, 0.0), curv(nparam, 0.0);
        for (int k = 0; k < nparam; ++k) {
          for (int t = 0; t < n; ++t) {
            grad[k] += 2.0 * work.eps[t] * work.deps[k][t];
            curv[k] += 2.0 * work.deps[k][t] * work.deps[k][t];
          }
        }
        std::vector<double> dir(nparam);
        double gd = 0.0;
        for (int k = 0; k < nparam; ++k) {
          dir[k] = grad[k] / std::max(curv[k], 1e-12);
          gd += grad[k] * dir[k];
        }
        if (gd < 1e-24) {
          converged = true;
          break;
        }
        // Armijo backtracking along the scaled descent direction keeps the
        // objective non-increasing.
        double alpha = 1.0;
        std::vector<double> candidate(nparam);
        double cand_obj = obj;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
          for (int k = 0; k < nparam; ++k) candidate[k] = theta_v[k] - alpha * dir[k];
          for (int j = 0; j < q; ++j)
            candidate[1 + p + j] = std::clamp(candidate[1 + p + j], -kMaBound, kMaBound);
          cand_obj = eval(candidate, nullptr);
          // Projection onto the MA bound can eat into the Armijo model, so
          // plain decrease is accepted; the objective stays monotone.
          if (cand_obj < obj - 1e-16 * (1.0 + obj)) {
            accepted = true;
            break;
          }
          alpha *= 0.5;
        }
        if (!accepted) {
          converged = true;  // no further descent progress possible
          break;
        }
        theta_v = candidate;
        const double prev = obj;
        obj = eval(theta_v, &work);
        model.objective_trace.push_back(obj);
        if (std::abs(prev - obj) <= 1e-8 * (1.0 + std::abs(prev))) {
          converged = true;
          break;
        }
      }
      if (!converged) {
        std::string trace;
        for (std::size_t i = 0; i < std::min<std::size_t>(model.objective_trace.size(), 6); ++i)
          trace += (i ? ", " : "") + format_double(model.objective_trace[i]);
        trace += ", ..., " + format_double(model.objective_trace.back());
        throw TrainingError("arima_fit: CSS optimization did not converge; objective trace [" +
                            trace + "]");
      }
      model.intercept = theta_v[0];
      for (int i = 0; i < p; ++i) model.ar[i] = theta_v[1 + i];
      for (int j = 0; j < q; ++j) model.ma[j] = theta_v[1 + p + j];
    }
  }

  // Residuals and tails for forecasting.
  CssWork work;
  css_objective(w, model.intercept, model.ar, model.ma, &work);
  const int keep_w = std::max(p, 1);
  const int keep_e = std::max(q, 1);
  model.tail_w.assign(w.end() - std::min<std::size_t>(keep_w, w.size()), w.end());
  model.tail_e.assign(work.eps.end() - std::min<std::size_t>(keep_e, work.eps.size()),
                      work.eps.end());
  model.stable = ar_stable(model.ar);
  return model;
}

std::vector<double> arima_forecast(const ArimaModel& model, int horizon) {
  if (horizon < 0) throw ConfigError("arima_forecast: horizon must be >= 0");
  if (horizon == 0) return {};
  std::vector<double> w = model.tail_w;  // most recent last
  std::vector<double> e = model.tail_e;
  std::vector<double> fw(horizon, 0.0);
  for (int h = 0; h < horizon; ++h) {
    double v = model.intercept;
    for (int i = 0; i < model.p; ++i) {
      const int idx = static_cast<int>(w.size()) - 1 - i;
      v += model.ar[i] * (idx >= 0 ? w[idx] : 0.0);
    }
    for (int j = 0; j < model.q; ++j) {
      const int idx = static_cast<int>(e.size()) - 1 - j;
      v += model.ma[j] * (idx >= 0 ? e[idx] : 0.0);
    }
    fw[h] = v;
    w.push_back(v);
    e.push_back(0.0);  // future shocks at zero
  }
  // Integrate back d times; last_levels[i] is the final value at level i.
  std::vector<double> out = std::move(fw);
  for (int level = model.d - 1; level >= 0; --level) {
    double prev = model.last_levels[level];
    for (double& v : out) {
      v += prev;
      prev = v;
    }
  }
  return out;
}

std::vector<double> base_forecast(std::span<const double> context,
                                  const ForecasterSpec& spec, int horizon) {
  spec.validate();
  if (horizon < 0) throw ConfigError("base_forecast: horizon must be >= 0");
  const int n = static_cast<int>(context.size());
  std::size_t need = 3;
  if (spec.family == ForecastFamily::seasonal_naive)
    need = std::max<std::size_t>(need, spec.seasonal_period);
  if (spec.family == ForecastFamily::ar || spec.family == ForecastFamily::arima)
    need = std::max<std::size_t>(need, spec.p + spec.d);
  if (context.size() < need)
    throw ValidationError("base_forecast: context shorter than " + std::to_string(need));

  std::vector<double> out(horizon, 0.0);
  switch (spec.family) {
    case ForecastFamily::naive_last:
      std::fill(out.begin(), out.end(), context[n - 1]);
      break;
    case ForecastFamily::seasonal_naive: {
      const int m = spec.seasonal_period;
      for (int h = 0; h < horizon; ++h) out[h] = context[n - m + (h % m)];
      break;
    }
    case ForecastFamily::ar: {
      auto model = arima_fit(context, spec.p, spec.d, 0);
      out = arima_forecast(model, horizon);
      break;
    }
    case ForecastFamily::arima: {
      auto model = arima_fit(context, spec.p, spec.d, spec.q);
      out = arima_forecast(model, horizon);
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adapter

void AdapterConfig::validate() const {
  if (hidden_dims.size() != 2)
    throw ConfigError("adapter must have exactly two hidden layers");
  for (int d : hidden_dims)
    if (d < 1) throw ConfigError("adapter.hidden_dims entries must be >= 1");
  if (lr <= 0.0) throw ConfigError("adapter.lr must be positive");
  if (epochs < 0) throw ConfigError("adapter.epochs must be >= 0");
  if (batch < 1) throw ConfigError("adapter.batch must be >= 1");
}

double AdapterModel::correct(double base_value, std::span<const double> embedding) const {
  if (embedding.size() != embedding_width)
    throw SchemaError("adapter: embedding width mismatch");
  Matrix row(1, 1 + embedding_width);
  row.at(0, 0) = base_value;
  for (std::size_t j = 0; j < embedding_width; ++j) row.at(0, 1 + j) = embedding[j];
  return net.predict(row)[0];
}

AdapterModel train_adapter(const Matrix& base_part2, const Matrix& actual_part2,
                           const std::vector<std::string>& region_ids,
                           const model::EmbeddingTable& embeddings,
                           const AdapterConfig& cfg) {
  cfg.validate();
  if (base_part2.rows() != region_ids.size() || actual_part2.rows() != region_ids.size() ||
      base_part2.cols() != actual_part2.cols())
    throw SchemaError("train_adapter: shape mismatch");
  if (base_part2.cols() == 0)
    throw ValidationError("train_adapter: needs at least one part-2 step");

  std::map<std::string, std::size_t> emb_row;
  for (std::size_t i = 0; i < embeddings.ids.size(); ++i) emb_row[embeddings.ids[i]] = i;
  const std::size_t ew = embeddings.values.cols();

  const std::size_t steps = base_part2.cols();
  Matrix x(region_ids.size() * steps, 1 + ew);
  std::vector<double> y(region_ids.size() * steps);
  std::size_t r = 0;
  for (std::size_t i = 0; i < region_ids.size(); ++i) {
    auto it = emb_row.find(region_ids[i]);
    if (it == emb_row.end())
      throw JoinError("train_adapter: region '" + region_ids[i] + "' has no embedding");
    const auto emb = embeddings.values.row(it->second);
    for (std::size_t s = 0; s < steps; ++s, ++r) {
      x.at(r, 0) = base_part2.at(i, s);
      for (std::size_t j = 0; j < ew; ++j) x.at(r, 1 + j) = emb[j];
      y[r] = actual_part2.at(i, s);
    }
  }

  downstream::MlpFitOptions options;
  options.hidden_dims = cfg.hidden_dims;
  options.dropout = 0.0;
  options.lr = cfg.lr;
  options.epochs = cfg.epochs;
  options.batch = cfg.batch;
  options.rng_seed = cfg.rng_seed;

  AdapterModel adapter;
  adapter.embedding_width = ew;
  adapter.net = downstream::fit_mlp_regression(x, y, options);
  return adapter;
}

// ---------------------------------------------------------------------------
// Benchmark

ForecastTaskReport run_forecast_benchmark(const SeriesPanel& panel,
                                          const ThreePartSplit& split,
                                          const model::EmbeddingTable& embeddings,
                                          const ForecastBenchConfig& cfg) {
  split.validate(panel.values.cols());
  ForecastTaskReport report;
  report.task = panel.task;

  std::map<std::string, std::size_t> emb_row;
  for (std::size_t i = 0; i < embeddings.ids.size(); ++i) emb_row[embeddings.ids[i]] = i;

  // Symmetric region filter: valid mask, embedding coverage, nonzero actuals.
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < panel.ids.size(); ++i) {
    bool ok = panel.valid.empty() || panel.valid[i];
    if (ok && !emb_row.count(panel.ids[i])) ok = false;
    if (ok) {
      for (std::size_t t = split.p2_end; t < split.p3_end && ok; ++t)
        if (std::abs(panel.values.at(i, t)) < 1e-9) ok = false;
    }
    if (ok)
      rows.push_back(i);
    else
      ++report.regions_dropped;
  }
  if (rows.size() < 2)
    throw ValidationError("run_forecast_benchmark: fewer than 2 usable regions");
  report.regions_used = static_cast<int>(rows.size());
  for (auto i : rows) report.region_ids.push_back(panel.ids[i]);

  const int len2 = static_cast<int>(split.part2_len());
  const int len3 = static_cast<int>(split.part3_len());

  Matrix base_t(rows.size(), len3);        // context part1+part2
  Matrix arima_t(rows.size(), len3);       // supervised comparison
  Matrix base_tm1_p2(rows.size(), len2);   // context part1, part2 horizon
  Matrix base_tm1_p3(rows.size(), len3);   // context part1, part3 horizon
  Matrix actual_p2(rows.size(), len2);
  Matrix actual_p3(rows.size(), len3);

  if (cfg.external_base) {
    if (cfg.external_base->full_context.rows() != rows.size() ||
        cfg.external_base->full_context.cols() != static_cast<std::size_t>(len3) ||
        cfg.external_base->part1_context.rows() != rows.size() ||
        cfg.external_base->part1_context.cols() != static_cast<std::size_t>(len2 + len3))
      throw SchemaError("external base forecasts do not match the usable regions/steps");
  }

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto series = panel.values.row(rows[r]);
    const std::span<const double> full_ctx = series.subspan(0, split.p2_end);
    const std::span<const double> part1_ctx = series.subspan(0, split.p1_end);

    std::vector<double> f_base_t, f_tm1;
    if (cfg.external_base) {
      const auto fc = cfg.external_base->full_context.row(r);
      const auto pc = cfg.external_base->part1_context.row(r);
      f_base_t.assign(fc.begin(), fc.end());
      f_tm1.assign(pc.begin(), pc.end());
    } else {
      f_base_t = base_forecast(full_ctx, cfg.base, len3);
      f_tm1 = base_forecast(part1_ctx, cfg.base, len2 + len3);
    }
    auto f_arima = base_forecast(full_ctx, cfg.arima, len3);

    for (int h = 0; h < len3; ++h) {
      base_t.at(r, h) = f_base_t[h];
      arima_t.at(r, h) = f_arima[h];
      base_tm1_p3.at(r, h) = f_tm1[len2 + h];
      actual_p3.at(r, h) = series[split.p2_end + h];
    }
    for (int h = 0; h < len2; ++h) {
      base_tm1_p2.at(r, h) = f_tm1[h];
      actual_p2.at(r, h) = series[split.p1_end + h];
    }
  }

  auto adapter = train_adapter(base_tm1_p2, actual_p2, report.region_ids, embeddings,
                               cfg.adapter);
  Matrix corrected(rows.size(), len3);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto emb = embeddings.values.row(emb_row.at(report.region_ids[r]));
    for (int h = 0; h < len3; ++h)
      corrected.at(r, h) = adapter.correct(base_tm1_p3.at(r, h), emb);
  }

  auto score = [&](const std::string& method, const Matrix& pred) {
    ForecastMethodRow row;
    row.method = method;
    row.part3_forecasts = pred;
    row.region_errors.resize(rows.size());
    double total = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::vector<double> y(actual_p3.row(r).begin(), actual_p3.row(r).end());
      std::vector<double> yhat(pred.row(r).begin(), pred.row(r).end());
      row.region_errors[r] = bench::mape(y, yhat);
      total += row.region_errors[r];
    }
    row.mape = total / static_cast<double>(rows.size());
    return row;
  };

  report.methods.push_back(score("base_t", base_t));
  report.methods.push_back(score("arima_t", arima_t));
  report.methods.push_back(score("base_tminus1", base_tm1_p3));
  report.methods.push_back(score("base_tminus1_adapter", corrected));

  report.arima_vs_adapter = bench::paired_t_test(
      report.methods[1].region_errors, report.methods[3].region_errors, cfg.m_comparisons);
  return report;
}

Matrix load_forecasts_csv(const std::filesystem::path& path,
                          const std::vector<std::string>& region_ids,
                          std::size_t expected_steps) {
  auto t = read_csv(path);
  if (t.header.size() != expected_steps + 1)
    throw SchemaError("forecasts file has " + std::to_string(t.header.size() - 1) +
                      " steps, expected " + std::to_string(expected_steps));
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < t.rows.size(); ++i) row_of[t.rows[i][0]] = i;
  Matrix out(region_ids.size(), expected_steps);
  for (std::size_t i = 0; i < region_ids.size(); ++i) {
    auto it = row_of.find(region_ids[i]);
    if (it == row_of.end())
      throw JoinError("forecasts file missing region '" + region_ids[i] + "'");
    for (std::size_t j = 0; j < expected_steps; ++j)
      out.at(i, j) = parse_double(t.rows[it->second][j + 1]);
  }
  return out;
}

void write_forecasts_csv(const std::filesystem::path& path,
                         const std::vector<std::string>& region_ids,
                         const Matrix& forecasts) {
  CsvTable t;
  t.header.push_back("region_id");
  for (std::size_t j = 0; j < forecasts.cols(); ++j)
    t.header.push_back("t" + std::to_string(j));
  for (std::size_t i = 0; i < region_ids.size(); ++i) {
    std::vector<std::string> row{region_ids[i]};
    for (double v : forecasts.row(i)) row.push_back(format_double(v));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

}  // namespace pdfm::forecast
