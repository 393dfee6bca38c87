#include "hoiscope/corex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hoiscope/rng.hpp"

namespace hoiscope {

namespace {

constexpr double kVarFloor = 1e-8;  // floor on Var(X_i | Z)

// Shared quantities for objective and gradient at (W, C).
//   R = W C          (m x p)
//   M = I + W C W'   (m x m, positive definite)
//   A = M^{-1} R
//   v_i = 1 - r_i' M^{-1} r_i   (conditional variance of X_i given Z)
//   S_ji = M_jj - R_ji^2        (appears in the per-variable TC(Z|X_i) terms)
struct Workspace {
  Matrix r;
  Matrix a;
  Matrix s;
  Vector mdiag;
  Vector v;         // raw, before flooring
  double logdet_m = 0.0;
  Eigen::LLT<Matrix> llt;
};

Workspace assemble(const Matrix& w, const Matrix& c) {
  Workspace ws;
  ws.r.noalias() = w * c;
  Matrix m = ws.r * w.transpose();
  m = 0.5 * (m + m.transpose()).eval();  // enforce exact symmetry
  m.diagonal().array() += 1.0;
  ws.llt.compute(m);
  if (ws.llt.info() != Eigen::Success)
    throw NumericError("latent covariance factorization failed");
  ws.logdet_m = 0.0;
  for (Index j = 0; j < m.rows(); ++j)
    ws.logdet_m += 2.0 * std::log(ws.llt.matrixLLT()(j, j));
  ws.mdiag = m.diagonal();
  ws.a = ws.llt.solve(ws.r);
  ws.v = (1.0 - (ws.r.cwiseProduct(ws.a)).colwise().sum().array()).matrix();
  ws.s = (ws.mdiag.replicate(1, ws.r.cols()) - ws.r.cwiseAbs2()).eval();
  return ws;
}

void check_dims(const Matrix& w, const Matrix& c) {
  if (c.rows() != c.cols()) throw ConfigError("correlation matrix must be square");
  if (w.cols() != c.cols())
    throw ConfigError("weight columns must match correlation dimension");
  if (w.rows() < 1) throw ConfigError("factor count must be at least 1");
  if (!w.allFinite() || !c.allFinite())
    throw NumericError("non-finite input to objective");
}

}  // namespace

Matrix sample_correlation(const Matrix& standardized, double ridge) {
  const Index n = standardized.rows();
  if (n < 1) throw DataError("correlation requires at least one row");
  Matrix c = (standardized.transpose() * standardized) / double(n);
  c = 0.5 * (c + c.transpose()).eval();
  if (ridge > 0.0) c.diagonal().array() += ridge;
  return c;
}

double corex_objective(const Matrix& w, const Matrix& c, double lambda) {
  check_dims(w, c);
  Workspace ws = assemble(w, c);
  const Index p = c.cols();

  // L = 1/2 sum_i log v_i + 1/2 sum_j log M_jj + lambda sum_i Q_i with
  //   Q_i = 1/2 sum_j log S_ji - 1/2 log det M - 1/2 log v_i,
  // the W-independent -1/2 log det C dropped. Grouping the log v terms gives
  // a net coefficient (1 - lambda)/2; the TC(Z) log det M cancels against the
  // one inside TC(X|Z), leaving only Q's -lambda p/2 log det M.
  double sum_log_v = 0.0;
  for (Index i = 0; i < p; ++i)
    sum_log_v += std::log(std::max(ws.v(i), kVarFloor));

  if ((ws.mdiag.array() <= 0.0).any())
    throw NumericError("nonpositive log argument in objective");
  double sum_log_mdiag = ws.mdiag.array().log().sum();

  double obj = 0.5 * (1.0 - lambda) * sum_log_v + 0.5 * sum_log_mdiag;

  if (lambda != 0.0) {
    double sum_log_s = 0.0;
    for (Index i = 0; i < p; ++i)
      for (Index j = 0; j < w.rows(); ++j) {
        double s = ws.s(j, i);
        if (s <= 0.0) throw NumericError("nonpositive log argument in objective");
        sum_log_s += std::log(s);
      }
    obj += lambda * (0.5 * sum_log_s - 0.5 * double(p) * ws.logdet_m);
  }
  if (!std::isfinite(obj)) throw NumericError("objective is not finite");
  return obj;
}

Matrix corex_gradient(const Matrix& w, const Matrix& c, double lambda) {
  check_dims(w, c);
  Workspace ws = assemble(w, c);
  const Index m = w.rows();
  const Index p = c.cols();

  // Floored variances contribute zero gradient (the objective is locally
  // constant in them).
  Vector inv_v(p);
  for (Index i = 0; i < p; ++i)
    inv_v(i) = (ws.v(i) > kVarFloor) ? 1.0 / ws.v(i) : 0.0;

  Matrix grad = Matrix::Zero(m, p);

  // d/dW of (1 - lambda)/2 sum_i log v_i:
  //   (1 - lambda) [ (A D_v A') R - (A D_v) C ],  D_v = diag(inv_v).
  if (lambda != 1.0) {
    Matrix av = ws.a * inv_v.asDiagonal();
    grad.noalias() += (1.0 - lambda) * ((av * ws.a.transpose()) * ws.r - av * c);
  }

  // d/dW of 1/2 sum_j log M_jj: diag(1/M_jj) R.
  grad.noalias() += ws.mdiag.cwiseInverse().asDiagonal() * ws.r;

  if (lambda != 0.0) {
    // d/dW of lambda/2 sum_{i,j} log S_ji: lambda [ diag(sum_i 1/S_ji) R - (R./S) C ].
    Vector row_inv_s = ws.s.cwiseInverse().rowwise().sum();
    grad.noalias() += lambda * (row_inv_s.asDiagonal() * ws.r);
    grad.noalias() -= lambda * (ws.r.cwiseQuotient(ws.s) * c);
    // d/dW of -lambda p/2 log det M: -lambda p M^{-1} R = -lambda p A.
    grad.noalias() -= lambda * double(p) * ws.a;
  }

  if (!grad.allFinite()) throw NumericError("gradient is not finite");
  return grad;
}

Matrix fit_weights(const Matrix& c, int m, const CorexOptions& options,
                   std::vector<double>* trace_out) {
  if (m < 1) throw ConfigError("factor count must be at least 1");
  if (c.rows() != c.cols()) throw ConfigError("correlation matrix must be square");
  const Index p = c.cols();

  // Gaussian init, scale 1/sqrt(p), filled row-major for reproducibility.
  SplitMix64 rng(options.seed);
  Matrix w(m, p);
  const double scale = 1.0 / std::sqrt(double(p));
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < p; ++j) w(i, j) = scale * rng.normal();

  Matrix mom1 = Matrix::Zero(m, p);
  Matrix mom2 = Matrix::Zero(m, p);
  double lr = options.lr;
  int adam_t = 0;
  int restarts = 0;
  int since_phase = 0;  // iterations since start or last restart

  std::vector<double> local_trace;
  std::vector<double>& trace = trace_out ? *trace_out : local_trace;
  trace.clear();
  double cur = corex_objective(w, c, options.lambda);
  trace.push_back(cur);

  for (int it = 1; it <= options.max_iter; ++it) {
    Matrix g = corex_gradient(w, c, options.lambda);
    ++adam_t;
    ++since_phase;
    mom1 = options.beta1 * mom1 + (1.0 - options.beta1) * g;
    mom2 = options.beta2 * mom2 + (1.0 - options.beta2) * g.cwiseAbs2();
    double bc1 = 1.0 - std::pow(options.beta1, adam_t);
    double bc2 = 1.0 - std::pow(options.beta2, adam_t);
    Matrix step = (lr / bc1) * mom1.cwiseQuotient(
        ((mom2 / bc2).cwiseSqrt().array() + options.adam_eps).matrix());

    if (it <= options.burn_in) {
      w -= step;
      cur = corex_objective(w, c, options.lambda);
    } else {
      // Monotone safeguard: never accept an uphill move after burn-in.
      double scale_try = 1.0;
      bool accepted = false;
      for (int attempt = 0; attempt < 30; ++attempt) {
        Matrix w_new = w - scale_try * step;
        double next = corex_objective(w_new, c, options.lambda);
        if (next <= cur) {
          w = std::move(w_new);
          cur = next;
          accepted = true;
          break;
        }
        scale_try *= 0.5;
      }
      if (!accepted || scale_try < 0.25) lr *= 0.5;  // persistent overshoot
    }
    trace.push_back(cur);

    if (since_phase > options.window) {
      double prev = trace[trace.size() - 1 - options.window];
      if (std::abs(cur - prev) <
          options.tol * std::max(1.0, std::abs(prev))) {
        if (restarts < 1 && it < options.max_iter) {
          // One restart: clear moments, restore the learning rate, continue.
          ++restarts;
          mom1.setZero();
          mom2.setZero();
          adam_t = 0;
          lr = options.lr;
          since_phase = 0;
        } else {
          break;
        }
      }
    }
  }
  return w;
}

CorexModel fit_linear_corex(const DataMatrix& standardized_cluster, int m,
                            const CorexOptions& options, Scaler scaler) {
  if (m < 1) throw ConfigError("factor count must be at least 1");
  const Index n = standardized_cluster.rows();
  const Index p = standardized_cluster.cols();
  if (n < 2) throw DataError("fit requires at least 2 rows");
  standardized_cluster.validate();

  double ridge = 0.0;
  Matrix c = sample_correlation(standardized_cluster.values, 0.0);
  bool force_ridge = p > n;
  if (!force_ridge) {
    Eigen::LLT<Matrix> probe(c);
    force_ridge = probe.info() != Eigen::Success;
  }
  if (force_ridge) {
    ridge = options.ridge;
    c.diagonal().array() += ridge;
  }

  CorexModel model;
  model.m = m;
  model.p = static_cast<int>(p);
  model.scaler = std::move(scaler);
  model.seed = options.seed;
  model.ridge = ridge;
  model.w = fit_weights(c, m, options, &model.trace);
  return model;
}

CorexModel fit_cluster(const DataMatrix& raw_cluster, int m,
                       const CorexOptions& options) {
  auto [xs, scaler] = standardize(raw_cluster);
  return fit_linear_corex(xs, m, options, std::move(scaler));
}

Matrix factor_feature_mi(const CorexModel& model, const Matrix& c) {
  Workspace ws = assemble(model.w, c);
  const Index m = model.w.rows();
  const Index p = model.w.cols();
  Matrix mi(m, p);
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < p; ++i) {
      double rho2 = ws.r(j, i) * ws.r(j, i) / ws.mdiag(j);
      rho2 = std::clamp(rho2, 0.0, 1.0 - 1e-12);
      mi(j, i) = -0.5 * std::log1p(-rho2);
    }
  return mi;
}

std::pair<std::vector<double>, std::vector<int>> tc_explained(
    const CorexModel& model, const Matrix& c) {
  Workspace ws = assemble(model.w, c);
  Matrix mi = factor_feature_mi(model, c);
  const Index m = model.w.rows();
  std::vector<double> tc(static_cast<std::size_t>(m));
  for (Index j = 0; j < m; ++j)
    tc[static_cast<std::size_t>(j)] = mi.row(j).sum() - 0.5 * std::log(ws.mdiag(j));
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return tc[a] > tc[b]; });
  return {std::move(tc), std::move(order)};
}

Matrix transform(const CorexModel& model, const DataMatrix& x) {
  x.validate();
  Matrix z;
  if (!model.scaler.empty()) {
    z = model.scaler.apply(x.values);
  } else {
    z = x.values;
  }
  if (z.cols() != model.p)
    throw DataError("transform expects " + std::to_string(model.p) +
                    " features after scaling, got " + std::to_string(z.cols()));
  return z * model.w.transpose();
}

FactorReport make_factor_report(const CorexModel& model, const Matrix& c,
                                int cluster_id,
                                std::vector<std::string> feature_names) {
  if (static_cast<Index>(feature_names.size()) != model.w.cols())
    throw ConfigError("feature name count must match model dimension");
  FactorReport report;
  report.cluster_id = cluster_id;
  report.mi = factor_feature_mi(model, c);
  auto [tc, order] = tc_explained(model, c);
  report.tc = std::move(tc);
  report.order = std::move(order);
  report.feature_names = std::move(feature_names);
  return report;
}

}  // namespace hoiscope
