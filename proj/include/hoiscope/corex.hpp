#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hoiscope/data.hpp"

namespace hoiscope {

struct CorexOptions {
  int max_iter = 10000;
  double lr = 5e-3;
  double tol = 1e-7;         // relative objective change over `window` iterations
  std::uint64_t seed = 0;
  double lambda = 1.0;
  double ridge = 1e-4;       // diagonal added to C when p > N or Cholesky fails
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int burn_in = 100;         // iterations before the monotone safeguard engages
  int window = 50;
};

// Linear latent-factor model z = Wx + eps fitted by total-correlation
// minimization on standardized data.
struct CorexModel {
  Matrix w;                  // m x p
  int m = 0;
  int p = 0;
  Scaler scaler;             // standardization of the fitting slice (may be empty)
  std::vector<double> trace; // objective value per iteration, index 0 = initial
  std::uint64_t seed = 0;
  double ridge = 0.0;        // ridge actually applied to C (0 if none)
};

// Ranked factor summary for one cluster.
struct FactorReport {
  int cluster_id = 0;
  Matrix mi;                      // m x p, nats
  std::vector<double> tc;         // per-factor total correlation explained
  std::vector<int> order;         // factor indices, descending tc
  std::vector<std::string> feature_names;
};

// Sample correlation C = X'X / N of standardized X, with `ridge` added to the
// diagonal when requested (pass 0 to skip).
Matrix sample_correlation(const Matrix& standardized, double ridge = 0.0);

// Objective: (1-lambda) TC(X|Z) + TC(Z) + lambda * sum_i Q_i, Gaussian closed
// form, constant -1/2 log det C dropped. Throws NumericError if the implied
// factorizations break down.
double corex_objective(const Matrix& w, const Matrix& c, double lambda = 1.0);

// Analytic gradient of corex_objective in W.
Matrix corex_gradient(const Matrix& w, const Matrix& c, double lambda = 1.0);

// Adam descent on corex_objective with a monotone safeguard after burn-in and
// a single moment/learning-rate restart at first convergence. If `trace` is
// given it receives the per-iteration objective values.
Matrix fit_weights(const Matrix& c, int m, const CorexOptions& options,
                   std::vector<double>* trace = nullptr);

// Fit on cluster data that is already standardized (each column mean 0 /
// std 1). `scaler` describes that standardization and is stored on the model.
CorexModel fit_linear_corex(const DataMatrix& standardized_cluster, int m,
                            const CorexOptions& options = {},
                            Scaler scaler = {});

// Convenience: standardize a raw cluster slice, then fit.
CorexModel fit_cluster(const DataMatrix& raw_cluster, int m,
                       const CorexOptions& options = {});

// I(X_i; Z_j) in nats for every factor/feature pair: rho^2 = r_ij^2 / M_jj,
// MI = -1/2 log(1 - rho^2), rho^2 clamped to [0, 1 - 1e-12].
Matrix factor_feature_mi(const CorexModel& model, const Matrix& c);

// Total correlation explained per factor and the descending ranking
// (ties broken by ascending factor index).
std::pair<std::vector<double>, std::vector<int>> tc_explained(
    const CorexModel& model, const Matrix& c);

// Posterior mean factors for new rows: applies the model scaler (when
// present), then Z = X W'.
Matrix transform(const CorexModel& model, const DataMatrix& x);

FactorReport make_factor_report(const CorexModel& model, const Matrix& c,
                                int cluster_id,
                                std::vector<std::string> feature_names);

}  // namespace hoiscope
