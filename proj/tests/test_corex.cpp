#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "hoiscope/corex.hpp"
#include "hoiscope/rng.hpp"

using namespace hoiscope;

namespace {

// Central finite differences of corex_objective, the gradient oracle.
Matrix fd_gradient(const Matrix& w, const Matrix& c, double lambda,
                   double h = 1e-5) {
  Matrix g(w.rows(), w.cols());
  for (Index i = 0; i < w.rows(); ++i)
    for (Index j = 0; j < w.cols(); ++j) {
      Matrix wp = w, wm = w;
      wp(i, j) += h;
      wm(i, j) -= h;
      g(i, j) =
          (corex_objective(wp, c, lambda) - corex_objective(wm, c, lambda)) /
          (2.0 * h);
    }
  return g;
}

double max_rel_err(const Matrix& a, const Matrix& b) {
  double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-8);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

Matrix standardize_cols(Matrix x) {
  for (Index c = 0; c < x.cols(); ++c) {
    double mean = x.col(c).mean();
    double sd = std::sqrt((x.col(c).array() - mean).square().sum() /
                          double(x.rows()));
    x.col(c) = (x.col(c).array() - mean) / sd;
  }
  return x;
}

// Sample correlation of n rows with a few shared latent directions, so the
// matrix has real off-diagonal structure.
Matrix random_correlation(SplitMix64& rng, int p, int n = 300) {
  Matrix x(n, p);
  int shared = 2;
  Matrix load(shared, p);
  for (Index i = 0; i < load.size(); ++i) load.data()[i] = rng.normal();
  for (int r = 0; r < n; ++r) {
    Vector z(shared);
    for (int s = 0; s < shared; ++s) z(s) = rng.normal();
    for (int c = 0; c < p; ++c)
      x(r, c) = 0.6 * load.col(c).dot(z) + rng.normal();
  }
  return sample_correlation(standardize_cols(std::move(x)), 0.0);
}

Matrix random_weights(SplitMix64& rng, int m, int p) {
  Matrix w(m, p);
  const double scale = 1.0 / std::sqrt(double(p));
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = scale * rng.normal();
  return w;
}

// Rows = n samples of `blocks` equicorrelated 5-feature groups (corr rho).
DataMatrix block_data(SplitMix64& rng, int n, int blocks, double rho) {
  DataMatrix x;
  x.values.resize(n, 5 * blocks);
  for (int b = 0; b < blocks; ++b)
    for (int f = 0; f < 5; ++f)
      x.column_names.push_back("b" + std::to_string(b) + "f" + std::to_string(f));
  for (int r = 0; r < n; ++r)
    for (int b = 0; b < blocks; ++b) {
      double z = rng.normal();
      for (int f = 0; f < 5; ++f)
        x.values(r, 5 * b + f) =
            std::sqrt(rho) * z + std::sqrt(1.0 - rho) * rng.normal();
    }
  return x;
}

double logdet(const Matrix& c) {
  Eigen::LLT<Matrix> llt(c);
  REQUIRE(llt.info() == Eigen::Success);
  double ld = 0.0;
  for (Index j = 0; j < c.rows(); ++j)
    ld += 2.0 * std::log(llt.matrixLLT()(j, j));
  return ld;
}

}  // namespace

TEST_CASE("objective: exactly zero at W = 0") {
  SplitMix64 rng(1);
  Matrix c = random_correlation(rng, 6);
  CHECK(corex_objective(Matrix::Zero(1, 6), c) == 0.0);
  CHECK(corex_objective(Matrix::Zero(4, 6), c, 0.3) == 0.0);
  CHECK(corex_objective(Matrix::Zero(2, 3), Matrix::Identity(3, 3)) == 0.0);
}

TEST_CASE("objective: nonnegative for independent features") {
  SplitMix64 rng(2);
  Matrix c = Matrix::Identity(5, 5);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix w = random_weights(rng, 1 + int(rng.below(3)), 5);
    CHECK(corex_objective(w, c) >= -1e-12);
  }
}

TEST_CASE("objective: bounded below by half the correlation log-determinant") {
  // The W-independent -1/2 log det C is dropped, which shifts the true
  // nonnegative objective down by -1/2 log det C >= 0 (det of a correlation
  // matrix is at most 1). The sharp floor is therefore 1/2 log det C, and
  // values below zero are expected once W leaves the origin.
  SplitMix64 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    int p = 3 + int(rng.below(6));
    Matrix c = random_correlation(rng, p);
    double floor = 0.5 * logdet(c);
    Matrix w = random_weights(rng, 1 + int(rng.below(4)), p);
    double val = corex_objective(w, c);
    CHECK(val >= floor - 1e-9);
  }
}

TEST_CASE("objective: optimizer matches a brute-force grid oracle") {
  Matrix c(2, 2);
  c << 1.0, 0.9, 0.9, 1.0;
  // By exchange symmetry the optimum has equal weights; scan that ray.
  double grid_best = 1e300;
  for (long k = -5000; k <= 5000; ++k) {
    double wv = double(k) * 1e-3;
    Matrix w(1, 2);
    w << wv, wv;
    grid_best = std::min(grid_best, corex_objective(w, c));
  }
  CorexOptions opts;
  opts.seed = 3;
  std::vector<double> trace;
  Matrix w = fit_weights(c, 1, opts, &trace);
  double fitted = corex_objective(w, c);
  CHECK(std::abs(fitted - grid_best) < 1e-3);
  CHECK(grid_best < 0.0);  // the optimum genuinely sits below L(0) = 0
}

TEST_CASE("gradient: exactly zero at W = 0") {
  SplitMix64 rng(4);
  Matrix c = random_correlation(rng, 7);
  CHECK(corex_gradient(Matrix::Zero(3, 7), c).isZero(0.0));
  CHECK(corex_gradient(Matrix::Zero(1, 7), c, 0.25).isZero(0.0));
}

TEST_CASE("gradient: matches central finite differences") {
  SplitMix64 rng(5);
  const double lambdas[] = {1.0, 0.5, 0.0};
  for (int trial = 0; trial < 30; ++trial) {
    int p = 2 + int(rng.below(19));   // p <= 20
    int m = 1 + int(rng.below(5));    // m <= 5
    double lambda = lambdas[trial % 3];
    Matrix c = random_correlation(rng, p);
    Matrix w = random_weights(rng, m, p);
    Matrix ga = corex_gradient(w, c, lambda);
    Matrix gf = fd_gradient(w, c, lambda);
    CHECK(max_rel_err(ga, gf) < 1e-4);
  }
}

TEST_CASE("gradient: indifferent to the dropped additive constant") {
  SplitMix64 rng(6);
  Matrix c = random_correlation(rng, 8);
  Matrix w = random_weights(rng, 3, 8);
  const double shift = -0.5 * logdet(c);  // the dropped -1/2 log det C
  const double h = 1e-5;
  Matrix gf(w.rows(), w.cols());
  for (Index i = 0; i < w.rows(); ++i)
    for (Index j = 0; j < w.cols(); ++j) {
      Matrix wp = w, wm = w;
      wp(i, j) += h;
      wm(i, j) -= h;
      gf(i, j) = ((corex_objective(wp, c) + shift) -
                  (corex_objective(wm, c) + shift)) /
                 (2.0 * h);
    }
  CHECK(max_rel_err(corex_gradient(w, c), gf) < 1e-4);
}

TEST_CASE("mi: hand-computed scalar case") {
  CorexModel model;
  model.w = Matrix::Constant(1, 1, 1.0);
  model.m = 1;
  model.p = 1;
  Matrix c = Matrix::Identity(1, 1);
  Matrix mi = factor_feature_mi(model, c);
  // M = 2, r = 1, rho^2 = 1/2, MI = -log(1/2)/2 = log(2)/2
  CHECK(mi(0, 0) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-15));
  CHECK(mi(0, 0) == doctest::Approx(0.34657359).epsilon(1e-7));
}

TEST_CASE("mi: zero correlation gives zero, clamp keeps values finite") {
  CorexModel model;
  model.w = Matrix::Zero(2, 3);
  model.m = 2;
  model.p = 3;
  SplitMix64 rng(7);
  Matrix c = random_correlation(rng, 3);
  CHECK(factor_feature_mi(model, c).isZero(0.0));  // r = 0 everywhere

  CorexModel sharp;
  sharp.w = Matrix::Constant(1, 1, 1e7);  // near-deterministic factor
  sharp.m = 1;
  sharp.p = 1;
  Matrix one = Matrix::Identity(1, 1);
  double mi = factor_feature_mi(sharp, one)(0, 0);
  // The clamp bound 1 - 1e-12 is itself a rounded double, so compare against
  // the same expression rather than the algebraic 0.5*log(1e12).
  CHECK(mi == -0.5 * std::log1p(-(1.0 - 1e-12)));
  CHECK(mi == doctest::Approx(0.5 * std::log(1e12)).epsilon(1e-4));
  CHECK(mi <= 13.8156);
}

TEST_CASE("mi: nonnegative on random fitted-scale inputs") {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 25; ++trial) {
    int p = 2 + int(rng.below(10));
    CorexModel model;
    model.w = random_weights(rng, 1 + int(rng.below(4)), p) * 3.0;
    model.m = int(model.w.rows());
    model.p = p;
    Matrix mi = factor_feature_mi(model, random_correlation(rng, p));
    CHECK(mi.minCoeff() >= 0.0);
  }
}

TEST_CASE("mi: equivariant under consistent feature permutation") {
  SplitMix64 rng(9);
  const int p = 9, m = 3;
  Matrix c = random_correlation(rng, p);
  Matrix w = random_weights(rng, m, p);
  std::vector<Index> perm = {4, 7, 0, 2, 8, 1, 6, 3, 5};
  Matrix c2(p, p), w2(m, p);
  for (int i = 0; i < p; ++i) {
    w2.col(i) = w.col(perm[static_cast<std::size_t>(i)]);
    for (int j = 0; j < p; ++j)
      c2(i, j) = c(perm[static_cast<std::size_t>(i)],
                   perm[static_cast<std::size_t>(j)]);
  }
  CorexModel a, b;
  a.w = w;
  a.m = m;
  a.p = p;
  b.w = w2;
  b.m = m;
  b.p = p;
  Matrix mi = factor_feature_mi(a, c);
  Matrix mi2 = factor_feature_mi(b, c2);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < p; ++i)
      CHECK(mi2(j, i) ==
            doctest::Approx(mi(j, perm[static_cast<std::size_t>(i)]))
                .epsilon(1e-12));
}

TEST_CASE("tc: zero weights explain zero total correlation") {
  CorexModel model;
  model.w = Matrix::Zero(3, 4);
  model.m = 3;
  model.p = 4;
  auto [tc, order] = tc_explained(model, Matrix::Identity(4, 4));
  for (double v : tc) CHECK(v == 0.0);
  CHECK(order == std::vector<int>{0, 1, 2});  // tie broken by factor index
}

TEST_CASE("tc: per-factor formula matches direct Gaussian entropies") {
  SplitMix64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    int p = 4 + int(rng.below(5));
    Matrix c = random_correlation(rng, p);
    CorexModel model;
    model.w = random_weights(rng, 1, p);  // single factor: TC identity case
    model.m = 1;
    model.p = p;
    auto [tc, order] = tc_explained(model, c);

    // Direct route: TC(X;Z) = TC(X) - TC(X|Z) from the joint Gaussian.
    Matrix m_lat = Matrix::Identity(1, 1) + model.w * c * model.w.transpose();
    Matrix cov_xz = c - c * model.w.transpose() * m_lat.inverse() * model.w * c;
    double tc_x = -0.5 * logdet(c);
    for (Index i = 0; i < p; ++i) tc_x += 0.5 * std::log(c(i, i));
    double tc_x_given_z = -0.5 * logdet(cov_xz);
    for (Index i = 0; i < p; ++i)
      tc_x_given_z += 0.5 * std::log(cov_xz(i, i));
    double direct = tc_x - tc_x_given_z;
    CHECK(tc[0] == doctest::Approx(direct).epsilon(1e-8));
  }
}

TEST_CASE("tc: order sorts descending with index tie-break") {
  SplitMix64 rng(11);
  Matrix c = random_correlation(rng, 10);
  CorexModel model;
  model.w = random_weights(rng, 4, 10) * 2.0;
  model.m = 4;
  model.p = 10;
  auto [tc, order] = tc_explained(model, c);
  for (std::size_t r = 1; r < order.size(); ++r) {
    double prev = tc[static_cast<std::size_t>(order[r - 1])];
    double curr = tc[static_cast<std::size_t>(order[r])];
    CHECK(prev >= curr);
    if (prev == curr) CHECK(order[r - 1] < order[r]);
  }
}

TEST_CASE("fit: trace non-increasing after burn-in, small final gradient") {
  SplitMix64 rng(12);
  DataMatrix x = block_data(rng, 800, 2, 0.8);
  CorexOptions opts;
  opts.seed = 5;
  CorexModel model = fit_cluster(x, 2, opts);
  REQUIRE(model.trace.size() > static_cast<std::size_t>(opts.burn_in) + 1);
  for (std::size_t i = static_cast<std::size_t>(opts.burn_in);
       i + 1 < model.trace.size(); ++i)
    CHECK(model.trace[i + 1] <= model.trace[i]);
  Matrix c = sample_correlation(model.scaler.apply(x.values), model.ridge);
  CHECK(corex_gradient(model.w, c).norm() < 1e-3);
}

TEST_CASE("fit: bit-for-bit deterministic given the seed") {
  SplitMix64 rng(13);
  DataMatrix x = block_data(rng, 300, 2, 0.7);
  CorexOptions opts;
  opts.seed = 99;
  CorexModel a = fit_cluster(x, 3, opts);
  CorexModel b = fit_cluster(x, 3, opts);
  CHECK((a.w.array() == b.w.array()).all());
  CHECK(a.trace == b.trace);
  opts.seed = 100;
  CorexModel d = fit_cluster(x, 3, opts);
  CHECK(!(a.w.array() == d.w.array()).all());
}

TEST_CASE("fit: a single shared signal is captured with high MI everywhere") {
  SplitMix64 rng(14);
  const int n = 2000, p = 5;
  DataMatrix x;
  x.values.resize(n, p);
  x.column_names = {"a", "b", "c", "d", "e"};
  for (int r = 0; r < n; ++r) {
    double z = rng.normal();
    for (int f = 0; f < p; ++f) x.values(r, f) = z + 0.3 * rng.normal();
  }
  CorexModel model = fit_cluster(x, 1, {});
  Matrix c = sample_correlation(model.scaler.apply(x.values), model.ridge);
  Matrix mi = factor_feature_mi(model, c);
  for (int f = 0; f < p; ++f) CHECK(mi(0, f) > 0.5);
}

TEST_CASE("fit: two blocks resolve to two modular factors") {
  SplitMix64 rng(15);
  DataMatrix x = block_data(rng, 2000, 2, 0.8);
  CorexModel model = fit_cluster(x, 2, {});
  Matrix c = sample_correlation(model.scaler.apply(x.values), model.ridge);
  Matrix mi = factor_feature_mi(model, c);
  Vector truth0(10), truth1(10);
  truth0 << 1, 1, 1, 1, 1, 0, 0, 0, 0, 0;
  truth1 << 0, 0, 0, 0, 0, 1, 1, 1, 1, 1;
  auto cosd = [](const Vector& f, const Vector& g) {
    return 1.0 - f.dot(g) / (f.norm() * g.norm());
  };
  double d00 = cosd(mi.row(0).transpose(), truth0);
  double d01 = cosd(mi.row(0).transpose(), truth1);
  double d10 = cosd(mi.row(1).transpose(), truth0);
  double d11 = cosd(mi.row(1).transpose(), truth1);
  // each factor aligns with one distinct block
  if (d00 < d01) {
    CHECK(d00 < 0.1);
    CHECK(d11 < 0.1);
  } else {
    CHECK(d01 < 0.1);
    CHECK(d10 < 0.1);
  }
}

TEST_CASE("fit: preconditions") {
  SplitMix64 rng(16);
  DataMatrix x = block_data(rng, 50, 1, 0.5);
  CHECK_THROWS_AS(fit_cluster(x, 0, {}), ConfigError);
  DataMatrix one;
  one.values = Matrix::Ones(1, 3);
  one.column_names = {"a", "b", "c"};
  CHECK_THROWS_AS(fit_cluster(one, 1, {}), DataError);
}

TEST_CASE("fit: wide clusters get the ridge") {
  SplitMix64 rng(17);
  DataMatrix x;
  const int n = 5, p = 8;
  x.values.resize(n, p);
  for (Index i = 0; i < x.values.size(); ++i) x.values.data()[i] = rng.normal();
  for (int f = 0; f < p; ++f) x.column_names.push_back("f" + std::to_string(f));
  CorexOptions opts;
  opts.max_iter = 50;
  CorexModel model = fit_cluster(x, 2, opts);
  CHECK(model.ridge == opts.ridge);

  DataMatrix tall = block_data(rng, 100, 1, 0.5);
  CHECK(fit_cluster(tall, 1, opts).ridge == 0.0);
}

TEST_CASE("sample correlation: unit diagonal and symmetry on standardized data") {
  SplitMix64 rng(18);
  Matrix x(200, 4);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  Matrix c = sample_correlation(standardize_cols(x), 0.0);
  CHECK((c - c.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < 4; ++i) CHECK(c(i, i) == doctest::Approx(1.0).epsilon(1e-12));
  Matrix cr = sample_correlation(standardize_cols(x), 1e-4);
  CHECK(cr(0, 0) == doctest::Approx(c(0, 0) + 1e-4).epsilon(1e-12));
}

TEST_CASE("transform: identity rows select standardized features") {
  SplitMix64 rng(19);
  DataMatrix x = block_data(rng, 120, 1, 0.6);
  auto [xs, scaler] = standardize(x);
  CorexModel model;
  model.w = Matrix::Zero(2, 5);
  model.w(0, 1) = 1.0;
  model.w(1, 4) = 1.0;
  model.m = 2;
  model.p = 5;
  model.scaler = scaler;
  Matrix z = transform(model, x);
  CHECK(z.col(0) == xs.values.col(1));
  CHECK(z.col(1) == xs.values.col(4));

  model.w.setZero();
  CHECK(transform(model, x).isZero(0.0));
}

TEST_CASE("transform: factor variance tracks the latent covariance diagonal") {
  SplitMix64 rng(20);
  DataMatrix x = block_data(rng, 2000, 2, 0.8);
  CorexModel model = fit_cluster(x, 2, {});
  Matrix z = transform(model, x);
  Matrix c = sample_correlation(model.scaler.apply(x.values), model.ridge);
  Matrix m_lat =
      Matrix::Identity(2, 2) + model.w * c * model.w.transpose();
  for (int j = 0; j < 2; ++j) {
    double mean = z.col(j).mean();
    double var = (z.col(j).array() - mean).square().sum() / double(z.rows());
    double expected = m_lat(j, j) - 1.0;
    CHECK(var == doctest::Approx(expected).epsilon(0.10));
  }
}

TEST_CASE("transform: rejects mismatched width") {
  CorexModel model;
  model.w = Matrix::Zero(1, 4);
  model.m = 1;
  model.p = 4;
  DataMatrix x;
  x.values = Matrix::Ones(3, 3);
  x.column_names = {"a", "b", "c"};
  CHECK_THROWS_AS(transform(model, x), DataError);
}

TEST_CASE("factor report: assembled fields are consistent") {
  SplitMix64 rng(21);
  DataMatrix x = block_data(rng, 400, 2, 0.8);
  CorexModel model = fit_cluster(x, 3, {});
  Matrix c = sample_correlation(model.scaler.apply(x.values), model.ridge);
  FactorReport report =
      make_factor_report(model, c, 7, x.column_names);
  CHECK(report.cluster_id == 7);
  CHECK(report.mi.rows() == 3);
  CHECK(report.mi.cols() == 10);
  CHECK(report.mi.minCoeff() >= 0.0);
  CHECK(report.tc.size() == 3);
  CHECK(report.order.size() == 3);
  std::vector<int> sorted = report.order;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2});
  CHECK_THROWS_AS(
      make_factor_report(model, c, 0, {"too", "few"}), ConfigError);
}
