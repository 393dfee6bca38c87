#include "hoiscope/embed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "hoiscope/cluster.hpp"
#include "hoiscope/rng.hpp"

namespace hoiscope {

namespace {

constexpr double kPotentialFloor = 1e-7;

// Exact symmetric pairwise distances (row-difference norms, no expansion
// tricks, so D_ij == D_ji and D_ii == 0 hold bitwise).
Matrix pairwise_distances(const Matrix& x) {
  const Index n = x.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      double v = (x.row(i) - x.row(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  return d;
}

// knn-th smallest entry of `row` excluding `self` (pass -1 to keep all
// entries). Zero bandwidths fall back to the smallest positive entry.
double adaptive_bandwidth(const Vector& row, Index self, int knn) {
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(row.size()));
  for (Index j = 0; j < row.size(); ++j)
    if (j != self) d.push_back(row(j));
  if (static_cast<int>(d.size()) < knn)
    throw DataError("not enough neighbors for the requested knn");
  std::nth_element(d.begin(), d.begin() + (knn - 1), d.end());
  double sigma = d[static_cast<std::size_t>(knn - 1)];
  if (sigma > 0.0) return sigma;
  double smallest_positive = std::numeric_limits<double>::infinity();
  for (double v : d)
    if (v > 0.0) smallest_positive = std::min(smallest_positive, v);
  if (!std::isfinite(smallest_positive))
    throw DataError("all neighbors coincide; kernel bandwidth undefined");
  return smallest_positive;
}

double alpha_kernel(double dist, double sigma, double decay) {
  return std::exp(-std::pow(dist / sigma, decay));
}

// P^t by binary exponentiation; valid for any square P.
Matrix matrix_power(const Matrix& p, int t) {
  if (t == 1) return p;
  Matrix base = p;
  Matrix result;
  bool have = false;
  int e = t;
  while (e > 0) {
    if (e & 1) {
      result = have ? Matrix(result * base) : base;
      have = true;
    }
    e >>= 1;
    if (e > 0) base = base * base;
  }
  return result;
}

}  // namespace

AffinityMatrix build_kernel(const Matrix& x, int knn, double decay) {
  if (knn < 1) throw ConfigError("knn must be at least 1");
  if (decay <= 0.0) throw ConfigError("decay must be positive");
  const Index n = x.rows();
  if (n < knn + 1)
    throw DataError("kernel requires at least knn+1 points");
  if (!x.allFinite()) throw DataError("non-finite coordinates");

  Matrix dist = pairwise_distances(x);
  Vector sigma(n);
  for (Index i = 0; i < n; ++i)
    sigma(i) = adaptive_bandwidth(dist.col(i), i, knn);  // dist is symmetric

  AffinityMatrix result;
  result.knn = knn;
  result.decay = decay;
  result.k.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    result.k(i, i) = 1.0;
    for (Index j = i + 1; j < n; ++j) {
      double v = 0.5 * (alpha_kernel(dist(i, j), sigma(i), decay) +
                        alpha_kernel(dist(i, j), sigma(j), decay));
      result.k(i, j) = v;
      result.k(j, i) = v;
    }
  }
  return result;
}

DiffusionOperator diffusion_operator(const AffinityMatrix& k) {
  const Index n = k.k.rows();
  if (n != k.k.cols()) throw DataError("kernel must be square");
  DiffusionOperator op;
  op.degrees = k.k.rowwise().sum();
  for (Index i = 0; i < n; ++i)
    if (!(op.degrees(i) > 0.0))
      throw DataError("zero row sum in kernel; point disconnected");
  op.p = op.degrees.cwiseInverse().asDiagonal() * k.k;
  op.t = 1;
  return op;
}

namespace {

// Symmetric conjugate D^{1/2} P D^{-1/2} of a diffusion operator; falls back
// to P itself when no degrees are attached.
Matrix symmetric_conjugate(const DiffusionOperator& op) {
  const Index n = op.p.rows();
  Matrix s;
  if (op.degrees.size() == n && (op.degrees.array() > 0.0).all()) {
    Vector sq = op.degrees.cwiseSqrt();
    s = sq.asDiagonal() * op.p * sq.cwiseInverse().asDiagonal();
  } else {
    s = op.p;
  }
  return 0.5 * (s + s.transpose());
}

}  // namespace

TSelection select_t(const DiffusionOperator& op, int t_max,
                    std::optional<int> fixed_t) {
  if (fixed_t) {
    if (*fixed_t < 1) throw ConfigError("diffusion time must be at least 1");
    return {*fixed_t, false, {}};
  }
  if (t_max < 2) throw ConfigError("t_max must be at least 2");

  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric_conjugate(op),
                                            Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success)
    throw NumericError("eigendecomposition failed in diffusion time selection");
  Vector mags = eig.eigenvalues().cwiseAbs();

  TSelection sel;
  sel.entropy.reserve(static_cast<std::size_t>(t_max));
  Vector powers = mags;
  for (int t = 1; t <= t_max; ++t) {
    double total = powers.sum();
    double h = 0.0;
    if (total > 0.0) {
      for (Index i = 0; i < powers.size(); ++i) {
        double eta = powers(i) / total;
        if (eta > 0.0) h -= eta * std::log(eta);
      }
    }
    sel.entropy.push_back(h);
    powers = powers.cwiseProduct(mags);
  }

  auto [lo, hi] = std::minmax_element(sel.entropy.begin(), sel.entropy.end());
  if (t_max < 3 || *hi - *lo < 1e-9) {
    sel.t = std::min(20, t_max);  // flat curve: no knee to find
    sel.flat = true;
    return sel;
  }

  // Knee: largest discrete second difference, earliest t on ties.
  int best_t = 2;
  double best_curv = -std::numeric_limits<double>::infinity();
  for (int t = 2; t <= t_max - 1; ++t) {
    double curv = sel.entropy[static_cast<std::size_t>(t)] -
                  2.0 * sel.entropy[static_cast<std::size_t>(t - 1)] +
                  sel.entropy[static_cast<std::size_t>(t - 2)];
    if (curv > best_curv) {
      best_curv = curv;
      best_t = t;
    }
  }
  sel.t = best_t;
  return sel;
}

Matrix potential_distances(const DiffusionOperator& op, int t) {
  if (t < 1) throw ConfigError("diffusion time must be at least 1");
  if (op.p.rows() != op.p.cols()) throw DataError("operator must be square");
  Matrix pt = matrix_power(op.p, t);
  Matrix u = (-(pt.array() + kPotentialFloor).log()).matrix();
  const Index n = u.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      double v = (u.row(i) - u.row(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  return d;
}

namespace {

// Top-k eigenpairs of a symmetric matrix, eigenvalues descending. Full solve
// for small problems, seeded block subspace iteration above that.
void top_eigenpairs(const Matrix& b, int k, Vector& values, Matrix& vectors) {
  const Index n = b.rows();
  if (n <= 500) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(b);
    if (eig.info() != Eigen::Success)
      throw NumericError("eigendecomposition failed in MDS initialization");
    values.resize(k);
    vectors.resize(n, k);
    for (int j = 0; j < k; ++j) {
      values(j) = eig.eigenvalues()(n - 1 - j);
      vectors.col(j) = eig.eigenvectors().col(n - 1 - j);
    }
    return;
  }

  const Index block = std::min<Index>(n, k + 8);
  SplitMix64 rng(0x5eed5eedull);
  Matrix v(n, block);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < block; ++j) v(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(v);
  v = qr.householderQ() * Matrix::Identity(n, block);
  for (int it = 0; it < 80; ++it) {
    Matrix w = b * v;
    Eigen::HouseholderQR<Matrix> step(w);
    v = step.householderQ() * Matrix::Identity(n, block);
  }
  Matrix t = v.transpose() * b * v;
  t = 0.5 * (t + t.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(t);
  if (eig.info() != Eigen::Success)
    throw NumericError("eigendecomposition failed in MDS initialization");
  // Subspace iteration converges to the largest |lambda| invariant subspace;
  // rank within it by signed eigenvalue, descending.
  std::vector<Index> order(static_cast<std::size_t>(block));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index c) {
    return eig.eigenvalues()(a) > eig.eigenvalues()(c);
  });
  values.resize(k);
  vectors.resize(n, k);
  for (int j = 0; j < k; ++j) {
    values(j) = eig.eigenvalues()(order[static_cast<std::size_t>(j)]);
    vectors.col(j) = v * eig.eigenvectors().col(order[static_cast<std::size_t>(j)]);
  }
}

// Pairwise distances of embedding rows via the Gram expansion (fast path for
// the SMACOF inner loop; tiny negative squared norms are clamped).
Matrix coords_distances(const Matrix& y) {
  const Index n = y.rows();
  Vector norms = y.rowwise().squaredNorm();
  Matrix d = norms.replicate(1, n) + norms.transpose().replicate(n, 1) -
             2.0 * (y * y.transpose());
  d = d.cwiseMax(0.0).cwiseSqrt();
  d.diagonal().setZero();
  return d;
}

double raw_stress(const Matrix& delta, const Matrix& dist) {
  double s = 0.0;
  for (Index i = 0; i < delta.rows(); ++i)
    for (Index j = i + 1; j < delta.cols(); ++j) {
      double diff = delta(i, j) - dist(i, j);
      s += diff * diff;
    }
  return s;
}

}  // namespace

Embedding mds_embed(const Matrix& d, int dims, int max_iter, double tol) {
  const Index n = d.rows();
  if (d.cols() != n) throw DataError("distance matrix must be square");
  if (dims < 1) throw ConfigError("embedding dimension must be at least 1");
  if (static_cast<Index>(dims) >= n)
    throw ConfigError("embedding dimension must be smaller than point count");
  double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
  if (((d - d.transpose()).cwiseAbs().maxCoeff()) > 1e-9 * scale)
    throw DataError("distance matrix must be symmetric");
  if (!d.allFinite()) throw DataError("non-finite distances");

  Matrix delta = 0.5 * (d + d.transpose());

  // Classical MDS: double-center the squared distances, spectral coordinates.
  Matrix d2 = delta.cwiseAbs2();
  Vector row_mean = d2.rowwise().mean();
  double grand_mean = row_mean.mean();
  Matrix b = -0.5 * (d2 - row_mean.replicate(1, n) -
                     row_mean.transpose().replicate(n, 1) +
                     Matrix::Constant(n, n, grand_mean));

  Vector evals;
  Matrix evecs;
  top_eigenpairs(b, dims, evals, evecs);
  Matrix y(n, dims);
  for (int j = 0; j < dims; ++j)
    y.col(j) = evecs.col(j) * std::sqrt(std::max(evals(j), 0.0));

  // SMACOF refinement (Guttman transform). With unit weights the update is
  // Y <- B(Y) Y / N, which never increases the raw stress.
  Embedding e;
  Matrix dist = coords_distances(y);
  double stress = raw_stress(delta, dist);
  e.stress_trace.push_back(stress);
  for (int it = 0; it < max_iter; ++it) {
    if (stress == 0.0) break;
    Matrix ratio = (dist.array() > 0.0)
                       .select(delta.array() / dist.array(), 0.0)
                       .matrix();
    Vector rs = ratio.rowwise().sum();
    Matrix y_next = (rs.asDiagonal() * y - ratio * y) / double(n);
    Matrix dist_next = coords_distances(y_next);
    double stress_next = raw_stress(delta, dist_next);
    if (stress_next > stress) break;  // fp noise floor reached; keep last Y
    y = std::move(y_next);
    dist = std::move(dist_next);
    double drop = stress - stress_next;
    stress = stress_next;
    e.stress_trace.push_back(stress);
    if (drop <= tol * std::max(stress, 1e-30)) break;
  }

  e.coords = std::move(y);
  e.stress = stress;
  return e;
}

Matrix pca_project(const Matrix& x, int dims) {
  const Index n = x.rows();
  const Index p = x.cols();
  if (dims < 1) throw ConfigError("pca dimension must be at least 1");
  if (n < 1) throw DataError("pca requires data");
  const int d = std::min<int>(dims, static_cast<int>(p));
  Matrix centered = x.rowwise() - x.colwise().mean();
  Matrix cov = (centered.transpose() * centered) / double(n);
  cov = 0.5 * (cov + cov.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success)
    throw NumericError("eigendecomposition failed in PCA");
  Matrix basis(p, d);
  for (int j = 0; j < d; ++j) {
    Vector v = eig.eigenvectors().col(p - 1 - j);
    // Deterministic sign: the largest-magnitude component is positive.
    Index arg = 0;
    for (Index i = 1; i < p; ++i)
      if (std::abs(v(i)) > std::abs(v(arg))) arg = i;
    if (v(arg) < 0.0) v = -v;
    basis.col(j) = v;
  }
  return centered * basis;
}

LandmarkSystem build_landmark_system(const Matrix& x, int n_landmark, int knn,
                                     double decay, std::uint64_t seed,
                                     int kmeans_iters) {
  const Index n = x.rows();
  if (n_landmark < knn + 1)
    throw ConfigError("landmark count must be at least knn+1");
  if (n <= n_landmark)
    throw DataError("landmark path requires more points than landmarks");

  ClusterAssignment lm = kmeans_points(x, n_landmark, seed, kmeans_iters);
  const Matrix& landmarks = lm.centroids;
  const Index nl = landmarks.rows();

  // Point-to-landmark distances via the Gram expansion.
  Vector xn = x.rowwise().squaredNorm();
  Vector ln = landmarks.rowwise().squaredNorm();
  Matrix dist = xn.replicate(1, nl) + ln.transpose().replicate(n, 1) -
                2.0 * (x * landmarks.transpose());
  dist = dist.cwiseMax(0.0).cwiseSqrt();

  Vector sigma_point(n), sigma_land(nl);
  for (Index i = 0; i < n; ++i)
    sigma_point(i) = adaptive_bandwidth(dist.row(i).transpose(), -1, knn);
  for (Index j = 0; j < nl; ++j)
    sigma_land(j) = adaptive_bandwidth(dist.col(j), -1, knn);

  // In-place kernelization of the distance matrix.
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < nl; ++j)
      dist(i, j) = 0.5 * (alpha_kernel(dist(i, j), sigma_point(i), decay) +
                          alpha_kernel(dist(i, j), sigma_land(j), decay));

  Vector dn = dist.rowwise().sum();
  for (Index i = 0; i < n; ++i)
    if (!(dn(i) > 0.0)) throw DataError("disconnected point in landmark kernel");

  // Landmark operator P_L = row-normalize(K') row-normalize(K); realized as
  // D_l^{-1} (G' G) with G = D_n^{-1/2} K, which keeps it exactly symmetric
  // before its own row normalization.
  Matrix g = dn.cwiseSqrt().cwiseInverse().asDiagonal() * dist;
  Matrix s = g.transpose() * g;
  s = 0.5 * (s + s.transpose()).eval();
  Vector dl = s.rowwise().sum();
  for (Index j = 0; j < nl; ++j)
    if (!(dl(j) > 0.0)) throw DataError("disconnected landmark");

  LandmarkSystem sys;
  sys.op.p = dl.cwiseInverse().asDiagonal() * s;
  sys.op.degrees = dl;
  sys.op.t = 1;
  sys.p_nl = dn.cwiseInverse().asDiagonal() * dist;
  sys.landmarks = landmarks;
  return sys;
}

Embedding phate_embed(const DataMatrix& x, int dims, const EmbedParams& params) {
  x.validate();
  const Index n = x.rows();
  if (dims < 1) throw ConfigError("embedding dimension must be at least 1");
  if (n < params.knn + 2)
    throw DataError("embedding requires at least knn+2 points");

  Matrix m = x.values;
  if (m.cols() > params.pca_dims) m = pca_project(m, params.pca_dims);

  Embedding e;
  if (n <= params.n_landmark) {
    AffinityMatrix k = build_kernel(m, params.knn, params.decay);
    DiffusionOperator op = diffusion_operator(k);
    TSelection sel = select_t(op, params.t_max, params.fixed_t);
    Matrix d = potential_distances(op, sel.t);
    e = mds_embed(d, dims, params.mds_max_iter, params.mds_tol);
    e.t = sel.t;
    e.flat_entropy = sel.flat;
  } else {
    LandmarkSystem sys =
        build_landmark_system(m, params.n_landmark, params.knn, params.decay,
                              params.seed, params.landmark_kmeans_iters);
    TSelection sel = select_t(sys.op, params.t_max, params.fixed_t);
    Matrix d = potential_distances(sys.op, sel.t);
    Embedding el = mds_embed(d, dims, params.mds_max_iter, params.mds_tol);
    e.coords = sys.p_nl * el.coords;
    e.stress = el.stress;
    e.stress_trace = std::move(el.stress_trace);
    e.t = sel.t;
    e.flat_entropy = sel.flat;
    e.used_landmarks = true;
  }
  e.params = params;
  return e;
}

}  // namespace hoiscope
