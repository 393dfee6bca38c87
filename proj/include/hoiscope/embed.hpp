#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hoiscope/data.hpp"

namespace hoiscope {

// Alpha-decay affinity kernel with per-point adaptive bandwidth.
struct AffinityMatrix {
  Matrix k;        // N x N, symmetric, unit diagonal
  int knn = 5;
  double decay = 40.0;
};

// Row-stochastic diffusion operator. `degrees` holds the normalizing row sums
// of the underlying symmetric kernel; they define the symmetric conjugate
// D^{1/2} P D^{-1/2} used for spectral analysis.
struct DiffusionOperator {
  Matrix p;
  Vector degrees;
  int t = 1;
};

struct EmbedParams {
  int knn = 5;
  double decay = 40.0;
  int t_max = 100;
  std::optional<int> fixed_t;
  int n_landmark = 2000;
  int pca_dims = 100;
  std::uint64_t seed = 0;
  int mds_max_iter = 200;
  double mds_tol = 1e-6;
  int landmark_kmeans_iters = 10;
};

struct Embedding {
  Matrix coords;                     // N x d
  double stress = 0.0;               // final raw MDS stress
  int t = 1;                         // diffusion time actually used
  EmbedParams params;
  std::vector<double> stress_trace;  // SMACOF stress per iteration
  bool flat_entropy = false;         // t fell back to the default
  bool used_landmarks = false;
};

struct TSelection {
  int t = 1;
  bool flat = false;                 // entropy curve was flat; default used
  std::vector<double> entropy;       // H(1..t_max) when computed
};

AffinityMatrix build_kernel(const Matrix& x, int knn, double decay);

DiffusionOperator diffusion_operator(const AffinityMatrix& k);

// Von Neumann entropy knee over diffusion times 1..t_max (argmax of the
// discrete second difference). A flat curve falls back to t=20.
TSelection select_t(const DiffusionOperator& op, int t_max,
                    std::optional<int> fixed_t = {});

// D_ij = || -log(P^t_i + 1e-7) + log(P^t_j + 1e-7) ||_2, exactly symmetric
// with an exactly zero diagonal.
Matrix potential_distances(const DiffusionOperator& op, int t);

// Classical MDS (double centering + top-d spectral coordinates) refined by
// SMACOF stress majorization. Raw stress: sum_{i<j} (D_ij - |y_i - y_j|)^2.
Embedding mds_embed(const Matrix& d, int dims, int max_iter = 200,
                    double tol = 1e-6);

// Center columns and project onto the top `dims` principal components.
// Eigenvector signs are fixed (largest-magnitude entry positive).
Matrix pca_project(const Matrix& x, int dims);

// Landmark system for N > n_landmark: landmarks from k-means, N x L transition
// matrix p_nl, and the L x L landmark diffusion operator.
struct LandmarkSystem {
  Matrix p_nl;
  DiffusionOperator op;
  Matrix landmarks;
};

LandmarkSystem build_landmark_system(const Matrix& x, int n_landmark, int knn,
                                     double decay, std::uint64_t seed,
                                     int kmeans_iters);

// Full pipeline: optional PCA reduction, kernel, diffusion, automatic t,
// potential distances, metric MDS; landmark approximation when N exceeds
// params.n_landmark.
Embedding phate_embed(const DataMatrix& x, int dims, const EmbedParams& params = {});

}  // namespace hoiscope
