#include "hoiscope/cluster.hpp"

#include <algorithm>
#include <limits>

#include "hoiscope/embed.hpp"
#include "hoiscope/rng.hpp"

namespace hoiscope {

namespace {

// Exact squared distances from every point to one center.
Vector dist2_to(const Matrix& points, const Eigen::RowVectorXd& center) {
  return (points.rowwise() - center).rowwise().squaredNorm();
}

// Argmin labels against the current centroids. Uses the expansion
// |x - c|^2 = |x|^2 - 2 x.c + |c|^2; the |x|^2 term is constant per row and
// dropped. Ties resolve to the lowest centroid index.
void assign_labels(const Matrix& points, const Matrix& centroids,
                   std::vector<int>& labels) {
  const Index n = points.rows();
  const Index k = centroids.rows();
  Matrix cross = points * centroids.transpose();
  Vector cnorm2 = centroids.rowwise().squaredNorm();
  for (Index i = 0; i < n; ++i) {
    int best = 0;
    double best_score = cnorm2(0) - 2.0 * cross(i, 0);
    for (Index j = 1; j < k; ++j) {
      double s = cnorm2(j) - 2.0 * cross(i, j);
      if (s < best_score) {
        best_score = s;
        best = static_cast<int>(j);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
  }
}

double exact_inertia(const Matrix& points, const Matrix& centroids,
                     const std::vector<int>& labels) {
  double total = 0.0;
  for (Index i = 0; i < points.rows(); ++i)
    total += (points.row(i) - centroids.row(labels[static_cast<std::size_t>(i)]))
                 .squaredNorm();
  return total;
}

}  // namespace

ClusterAssignment kmeans_points(const Matrix& points, int k,
                                std::uint64_t seed, int max_iter) {
  const Index n = points.rows();
  if (k < 1) throw ConfigError("cluster count must be at least 1");
  if (static_cast<Index>(k) > n)
    throw ConfigError("cluster count exceeds point count");
  if (!points.allFinite()) throw DataError("non-finite coordinates");
  if (max_iter < 1) throw ConfigError("max_iter must be at least 1");

  SplitMix64 rng(seed);
  Matrix centroids(k, points.cols());

  // k-means++ seeding: first center uniform, then proportional to the squared
  // distance to the nearest chosen center. All scans are in fixed index order.
  Index first = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
  centroids.row(0) = points.row(first);
  std::vector<char> is_center(static_cast<std::size_t>(n), 0);
  is_center[static_cast<std::size_t>(first)] = 1;
  Vector min_d2 = dist2_to(points, centroids.row(0));
  for (int c = 1; c < k; ++c) {
    double total = min_d2.sum();
    Index pick = -1;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      double cum = 0.0;
      for (Index i = 0; i < n; ++i) {
        cum += min_d2(i);
        if (cum >= r) {
          pick = i;
          break;
        }
      }
      if (pick < 0) pick = n - 1;  // guard against fp shortfall
    }
    if (pick < 0 || is_center[static_cast<std::size_t>(pick)]) {
      // All remaining mass sits on chosen centers (duplicate-heavy data):
      // take the lowest-index point that is not yet a center.
      for (Index i = 0; i < n; ++i)
        if (!is_center[static_cast<std::size_t>(i)]) {
          pick = i;
          break;
        }
    }
    is_center[static_cast<std::size_t>(pick)] = 1;
    centroids.row(c) = points.row(pick);
    min_d2 = min_d2.cwiseMin(dist2_to(points, centroids.row(c)));
  }

  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  std::vector<int> prev_labels;
  std::vector<double> trace;

  for (int iter = 0; iter < max_iter; ++iter) {
    assign_labels(points, centroids, labels);

    std::vector<Index> sizes(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];

    // Repair empty clusters: move the point farthest from its own centroid,
    // never draining a cluster below one member.
    bool any_empty = std::find(sizes.begin(), sizes.end(), Index(0)) != sizes.end();
    if (any_empty) {
      Vector own_d2(n);
      for (Index i = 0; i < n; ++i)
        own_d2(i) =
            (points.row(i) - centroids.row(labels[static_cast<std::size_t>(i)]))
                .squaredNorm();
      for (int e = 0; e < k; ++e) {
        if (sizes[static_cast<std::size_t>(e)] != 0) continue;
        Index far = -1;
        double far_d2 = -1.0;
        for (Index i = 0; i < n; ++i) {
          int l = labels[static_cast<std::size_t>(i)];
          if (sizes[static_cast<std::size_t>(l)] < 2) continue;
          if (own_d2(i) > far_d2) {
            far_d2 = own_d2(i);
            far = i;
          }
        }
        if (far < 0) throw NumericError("cannot repair empty cluster");
        --sizes[static_cast<std::size_t>(labels[static_cast<std::size_t>(far)])];
        labels[static_cast<std::size_t>(far)] = e;
        sizes[static_cast<std::size_t>(e)] = 1;
        own_d2(far) = -1.0;  // a repaired point anchors its new cluster
      }
    }

    if (!prev_labels.empty() && labels == prev_labels) break;
    prev_labels = labels;

    // Centroid update with a fixed-order reduction.
    centroids.setZero();
    for (Index i = 0; i < n; ++i)
      centroids.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
    for (int c = 0; c < k; ++c)
      centroids.row(c) /= double(sizes[static_cast<std::size_t>(c)]);

    trace.push_back(exact_inertia(points, centroids, labels));
  }

  ClusterAssignment a;
  a.labels = std::move(labels);
  a.centroids = std::move(centroids);
  a.k = k;
  a.seed = seed;
  a.inertia_trace = std::move(trace);
  a.inertia = exact_inertia(points, a.centroids, a.labels);
  return a;
}

ClusterAssignment kmeans_cluster(const Embedding& embedding, int k,
                                 std::uint64_t seed, int max_iter) {
  return kmeans_points(embedding.coords, k, seed, max_iter);
}

Matrix cluster_means(const DataMatrix& x, const ClusterAssignment& assignment) {
  if (x.rows() != static_cast<Index>(assignment.labels.size()))
    throw DataError("row count does not match assignment length");
  Matrix means = Matrix::Zero(assignment.k, x.cols());
  std::vector<Index> sizes(static_cast<std::size_t>(assignment.k), 0);
  for (Index i = 0; i < x.rows(); ++i) {
    int l = assignment.labels[static_cast<std::size_t>(i)];
    if (l < 0 || l >= assignment.k) throw DataError("label out of range");
    means.row(l) += x.values.row(i);
    ++sizes[static_cast<std::size_t>(l)];
  }
  for (int c = 0; c < assignment.k; ++c) {
    if (sizes[static_cast<std::size_t>(c)] == 0)
      throw DataError("empty cluster in assignment");
    means.row(c) /= double(sizes[static_cast<std::size_t>(c)]);
  }
  return means;
}

}  // namespace hoiscope
