#pragma once

#include <cstdint>
#include <vector>

#include "hoiscope/data.hpp"

namespace hoiscope {

struct Embedding;  // embed.hpp

struct ClusterAssignment {
  std::vector<int> labels;           // N entries in [0, k)
  Matrix centroids;                  // k x d
  double inertia = 0.0;
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<double> inertia_trace; // per Lloyd iteration
};

// k-means++ seeding followed by Lloyd iterations until labels are stable or
// max_iter. Empty clusters are repaired by reassigning the point farthest
// from its centroid, so every label in [0, k) occurs at least once.
ClusterAssignment kmeans_points(const Matrix& points, int k,
                                std::uint64_t seed, int max_iter = 300);

ClusterAssignment kmeans_cluster(const Embedding& embedding, int k,
                                 std::uint64_t seed, int max_iter = 300);

// Row c = mean of the X rows assigned to cluster c.
Matrix cluster_means(const DataMatrix& x, const ClusterAssignment& assignment);

}  // namespace hoiscope
