#pragma once

#include <cstdint>
#include <vector>

#include "hoiscope/common.hpp"

namespace hoiscope {

// One discovered interaction: a nonnegative per-feature relevance profile.
struct HoiPrediction {
  Vector scores;
  int cluster_id = -1;
  int factor_index = -1;
};

// Ground-truth interaction: binary feature membership.
struct GroundTruthHoi {
  std::vector<std::uint8_t> members;

  Vector as_vector() const {
    Vector v(static_cast<Index>(members.size()));
    for (std::size_t i = 0; i < members.size(); ++i) v(static_cast<Index>(i)) = members[i];
    return v;
  }
};

struct ScorePair {
  double cosine = 1.0;   // 0 is best
  double aucprc = 0.0;   // 1 is best
};

// Distinct row-support patterns of a covariance matrix: row i's pattern marks
// itself plus every j with |cov_ij| > tol. Unique patterns are reported in
// first-occurrence order (a diagonal covariance yields p singletons).
std::vector<GroundTruthHoi> extract_true_hois(const Matrix& cov,
                                              double tol = 1e-12);

// 1 - <f,g>/(|f||g|). Exactly one zero vector -> 1.0; both zero -> DataError.
double cosine_distance(const Vector& f, const Vector& g);

// Average precision of `scores` against binary `labels`. Ranking is by
// descending score; ties broken by ascending index. AP sums precision at each
// positive, weighted by the recall increment.
double auc_prc(const Vector& scores, const std::vector<std::uint8_t>& labels);

// Per-truth best match over all predictions; cosine and AUC-PRC are tracked
// independently. Averages over the truth set.
ScorePair group_score(const std::vector<HoiPrediction>& predictions,
                      const std::vector<GroundTruthHoi>& truths);

// First k = min(|F|, |G|) predictions (caller supplies F strongest-first),
// each matched to its best truth. Averages over the k predictions. k_out
// reports the k used.
ScorePair topk_score(const std::vector<HoiPrediction>& predictions,
                     const std::vector<GroundTruthHoi>& truths,
                     int* k_out = nullptr);

}  // namespace hoiscope
