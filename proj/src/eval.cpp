#include "hoiscope/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hoiscope {

std::vector<GroundTruthHoi> extract_true_hois(const Matrix& cov, double tol) {
  if (cov.rows() != cov.cols()) throw DataError("covariance must be square");
  const Index p = cov.rows();
  std::vector<GroundTruthHoi> out;
  for (Index i = 0; i < p; ++i) {
    GroundTruthHoi g;
    g.members.assign(static_cast<std::size_t>(p), 0);
    for (Index j = 0; j < p; ++j)
      if (i == j || std::abs(cov(i, j)) > tol)
        g.members[static_cast<std::size_t>(j)] = 1;
    if (std::find_if(out.begin(), out.end(), [&](const GroundTruthHoi& h) {
          return h.members == g.members;
        }) == out.end())
      out.push_back(std::move(g));
  }
  return out;
}

double cosine_distance(const Vector& f, const Vector& g) {
  if (f.size() != g.size())
    throw DataError("cosine distance requires equal lengths");
  double nf = f.norm();
  double ng = g.norm();
  if (nf == 0.0 && ng == 0.0)
    throw DataError("cosine distance undefined for two zero vectors");
  if (nf == 0.0 || ng == 0.0) return 1.0;
  return 1.0 - f.dot(g) / (nf * ng);
}

double auc_prc(const Vector& scores, const std::vector<std::uint8_t>& labels) {
  const std::size_t n = labels.size();
  if (static_cast<std::size_t>(scores.size()) != n)
    throw DataError("score/label length mismatch");
  std::size_t positives = 0;
  for (auto v : labels) positives += (v != 0);
  if (positives == 0) throw DataError("average precision needs a positive label");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Descending score; stable sort keeps ties in ascending index order.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Index>(a)) > scores(static_cast<Index>(b));
  });

  double ap = 0.0;
  std::size_t tp = 0;
  double prev_recall = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    if (labels[order[k - 1]]) {
      ++tp;
      double recall = double(tp) / double(positives);
      double precision = double(tp) / double(k);
      ap += (recall - prev_recall) * precision;
      prev_recall = recall;
    }
  }
  return ap;
}

namespace {

double ap_against(const HoiPrediction& f, const GroundTruthHoi& g) {
  return auc_prc(f.scores, g.members);
}

double cos_against(const HoiPrediction& f, const GroundTruthHoi& g) {
  return cosine_distance(f.scores, g.as_vector());
}

}  // namespace

ScorePair group_score(const std::vector<HoiPrediction>& predictions,
                      const std::vector<GroundTruthHoi>& truths) {
  if (predictions.empty()) throw DataError("group score requires predictions");
  if (truths.empty()) throw DataError("group score requires ground truth");
  double sum_cos = 0.0, sum_ap = 0.0;
  for (const auto& g : truths) {
    double best_cos = 1.0;
    double best_ap = 0.0;
    for (const auto& f : predictions) {
      best_cos = std::min(best_cos, cos_against(f, g));
      best_ap = std::max(best_ap, ap_against(f, g));
    }
    sum_cos += best_cos;
    sum_ap += best_ap;
  }
  double m = double(truths.size());
  return {sum_cos / m, sum_ap / m};
}

ScorePair topk_score(const std::vector<HoiPrediction>& predictions,
                     const std::vector<GroundTruthHoi>& truths, int* k_out) {
  if (predictions.empty()) throw DataError("top-k score requires predictions");
  if (truths.empty()) throw DataError("top-k score requires ground truth");
  std::size_t k = std::min(predictions.size(), truths.size());
  if (k_out) *k_out = static_cast<int>(k);
  double sum_cos = 0.0, sum_ap = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double best_cos = 1.0;
    double best_ap = 0.0;
    for (const auto& g : truths) {
      best_cos = std::min(best_cos, cos_against(predictions[i], g));
      best_ap = std::max(best_ap, ap_against(predictions[i], g));
    }
    sum_cos += best_cos;
    sum_ap += best_ap;
  }
  return {sum_cos / double(k), sum_ap / double(k)};
}

}  // namespace hoiscope
