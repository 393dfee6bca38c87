#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hoiscope/cluster.hpp"
#include "hoiscope/data.hpp"
#include "hoiscope/embed.hpp"
#include "hoiscope/eval.hpp"
#include "hoiscope/synth.hpp"

using namespace hoiscope;

namespace {

bool same_members(const GroundTruthHoi& a, const GroundTruthHoi& b) {
  return a.members == b.members;
}

int shared_patterns(const std::vector<GroundTruthHoi>& a,
                    const std::vector<GroundTruthHoi>& b) {
  int shared = 0;
  for (const auto& x : a)
    for (const auto& y : b)
      if (same_members(x, y)) ++shared;
  return shared;
}

Matrix cluster_rows(const SynthSample& sample, int label) {
  int count = static_cast<int>(
      std::count(sample.labels.begin(), sample.labels.end(), label));
  Matrix out(count, sample.data.cols());
  int r = 0;
  for (std::size_t i = 0; i < sample.labels.size(); ++i)
    if (sample.labels[i] == label) out.row(r++) = sample.data.values.row(static_cast<Index>(i));
  return out;
}

}  // namespace

TEST_CASE("block covariances have the documented layout") {
  auto [s1, s2] = make_covariance_pair(SynthKind::kDisjoint, 0.8);
  REQUIRE(s1.rows() == 25);
  REQUIRE(s2.rows() == 25);
  for (int i = 0; i < 25; ++i) {
    CHECK(s1(i, i) == 1.0);
    CHECK(s2(i, i) == 1.0);
  }
  // Consecutive blocks of five for the first cluster.
  CHECK(s1(0, 4) == 0.8);
  CHECK(s1(5, 9) == 0.8);
  CHECK(s1(20, 24) == 0.8);
  CHECK(s1(4, 5) == 0.0);
  CHECK(s1(0, 24) == 0.0);
  // Strided blocks for the disjoint partner: {1,6,11,16,21} etc.
  CHECK(s2(1, 6) == 0.8);
  CHECK(s2(6, 21) == 0.8);
  CHECK(s2(0, 5) == 0.8);
  CHECK(s2(0, 1) == 0.0);
  CHECK(s2(0, 6) == 0.0);

  auto [t1, t2] = make_covariance_pair(SynthKind::kNonDisjoint, 0.8);
  CHECK((t1 - s1).cwiseAbs().maxCoeff() == 0.0);  // first matrix is shared
  // Last two blocks swap features 19 and 20: {15,16,17,18,20}, {19,21,22,23,24}.
  CHECK(t2(15, 16) == 0.8);
  CHECK(t2(18, 20) == 0.8);
  CHECK(t2(18, 19) == 0.0);
  CHECK(t2(19, 21) == 0.8);
  CHECK(t2(19, 20) == 0.0);
  CHECK(t2(0, 4) == 0.8);  // first four blocks unchanged
}

TEST_CASE("both covariances admit a cholesky factorization") {
  for (SynthKind kind : {SynthKind::kDisjoint, SynthKind::kNonDisjoint}) {
    auto [s1, s2] = make_covariance_pair(kind, 0.8);
    CHECK(Eigen::LLT<Matrix>(s1).info() == Eigen::Success);
    CHECK(Eigen::LLT<Matrix>(s2).info() == Eigen::Success);
  }
}

TEST_CASE("disjoint pattern sets do not intersect") {
  auto [s1, s2] = make_covariance_pair(SynthKind::kDisjoint, 0.8);
  auto a = extract_true_hois(s1);
  auto b = extract_true_hois(s2);
  REQUIRE(a.size() == 5);
  REQUIRE(b.size() == 5);
  CHECK(shared_patterns(a, b) == 0);
}

TEST_CASE("nondisjoint pair shares three of five patterns") {
  auto [s1, s2] = make_covariance_pair(SynthKind::kNonDisjoint, 0.8);
  auto a = extract_true_hois(s1);
  auto b = extract_true_hois(s2);
  REQUIRE(a.size() == 5);
  REQUIRE(b.size() == 5);
  CHECK(shared_patterns(a, b) == 3);
}

TEST_CASE("mean vectors follow the five-block layout") {
  Vector mu = synth_mu1();
  Vector off = synth_mu_offset();
  REQUIRE(mu.size() == 25);
  REQUIRE(off.size() == 25);
  const double mu_block[5] = {5.0, 10.0, 1.0, 10.0, 3.0};
  const double off_block[5] = {2.5, 4.0, -2.0, 9.0, -7.0};
  for (int b = 0; b < 5; ++b)
    for (int j = 0; j < 5; ++j) {
      CHECK(mu(5 * b + j) == mu_block[b]);
      CHECK(off(5 * b + j) == off_block[b]);
    }
}

TEST_CASE("alpha zero collapses the second mean onto the first") {
  SynthConfig cfg;
  cfg.alpha = 0.0;
  cfg.n_per_cluster = 50;
  cfg.seed = 7;
  SynthSample sample = sample_synthetic(cfg);
  // Reconstruct both halves with mu1 for each: the generator consumes its
  // stream cluster by cluster, so an exact match proves mu2 == mu1.
  auto [s1, s2] = make_covariance_pair(cfg.kind, cfg.rho);
  SplitMix64 rng(cfg.seed);
  Matrix first = sample_mvn(synth_mu1(), s1, 50, rng);
  Matrix second = sample_mvn(synth_mu1(), s2, 50, rng);
  CHECK((sample.data.values.topRows(50).array() == first.array()).all());
  CHECK((sample.data.values.bottomRows(50).array() == second.array()).all());
}

TEST_CASE("sample layout and labels") {
  SynthConfig cfg;
  cfg.n_per_cluster = 30;
  SynthSample sample = sample_synthetic(cfg);
  REQUIRE(sample.data.rows() == 60);
  REQUIRE(sample.data.cols() == 25);
  REQUIRE(sample.labels.size() == 60);
  REQUIRE(sample.data.column_names.size() == 25);
  CHECK(sample.data.column_names.front() == "f0");
  CHECK(sample.data.column_names.back() == "f24");
  for (int i = 0; i < 30; ++i) CHECK(sample.labels[static_cast<std::size_t>(i)] == 0);
  for (int i = 30; i < 60; ++i) CHECK(sample.labels[static_cast<std::size_t>(i)] == 1);
}

TEST_CASE("sampling is deterministic in the seed") {
  SynthConfig cfg;
  cfg.n_per_cluster = 40;
  cfg.seed = 12;
  SynthSample a = sample_synthetic(cfg);
  SynthSample b = sample_synthetic(cfg);
  CHECK((a.data.values.array() == b.data.values.array()).all());
  CHECK(a.labels == b.labels);
  cfg.seed = 13;
  SynthSample c = sample_synthetic(cfg);
  CHECK((a.data.values - c.data.values).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("sample moments converge to the target distribution") {
  SynthConfig cfg;
  cfg.alpha = 1.0;
  cfg.n_per_cluster = 10000;
  cfg.seed = 3;
  SynthSample sample = sample_synthetic(cfg);
  Matrix c0 = cluster_rows(sample, 0);
  Matrix c1 = cluster_rows(sample, 1);
  auto [s1, s2] = make_covariance_pair(cfg.kind, cfg.rho);
  Vector mu1 = synth_mu1();
  Vector mu2 = mu1 + synth_mu_offset();
  const double mean_tol = 5.0 / std::sqrt(10000.0);
  Vector m0 = c0.colwise().mean();
  Vector m1 = c1.colwise().mean();
  for (int j = 0; j < 25; ++j) {
    CHECK(std::abs(m0(j) - mu1(j)) < mean_tol);
    CHECK(std::abs(m1(j) - mu2(j)) < mean_tol);
  }
  // The alpha=1 offset puts feature 20 at mean 3 - 7 = -4.
  CHECK(std::abs(m1(20) - (-4.0)) < mean_tol);

  Matrix d0 = c0.rowwise() - m0.transpose();
  Matrix d1 = c1.rowwise() - m1.transpose();
  Matrix cov0 = d0.transpose() * d0 / 10000.0;
  Matrix cov1 = d1.transpose() * d1 / 10000.0;
  CHECK((cov0 - s1).cwiseAbs().maxCoeff() < 0.05);
  CHECK((cov1 - s2).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("separated clusters are recovered from the embedding") {
  SynthConfig cfg;
  cfg.alpha = 1.0;
  cfg.n_per_cluster = 1000;
  cfg.kind = SynthKind::kDisjoint;
  cfg.seed = 21;
  SynthSample sample = sample_synthetic(cfg);
  auto [xs, scaler] = standardize(sample.data);
  Embedding e = phate_embed(xs, 2);
  ClusterAssignment km = kmeans_points(e.coords, 2, 5u);
  // Purity: fraction of each cluster belonging to its dominant source.
  std::size_t agree = 0;
  int counts[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < km.labels.size(); ++i)
    ++counts[km.labels[i]][sample.labels[i]];
  for (int c = 0; c < 2; ++c) agree += static_cast<std::size_t>(std::max(counts[c][0], counts[c][1]));
  double purity = static_cast<double>(agree) / 2000.0;
  CHECK(purity >= 0.99);
}

TEST_CASE("smoke grid produces one row per cell and protocol") {
  AblationGrid grid;
  grid.kinds = {SynthKind::kDisjoint};
  grid.sizes = {100};
  grid.alphas = {0.0, 1.0};
  grid.m_values = {5};
  grid.replicates = 4;
  grid.methods = {"linear", "local_linear"};
  grid.seed = 9;
  grid.threads = 1;
  AblationReport report = run_ablation(grid);
  // 1 kind x 1 size x 2 alphas x 2 methods x 4 replicates x 1 m x 2 protocols.
  REQUIRE(report.rows.size() == 32);
  std::set<std::string> seen;
  for (const AblationRow& r : report.rows) {
    CHECK(r.n == 100);
    CHECK((r.alpha == 0.0 || r.alpha == 1.0));
    CHECK((r.protocol == "group" || r.protocol == "topk"));
    CHECK(r.cosine >= 0.0);
    CHECK(r.cosine <= 1.0 + 1e-12);
    CHECK(r.aucprc >= 0.0);
    CHECK(r.aucprc <= 1.0 + 1e-12);
    CHECK(r.purity >= 0.0);
    CHECK(r.purity <= 1.0);
    if (r.method == "linear") CHECK(r.purity == 1.0);
    std::ostringstream key;
    key << to_string(r.kind) << '|' << r.n << '|' << r.alpha << '|' << r.method
        << '|' << r.replicate << '|' << r.m << '|' << r.protocol;
    CHECK(seen.insert(key.str()).second);  // no duplicate cells
  }
  // Summary layout of the result tables: method x protocol x metric x alpha.
  for (const char* method : {"linear", "local_linear"})
    for (const char* protocol : {"group", "topk"})
      for (const char* metric : {"cosine", "aucprc"})
        for (double alpha : {0.0, 1.0}) {
          double v = ablation_mean(report, SynthKind::kDisjoint, 100, alpha,
                                   method, protocol, metric);
          CHECK(v >= 0.0);
          CHECK(v <= 1.0 + 1e-12);
        }
  // Cross-check one aggregate against a direct average.
  double total = 0.0;
  int hits = 0;
  for (const AblationRow& r : report.rows)
    if (r.method == "local_linear" && r.protocol == "topk" && r.alpha == 1.0) {
      total += r.aucprc;
      ++hits;
    }
  REQUIRE(hits == 4);
  double direct = total / 4.0;
  CHECK(ablation_mean(report, SynthKind::kDisjoint, 100, 1.0, "local_linear",
                      "topk", "aucprc") == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("ablation artifacts land on disk") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "hoiscope_ablation_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  AblationGrid grid;
  grid.kinds = {SynthKind::kNonDisjoint};
  grid.sizes = {60};
  grid.alphas = {1.0};
  grid.m_values = {4};
  grid.replicates = 2;
  grid.methods = {"linear"};
  grid.seed = 30;
  grid.threads = 1;
  AblationReport report = run_ablation(grid, dir.string());
  REQUIRE(fs::exists(dir / "ablation.csv"));
  REQUIRE(fs::exists(dir / "summary.json"));

  std::ifstream csv(dir / "ablation.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "kind,n,alpha,method,replicate,m,protocol,cosine,aucprc,purity");
  int lines = 0;
  for (std::string line; std::getline(csv, line);)
    if (!line.empty()) ++lines;
  CHECK(lines == static_cast<int>(report.rows.size()));

  std::ifstream js(dir / "summary.json");
  nlohmann::json summary = nlohmann::json::parse(js);
  double v = summary["mean_over_replicates_and_m"]["nondisjoint"]["60"]
                    ["linear"]["topk"]["aucprc"]["1"];
  CHECK(v == doctest::Approx(ablation_mean(report, SynthKind::kNonDisjoint, 60,
                                           1.0, "linear", "topk", "aucprc"))
                 .epsilon(1e-12));
  fs::remove_all(dir);
}

TEST_CASE("kind names round-trip") {
  CHECK(to_string(SynthKind::kDisjoint) == "disjoint");
  CHECK(to_string(SynthKind::kNonDisjoint) == "nondisjoint");
  CHECK(synth_kind_from_string("disjoint") == SynthKind::kDisjoint);
  CHECK(synth_kind_from_string("nondisjoint") == SynthKind::kNonDisjoint);
  CHECK_THROWS(synth_kind_from_string("other"));
}
