#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hoiscope/data.hpp"
#include "hoiscope/rng.hpp"

namespace hoiscope {

enum class SynthKind { kDisjoint, kNonDisjoint };

std::string to_string(SynthKind kind);
SynthKind synth_kind_from_string(const std::string& name);

struct SynthConfig {
  double alpha = 1.0;        // cluster mean separation in [0, 1]
  int n_per_cluster = 1000;
  SynthKind kind = SynthKind::kDisjoint;
  std::uint64_t seed = 0;
  // Within-block correlation. 0.3 keeps the blocks recoverable from a pure
  // cluster at n=1000 while leaving equal-mean clusters inseparable in the
  // embedding; much stronger blocks let the kernel split clusters on
  // covariance shape alone and the separability effect disappears.
  double rho = 0.3;
};

// 25-feature block covariances. Sigma1 has five consecutive 5-feature blocks;
// the partner depends on `kind`: disjoint uses strided blocks sharing no pair,
// nondisjoint swaps features 19 and 20 between the last two blocks.
std::pair<Matrix, Matrix> make_covariance_pair(SynthKind kind, double rho);

Vector synth_mu1();
Vector synth_mu_offset();  // mu2 = mu1 + alpha * offset

// Draw n rows from N(mu, cov) via the Cholesky factor.
Matrix sample_mvn(const Vector& mu, const Matrix& cov, int n, SplitMix64& rng);

struct SynthSample {
  DataMatrix data;           // 2n x 25, cluster 1 rows first
  std::vector<int> labels;   // generating cluster per row (0 or 1)
};

SynthSample sample_synthetic(const SynthConfig& config);

struct AblationGrid {
  std::vector<SynthKind> kinds{SynthKind::kDisjoint, SynthKind::kNonDisjoint};
  std::vector<int> sizes{10, 100, 1000, 10000};
  std::vector<double> alphas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5,
                             0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<int> m_values{3, 4, 5, 6, 7};
  int replicates = 16;
  std::vector<std::string> methods{"linear", "local_linear"};
  std::uint64_t seed = 0;
  double rho = 0.3;
  unsigned threads = 0;      // 0 = hardware concurrency
};

struct AblationRow {
  SynthKind kind = SynthKind::kDisjoint;
  int n = 0;                 // per-cluster sample count
  double alpha = 0.0;
  std::string method;        // "linear" | "local_linear"
  int replicate = 0;
  int m = 0;
  std::string protocol;      // "group" | "topk"
  double cosine = 1.0;
  double aucprc = 0.0;
  double purity = 1.0;       // majority-class fraction (1.0 for global fits)
};

struct AblationReport {
  AblationGrid grid;
  std::vector<AblationRow> rows;
};

// Mean of one metric over replicates and m values for a fixed
// (kind, n, alpha, method, protocol) slice, as in the summary tables.
double ablation_mean(const AblationReport& report, SynthKind kind, int n,
                     double alpha, const std::string& method,
                     const std::string& protocol, const std::string& metric);

// Run every grid cell (data generation, fits, scoring). When out_dir is
// non-empty, writes ablation.csv (one row per cell x protocol) and
// summary.json (means aggregated over replicates and m).
AblationReport run_ablation(const AblationGrid& grid,
                            const std::string& out_dir = "");

void write_ablation_csv(const AblationReport& report, const std::string& path);
void write_ablation_summary(const AblationReport& report,
                            const std::string& path);

}  // namespace hoiscope
