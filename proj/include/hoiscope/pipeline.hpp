#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "hoiscope/cluster.hpp"
#include "hoiscope/corex.hpp"
#include "hoiscope/data.hpp"
#include "hoiscope/embed.hpp"

namespace hoiscope {

struct InputSpec {
  std::string kind = "csv";     // csv | idx | matrix-json
  std::string path;
  std::string labels_path;      // idx only
  std::string concat_path;      // optional matrix-json appended column-wise
  CsvOptions csv;
};

struct ClusterParams {
  int k = 10;
  std::uint64_t seed = 0;
};

struct RunConfig {
  InputSpec input;
  int dims = 10;
  EmbedParams embed;
  ClusterParams cluster;
  int m = 10;
  CorexOptions corex;
  std::string out_dir;
  unsigned threads = 0;         // 0 = hardware concurrency
};

// Parse the JSON config document (all fields optional except input.path).
RunConfig run_config_from_json(const nlohmann::json& j);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct RunReport {
  std::vector<DroppedColumn> drop_log;  // ingest + standardization drops
  Embedding embedding;
  ClusterAssignment assignment;
  std::vector<FactorReport> reports;    // one per cluster, in cluster order
  std::vector<std::string> warnings;
  std::vector<StageTiming> timings;
  double total_seconds = 0.0;
};

// Load the configured input (with optional column concatenation); CSV column
// drops are appended to drop_log when provided.
DataMatrix load_input(const InputSpec& input,
                      std::vector<DroppedColumn>* drop_log = nullptr);

// Standardize + fit each cluster of `raw` independently (parallel across
// clusters); returns one FactorReport per cluster in cluster order. Clusters
// with fewer than 2 rows get an empty report and a warning. Each cluster
// fits from its own seed stream derived from options.seed.
std::vector<FactorReport> fit_clusters(const DataMatrix& raw,
                                       const ClusterAssignment& assignment,
                                       int m, const CorexOptions& options,
                                       unsigned threads,
                                       std::vector<std::string>* warnings);

// ingest -> standardize -> embed -> cluster -> per-cluster fit. Artifacts are
// persisted under config.out_dir when it is non-empty; timings go to a
// separate timings.json so the analytic artifacts stay run-invariant.
RunReport run_pipeline(const RunConfig& config);

// Top factors of one cluster with per-feature MI sorted descending.
nlohmann::json emit_report(const RunReport& report, int cluster, int top_m);
nlohmann::json emit_report(const FactorReport& report, int top_m);

}  // namespace hoiscope
