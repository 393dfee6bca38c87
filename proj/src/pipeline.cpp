#include "hoiscope/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <numeric>

#include "hoiscope/rng.hpp"
#include "hoiscope/serialize.hpp"
#include "hoiscope/thread_pool.hpp"

namespace hoiscope {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Re-throw the active stage exception with the stage name attached, keeping
// the error class (and therefore the exit code) intact.
[[noreturn]] void tag_stage(const std::string& stage) {
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(stage + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(stage + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(stage + ": " + e.what());
  }
}

template <typename F>
auto run_stage(RunReport& report, const std::string& stage, F&& fn) {
  auto start = Clock::now();
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      report.timings.push_back({stage, seconds_since(start)});
    } else {
      auto result = fn();
      report.timings.push_back({stage, seconds_since(start)});
      return result;
    }
  } catch (...) {
    tag_stage(stage);
  }
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  try {
    if (j.contains("input")) {
      const auto& in = j.at("input");
      if (in.contains("kind")) cfg.input.kind = in.at("kind").get<std::string>();
      if (in.contains("path")) cfg.input.path = in.at("path").get<std::string>();
      if (in.contains("labels_path"))
        cfg.input.labels_path = in.at("labels_path").get<std::string>();
      if (in.contains("concat_path"))
        cfg.input.concat_path = in.at("concat_path").get<std::string>();
      if (in.contains("delimiter")) {
        auto d = in.at("delimiter").get<std::string>();
        if (d.size() != 1) throw ConfigError("delimiter must be one character");
        cfg.input.csv.delimiter = d[0];
      }
      if (in.contains("missing")) {
        auto mp = in.at("missing").get<std::string>();
        if (mp == "drop_column")
          cfg.input.csv.missing_policy = MissingPolicy::kDropColumn;
        else if (mp == "error")
          cfg.input.csv.missing_policy = MissingPolicy::kError;
        else
          throw ConfigError("unknown missing-value policy: " + mp);
      }
    }
    if (j.contains("embed")) {
      const auto& e = j.at("embed");
      if (e.contains("dims")) cfg.dims = e.at("dims").get<int>();
      if (e.contains("knn")) cfg.embed.knn = e.at("knn").get<int>();
      if (e.contains("decay")) cfg.embed.decay = e.at("decay").get<double>();
      if (e.contains("t_max")) cfg.embed.t_max = e.at("t_max").get<int>();
      if (e.contains("fixed_t") && !e.at("fixed_t").is_null())
        cfg.embed.fixed_t = e.at("fixed_t").get<int>();
      if (e.contains("n_landmark"))
        cfg.embed.n_landmark = e.at("n_landmark").get<int>();
      if (e.contains("pca_dims")) cfg.embed.pca_dims = e.at("pca_dims").get<int>();
      if (e.contains("seed")) cfg.embed.seed = e.at("seed").get<std::uint64_t>();
      if (e.contains("mds_max_iter"))
        cfg.embed.mds_max_iter = e.at("mds_max_iter").get<int>();
      if (e.contains("mds_tol")) cfg.embed.mds_tol = e.at("mds_tol").get<double>();
    }
    if (j.contains("cluster")) {
      const auto& c = j.at("cluster");
      if (c.contains("k")) cfg.cluster.k = c.at("k").get<int>();
      if (c.contains("seed")) cfg.cluster.seed = c.at("seed").get<std::uint64_t>();
    }
    if (j.contains("corex")) {
      const auto& c = j.at("corex");
      if (c.contains("m")) cfg.m = c.at("m").get<int>();
      if (c.contains("lr")) cfg.corex.lr = c.at("lr").get<double>();
      if (c.contains("max_iter")) cfg.corex.max_iter = c.at("max_iter").get<int>();
      if (c.contains("tol")) cfg.corex.tol = c.at("tol").get<double>();
      if (c.contains("lambda")) cfg.corex.lambda = c.at("lambda").get<double>();
      if (c.contains("ridge")) cfg.corex.ridge = c.at("ridge").get<double>();
      if (c.contains("seed")) cfg.corex.seed = c.at("seed").get<std::uint64_t>();
    }
    if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<unsigned>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  if (cfg.dims < 1) throw ConfigError("embed dims must be positive");
  if (cfg.cluster.k < 1) throw ConfigError("cluster k must be positive");
  if (cfg.m < 1) throw ConfigError("factor count must be positive");
  return cfg;
}

DataMatrix load_input(const InputSpec& input,
                      std::vector<DroppedColumn>* drop_log) {
  if (input.path.empty()) throw ConfigError("input path is required");
  DataMatrix data;
  if (input.kind == "csv") {
    CsvLoadResult res = load_csv(input.path, input.csv);
    data = std::move(res.data);
    if (drop_log)
      drop_log->insert(drop_log->end(), res.dropped.begin(), res.dropped.end());
  } else if (input.kind == "idx") {
    if (input.labels_path.empty())
      throw ConfigError("idx input requires labels_path");
    data = load_idx(input.path, input.labels_path).data;
  } else if (input.kind == "matrix-json") {
    data = load_matrix_json(input.path);
  } else {
    throw ConfigError("unknown input kind: " + input.kind);
  }
  if (!input.concat_path.empty())
    data = concat_features(data, load_matrix_json(input.concat_path));
  return data;
}

std::vector<FactorReport> fit_clusters(const DataMatrix& raw,
                                       const ClusterAssignment& assignment,
                                       int m, const CorexOptions& options,
                                       unsigned threads,
                                       std::vector<std::string>* warnings) {
  if (raw.rows() != static_cast<Index>(assignment.labels.size()))
    throw DataError("row count does not match assignment length");
  const int k = assignment.k;
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(k));
  for (Index i = 0; i < raw.rows(); ++i) {
    int l = assignment.labels[static_cast<std::size_t>(i)];
    if (l < 0 || l >= k) throw DataError("assignment label out of range");
    members[static_cast<std::size_t>(l)].push_back(i);
  }

  std::vector<FactorReport> reports(static_cast<std::size_t>(k));
  std::vector<std::string> fit_warnings(static_cast<std::size_t>(k));

  parallel_for(static_cast<std::size_t>(k), threads, [&](std::size_t c) {
    const auto& rows = members[c];
    FactorReport& fr = reports[c];
    fr.cluster_id = static_cast<int>(c);
    if (rows.size() < 2) {
      fit_warnings[c] = "cluster " + std::to_string(c) +
                        " has fewer than 2 samples; factors skipped";
      return;
    }
    DataMatrix slice;
    slice.values.resize(static_cast<Index>(rows.size()), raw.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
      slice.values.row(static_cast<Index>(r)) = raw.values.row(rows[r]);
    slice.column_names = raw.column_names;

    CorexOptions opts = options;
    // Stable per-cluster stream regardless of scheduling.
    opts.seed = SplitMix64::mix(options.seed, c);
    CorexModel model = fit_cluster(slice, m, opts);
    Matrix xc = model.scaler.apply(slice.values);
    Matrix corr = sample_correlation(xc, model.ridge);
    std::vector<std::string> names;
    names.reserve(model.scaler.retained.size());
    for (Index idx : model.scaler.retained)
      names.push_back(slice.column_names[static_cast<std::size_t>(idx)]);
    fr = make_factor_report(model, corr, static_cast<int>(c), std::move(names));

    std::string warn;
    if (rows.size() < 50)
      warn += "cluster " + std::to_string(c) + " has only " +
              std::to_string(rows.size()) + " samples (50+ recommended)";
    double tc_total = std::accumulate(fr.tc.begin(), fr.tc.end(), 0.0);
    if (tc_total > 0.0) {
      int weak = 0;
      for (double v : fr.tc)
        if (v < 0.01 * tc_total) ++weak;
      if (weak > 0) {
        if (!warn.empty()) warn += "; ";
        warn += "cluster " + std::to_string(c) + " has " +
                std::to_string(weak) +
                " factor(s) below 1% of total TC; consider fewer factors";
      }
    }
    fit_warnings[c] = std::move(warn);
  });

  if (warnings)
    for (auto& w : fit_warnings)
      if (!w.empty()) warnings->push_back("fit: " + w);
  return reports;
}

RunReport run_pipeline(const RunConfig& config) {
  auto wall_start = Clock::now();
  RunReport report;

  DataMatrix raw = run_stage(report, "ingest", [&] {
    return load_input(config.input, &report.drop_log);
  });

  DataMatrix standardized = run_stage(report, "standardize", [&] {
    auto [xs, scaler] = standardize(raw);
    report.drop_log.insert(report.drop_log.end(), scaler.dropped.begin(),
                           scaler.dropped.end());
    return xs;
  });

  report.embedding = run_stage(report, "embed", [&] {
    return phate_embed(standardized, config.dims, config.embed);
  });
  if (report.embedding.flat_entropy)
    report.warnings.push_back(
        "embed: flat entropy curve; defaulted diffusion time to " +
        std::to_string(report.embedding.t));

  report.assignment = run_stage(report, "cluster", [&] {
    return kmeans_cluster(report.embedding, config.cluster.k,
                          config.cluster.seed);
  });

  run_stage(report, "fit", [&] {
    report.reports = fit_clusters(raw, report.assignment, config.m,
                                  config.corex, config.threads,
                                  &report.warnings);
  });

  report.total_seconds = seconds_since(wall_start);

  if (!config.out_dir.empty()) {
    run_stage(report, "persist", [&] {
      namespace fs = std::filesystem;
      fs::create_directories(config.out_dir);
      fs::create_directories(config.out_dir + "/factors");
      write_json_file(embedding_to_json(report.embedding),
                      config.out_dir + "/embedding.json");
      write_json_file(assignment_to_json(report.assignment),
                      config.out_dir + "/clusters.json");
      for (const auto& fr : report.reports)
        write_json_file(
            factor_report_to_json(fr, static_cast<int>(fr.tc.size())),
            config.out_dir + "/factors/cluster" +
                std::to_string(fr.cluster_id) + ".json");

      nlohmann::json run;
      run["k"] = config.cluster.k;
      run["dims"] = config.dims;
      run["m"] = config.m;
      auto drops = nlohmann::json::array();
      for (const auto& d : report.drop_log)
        drops.push_back({{"index", d.index}, {"name", d.name},
                         {"reason", d.reason}});
      run["drop_log"] = std::move(drops);
      run["warnings"] = report.warnings;
      run["clusters_file"] = "clusters.json";
      run["embedding_file"] = "embedding.json";
      run["factor_files"] = [&] {
        std::vector<std::string> files;
        for (const auto& fr : report.reports)
          files.push_back("factors/cluster" + std::to_string(fr.cluster_id) +
                          ".json");
        return files;
      }();
      write_json_file(run, config.out_dir + "/run_report.json");
    });

    // Timings vary run to run, so they live outside the deterministic set.
    nlohmann::json timings;
    auto stages = nlohmann::json::array();
    for (const auto& t : report.timings)
      stages.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
    timings["stages"] = std::move(stages);
    timings["total_seconds"] = report.total_seconds;
    write_json_file(timings, config.out_dir + "/timings.json");
  }
  return report;
}

nlohmann::json emit_report(const FactorReport& report, int top_m) {
  if (top_m < 1) throw ConfigError("top_m must be positive");
  const int m = static_cast<int>(report.tc.size());
  const int take = std::min(top_m, m);
  nlohmann::json j;
  j["cluster"] = report.cluster_id;
  auto factors = nlohmann::json::array();
  for (int rank = 0; rank < take; ++rank) {
    int f = report.order[static_cast<std::size_t>(rank)];
    nlohmann::json entry;
    entry["factor"] = f;
    entry["tc"] = report.tc[static_cast<std::size_t>(f)];
    std::vector<Index> idx(static_cast<std::size_t>(report.mi.cols()));
    std::iota(idx.begin(), idx.end(), Index(0));
    std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) {
      return report.mi(f, a) > report.mi(f, b);
    });
    auto mi_list = nlohmann::json::array();
    for (Index i : idx)
      mi_list.push_back(
          {{"feature", report.feature_names[static_cast<std::size_t>(i)]},
           {"mi", report.mi(f, i)}});
    entry["mi"] = std::move(mi_list);
    factors.push_back(std::move(entry));
  }
  j["factors"] = std::move(factors);
  return j;
}

nlohmann::json emit_report(const RunReport& report, int cluster, int top_m) {
  for (const auto& fr : report.reports)
    if (fr.cluster_id == cluster) return emit_report(fr, top_m);
  throw ConfigError("unknown cluster id: " + std::to_string(cluster));
}

}  // namespace hoiscope
