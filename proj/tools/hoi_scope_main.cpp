// hoi-scope: staged pipeline for discovering groups of jointly dependent
// features that vary across a data manifold. Each subcommand reads and writes
// JSON artifacts so stages can be re-run independently.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hoiscope/cluster.hpp"
#include "hoiscope/common.hpp"
#include "hoiscope/corex.hpp"
#include "hoiscope/data.hpp"
#include "hoiscope/embed.hpp"
#include "hoiscope/eval.hpp"
#include "hoiscope/pipeline.hpp"
#include "hoiscope/serialize.hpp"
#include "hoiscope/svg.hpp"
#include "hoiscope/synth.hpp"

namespace {

using namespace hoiscope;
namespace fs = std::filesystem;

struct InputFlags {
  std::string path;
  std::string format = "csv";
  std::string labels;
  std::string concat;
  std::string delimiter = ",";
  bool missing_error = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--input", path, "input table (csv, idx images, or matrix JSON)")
        ->required();
    cmd->add_option("--format", format, "input format")
        ->check(CLI::IsMember({"csv", "idx", "matrix-json"}))
        ->default_val("csv");
    cmd->add_option("--labels", labels, "idx label file (idx format only)");
    cmd->add_option("--concat", concat,
                    "matrix JSON appended column-wise to the input");
    cmd->add_option("--delimiter", delimiter, "csv field delimiter")
        ->default_val(",");
    cmd->add_flag("--missing-error", missing_error,
                  "fail on non-numeric csv columns instead of dropping them");
  }

  InputSpec spec() const {
    InputSpec s;
    s.kind = format;
    s.path = path;
    s.labels_path = labels;
    s.concat_path = concat;
    if (delimiter.size() != 1)
      throw ConfigError("delimiter must be one character");
    s.csv.delimiter = delimiter[0];
    s.csv.missing_policy =
        missing_error ? MissingPolicy::kError : MissingPolicy::kDropColumn;
    return s;
  }
};

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

std::pair<int, int> parse_shape(const std::string& shape) {
  auto x = shape.find('x');
  if (x == std::string::npos || x == 0 || x + 1 >= shape.size())
    throw ConfigError("shape must look like HxW, got '" + shape + "'");
  try {
    int h = std::stoi(shape.substr(0, x));
    int w = std::stoi(shape.substr(x + 1));
    if (h < 1 || w < 1) throw ConfigError("shape sides must be positive");
    return {h, w};
  } catch (const std::invalid_argument&) {
    throw ConfigError("shape must look like HxW, got '" + shape + "'");
  } catch (const std::out_of_range&) {
    throw ConfigError("shape out of range: '" + shape + "'");
  }
}

std::vector<HoiPrediction> predictions_from_report(const FactorReport& fr) {
  std::vector<HoiPrediction> preds;
  preds.reserve(fr.order.size());
  for (int f : fr.order) {
    HoiPrediction p;
    p.scores = fr.mi.row(f).transpose();
    p.cluster_id = fr.cluster_id;
    p.factor_index = f;
    preds.push_back(std::move(p));
  }
  return preds;
}

std::vector<GroundTruthHoi> dedupe(std::vector<GroundTruthHoi> truths) {
  std::vector<GroundTruthHoi> out;
  for (auto& t : truths) {
    bool seen = false;
    for (const auto& u : out) seen = seen || u.members == t.members;
    if (!seen) out.push_back(std::move(t));
  }
  return out;
}

AblationGrid grid_from_json(const nlohmann::json& j) {
  AblationGrid grid;
  try {
    if (j.contains("kinds")) {
      grid.kinds.clear();
      for (const auto& k : j.at("kinds"))
        grid.kinds.push_back(synth_kind_from_string(k.get<std::string>()));
    }
    if (j.contains("sizes")) grid.sizes = j.at("sizes").get<std::vector<int>>();
    if (j.contains("alphas"))
      grid.alphas = j.at("alphas").get<std::vector<double>>();
    if (j.contains("m_values"))
      grid.m_values = j.at("m_values").get<std::vector<int>>();
    if (j.contains("replicates")) grid.replicates = j.at("replicates").get<int>();
    if (j.contains("methods"))
      grid.methods = j.at("methods").get<std::vector<std::string>>();
    if (j.contains("seed")) grid.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("rho")) grid.rho = j.at("rho").get<double>();
    if (j.contains("threads")) grid.threads = j.at("threads").get<unsigned>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid ablation config: ") + e.what());
  }
  return grid;
}

int run(int argc, char** argv) {
  CLI::App app{"discover higher-order feature interactions that vary across "
               "a data manifold"};
  app.require_subcommand(1);

  // pipeline ---------------------------------------------------------------
  auto* cmd_pipeline = app.add_subcommand(
      "pipeline", "run ingest -> embed -> cluster -> per-cluster fit");
  std::string pl_config, pl_out;
  std::optional<unsigned> pl_threads;
  cmd_pipeline->add_option("--config", pl_config, "run config JSON")->required();
  cmd_pipeline->add_option("--out", pl_out, "output directory")->required();
  cmd_pipeline->add_option("--threads", pl_threads,
                           "worker threads (default: machine parallelism)");
  cmd_pipeline->callback([&] {
    RunConfig cfg = run_config_from_json(read_json_file(pl_config));
    cfg.out_dir = pl_out;  // flags win over the config file
    if (pl_threads) cfg.threads = *pl_threads;
    RunReport report = run_pipeline(cfg);
    print_warnings(report.warnings);
    std::cout << "wrote " << pl_out << ": " << report.assignment.k
              << " clusters, " << report.embedding.coords.rows()
              << " samples, t=" << report.embedding.t << "\n";
  });

  // embed ------------------------------------------------------------------
  auto* cmd_embed =
      app.add_subcommand("embed", "standardize the input and embed it");
  InputFlags em_in;
  em_in.attach(cmd_embed);
  int em_dims = 10;
  EmbedParams em_params;
  std::optional<int> em_fixed_t;
  std::string em_out;
  cmd_embed->add_option("--dims", em_dims, "embedding dimensions")
      ->default_val(10);
  cmd_embed->add_option("--knn", em_params.knn, "adaptive bandwidth neighbor")
      ->default_val(5);
  cmd_embed->add_option("--decay", em_params.decay, "kernel decay exponent")
      ->default_val(40.0);
  cmd_embed->add_option("--t-max", em_params.t_max, "largest diffusion time scanned")
      ->default_val(100);
  cmd_embed->add_option("--fixed-t", em_fixed_t,
                        "skip automatic selection and use this diffusion time");
  cmd_embed->add_option("--landmarks", em_params.n_landmark,
                        "landmark count threshold for the approximate path")
      ->default_val(2000);
  cmd_embed->add_option("--pca-dims", em_params.pca_dims,
                        "PCA dimensions applied before the kernel")
      ->default_val(100);
  cmd_embed->add_option("--seed", em_params.seed, "random seed")->default_val(0);
  cmd_embed->add_option("--out", em_out, "embedding JSON path")->required();
  cmd_embed->callback([&] {
    std::vector<DroppedColumn> drops;
    DataMatrix raw = load_input(em_in.spec(), &drops);
    auto [xs, scaler] = standardize(raw);
    for (const auto& d : scaler.dropped)
      std::cerr << "warning: dropped column '" << d.name << "': " << d.reason
                << "\n";
    for (const auto& d : drops)
      std::cerr << "warning: dropped column '" << d.name << "': " << d.reason
                << "\n";
    em_params.fixed_t = em_fixed_t;
    Embedding emb = phate_embed(xs, em_dims, em_params);
    if (emb.flat_entropy)
      std::cerr << "warning: flat entropy curve; defaulted diffusion time to "
                << emb.t << "\n";
    write_json_file(embedding_to_json(emb), em_out);
    std::cout << "wrote " << em_out << ": " << emb.coords.rows() << " x "
              << emb.coords.cols() << ", t=" << emb.t << "\n";
  });

  // cluster ------------------------------------------------------------------
  auto* cmd_cluster =
      app.add_subcommand("cluster", "k-means over an embedding");
  std::string cl_embedding, cl_out;
  int cl_k = 10;
  std::uint64_t cl_seed = 0;
  int cl_max_iter = 300;
  cmd_cluster->add_option("--embedding", cl_embedding, "embedding JSON")
      ->required();
  cmd_cluster->add_option("--k", cl_k, "cluster count")->default_val(10);
  cmd_cluster->add_option("--seed", cl_seed, "random seed")->default_val(0);
  cmd_cluster->add_option("--max-iter", cl_max_iter, "Lloyd iteration cap")
      ->default_val(300);
  cmd_cluster->add_option("--out", cl_out, "assignment JSON path")->required();
  cmd_cluster->callback([&] {
    Embedding emb = embedding_from_json(read_json_file(cl_embedding));
    ClusterAssignment a = kmeans_cluster(emb, cl_k, cl_seed, cl_max_iter);
    write_json_file(assignment_to_json(a), cl_out);
    std::cout << "wrote " << cl_out << ": k=" << a.k
              << ", inertia=" << a.inertia << "\n";
  });

  // fit ----------------------------------------------------------------------
  auto* cmd_fit = app.add_subcommand(
      "fit", "fit latent factors independently within each cluster");
  InputFlags ft_in;
  ft_in.attach(cmd_fit);
  std::string ft_clusters, ft_out;
  int ft_m = 10;
  CorexOptions ft_opts;
  unsigned ft_threads = 0;
  cmd_fit->add_option("--clusters", ft_clusters, "assignment JSON")->required();
  cmd_fit->add_option("--factors", ft_m, "latent factor count")->required();
  cmd_fit->add_option("--lambda", ft_opts.lambda, "modularity weight")
      ->default_val(1.0);
  cmd_fit->add_option("--lr", ft_opts.lr, "Adam learning rate")
      ->default_val(5e-3);
  cmd_fit->add_option("--max-iter", ft_opts.max_iter, "optimizer iteration cap")
      ->default_val(10000);
  cmd_fit->add_option("--seed", ft_opts.seed, "random seed")->default_val(0);
  cmd_fit->add_option("--threads", ft_threads,
                      "worker threads (default: machine parallelism)")
      ->default_val(0);
  cmd_fit->add_option("--out", ft_out, "output directory for factor reports")
      ->required();
  cmd_fit->callback([&] {
    DataMatrix raw = load_input(ft_in.spec());
    ClusterAssignment a = assignment_from_json(read_json_file(ft_clusters));
    std::vector<std::string> warnings;
    std::vector<FactorReport> reports =
        fit_clusters(raw, a, ft_m, ft_opts, ft_threads, &warnings);
    print_warnings(warnings);
    fs::create_directories(ft_out);
    for (const auto& fr : reports)
      write_json_file(factor_report_to_json(fr, static_cast<int>(fr.tc.size())),
                      ft_out + "/cluster" + std::to_string(fr.cluster_id) +
                          ".json");
    std::cout << "wrote " << reports.size() << " factor reports to " << ft_out
              << "\n";
  });

  // report ---------------------------------------------------------------------
  auto* cmd_report = app.add_subcommand(
      "report", "print the top factors of one cluster as JSON");
  std::string rp_dir;
  int rp_cluster = 0, rp_top = 10;
  cmd_report->add_option("--factors", rp_dir, "factor report directory")
      ->required();
  cmd_report->add_option("--cluster", rp_cluster, "cluster id")->required();
  cmd_report->add_option("--top", rp_top, "factors to include")->default_val(10);
  cmd_report->callback([&] {
    std::string path = rp_dir + "/cluster" + std::to_string(rp_cluster) + ".json";
    if (!fs::exists(path))
      throw ConfigError("unknown cluster id: " + std::to_string(rp_cluster) +
                        " (no " + path + ")");
    FactorReport fr = factor_report_from_json(read_json_file(path));
    std::cout << emit_report(fr, rp_top).dump(2) << "\n";
  });

  // svg ------------------------------------------------------------------------
  auto* cmd_svg = app.add_subcommand("svg", "render a figure as SVG");
  std::string sv_kind, sv_out, sv_embedding, sv_clusters, sv_factors;
  std::string sv_shape, sv_feature;
  InputFlags sv_in;
  int sv_top = 0;
  cmd_svg->add_option("--kind", sv_kind, "figure kind")
      ->check(CLI::IsMember({"scatter", "mi_heatmap", "tc_bar"}))
      ->required();
  cmd_svg->add_option("--embedding", sv_embedding, "embedding JSON (scatter)");
  cmd_svg->add_option("--clusters", sv_clusters,
                      "assignment JSON (scatter colored by cluster)");
  cmd_svg->add_option("--input", sv_in.path,
                      "input table (scatter colored by --feature)");
  cmd_svg->add_option("--format", sv_in.format, "input format")
      ->check(CLI::IsMember({"csv", "idx", "matrix-json"}))
      ->default_val("csv");
  cmd_svg->add_option("--labels", sv_in.labels, "idx label file");
  cmd_svg->add_option("--feature", sv_feature, "feature column for scatter color");
  cmd_svg->add_option("--factors", sv_factors,
                      "factor report JSON (mi_heatmap, tc_bar)");
  cmd_svg->add_option("--shape", sv_shape, "HxW feature grid (mi_heatmap)");
  cmd_svg->add_option("--top", sv_top,
                      "factors rendered in the heatmap (default: all)")
      ->default_val(0);
  cmd_svg->add_option("--out", sv_out, "SVG path")->required();
  cmd_svg->callback([&] {
    std::string doc;
    if (sv_kind == "scatter") {
      if (sv_embedding.empty())
        throw ConfigError("scatter requires --embedding");
      Embedding emb = embedding_from_json(read_json_file(sv_embedding));
      if (!sv_clusters.empty()) {
        ClusterAssignment a = assignment_from_json(read_json_file(sv_clusters));
        doc = svg_scatter_clusters(emb, a.labels, a.k);
      } else if (!sv_in.path.empty() && !sv_feature.empty()) {
        DataMatrix raw = load_input(sv_in.spec());
        Index col = -1;
        for (Index i = 0; i < raw.cols(); ++i)
          if (raw.column_names[static_cast<std::size_t>(i)] == sv_feature)
            col = i;
        if (col < 0)
          throw ConfigError("unknown feature column: " + sv_feature);
        doc = svg_scatter_feature(emb, raw.values.col(col), sv_feature);
      } else {
        throw ConfigError(
            "scatter requires --clusters or --input with --feature");
      }
    } else {
      if (sv_factors.empty())
        throw ConfigError(sv_kind + " requires --factors");
      FactorReport fr = factor_report_from_json(read_json_file(sv_factors));
      if (sv_kind == "mi_heatmap") {
        if (sv_shape.empty()) throw ConfigError("mi_heatmap requires --shape");
        auto [h, w] = parse_shape(sv_shape);
        int top = sv_top > 0 ? sv_top : static_cast<int>(fr.order.size());
        doc = svg_mi_heatmap(fr, h, w, top);
      } else {
        doc = svg_tc_bar(fr);
      }
    }
    write_text_file(doc, sv_out);
    std::cout << "wrote " << sv_out << "\n";
  });

  // synth ------------------------------------------------------------------------
  auto* cmd_synth = app.add_subcommand(
      "synth", "sample the two-cluster block-covariance benchmark");
  SynthConfig sy_cfg;
  std::string sy_kind = "disjoint", sy_out;
  cmd_synth->add_option("--alpha", sy_cfg.alpha, "cluster mean separation")
      ->default_val(1.0);
  cmd_synth->add_option("--n", sy_cfg.n_per_cluster, "samples per cluster")
      ->default_val(1000);
  cmd_synth->add_option("--kind", sy_kind, "covariance pairing")
      ->check(CLI::IsMember({"disjoint", "nondisjoint"}))
      ->default_val("disjoint");
  cmd_synth->add_option("--seed", sy_cfg.seed, "random seed")->default_val(0);
  cmd_synth->add_option("--rho", sy_cfg.rho, "within-block correlation")
      ->default_val(0.3);
  cmd_synth->add_option("--out", sy_out, "output CSV path")->required();
  cmd_synth->callback([&] {
    sy_cfg.kind = synth_kind_from_string(sy_kind);
    SynthSample sample = sample_synthetic(sy_cfg);
    save_csv(sample.data, sy_out);

    fs::path base(sy_out);
    base.replace_extension();
    nlohmann::json labels;
    labels["labels"] = sample.labels;
    write_json_file(labels, base.string() + ".labels.json");

    auto [sigma1, sigma2] = make_covariance_pair(sy_cfg.kind, sy_cfg.rho);
    auto truths = extract_true_hois(sigma1);
    auto extra = extract_true_hois(sigma2);
    truths.insert(truths.end(), extra.begin(), extra.end());
    write_json_file(truths_to_json(dedupe(std::move(truths))),
                    base.string() + ".truth.json");
    std::cout << "wrote " << sy_out << " (" << sample.data.rows() << " x "
              << sample.data.cols() << "), " << base.string()
              << ".labels.json, " << base.string() << ".truth.json\n";
  });

  // ablation ------------------------------------------------------------------------
  auto* cmd_ablation = app.add_subcommand(
      "ablation", "sweep the benchmark grid and score both methods");
  std::string ab_config, ab_out;
  std::optional<unsigned> ab_threads;
  cmd_ablation->add_option("--config", ab_config, "grid config JSON")
      ->required();
  cmd_ablation->add_option("--out", ab_out, "output directory")->required();
  cmd_ablation->add_option("--threads", ab_threads,
                           "worker threads (default: machine parallelism)");
  cmd_ablation->callback([&] {
    AblationGrid grid = grid_from_json(read_json_file(ab_config));
    if (ab_threads) grid.threads = *ab_threads;
    AblationReport report = run_ablation(grid, ab_out);
    std::cout << "wrote " << ab_out << "/ablation.csv (" << report.rows.size()
              << " rows) and " << ab_out << "/summary.json\n";
  });

  // score ------------------------------------------------------------------------
  auto* cmd_score = app.add_subcommand(
      "score", "score a factor report against ground-truth interactions");
  std::string sc_pred, sc_truth, sc_mode = "topk";
  cmd_score->add_option("--pred", sc_pred, "factor report JSON")->required();
  cmd_score->add_option("--truth", sc_truth, "ground-truth JSON")->required();
  cmd_score->add_option("--mode", sc_mode, "scoring protocol")
      ->check(CLI::IsMember({"group", "topk"}))
      ->default_val("topk");
  cmd_score->callback([&] {
    FactorReport fr = factor_report_from_json(read_json_file(sc_pred));
    auto truths = truths_from_json(read_json_file(sc_truth));
    auto preds = predictions_from_report(fr);
    ScorePair s;
    int k = 0;
    if (sc_mode == "topk") {
      s = topk_score(preds, truths, &k);
    } else {
      s = group_score(preds, truths);
      k = static_cast<int>(preds.size());
    }
    std::cout << score_to_json(s, sc_mode, k).dump(2) << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return ConfigError::exit_code;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const hoiscope::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return hoiscope::ConfigError::exit_code;
  } catch (const hoiscope::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return hoiscope::DataError::exit_code;
  } catch (const hoiscope::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return hoiscope::NumericError::exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
