#include "hoiscope/serialize.hpp"

#include <fstream>

namespace hoiscope {

namespace {

nlohmann::json matrix_to_rows(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix rows_to_matrix(const nlohmann::json& rows) {
  if (!rows.is_array()) throw DataError("expected an array of rows");
  const Index n = static_cast<Index>(rows.size());
  Index p = -1;
  Matrix m;
  Index i = 0;
  for (const auto& row : rows) {
    if (!row.is_array()) throw DataError("expected an array of rows");
    if (p < 0) {
      p = static_cast<Index>(row.size());
      m.resize(n, p);
    }
    if (static_cast<Index>(row.size()) != p)
      throw DataError("ragged matrix rows in JSON");
    for (Index j = 0; j < p; ++j) {
      if (!row[static_cast<std::size_t>(j)].is_number())
        throw DataError("non-numeric matrix entry in JSON");
      m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
    }
    ++i;
  }
  if (p < 0) m.resize(0, 0);
  return m;
}

template <typename T>
T require(const nlohmann::json& j, const char* key) {
  if (!j.contains(key))
    throw DataError(std::string("missing JSON field: ") + key);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad JSON field '") + key + "': " + e.what());
  }
}

}  // namespace

nlohmann::json embedding_to_json(const Embedding& e) {
  nlohmann::json j;
  j["coords"] = matrix_to_rows(e.coords);
  j["d"] = e.coords.cols();
  j["t"] = e.t;
  j["stress"] = e.stress;
  nlohmann::json params;
  params["knn"] = e.params.knn;
  params["decay"] = e.params.decay;
  params["t_max"] = e.params.t_max;
  if (e.params.fixed_t) params["fixed_t"] = *e.params.fixed_t;
  params["n_landmark"] = e.params.n_landmark;
  params["pca_dims"] = e.params.pca_dims;
  params["seed"] = e.params.seed;
  params["flat_entropy"] = e.flat_entropy;
  params["used_landmarks"] = e.used_landmarks;
  j["params"] = std::move(params);
  return j;
}

Embedding embedding_from_json(const nlohmann::json& j) {
  Embedding e;
  if (!j.contains("coords")) throw DataError("missing JSON field: coords");
  e.coords = rows_to_matrix(j.at("coords"));
  e.t = require<int>(j, "t");
  e.stress = require<double>(j, "stress");
  if (j.contains("params")) {
    const auto& p = j.at("params");
    if (p.contains("knn")) e.params.knn = p.at("knn").get<int>();
    if (p.contains("decay")) e.params.decay = p.at("decay").get<double>();
    if (p.contains("t_max")) e.params.t_max = p.at("t_max").get<int>();
    if (p.contains("fixed_t")) e.params.fixed_t = p.at("fixed_t").get<int>();
    if (p.contains("n_landmark"))
      e.params.n_landmark = p.at("n_landmark").get<int>();
    if (p.contains("pca_dims")) e.params.pca_dims = p.at("pca_dims").get<int>();
    if (p.contains("seed")) e.params.seed = p.at("seed").get<std::uint64_t>();
    if (p.contains("flat_entropy"))
      e.flat_entropy = p.at("flat_entropy").get<bool>();
    if (p.contains("used_landmarks"))
      e.used_landmarks = p.at("used_landmarks").get<bool>();
  }
  if (e.coords.size() > 0 && !e.coords.allFinite())
    throw DataError("non-finite embedding coordinates");
  return e;
}

nlohmann::json assignment_to_json(const ClusterAssignment& a) {
  nlohmann::json j;
  j["k"] = a.k;
  j["seed"] = a.seed;
  j["labels"] = a.labels;
  j["inertia"] = a.inertia;
  return j;
}

ClusterAssignment assignment_from_json(const nlohmann::json& j) {
  ClusterAssignment a;
  a.k = require<int>(j, "k");
  a.seed = require<std::uint64_t>(j, "seed");
  a.labels = require<std::vector<int>>(j, "labels");
  a.inertia = require<double>(j, "inertia");
  if (a.k < 1) throw DataError("assignment k must be positive");
  for (int l : a.labels)
    if (l < 0 || l >= a.k) throw DataError("assignment label out of range");
  return a;
}

nlohmann::json factor_report_to_json(const FactorReport& r, int m) {
  nlohmann::json j;
  j["cluster"] = r.cluster_id;
  j["m"] = m;
  j["tc"] = r.tc;
  j["order"] = r.order;
  j["mi"] = matrix_to_rows(r.mi);
  j["feature_names"] = r.feature_names;
  return j;
}

FactorReport factor_report_from_json(const nlohmann::json& j) {
  FactorReport r;
  r.cluster_id = require<int>(j, "cluster");
  r.tc = require<std::vector<double>>(j, "tc");
  r.order = require<std::vector<int>>(j, "order");
  if (!j.contains("mi")) throw DataError("missing JSON field: mi");
  r.mi = rows_to_matrix(j.at("mi"));
  r.feature_names = require<std::vector<std::string>>(j, "feature_names");
  if (r.tc.size() != r.order.size() ||
      static_cast<Index>(r.tc.size()) != r.mi.rows())
    throw DataError("inconsistent factor report fields");
  if (static_cast<Index>(r.feature_names.size()) != r.mi.cols())
    throw DataError("feature name count does not match MI width");
  return r;
}

nlohmann::json score_to_json(const ScorePair& s, const std::string& protocol,
                             int k) {
  nlohmann::json j;
  j["protocol"] = protocol;
  j["cosine"] = s.cosine;
  j["aucprc"] = s.aucprc;
  j["k"] = k;
  return j;
}

std::vector<GroundTruthHoi> truths_from_json(const nlohmann::json& j) {
  if (!j.contains("hois")) throw DataError("missing JSON field: hois");
  const auto& arr = j.at("hois");
  if (!arr.is_array()) throw DataError("'hois' must be an array");
  std::vector<GroundTruthHoi> out;
  for (const auto& row : arr) {
    if (!row.is_array()) throw DataError("each truth must be an array");
    GroundTruthHoi g;
    bool any = false;
    for (const auto& v : row) {
      int b = v.get<int>();
      if (b != 0 && b != 1) throw DataError("truth entries must be 0 or 1");
      g.members.push_back(static_cast<std::uint8_t>(b));
      any = any || b == 1;
    }
    if (!any) throw DataError("truth with no members");
    out.push_back(std::move(g));
  }
  if (out.empty()) throw DataError("empty truth set");
  return out;
}

nlohmann::json truths_to_json(const std::vector<GroundTruthHoi>& truths) {
  nlohmann::json j;
  auto arr = nlohmann::json::array();
  for (const auto& g : truths) {
    auto row = nlohmann::json::array();
    for (auto v : g.members) row.push_back(static_cast<int>(v));
    arr.push_back(std::move(row));
  }
  j["hois"] = std::move(arr);
  return j;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid JSON in " + path + ": " + e.what());
  }
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace hoiscope
