#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "hoiscope/cluster.hpp"
#include "hoiscope/corex.hpp"
#include "hoiscope/embed.hpp"
#include "hoiscope/eval.hpp"

namespace hoiscope {

// Stable JSON forms for the stage artifacts. Writers emit dump(2) with a
// trailing newline; double formatting is nlohmann's shortest round-trip
// representation, so identical values serialize identically.

nlohmann::json embedding_to_json(const Embedding& e);
Embedding embedding_from_json(const nlohmann::json& j);

nlohmann::json assignment_to_json(const ClusterAssignment& a);
ClusterAssignment assignment_from_json(const nlohmann::json& j);

nlohmann::json factor_report_to_json(const FactorReport& r, int m);
FactorReport factor_report_from_json(const nlohmann::json& j);

nlohmann::json score_to_json(const ScorePair& s, const std::string& protocol,
                             int k);

std::vector<GroundTruthHoi> truths_from_json(const nlohmann::json& j);
nlohmann::json truths_to_json(const std::vector<GroundTruthHoi>& truths);

// File helpers. Reads throw DataError on missing/invalid files.
nlohmann::json read_json_file(const std::string& path);
void write_json_file(const nlohmann::json& j, const std::string& path);

}  // namespace hoiscope
