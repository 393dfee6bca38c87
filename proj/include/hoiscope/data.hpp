#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hoiscope/common.hpp"

namespace hoiscope {

// Dense numeric table: N rows (samples) x p named columns (features).
struct DataMatrix {
  Matrix values;
  std::vector<std::string> column_names;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }

  // Throws DataError on non-finite entries, duplicate or missing names.
  void validate() const;
};

struct DroppedColumn {
  Index index = -1;          // position in the original column order
  std::string name;
  std::string reason;
};

enum class MissingPolicy { kDropColumn, kError };

struct CsvOptions {
  char delimiter = ',';
  MissingPolicy missing_policy = MissingPolicy::kDropColumn;
};

struct CsvLoadResult {
  DataMatrix data;
  std::vector<DroppedColumn> dropped;
};

// RFC-4180 CSV with a mandatory header row. Cells that fail numeric parsing
// (or are empty) mark the whole column as non-numeric; the column is dropped
// or the load fails depending on the missing-value policy.
CsvLoadResult load_csv(const std::string& path, const CsvOptions& options = {});

void save_csv(const DataMatrix& data, const std::string& path);

struct IdxLoadResult {
  DataMatrix data;            // one row per image, pixels scaled to [0, 1]
  std::vector<int> labels;
};

// IDX image/label pair (big-endian, magics 0x00000803 / 0x00000801).
IdxLoadResult load_idx(const std::string& images_path,
                       const std::string& labels_path);

// {"columns": [...], "values": [[...], ...]} rectangular numeric matrix.
DataMatrix load_matrix_json(const std::string& path);
void save_matrix_json(const DataMatrix& data, const std::string& path);

// Column-wise z-scoring parameters. Vectors are sized to the ORIGINAL column
// count; `retained` lists the original indices that survived the constant-
// column drop, in order.
struct Scaler {
  Vector means;
  Vector stds;
  std::vector<Index> retained;
  std::vector<DroppedColumn> dropped;

  bool empty() const { return means.size() == 0; }
  // Drop + z-score a matrix laid out like the fit data.
  Matrix apply(const Matrix& x) const;
  // Map z-scored values (retained layout) back to original units.
  Matrix invert(const Matrix& z) const;
};

// Z-score columns using the population convention (divide by N, not N-1).
// Columns with standard deviation < 1e-12 are dropped and recorded.
std::pair<DataMatrix, Scaler> standardize(const DataMatrix& x);

// Column-wise concatenation of two tables with equal row counts. Name
// collisions on the right operand get a "_b" suffix.
DataMatrix concat_features(const DataMatrix& a, const DataMatrix& b);

}  // namespace hoiscope
