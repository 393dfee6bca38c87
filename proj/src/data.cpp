#include "hoiscope/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace hoiscope {

void DataMatrix::validate() const {
  if (static_cast<Index>(column_names.size()) != values.cols())
    throw DataError("column name count does not match column count");
  std::set<std::string> seen;
  for (const auto& n : column_names) {
    if (n.empty()) throw DataError("empty column name");
    if (!seen.insert(n).second) throw DataError("duplicate column name: " + n);
  }
  if (!values.allFinite()) throw DataError("non-finite value in data matrix");
}

namespace {

// Split one RFC-4180 record. `line` already has the trailing \r removed.
// Returns false if the record continues on the next physical line (an open
// quoted field containing a newline).
bool split_record(const std::string& line, char delim,
                  std::vector<std::string>& out, bool& in_quotes,
                  std::string& pending) {
  std::size_t i = 0;
  while (i <= line.size()) {
    if (in_quotes) {
      if (i == line.size()) {  // embedded newline inside a quoted field
        pending += '\n';
        return false;
      }
      char c = line[i];
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          pending += '"';
          i += 2;
        } else {
          in_quotes = false;
          ++i;
        }
      } else {
        pending += c;
        ++i;
      }
    } else {
      if (i == line.size() || line[i] == delim) {
        out.push_back(pending);
        pending.clear();
        if (i == line.size()) return true;
        ++i;
      } else if (line[i] == '"' && pending.empty()) {
        in_quotes = true;
        ++i;
      } else {
        pending += line[i];
        ++i;
      }
    }
  }
  return true;
}

std::vector<std::vector<std::string>> read_records(const std::string& path,
                                                   char delim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::vector<std::vector<std::string>> records;
  std::string line;
  std::vector<std::string> fields;
  std::string pending;
  bool in_quotes = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!in_quotes && line.empty()) continue;  // skip blank lines
    if (split_record(line, delim, fields, in_quotes, pending)) {
      records.push_back(std::move(fields));
      fields.clear();
    }
  }
  if (in_quotes) throw DataError("unterminated quoted field in " + path);
  return records;
}

bool parse_double(const std::string& s, double& out) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return false;
  std::size_t e = s.find_last_not_of(" \t") + 1;
  const char* first = s.data() + b;
  const char* last = s.data() + e;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace

CsvLoadResult load_csv(const std::string& path, const CsvOptions& options) {
  auto records = read_records(path, options.delimiter);
  if (records.empty()) throw DataError("no data rows in " + path);
  const auto& header = records.front();
  const std::size_t p = header.size();
  if (records.size() < 2) throw DataError("no data rows in " + path);
  const std::size_t n = records.size() - 1;

  std::vector<uint8_t> bad(p, 0);
  Matrix values(static_cast<Index>(n), static_cast<Index>(p));
  for (std::size_t r = 0; r < n; ++r) {
    const auto& rec = records[r + 1];
    if (rec.size() != p) {
      std::ostringstream os;
      os << "ragged row " << (r + 2) << " in " << path << ": expected " << p
         << " fields, got " << rec.size();
      throw DataError(os.str());
    }
    for (std::size_t c = 0; c < p; ++c) {
      double v;
      if (parse_double(rec[c], v)) {
        values(static_cast<Index>(r), static_cast<Index>(c)) = v;
      } else {
        if (options.missing_policy == MissingPolicy::kError)
          throw DataError("missing or non-numeric cell at row " +
                          std::to_string(r + 2) + ", column '" + header[c] +
                          "' in " + path);
        bad[c] = 1;
        values(static_cast<Index>(r), static_cast<Index>(c)) = 0.0;
      }
    }
  }

  CsvLoadResult result;
  std::vector<Index> keep;
  for (std::size_t c = 0; c < p; ++c) {
    if (bad[c]) {
      result.dropped.push_back({static_cast<Index>(c), header[c],
                                "missing or non-numeric values"});
    } else {
      keep.push_back(static_cast<Index>(c));
    }
  }
  if (keep.empty()) throw DataError("no numeric columns in " + path);

  result.data.values.resize(static_cast<Index>(n), static_cast<Index>(keep.size()));
  result.data.column_names.reserve(keep.size());
  for (std::size_t j = 0; j < keep.size(); ++j) {
    result.data.values.col(static_cast<Index>(j)) = values.col(keep[j]);
    result.data.column_names.push_back(header[static_cast<std::size_t>(keep[j])]);
  }
  result.data.validate();
  return result;
}

namespace {

bool needs_quoting(const std::string& s, char delim) {
  return s.find_first_of(std::string("\"\n") + delim) != std::string::npos;
}

std::string csv_escape(const std::string& s, char delim) {
  if (!needs_quoting(s, delim)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void save_csv(const DataMatrix& data, const std::string& path) {
  data.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  for (std::size_t c = 0; c < data.column_names.size(); ++c) {
    if (c) out << ',';
    out << csv_escape(data.column_names[c], ',');
  }
  out << '\n';
  for (Index r = 0; r < data.rows(); ++r) {
    for (Index c = 0; c < data.cols(); ++c) {
      if (c) out << ',';
      out << format_double(data.values(r, c));
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

namespace {

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("truncated IDX file: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

IdxLoadResult load_idx(const std::string& images_path,
                       const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw DataError("cannot open file: " + images_path);
  std::uint32_t magic = read_u32_be(img, images_path);
  if (magic != 0x00000803u)
    throw DataError("bad IDX image magic in " + images_path);
  std::uint32_t n = read_u32_be(img, images_path);
  std::uint32_t rows = read_u32_be(img, images_path);
  std::uint32_t cols = read_u32_be(img, images_path);
  std::uint64_t count = std::uint64_t(n) * rows * cols;
  std::vector<unsigned char> pixels(count);
  img.read(reinterpret_cast<char*>(pixels.data()),
           static_cast<std::streamsize>(count));
  if (static_cast<std::uint64_t>(img.gcount()) != count)
    throw DataError("truncated IDX image payload in " + images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw DataError("cannot open file: " + labels_path);
  std::uint32_t lmagic = read_u32_be(lab, labels_path);
  if (lmagic != 0x00000801u)
    throw DataError("bad IDX label magic in " + labels_path);
  std::uint32_t ln = read_u32_be(lab, labels_path);
  if (ln != n)
    throw DataError("IDX image/label count mismatch: " + std::to_string(n) +
                    " vs " + std::to_string(ln));
  std::vector<unsigned char> labels(ln);
  lab.read(reinterpret_cast<char*>(labels.data()),
           static_cast<std::streamsize>(ln));
  if (static_cast<std::uint32_t>(lab.gcount()) != ln)
    throw DataError("truncated IDX label payload in " + labels_path);

  IdxLoadResult result;
  const Index d = static_cast<Index>(rows) * static_cast<Index>(cols);
  result.data.values.resize(static_cast<Index>(n), d);
  for (Index i = 0; i < static_cast<Index>(n); ++i)
    for (Index j = 0; j < d; ++j)
      result.data.values(i, j) =
          pixels[static_cast<std::size_t>(i) * d + j] / 255.0;
  result.data.column_names.reserve(static_cast<std::size_t>(d));
  for (Index j = 0; j < d; ++j)
    result.data.column_names.push_back("px" + std::to_string(j));
  result.labels.assign(labels.begin(), labels.end());
  return result;
}

DataMatrix load_matrix_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid JSON in " + path + ": " + e.what());
  }
  if (!j.contains("columns") || !j.contains("values"))
    throw DataError("matrix JSON must contain 'columns' and 'values': " + path);
  DataMatrix data;
  data.column_names = j["columns"].get<std::vector<std::string>>();
  const auto& rows = j["values"];
  if (!rows.is_array()) throw DataError("'values' must be an array: " + path);
  const Index p = static_cast<Index>(data.column_names.size());
  data.values.resize(static_cast<Index>(rows.size()), p);
  Index r = 0;
  for (const auto& row : rows) {
    if (!row.is_array() || static_cast<Index>(row.size()) != p)
      throw DataError("non-rectangular 'values' in " + path);
    for (Index c = 0; c < p; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number())
        throw DataError("non-numeric entry in " + path);
      data.values(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    ++r;
  }
  data.validate();
  return data;
}

void save_matrix_json(const DataMatrix& data, const std::string& path) {
  data.validate();
  nlohmann::json j;
  j["columns"] = data.column_names;
  auto values = nlohmann::json::array();
  for (Index r = 0; r < data.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Index c = 0; c < data.cols(); ++c) row.push_back(data.values(r, c));
    values.push_back(std::move(row));
  }
  j["values"] = std::move(values);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + path);
}

Matrix Scaler::apply(const Matrix& x) const {
  if (x.cols() != means.size())
    throw DataError("scaler expects " + std::to_string(means.size()) +
                    " columns, got " + std::to_string(x.cols()));
  Matrix z(x.rows(), static_cast<Index>(retained.size()));
  for (std::size_t j = 0; j < retained.size(); ++j) {
    Index c = retained[j];
    z.col(static_cast<Index>(j)) = (x.col(c).array() - means(c)) / stds(c);
  }
  return z;
}

Matrix Scaler::invert(const Matrix& z) const {
  if (z.cols() != static_cast<Index>(retained.size()))
    throw DataError("scaler invert expects " +
                    std::to_string(retained.size()) + " columns, got " +
                    std::to_string(z.cols()));
  Matrix x(z.rows(), static_cast<Index>(retained.size()));
  for (std::size_t j = 0; j < retained.size(); ++j) {
    Index c = retained[j];
    x.col(static_cast<Index>(j)) = z.col(static_cast<Index>(j)).array() * stds(c) + means(c);
  }
  return x;
}

std::pair<DataMatrix, Scaler> standardize(const DataMatrix& x) {
  if (x.rows() < 2) throw DataError("standardize requires at least 2 rows");
  x.validate();
  const Index n = x.rows();
  const Index p = x.cols();

  Scaler scaler;
  scaler.means.resize(p);
  scaler.stds.resize(p);
  for (Index c = 0; c < p; ++c) {
    double mean = x.values.col(c).mean();
    // Population standard deviation: divide by N.
    double var = (x.values.col(c).array() - mean).square().sum() / double(n);
    scaler.means(c) = mean;
    scaler.stds(c) = std::sqrt(var);
  }

  for (Index c = 0; c < p; ++c) {
    if (scaler.stds(c) < 1e-12) {
      scaler.dropped.push_back(
          {c, x.column_names[static_cast<std::size_t>(c)], "zero variance"});
    } else {
      scaler.retained.push_back(c);
    }
  }
  if (scaler.retained.empty())
    throw DataError("all columns constant; nothing to standardize");

  DataMatrix out;
  out.values = scaler.apply(x.values);
  out.column_names.reserve(scaler.retained.size());
  for (Index c : scaler.retained)
    out.column_names.push_back(x.column_names[static_cast<std::size_t>(c)]);
  return {std::move(out), std::move(scaler)};
}

DataMatrix concat_features(const DataMatrix& a, const DataMatrix& b) {
  a.validate();
  b.validate();
  if (a.rows() != b.rows())
    throw DataError("row count mismatch in feature concatenation: " +
                    std::to_string(a.rows()) + " vs " + std::to_string(b.rows()));
  DataMatrix out;
  out.values.resize(a.rows(), a.cols() + b.cols());
  out.values.leftCols(a.cols()) = a.values;
  out.values.rightCols(b.cols()) = b.values;
  out.column_names = a.column_names;
  std::set<std::string> used(a.column_names.begin(), a.column_names.end());
  for (const auto& name : b.column_names) {
    std::string candidate = name;
    while (used.count(candidate)) candidate += "_b";
    used.insert(candidate);
    out.column_names.push_back(candidate);
  }
  out.validate();
  return out;
}

}  // namespace hoiscope
