#include "vigor/data/dataset.hpp"

#include "vigor/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace vigor::data {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::optional<double> parse_number(const std::string& field) {
  if (field.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

void append_number(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

bool is_binary(double v) { return v == 0.0 || v == 1.0; }

} // namespace

void Dataset::validate() const {
  const std::size_t n = t.size();
  if (y.size() != n || x.rows() != n)
    throw ValidationError("dataset: inconsistent lengths (x rows " + std::to_string(x.rows()) + ", t " +
                          std::to_string(n) + ", y " + std::to_string(y.size()) + ")");
  if (column_names.size() != x.cols())
    throw ValidationError("dataset: " + std::to_string(column_names.size()) + " column names for " +
                          std::to_string(x.cols()) + " covariates");
  if (u_hat && u_hat->size() != n) throw ValidationError("dataset: u_hat length differs from row count");
  if (u_star && u_star->size() != n) throw ValidationError("dataset: u_star length differs from row count");
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_binary(t[i])) throw ValidationError("dataset: t is not binary at row " + std::to_string(i));
    if (!is_binary(y[i])) throw ValidationError("dataset: y is not binary at row " + std::to_string(i));
  }
  std::unordered_set<std::string> seen;
  for (const auto& name : column_names)
    if (!seen.insert(name).second) throw ValidationError("dataset: duplicate column name '" + name + "'");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.x = x.select_rows(rows);
  out.column_names = column_names;
  out.t.reserve(rows.size());
  out.y.reserve(rows.size());
  for (auto r : rows) {
    out.t.push_back(t[r]);
    out.y.push_back(y[r]);
  }
  auto pick = [&](const std::optional<std::vector<double>>& src) -> std::optional<std::vector<double>> {
    if (!src) return std::nullopt;
    std::vector<double> v;
    v.reserve(rows.size());
    for (auto r : rows) v.push_back((*src)[r]);
    return v;
  };
  out.u_hat = pick(u_hat);
  out.u_star = pick(u_star);
  out.true_ate = true_ate;
  return out;
}

Dataset Dataset::with_u_hat(std::vector<double> values) const {
  if (values.size() != size())
    throw ValidationError("dataset: candidate confounder has " + std::to_string(values.size()) + " values for " +
                          std::to_string(size()) + " rows");
  Dataset out = *this;
  out.u_hat = std::move(values);
  return out;
}

std::vector<double> Dataset::take_column(const std::string& name) {
  const auto it = std::find(column_names.begin(), column_names.end(), name);
  if (it == column_names.end()) throw ValidationError("dataset: no covariate named '" + name + "'");
  const auto col = static_cast<std::size_t>(it - column_names.begin());
  std::vector<double> values = x.column_copy(col);
  nn::Matrix rest(x.rows(), x.cols() - 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::size_t k = 0;
    for (std::size_t c = 0; c < x.cols(); ++c)
      if (c != col) rest(r, k++) = x(r, c);
  }
  x = std::move(rest);
  column_names.erase(it);
  return values;
}

Dataset parse_csv(const std::string& text, const std::string& source_name) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_fields(line);
      break;
    }
  }
  if (header.empty()) throw ParseError(source_name + ": missing header row");
  if (!header.empty() && header.front().rfind("\xEF\xBB\xBF", 0) == 0) header.front().erase(0, 3);

  std::optional<std::size_t> t_col;
  std::optional<std::size_t> y_col;
  std::vector<std::size_t> covariate_cols;
  Dataset ds;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string key = lower(header[c]);
    if (key == "t") {
      if (t_col) throw ParseError(source_name + ": duplicate treatment column");
      t_col = c;
    } else if (key == "y") {
      if (y_col) throw ParseError(source_name + ": duplicate outcome column");
      y_col = c;
    } else {
      if (header[c].empty()) throw ParseError(source_name + ": empty column name in header (column " + std::to_string(c + 1) + ")");
      covariate_cols.push_back(c);
      ds.column_names.push_back(header[c]);
    }
  }
  if (!t_col) throw ParseError(source_name + ": no treatment column named 't'");
  if (!y_col) throw ParseError(source_name + ": no outcome column named 'y'");

  std::vector<double> x_values;
  std::vector<std::size_t> missing_rows;
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++data_row;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw ParseError(source_name + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                       " fields, header has " + std::to_string(header.size()));
    std::vector<double> row(fields.size());
    bool missing = false;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto v = parse_number(fields[c]);
      if (!v) {
        missing = true;
        break;
      }
      row[c] = *v;
    }
    if (missing) {
      missing_rows.push_back(data_row);
      continue;
    }
    if (!is_binary(row[*t_col]))
      throw ValidationError(source_name + ": schema error: t must be 0 or 1 (row " + std::to_string(data_row) + ", line " +
                            std::to_string(line_no) + ")");
    if (!is_binary(row[*y_col]))
      throw ValidationError(source_name + ": schema error: y must be 0 or 1 (row " + std::to_string(data_row) + ", line " +
                            std::to_string(line_no) + ")");
    ds.t.push_back(row[*t_col]);
    ds.y.push_back(row[*y_col]);
    for (auto c : covariate_cols) x_values.push_back(row[c]);
  }
  if (!missing_rows.empty()) {
    std::string rows;
    for (std::size_t i = 0; i < missing_rows.size() && i < 20; ++i) {
      if (i) rows += ", ";
      rows += std::to_string(missing_rows[i]);
    }
    if (missing_rows.size() > 20) rows += ", ...";
    throw ValidationError(source_name + ": missing or non-numeric values in data rows " + rows);
  }
  if (ds.t.empty()) throw ValidationError(source_name + ": no data rows");
  ds.x = nn::Matrix(ds.t.size(), covariate_cols.size(), std::move(x_values));
  ds.validate();
  return ds;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), path.string());
}

std::string to_csv(const Dataset& dataset) {
  std::string out;
  for (const auto& name : dataset.column_names) {
    out += name;
    out += ',';
  }
  out += "t,y";
  if (dataset.u_hat) out += ",u_hat";
  out += '\n';
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    for (double v : dataset.x.row(r)) {
      append_number(out, v);
      out += ',';
    }
    append_number(out, dataset.t[r]);
    out += ',';
    append_number(out, dataset.y[r]);
    if (dataset.u_hat) {
      out += ',';
      append_number(out, (*dataset.u_hat)[r]);
    }
    out += '\n';
  }
  return out;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << to_csv(dataset);
}

double naive_ate(const Dataset& dataset) {
  double sum1 = 0.0, sum0 = 0.0;
  std::size_t n1 = 0, n0 = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.t[i] == 1.0) {
      sum1 += dataset.y[i];
      ++n1;
    } else {
      sum0 += dataset.y[i];
      ++n0;
    }
  }
  if (n1 == 0 || n0 == 0) throw DegenerateInputError("naive_ate: both treatment groups must be nonempty");
  return sum1 / static_cast<double>(n1) - sum0 / static_cast<double>(n0);
}

std::string fingerprint(const Dataset& dataset) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_csv(dataset)) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

Standardizer Standardizer::fit(const nn::Matrix& x) {
  Standardizer s;
  const std::size_t n = x.rows();
  s.mean.assign(x.cols(), 0.0);
  s.scale.assign(x.cols(), 1.0);
  if (n == 0) return s;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) sum += x(r, c);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) ss += (x(r, c) - mean) * (x(r, c) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    s.mean[c] = mean;
    s.scale[c] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

nn::Matrix Standardizer::apply(const nn::Matrix& x) const {
  if (x.cols() != mean.size())
    throw ShapeError("standardize: " + x.shape_string() + " does not match " + std::to_string(mean.size()) + " fitted columns");
  nn::Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - mean[c]) / scale[c];
  return out;
}

std::vector<double> min_max_scale(std::span<const double> values) {
  std::vector<double> out(values.size(), 0.0);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / range;
  return out;
}

} // namespace vigor::data
