#include <cmath>
#include <fstream>
#include <limits>
#include <regex>

#include <fmt/format.h>

#include "embias/intrinsic_metrics.hpp"

namespace embias {

bool is_registered_metric(std::string_view name) {
  static const std::regex pattern(
      R"((DB_vt|DB|MIDB|Rec_LR|Rec_MLP|SB_def|SB_stereo|SB_other|E|E_[A-Za-z0-9_]+)|)"
      R"(((Clus_v|Clus_acc|GIPE_|MIDB_)[0-9]+(\.[0-9]+)?))");
  return std::regex_match(std::string(name), pattern);
}

MetricsTable::MetricsTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
  for (const auto& c : columns_) {
    if (!is_registered_metric(c)) throw Error(fmt::format("metrics table: unregistered column '{}'", c));
  }
}

std::size_t MetricsTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i] == name) return i;
  }
  throw NotFoundError(fmt::format("metrics table: no column '{}'", name));
}

std::size_t MetricsTable::row_index(const std::string& id) const {
  for (std::size_t i = 0; i < row_ids_.size(); ++i) {
    if (row_ids_[i] == id) return i;
  }
  throw NotFoundError(fmt::format("metrics table: no row '{}'", id));
}

void MetricsTable::add_row(const std::string& id, std::vector<std::optional<double>> values) {
  if (values.size() != columns_.size()) throw Error("metrics table: row width mismatch");
  for (const auto& v : values) {
    if (v && !std::isfinite(*v)) throw Error("metrics table: non-finite value");
  }
  for (const auto& r : row_ids_) {
    if (r == id) throw Error(fmt::format("metrics table: duplicate row '{}'", id));
  }
  row_ids_.push_back(id);
  values_.push_back(std::move(values));
}

void MetricsTable::set(const std::string& id, const std::string& column, std::optional<double> value) {
  if (value && !std::isfinite(*value)) value.reset();
  values_[row_index(id)][column_index(column)] = value;
}

std::optional<double> MetricsTable::get(const std::string& id, const std::string& column) const {
  return values_[row_index(id)][column_index(column)];
}

std::vector<std::optional<double>> MetricsTable::column(const std::string& name) const {
  const auto c = column_index(name);
  std::vector<std::optional<double>> out;
  for (const auto& row : values_) out.push_back(row[c]);
  return out;
}

MetricsTable load_metrics_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open metrics table {}", path.string()));
  const std::string src = path.string();
  std::string line;
  std::size_t lineno = 0;
  MetricsTable table;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    auto fields = split(line, '\t');
    if (!header) {
      table = MetricsTable(std::vector<std::string>(fields.begin() + 1, fields.end()));
      header = true;
      continue;
    }
    if (fields.size() != table.columns().size() + 1) throw ParseError(src, lineno, "row width differs from header");
    std::vector<std::optional<double>> values;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto tok = trim(fields[i]);
      if (tok == "NA" || tok.empty()) {
        values.emplace_back();
        continue;
      }
      double v;
      if (!parse_double(tok, v)) throw ParseError(src, lineno, fmt::format("bad value '{}'", tok));
      values.emplace_back(v);
    }
    table.add_row(std::string(trim(fields[0])), std::move(values));
  }
  if (!header) throw ParseError(src, 0, "missing header");
  return table;
}

void save_metrics_table(const MetricsTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << "embedding";
  for (const auto& c : table.columns()) out << '\t' << c;
  out << '\n';
  for (const auto& id : table.row_ids()) {
    out << id;
    for (const auto& c : table.columns()) {
      const auto v = table.get(id, c);
      out << '\t' << (v ? fmt::format("{}", *v) : std::string("NA"));
    }
    out << '\n';
  }
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> CorrelationMatrix::at(const std::string& a, const std::string& b) const {
  Eigen::Index ia = -1, ib = -1;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == a) ia = static_cast<Eigen::Index>(i);
    if (columns[i] == b) ib = static_cast<Eigen::Index>(i);
  }
  if (ia < 0 || ib < 0) throw NotFoundError(fmt::format("correlation matrix: no column pair {}/{}", a, b));
  const double v = r(ia, ib);
  if (std::isnan(v)) return std::nullopt;
  return v;
}

CorrelationMatrix pearson_matrix(const MetricsTable& table) {
  CorrelationMatrix m;
  m.columns = table.columns();
  const auto k = static_cast<Eigen::Index>(m.columns.size());
  m.r = Eigen::MatrixXd::Constant(k, k, std::numeric_limits<double>::quiet_NaN());
  m.n = Eigen::MatrixXi::Zero(k, k);
  std::vector<std::vector<std::optional<double>>> cols;
  for (const auto& c : m.columns) cols.push_back(table.column(c));

  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a; b < k; ++b) {
      std::vector<double> x, y;
      const auto& ca = cols[static_cast<std::size_t>(a)];
      const auto& cb = cols[static_cast<std::size_t>(b)];
      for (std::size_t i = 0; i < ca.size(); ++i) {
        if (ca[i] && cb[i]) {
          x.push_back(*ca[i]);
          y.push_back(*cb[i]);
        }
      }
      m.n(a, b) = m.n(b, a) = static_cast<int>(x.size());
      std::optional<double> v;
      if (x.size() < 3) {
        m.flags.push_back(fmt::format("{}/{}: fewer than 3 joint rows", m.columns[static_cast<std::size_t>(a)],
                                      m.columns[static_cast<std::size_t>(b)]));
      } else if (a == b) {
        v = pearson(x, y) ? std::optional<double>(1.0) : std::nullopt;
      } else {
        v = pearson(x, y);
      }
      if (!v && x.size() >= 3) {
        m.flags.push_back(fmt::format("{}/{}: constant column", m.columns[static_cast<std::size_t>(a)],
                                      m.columns[static_cast<std::size_t>(b)]));
      }
      if (v) m.r(a, b) = m.r(b, a) = *v;
    }
  }
  return m;
}

void save_correlation_matrix(const CorrelationMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << "metric";
  for (const auto& c : m.columns) out << '\t' << c;
  out << '\n';
  for (std::size_t i = 0; i < m.columns.size(); ++i) {
    out << m.columns[i];
    for (std::size_t j = 0; j < m.columns.size(); ++j) {
      const double v = m.r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      out << '\t' << (std::isnan(v) ? std::string("NA") : fmt::format("{:.3f}", v));
    }
    out << '\n';
  }
}

}  // namespace embias
