#include "frailty/data.hpp"

#include "frailty/numeric.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace frailty {

int Dataset::num_subject_covariates() const {
  return records.empty() ? 0 : static_cast<int>(records.front().subject_covariates.size());
}

int Dataset::num_cluster_covariates() const {
  return clusters.empty() ? 0 : static_cast<int>(clusters.front().cluster_covariates.size());
}

double Dataset::max_time() const {
  double m = 0.0;
  for (const auto& r : records) m = std::max(m, r.time);
  return m;
}

Vector Dataset::design_row(int record) const {
  const auto& r = records[record];
  const auto& x = clusters[r.cluster].cluster_covariates;
  Vector w(r.subject_covariates.size() + x.size());
  w << r.subject_covariates, x;
  return w;
}

Matrix Dataset::design_matrix() const {
  Matrix w(num_records(), num_covariates());
  for (int i = 0; i < num_records(); ++i) w.row(i) = design_row(i).transpose();
  return w;
}

Matrix Dataset::cluster_matrix() const {
  Matrix x(num_clusters(), num_cluster_covariates());
  for (int i = 0; i < num_clusters(); ++i) x.row(i) = clusters[i].cluster_covariates.transpose();
  return x;
}

void Dataset::validate() const {
  const int q = num_cluster_covariates();
  for (const auto& c : clusters) {
    if (c.cluster_covariates.size() != q)
      throw DataError("cluster " + c.cluster_id + ": cluster covariate dimension differs");
  }
  const int subject_dim = num_subject_covariates();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!(r.time > 0.0) || !std::isfinite(r.time))
      throw RowError(i + 1, "follow-up time must be positive and finite");
    if (r.event != 0 && r.event != 1) throw RowError(i + 1, "event must be 0 or 1");
    if (r.cluster < 0 || r.cluster >= num_clusters())
      throw ReferentialError("row " + std::to_string(i + 1) + ": unknown cluster index");
    if (r.subject_covariates.size() != subject_dim)
      throw RowError(i + 1, "subject covariate dimension differs");
    if (!r.subject_covariates.allFinite()) throw RowError(i + 1, "non-finite covariate");
  }
  if (!covariate_names.empty() && static_cast<int>(covariate_names.size()) != num_covariates())
    throw DataError("covariate name count does not match design dimension");
}

std::pair<Vector, double> Dataset::coefficients_to_raw(const Vector& xi) const {
  if (!standardization) return {xi, 0.0};
  const auto& map = *standardization;
  if (static_cast<int>(map.size()) != xi.size())
    throw std::invalid_argument("coefficients_to_raw: dimension mismatch");
  Vector raw(xi.size());
  double shift = 0.0;
  for (int k = 0; k < xi.size(); ++k) {
    raw[k] = xi[k] / map[k].scale;
    shift -= xi[k] * map[k].center / map[k].scale;
  }
  return {raw, shift};
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(b, e - b + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') quoted = !quoted;
    if (ch == delim && !quoted) {
      fields.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  fields.push_back(trim(current));
  return fields;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name, const std::string& file) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw SchemaError("missing column '" + name + "' in " + file);
    return static_cast<int>(it - header.begin());
  }
};

Table read_table(const std::string& text, char delim, const std::string& file) {
  Table table;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line, delim);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size())
      throw RowError(table.rows.size() + 1, file + ": expected " +
                                               std::to_string(table.header.size()) +
                                               " fields, found " + std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
  }
  if (!have_header) throw SchemaError(file + ": no header row");
  return table;
}

double parse_number(const std::string& s, std::size_t row, const std::string& column) {
  if (s.empty() || s == "NA" || s == "NaN" || s == "nan")
    throw RowError(row, "missing value in column '" + column + "'");
  double value = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw RowError(row, "column '" + column + "': cannot parse '" + s + "' as a number");
  if (!std::isfinite(value)) throw RowError(row, "column '" + column + "': non-finite value");
  return value;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Dataset parse_dataset(const std::string& subject_text, const std::string& cluster_text,
                      const Schema& schema) {
  const Table subjects = read_table(subject_text, schema.delimiter, "subject file");
  const int time_col = subjects.column(schema.time, "subject file");
  const int event_col = subjects.column(schema.event, "subject file");
  const int cluster_col = subjects.column(schema.cluster, "subject file");
  std::vector<int> subject_cols;
  for (const auto& name : schema.subject_covariates)
    subject_cols.push_back(subjects.column(name, "subject file"));

  Dataset data;
  std::unordered_map<std::string, int> cluster_index;

  if (!cluster_text.empty()) {
    const Table clusters = read_table(cluster_text, schema.delimiter, "cluster file");
    const std::string id_name =
        schema.cluster_file_id.empty() ? schema.cluster : schema.cluster_file_id;
    const int id_col = clusters.column(id_name, "cluster file");
    std::vector<int> cols;
    for (const auto& name : schema.cluster_covariates)
      cols.push_back(clusters.column(name, "cluster file"));
    for (std::size_t r = 0; r < clusters.rows.size(); ++r) {
      const auto& row = clusters.rows[r];
      ClusterInfo info;
      info.cluster_id = row[id_col];
      info.cluster_covariates.resize(static_cast<Eigen::Index>(cols.size()));
      for (std::size_t k = 0; k < cols.size(); ++k)
        info.cluster_covariates[static_cast<Eigen::Index>(k)] =
            parse_number(row[cols[k]], r + 1, schema.cluster_covariates[k]);
      if (!cluster_index.emplace(info.cluster_id, data.num_clusters()).second)
        throw RowError(r + 1, "cluster file: duplicate cluster id '" + info.cluster_id + "'");
      data.clusters.push_back(std::move(info));
    }
  } else if (!schema.cluster_covariates.empty()) {
    throw SchemaError("cluster covariates requested but no cluster file given");
  }
  const bool implicit_clusters = cluster_text.empty();

  for (std::size_t r = 0; r < subjects.rows.size(); ++r) {
    const auto& row = subjects.rows[r];
    SurvivalRecord rec;
    rec.time = parse_number(row[time_col], r + 1, schema.time);
    if (!(rec.time > 0.0)) throw RowError(r + 1, "follow-up time must be positive");
    const double ev = parse_number(row[event_col], r + 1, schema.event);
    if (ev != 0.0 && ev != 1.0) throw RowError(r + 1, "event indicator must be 0 or 1");
    rec.event = static_cast<int>(ev);
    rec.subject_covariates.resize(static_cast<Eigen::Index>(subject_cols.size()));
    for (std::size_t k = 0; k < subject_cols.size(); ++k)
      rec.subject_covariates[static_cast<Eigen::Index>(k)] =
          parse_number(row[subject_cols[k]], r + 1, schema.subject_covariates[k]);
    const std::string& id = row[cluster_col];
    auto it = cluster_index.find(id);
    if (it == cluster_index.end()) {
      if (!implicit_clusters)
        throw ReferentialError("row " + std::to_string(r + 1) + ": cluster '" + id +
                               "' not present in cluster file");
      it = cluster_index.emplace(id, data.num_clusters()).first;
      data.clusters.push_back(ClusterInfo{id, Vector(0)});
    }
    rec.cluster = it->second;
    data.records.push_back(std::move(rec));
  }

  // Drop clusters that no subject references; every cluster must own data.
  std::vector<int> used(data.clusters.size(), 0);
  for (const auto& rec : data.records) used[rec.cluster] = 1;
  if (std::find(used.begin(), used.end(), 0) != used.end()) {
    std::vector<int> remap(data.clusters.size(), -1);
    std::vector<ClusterInfo> kept;
    for (std::size_t c = 0; c < data.clusters.size(); ++c) {
      if (!used[c]) continue;
      remap[c] = static_cast<int>(kept.size());
      kept.push_back(std::move(data.clusters[c]));
    }
    data.clusters = std::move(kept);
    for (auto& rec : data.records) rec.cluster = remap[rec.cluster];
  }

  data.covariate_names = schema.subject_covariates;
  data.covariate_names.insert(data.covariate_names.end(), schema.cluster_covariates.begin(),
                              schema.cluster_covariates.end());
  for (const auto& name : schema.categorical) {
    if (std::find(data.covariate_names.begin(), data.covariate_names.end(), name) ==
        data.covariate_names.end())
      throw SchemaError("categorical column '" + name + "' is not a covariate");
  }
  for (const auto& name : data.covariate_names)
    data.categorical.push_back(std::find(schema.categorical.begin(), schema.categorical.end(),
                                         name) != schema.categorical.end());
  if (data.records.empty()) throw DataError("subject file has no data rows");
  data.validate();
  if (schema.standardize) standardize_covariates(data);
  return data;
}

Dataset load_dataset(const std::filesystem::path& subject_file,
                     const std::filesystem::path& cluster_file, const Schema& schema) {
  const std::string subjects = slurp(subject_file);
  const std::string clusters = cluster_file.empty() ? std::string() : slurp(cluster_file);
  return parse_dataset(subjects, clusters, schema);
}

void standardize_covariates(Dataset& data) {
  const int p_sub = data.num_subject_covariates();
  const int p = data.num_covariates();
  std::vector<ColumnTransform> map(static_cast<std::size_t>(p));
  auto fit = [](const std::vector<double>& v) {
    ColumnTransform t;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    t.center = mean;
    t.scale = sd > 0.0 ? sd : 1.0;
    return t;
  };
  for (int k = 0; k < p; ++k) {
    if (!data.categorical.empty() && data.categorical[k]) continue;
    std::vector<double> column;
    if (k < p_sub) {
      for (const auto& r : data.records) column.push_back(r.subject_covariates[k]);
    } else {
      for (const auto& r : data.records)
        column.push_back(data.clusters[r.cluster].cluster_covariates[k - p_sub]);
    }
    map[k] = fit(column);
  }
  for (auto& r : data.records)
    for (int k = 0; k < p_sub; ++k)
      r.subject_covariates[k] = (r.subject_covariates[k] - map[k].center) / map[k].scale;
  for (auto& c : data.clusters)
    for (int k = p_sub; k < p; ++k)
      c.cluster_covariates[k - p_sub] =
          (c.cluster_covariates[k - p_sub] - map[k].center) / map[k].scale;
  data.standardization = std::move(map);
}

GammaStatistic goodman_kruskal_gamma(const Matrix& counts) {
  const Eigen::Index rows = counts.rows();
  const Eigen::Index cols = counts.cols();
  // concordant[i][j]: cells strictly below-right plus strictly above-left.
  Matrix concordant = Matrix::Zero(rows, cols);
  Matrix discordant = Matrix::Zero(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      double a = 0.0;
      double d = 0.0;
      for (Eigen::Index k = 0; k < rows; ++k) {
        for (Eigen::Index l = 0; l < cols; ++l) {
          if ((k > i && l > j) || (k < i && l < j)) a += counts(k, l);
          if ((k > i && l < j) || (k < i && l > j)) d += counts(k, l);
        }
      }
      concordant(i, j) = a;
      discordant(i, j) = d;
    }
  }
  const double p = (counts.array() * concordant.array()).sum();  // 2C
  const double q = (counts.array() * discordant.array()).sum();  // 2D
  GammaStatistic out;
  out.concordant = p / 2.0;
  out.discordant = q / 2.0;
  if (p + q <= 0.0) return out;
  out.gamma = (p - q) / (p + q);
  const double ss =
      (counts.array() * (q * concordant.array() - p * discordant.array()).square()).sum();
  out.ase = 4.0 / ((p + q) * (p + q)) * std::sqrt(ss);
  out.ci_lower = std::max(-1.0, out.gamma - 1.959963984540054 * out.ase);
  out.ci_upper = std::min(1.0, out.gamma + 1.959963984540054 * out.ase);
  return out;
}

GammaStatistic goodman_kruskal_gamma(const std::vector<double>& row_var,
                                     const std::vector<double>& col_var) {
  if (row_var.size() != col_var.size())
    throw std::invalid_argument("goodman_kruskal_gamma: length mismatch");
  if (row_var.size() < 2) throw std::invalid_argument("goodman_kruskal_gamma: need >= 2 pairs");
  const std::set<double> row_levels(row_var.begin(), row_var.end());
  const std::set<double> col_levels(col_var.begin(), col_var.end());
  if (row_levels.size() < 2 || col_levels.size() < 2)
    throw std::invalid_argument("goodman_kruskal_gamma: each variable needs >= 2 levels");
  auto rank = [](const std::set<double>& levels, double v) {
    return static_cast<Eigen::Index>(std::distance(levels.begin(), levels.find(v)));
  };
  Matrix counts = Matrix::Zero(static_cast<Eigen::Index>(row_levels.size()),
                               static_cast<Eigen::Index>(col_levels.size()));
  for (std::size_t i = 0; i < row_var.size(); ++i)
    counts(rank(row_levels, row_var[i]), rank(col_levels, col_var[i])) += 1.0;
  return goodman_kruskal_gamma(counts);
}

namespace {

std::string level_label(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

DatasetSummary summarize(const Dataset& data) {
  if (data.records.empty()) throw DataError("summarize: empty dataset");
  DatasetSummary s;
  s.num_records = data.num_records();
  s.num_clusters = data.num_clusters();
  for (const auto& r : data.records) (r.event ? s.events : s.censored) += 1;

  std::vector<double> times;
  for (const auto& r : data.records) times.push_back(r.time);
  std::sort(times.begin(), times.end());
  s.continuous.push_back({"time", times.front(), sorted_quantile(times, 0.5), times.back()});

  const double n = static_cast<double>(s.num_records);
  s.categorical.push_back({"status",
                           {{"event", s.events, s.events / n},
                            {"censored", s.censored, s.censored / n}}});

  const Matrix w = data.design_matrix();
  for (int k = 0; k < w.cols(); ++k) {
    const std::string name = k < static_cast<int>(data.covariate_names.size())
                                 ? data.covariate_names[k]
                                 : "w" + std::to_string(k + 1);
    std::vector<double> col(w.rows());
    for (Eigen::Index i = 0; i < w.rows(); ++i) col[i] = w(i, k);
    const bool is_categorical = k < static_cast<int>(data.categorical.size()) && data.categorical[k];
    if (is_categorical) {
      std::map<double, long> tally;
      for (double v : col) tally[v] += 1;
      CategoricalSummary cs{name, {}};
      for (const auto& [v, c] : tally) cs.levels.push_back({level_label(v), c, c / n});
      s.categorical.push_back(std::move(cs));
    } else {
      std::sort(col.begin(), col.end());
      s.continuous.push_back({name, col.front(), sorted_quantile(col, 0.5), col.back()});
    }
  }
  return s;
}

std::string format_summary(const DatasetSummary& s) {
  std::ostringstream os;
  os << "records " << s.num_records << ", clusters " << s.num_clusters << "\n\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %12s %12s %12s\n", "variable", "min", "median", "max");
  os << buf;
  for (const auto& c : s.continuous) {
    std::snprintf(buf, sizeof buf, "%-24s %12.6g %12.6g %12.6g\n", c.name.c_str(), c.min,
                  c.median, c.max);
    os << buf;
  }
  os << "\n";
  std::snprintf(buf, sizeof buf, "%-24s %12s %12s %12s\n", "variable", "level", "count", "pct");
  os << buf;
  for (const auto& c : s.categorical) {
    for (const auto& l : c.levels) {
      std::snprintf(buf, sizeof buf, "%-24s %12s %12ld %12.1f\n", c.name.c_str(),
                    l.level.c_str(), l.count, 100.0 * l.proportion);
      os << buf;
    }
  }
  return os.str();
}

}  // namespace frailty
