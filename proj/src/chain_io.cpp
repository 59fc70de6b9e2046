#include "frailty/chain_io.hpp"

#include <json.hpp>

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace frailty {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_digest(std::uint64_t digest) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(digest));
  return buffer;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

std::string file_digest(const fs::path& path) { return hex_digest(fnv1a64(read_text(path))); }

LoglikFormat parse_loglik_format(const std::string& text) {
  if (text == "csv") return LoglikFormat::csv;
  if (text == "binary" || text == "bin") return LoglikFormat::binary;
  throw ConfigError("unknown log-likelihood format '" + text + "' (expected csv or binary)");
}

namespace {

std::string matrix_csv(const std::vector<std::string>& header, const Matrix& m) {
  std::string out = "draw";
  for (const auto& h : header) out += "," + h;
  out += '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out += std::to_string(r + 1);
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_number(const std::string& s, const fs::path& file) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw DataError(file.string() + ": bad number '" + s + "'");
  return v;
}

/// Reads a draw-indexed CSV; returns the numeric columns after "draw".
Matrix read_matrix_csv(const fs::path& file, std::vector<std::string>* header = nullptr) {
  std::istringstream in(read_text(file));
  std::string line;
  if (!std::getline(in, line)) throw DataError(file.string() + ": empty file");
  const auto names = split(line);
  if (header) header->assign(names.begin() + 1, names.end());
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != names.size()) throw DataError(file.string() + ": ragged row");
    std::vector<double> row;
    for (std::size_t k = 1; k < fields.size(); ++k) row.push_back(parse_number(fields[k], file));
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()) - 1);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

Matrix json_matrix(const json& j, Eigen::Index cols) {
  Matrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const auto row = j[r].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != cols) throw DataError("chain.json: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

}  // namespace

std::vector<std::string> write_chain(const PosteriorChain& chain, const fs::path& dir,
                                     LoglikFormat format) {
  fs::create_directories(dir);
  std::vector<std::string> written;
  const int k_count = chain.num_intervals();
  const int p = chain.num_covariates();
  const int m = chain.retained();

  std::vector<std::string> gamma_header;
  for (int k = 0; k < k_count; ++k) gamma_header.push_back("log_lambda[" + std::to_string(k + 1) + "]");
  for (int j = 0; j < p; ++j)
    gamma_header.push_back("xi[" + (j < static_cast<int>(chain.covariate_names.size())
                                        ? chain.covariate_names[j]
                                        : "w" + std::to_string(j + 1)) + "]");
  write_text(dir / "gamma.csv", matrix_csv(gamma_header, chain.gamma));
  written.push_back("gamma.csv");

  std::vector<std::string> frailty_header;
  for (int i = 0; i < chain.num_clusters; ++i) frailty_header.push_back("e[" + std::to_string(i + 1) + "]");
  write_text(dir / "frailties.csv", matrix_csv(frailty_header, chain.frailties));
  written.push_back("frailties.csv");

  Matrix hyper(m, 2);
  if (m > 0) hyper << chain.theta, chain.precision;
  write_text(dir / "hyper.csv", matrix_csv({"theta", "c"}, hyper));
  written.push_back("hyper.csv");

  const int dim = chain.coefficient_dim();
  const int nodes = TailfreeForest::num_nodes(chain.depth);
  std::string forest = "draw,node,path,level";
  for (int k = 0; k < dim; ++k) forest += ",beta" + std::to_string(k);
  forest += '\n';
  if (dim > 0) {
    for (int r = 0; r < m; ++r)
      for (int node = 0; node < nodes; ++node) {
        forest += std::to_string(r + 1) + "," + std::to_string(node) + "," +
                  TailfreeForest::node_path(node) + "," +
                  std::to_string(TailfreeForest::node_level(node));
        for (int k = 0; k < dim; ++k) forest += "," + format_double(chain.coefficients(r, node * dim + k));
        forest += '\n';
      }
  }
  write_text(dir / "forest.csv", forest);
  written.push_back("forest.csv");

  write_text(dir / "loglik.csv", matrix_csv({"loglik"}, chain.loglik));
  written.push_back("loglik.csv");

  std::string loglik_storage = "none";
  if (chain.record_loglik.rows() > 0) {
    if (format == LoglikFormat::csv) {
      std::vector<std::string> header;
      for (Eigen::Index j = 0; j < chain.record_loglik.cols(); ++j) header.push_back("obs" + std::to_string(j + 1));
      write_text(dir / "record_loglik.csv", matrix_csv(header, chain.record_loglik));
      written.push_back("record_loglik.csv");
      loglik_storage = "csv";
    } else {
      // int64 rows, int64 cols, then row-major little-endian doubles.
      std::string bytes(16 + sizeof(double) * chain.record_loglik.size(), '\0');
      const std::int64_t dims[2] = {chain.record_loglik.rows(), chain.record_loglik.cols()};
      std::memcpy(bytes.data(), dims, 16);
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = chain.record_loglik;
      std::memcpy(bytes.data() + 16, rm.data(), sizeof(double) * rm.size());
      write_text(dir / "record_loglik.bin", bytes);
      written.push_back("record_loglik.bin");
      loglik_storage = "binary";
    }
  }

  json meta;
  meta["frailty"] = to_string(chain.frailty);
  meta["depth"] = chain.depth;
  meta["rho_exponent"] = chain.rho.exponent;
  meta["cuts"] = std::vector<double>(chain.cuts.points().data(), chain.cuts.points().data() + chain.cuts.size());
  meta["covariate_names"] = chain.covariate_names;
  meta["num_clusters"] = chain.num_clusters;
  meta["num_cluster_covariates"] = chain.num_cluster_covariates;
  meta["forest_covariates"] = matrix_json(chain.forest_covariates);
  meta["forest_covariate_dim"] = chain.forest_covariates.cols();
  meta["coefficient_dim"] = dim;
  meta["retained"] = m;
  meta["record_loglik"] = loglik_storage;
  if (chain.standardization) {
    json map = json::array();
    for (const auto& t : *chain.standardization) map.push_back({{"center", t.center}, {"scale", t.scale}});
    meta["standardization"] = map;
  }
  meta["controls"] = {{"iterations", chain.controls.iterations},
                      {"burn_in", chain.controls.burn_in},
                      {"thin", chain.controls.thin},
                      {"seed", chain.controls.seed}};
  meta["acceptance"] = {{"gamma", chain.acceptance.gamma},
                        {"frailties", chain.acceptance.frailties},
                        {"coefficients", chain.acceptance.coefficients},
                        {"theta", chain.acceptance.theta}};
  write_text(dir / "chain.json", meta.dump(2) + "\n");
  written.push_back("chain.json");
  return written;
}

PosteriorChain read_chain(const fs::path& dir) {
  json meta;
  try {
    meta = json::parse(read_text(dir / "chain.json"));
  } catch (const json::exception& e) {
    throw DataError("chain.json in " + dir.string() + " is not valid: " + e.what());
  }
  PosteriorChain chain;
  try {
    chain.frailty = parse_frailty_kind(meta.at("frailty").get<std::string>());
    chain.depth = meta.at("depth").get<int>();
    chain.rho.exponent = meta.at("rho_exponent").get<double>();
    const auto cuts = meta.at("cuts").get<std::vector<double>>();
    chain.cuts = CutPoints(Eigen::Map<const Vector>(cuts.data(), static_cast<Eigen::Index>(cuts.size())));
    chain.covariate_names = meta.at("covariate_names").get<std::vector<std::string>>();
    chain.num_clusters = meta.at("num_clusters").get<int>();
    chain.num_cluster_covariates = meta.at("num_cluster_covariates").get<int>();
    chain.forest_covariates =
        json_matrix(meta.at("forest_covariates"), meta.at("forest_covariate_dim").get<Eigen::Index>());
    if (meta.contains("standardization")) {
      std::vector<ColumnTransform> map;
      for (const auto& t : meta["standardization"])
        map.push_back({t.at("center").get<double>(), t.at("scale").get<double>()});
      chain.standardization = map;
    }
    const auto& c = meta.at("controls");
    chain.controls.iterations = c.at("iterations").get<long>();
    chain.controls.burn_in = c.at("burn_in").get<long>();
    chain.controls.thin = c.at("thin").get<long>();
    chain.controls.seed = c.at("seed").get<std::uint64_t>();
    const auto& a = meta.at("acceptance");
    chain.acceptance = {a.at("gamma").get<double>(), a.at("frailties").get<double>(),
                        a.at("coefficients").get<double>(), a.at("theta").get<double>()};
  } catch (const json::exception& e) {
    throw DataError("chain.json in " + dir.string() + " is incomplete: " + e.what());
  }

  chain.gamma = read_matrix_csv(dir / "gamma.csv");
  chain.frailties = read_matrix_csv(dir / "frailties.csv");
  const Matrix hyper = read_matrix_csv(dir / "hyper.csv");
  chain.theta = hyper.col(0);
  chain.precision = hyper.col(1);
  chain.loglik = read_matrix_csv(dir / "loglik.csv").col(0);

  const int dim = meta.at("coefficient_dim").get<int>();
  const int nodes = TailfreeForest::num_nodes(chain.depth);
  const int m = chain.retained();
  chain.coefficients.resize(m, static_cast<Eigen::Index>(nodes) * dim);
  if (dim > 0) {
    // Columns after "draw": node, path (non-numeric), level, beta...
    std::istringstream in(read_text(dir / "forest.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split(line);
      if (static_cast<int>(f.size()) != 4 + dim) throw DataError("forest.csv: ragged row");
      const int draw = static_cast<int>(parse_number(f[0], dir / "forest.csv")) - 1;
      const int node = static_cast<int>(parse_number(f[1], dir / "forest.csv"));
      if (draw < 0 || draw >= m || node < 0 || node >= nodes) throw DataError("forest.csv: index out of range");
      for (int k = 0; k < dim; ++k)
        chain.coefficients(draw, node * dim + k) = parse_number(f[4 + static_cast<std::size_t>(k)], dir / "forest.csv");
    }
  }

  const std::string storage = meta.value("record_loglik", "none");
  if (storage == "csv") {
    chain.record_loglik = read_matrix_csv(dir / "record_loglik.csv");
  } else if (storage == "binary") {
    const std::string bytes = read_text(dir / "record_loglik.bin");
    if (bytes.size() < 16) throw DataError("record_loglik.bin is truncated");
    std::int64_t dims[2];
    std::memcpy(dims, bytes.data(), 16);
    if (bytes.size() != 16 + sizeof(double) * static_cast<std::size_t>(dims[0] * dims[1]))
      throw DataError("record_loglik.bin has the wrong size");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(dims[0], dims[1]);
    std::memcpy(rm.data(), bytes.data() + 16, sizeof(double) * static_cast<std::size_t>(rm.size()));
    chain.record_loglik = rm;
  }
  return chain;
}

PosteriorChain concatenate_chains(const std::vector<PosteriorChain>& chains) {
  if (chains.empty()) throw std::invalid_argument("no chains to concatenate");
  PosteriorChain out = chains.front();
  Eigen::Index total = 0;
  for (const auto& c : chains) total += c.retained();
  auto stack = [&](auto member) {
    using M = std::decay_t<decltype(chains.front().*member)>;
    const auto& first = chains.front().*member;
    M result(total, first.cols());
    Eigen::Index at = 0;
    for (const auto& c : chains) {
      const auto& part = c.*member;
      if (part.rows() == 0) continue;
      result.middleRows(at, part.rows()) = part;
      at += part.rows();
    }
    if (at != total && first.size() != 0) throw std::invalid_argument("chains differ in stored blocks");
    if (first.size() == 0) result.resize(0, first.cols());
    out.*member = result;
  };
  stack(&PosteriorChain::gamma);
  stack(&PosteriorChain::frailties);
  stack(&PosteriorChain::theta);
  stack(&PosteriorChain::precision);
  stack(&PosteriorChain::coefficients);
  stack(&PosteriorChain::loglik);
  stack(&PosteriorChain::record_loglik);
  BlockAcceptance mean{};
  for (const auto& c : chains) {
    mean.gamma += c.acceptance.gamma / chains.size();
    mean.frailties += c.acceptance.frailties / chains.size();
    mean.coefficients += c.acceptance.coefficients / chains.size();
    mean.theta += c.acceptance.theta / chains.size();
  }
  out.acceptance = mean;
  return out;
}

}  // namespace frailty
