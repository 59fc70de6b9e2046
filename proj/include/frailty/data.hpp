#pragma once

#include "frailty/common.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace frailty {

/// One subject: follow-up time, event flag, subject covariates, cluster.
struct SurvivalRecord {
  double time = 0.0;
  int event = 0;
  Vector subject_covariates;
  int cluster = 0;  // index into Dataset::clusters
};

struct ClusterInfo {
  std::string cluster_id;
  Vector cluster_covariates;
};

/// Affine map applied to one covariate column: z = (raw - center) / scale.
struct ColumnTransform {
  double center = 0.0;
  double scale = 1.0;
};

/// Clustered right-censored survival data.
///
/// The full design row of a record is w = (subject covariates, cluster
/// covariates) of dimension p; the trailing q entries are cluster-level.
struct Dataset {
  std::vector<SurvivalRecord> records;
  std::vector<ClusterInfo> clusters;
  std::vector<std::string> covariate_names;  // length p
  std::vector<bool> categorical;             // length p
  /// Present when covariates were standardized at load time.
  std::optional<std::vector<ColumnTransform>> standardization;

  int num_records() const { return static_cast<int>(records.size()); }
  int num_clusters() const { return static_cast<int>(clusters.size()); }
  int num_subject_covariates() const;
  int num_cluster_covariates() const;
  int num_covariates() const { return num_subject_covariates() + num_cluster_covariates(); }
  double max_time() const;

  /// Design row w_ij for one record.
  Vector design_row(int record) const;
  /// n_obs x p design matrix, rows in record order.
  Matrix design_matrix() const;
  /// Cluster covariates stacked as an n x q matrix.
  Matrix cluster_matrix() const;

  /// Throws DataError if any invariant is violated.
  void validate() const;

  /// Converts coefficients fitted on standardized covariates to raw scale.
  /// Returns {raw coefficients, additive shift of every log hazard height}.
  std::pair<Vector, double> coefficients_to_raw(const Vector& xi) const;
};

/// Column roles for delimited input. Cluster-file id column defaults to
/// the subject-file cluster column name.
struct Schema {
  std::string time = "time";
  std::string event = "event";
  std::string cluster = "cluster";
  std::string cluster_file_id;
  std::vector<std::string> subject_covariates;
  std::vector<std::string> cluster_covariates;
  std::vector<std::string> categorical;
  char delimiter = ',';
  bool standardize = false;
};

/// Reads subject and cluster files and joins them on the cluster id.
/// Pass an empty cluster_file when there are no cluster-level covariates;
/// clusters are then created from the distinct ids in the subject file.
Dataset load_dataset(const std::filesystem::path& subject_file,
                     const std::filesystem::path& cluster_file, const Schema& schema);

/// Same as load_dataset but from in-memory text, mainly for tests.
Dataset parse_dataset(const std::string& subject_text, const std::string& cluster_text,
                      const Schema& schema);

/// Standardizes every non-categorical covariate in place and records the map.
void standardize_covariates(Dataset& dataset);

struct GammaStatistic {
  double gamma = 0.0;
  double ase = 0.0;  // asymptotic standard error
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double concordant = 0.0;
  double discordant = 0.0;
};

/// Goodman-Kruskal gamma of two ordinal variables. Pairs tied on either
/// variable count towards neither C nor D.
GammaStatistic goodman_kruskal_gamma(const std::vector<double>& row_var,
                                     const std::vector<double>& col_var);

/// Gamma from an R x C contingency table with ordered rows and columns.
GammaStatistic goodman_kruskal_gamma(const Matrix& counts);

struct ContinuousSummary {
  std::string name;
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};

struct LevelCount {
  std::string level;
  long count = 0;
  double proportion = 0.0;
};

struct CategoricalSummary {
  std::string name;
  std::vector<LevelCount> levels;
};

struct DatasetSummary {
  long num_records = 0;
  long num_clusters = 0;
  long events = 0;
  long censored = 0;
  std::vector<ContinuousSummary> continuous;
  std::vector<CategoricalSummary> categorical;
};

DatasetSummary summarize(const Dataset& dataset);

std::string format_summary(const DatasetSummary& summary);

}  // namespace frailty
