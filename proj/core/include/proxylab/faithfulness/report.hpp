#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "proxylab/faithfulness/analysis.hpp"

namespace proxylab::faithfulness {

/// "%.10g", or "NA" for an undefined value.
std::string format_value(std::optional<double> v);

/// Long format: split,simplifier,strength,metric,value,n. One row per
/// (record, metric) with metrics mean_jsd, mean_jsd_eval, same_prediction,
/// same_prediction_full, accuracy_original, accuracy_simplified.
void write_records_long(std::ostream& out, const std::vector<FaithfulnessRecord>& records);

/// Wide format, one row per record with raw counts; read_records_wide()
/// round-trips it exactly.
void write_records_wide(std::ostream& out, const std::vector<FaithfulnessRecord>& records);
std::vector<FaithfulnessRecord> read_records_wide(const std::filesystem::path& path);

/// query_depth,max_depth,hits,total,accuracy
void write_grid_csv(std::ostream& out, const DepthErrorGrid& grid);
/// kind,key,count  (kind = depth|offset; depth keys are "target:attended")
void write_profile_csv(std::ostream& out, const AttentionErrorProfile& profile);
/// sequence,position,role,token,token_depth,prefix_depth,bracket_type,norm,c<i>...
void write_projection_csv(std::ostream& out, const ProjectionTable& table);
/// role,cluster,depth,count,nearest_key
void write_cluster_csv(std::ostream& out, const ClusterProfile& profile);

namespace svg {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

/// Metric vs. strength, one polyline per series.
std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series);

/// Row-major cells (rows × cols); undefined cells render blank.
std::string heatmap(const std::string& title, const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels,
                    const std::vector<std::optional<double>>& cells, double lo = 0.0,
                    double hi = 1.0);

std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<double>& values);

/// One panel per query cluster: its depth histogram beside that of the
/// nearest key cluster.
std::string cluster_profile(const std::string& title, const ClusterProfile& profile);

}  // namespace svg

/// Charts derived from record sets.
std::string sweep_chart(const std::vector<FaithfulnessRecord>& records, const std::string& metric);
std::string grid_chart(const std::string& title, const DepthErrorGrid& grid);

/// Value of a named metric of a record (names as in the long CSV).
std::optional<double> metric_value(const FaithfulnessRecord& r, const std::string& metric);

}  // namespace proxylab::faithfulness
