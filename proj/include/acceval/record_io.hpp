#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "acceval/estimator.hpp"
#include "acceval/hv_model.hpp"
#include "acceval/sim_engine.hpp"

namespace acceval {

inline constexpr const char* kRecordFormat = "acceval-records-v1";

// Record stream: one JSON object per line. The first line is the campaign
// header, every following line one run.
struct RecordStream {
  std::string fingerprint;
  nlohmann::json config;
  std::vector<RunRecord> records;
  bool truncated_tail = false;  // last line was incomplete and ignored
};

void write_record_header(std::ostream& os, const std::string& fingerprint,
                         const nlohmann::json& config);
void write_record(std::ostream& os, const RunRecord& r);

nlohmann::json record_to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

/// A partially written final line is dropped, anything else malformed throws DataError.
RecordStream read_record_stream(std::istream& is);
RecordStream read_record_file(const std::string& path);

nlohmann::json report_to_json(const EstimateReport& r, const nlohmann::json& config,
                              std::optional<double> per_mile = std::nullopt);
EstimateReport report_from_json(const nlohmann::json& j);

/// "n estimate" rows under a '#' header.
void write_trace(std::ostream& os, const ConvergenceTrace& trace);

/// Columns by header name: time_s, ego_speed_mps, range_m and optionally
/// range_rate_mps, lat_deg, lon_deg, cut_in_flag, lane_change_flag.
/// Delimiter is detected from the header (',', '\t' or ';').
TrajectoryLog read_trajectory_csv(std::istream& is);
TrajectoryLog read_trajectory_file(const std::string& path);

struct ComparisonRow {
  std::string label;
  Metric metric = Metric::crash;
  Regime regime = Regime::naturalistic;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_runs = 0;
  std::optional<std::size_t> converged_at;
  std::optional<double> ratio;  // reference runs / these runs
};

/// Runs-to-convergence ratios against the first report, taken from the run
/// counts (converged_at when present, n_runs otherwise).
std::vector<ComparisonRow> compare_reports(const std::vector<EstimateReport>& reports,
                                           const std::vector<std::string>& labels);
void write_comparison(std::ostream& os, const std::vector<ComparisonRow>& rows);

}  // namespace acceval
