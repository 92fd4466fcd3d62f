#include "acceval/record_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "acceval/error.hpp"
#include "acceval/plant_controller.hpp"
#include "acceval/rng.hpp"

namespace acceval {

using nlohmann::json;

void write_record_header(std::ostream& os, const std::string& fingerprint, const json& config) {
  json h = {{"type", "campaign"},
            {"format", kRecordFormat},
            {"fingerprint", fingerprint},
            {"generator", std::string(Rng::kName)},
            {"config", config}};
  os << h.dump() << '\n';
}

json record_to_json(const RunRecord& r) {
  json j = {{"type", "run"},
            {"i", r.run_index},
            {"seed", r.seed},
            {"event", r.event_occurred},
            {"k_T", r.termination_step},
            {"log_L", r.log_likelihood_ratio}};
  j["dv"] = r.delta_v ? json(*r.delta_v) : json(nullptr);
  j["dv_clamped"] = r.impact_clamped;
  j["k_star"] = r.sampled_k_star ? json(*r.sampled_k_star) : json(nullptr);
  j["bounds_violated"] = r.bounds_violated;
  return j;
}

RunRecord record_from_json(const json& j) {
  RunRecord r;
  try {
    if (j.at("type") != "run") throw DataError("not a run line");
    r.run_index = j.at("i").get<std::uint64_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.event_occurred = j.at("event").get<bool>();
    r.termination_step = j.at("k_T").get<int>();
    const json& ll = j.at("log_L");
    // JSON has no infinities; a zero proposal density is written as null
    r.log_likelihood_ratio = ll.is_null() ? -std::numeric_limits<double>::infinity() : ll.get<double>();
    if (!j.at("dv").is_null()) r.delta_v = j.at("dv").get<double>();
    r.impact_clamped = j.value("dv_clamped", false);
    if (!j.at("k_star").is_null()) r.sampled_k_star = j.at("k_star").get<int>();
    r.bounds_violated = j.value("bounds_violated", false);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed run record: ") + e.what());
  }
  return r;
}

void write_record(std::ostream& os, const RunRecord& r) { os << record_to_json(r).dump() << '\n'; }

RecordStream read_record_stream(std::istream& is) {
  RecordStream out;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const bool complete = !is.eof();
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      if (!complete) {
        out.truncated_tail = true;
        break;
      }
      throw DataError("record stream line " + std::to_string(line_no) + " is not valid JSON");
    }
    if (!have_header) {
      if (j.value("type", "") != "campaign" || j.value("format", "") != kRecordFormat) {
        throw DataError("record stream has no campaign header");
      }
      out.fingerprint = j.value("fingerprint", "");
      out.config = j.value("config", json::object());
      have_header = true;
      continue;
    }
    out.records.push_back(record_from_json(j));
  }
  if (!have_header && line_no > 0 && !out.truncated_tail) throw DataError("record stream has no campaign header");
  return out;
}

RecordStream read_record_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open record file " + path);
  return read_record_stream(in);
}

json report_to_json(const EstimateReport& r, const json& config, std::optional<double> per_mile) {
  json trace = json::array();
  for (const auto& p : r.trace.points) {
    trace.push_back({{"n", p.n},
                     {"estimate", p.estimate},
                     {"std_error", p.std_error},
                     {"n_events", p.n_events}});
  }
  json j = {{"metric", to_string(r.metric)},
            {"regime", to_string(r.regime)},
            {"fingerprint", r.fingerprint},
            {"estimate", r.estimate},
            {"std_error", r.std_error},
            {"confidence", r.confidence},
            {"ci_low", r.ci_low},
            {"ci_high", r.ci_high},
            {"n_runs", r.n_runs},
            {"n_events", r.n_events}};
  j["converged_at"] = r.converged_at ? json(*r.converged_at) : json(nullptr);
  j["rate_per_mile_derived"] = per_mile ? json(*per_mile) : json(nullptr);
  j["config"] = config;
  j["trace"] = std::move(trace);
  return j;
}

EstimateReport report_from_json(const json& j) {
  EstimateReport r;
  try {
    r.metric = parse_metric(j.at("metric").get<std::string>());
    r.regime = parse_regime(j.at("regime").get<std::string>());
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.estimate = j.at("estimate").get<double>();
    r.std_error = j.at("std_error").get<double>();
    r.confidence = j.at("confidence").get<double>();
    r.ci_low = j.at("ci_low").get<double>();
    r.ci_high = j.at("ci_high").get<double>();
    r.n_runs = j.at("n_runs").get<std::size_t>();
    r.n_events = j.at("n_events").get<std::size_t>();
    if (!j.at("converged_at").is_null()) r.converged_at = j.at("converged_at").get<std::size_t>();
    for (const auto& p : j.value("trace", json::array())) {
      TracePoint t;
      t.n = p.at("n").get<std::size_t>();
      t.estimate = p.at("estimate").get<double>();
      t.std_error = p.at("std_error").get<double>();
      t.n_events = p.at("n_events").get<std::size_t>();
      r.trace.points.push_back(t);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return r;
}

void write_trace(std::ostream& os, const ConvergenceTrace& trace) {
  os << "# n estimate\n";
  for (const auto& p : trace.points) os << p.n << ' ' << format_double(p.estimate) << '\n';
}

namespace {

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, delim)) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    const auto start = cell.find_first_not_of(' ');
    out.push_back(start == std::string::npos ? std::string() : cell.substr(start));
  }
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

double parse_cell(const std::string& s, std::size_t row, const std::string& column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("row " + std::to_string(row) + ", column " + column + ": cannot parse '" + s + "'");
  }
  return v;
}

}  // namespace

TrajectoryLog read_trajectory_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw DataError("trajectory file is empty");
  char delim = ',';
  for (char c : {',', '\t', ';'}) {
    if (header.find(c) != std::string::npos) {
      delim = c;
      break;
    }
  }
  const std::vector<std::string> names = split(header, delim);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < names.size(); ++i) col[names[i]] = i;
  for (const char* required : {"time_s", "ego_speed_mps", "range_m"}) {
    if (!col.count(required)) throw DataError(std::string("trajectory header lacks column ") + required);
  }

  std::map<std::string, std::vector<double>> data;
  std::string line;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line, delim);
    if (cells.size() != names.size()) {
      throw DataError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                      " cells, header has " + std::to_string(names.size()));
    }
    for (const auto& [name, i] : col) data[name].push_back(parse_cell(cells[i], row, name));
  }

  const auto& t = data["time_s"];
  if (t.size() < 2) throw DataError("trajectory needs at least 2 samples");
  TrajectoryLog log;
  log.sample_period = t[1] - t[0];
  for (std::size_t k = 1; k < t.size(); ++k) {
    const double dt = t[k] - t[k - 1];
    if (std::abs(dt - log.sample_period) > 1e-6 * std::max(1.0, std::abs(log.sample_period))) {
      throw DataError("trajectory time stamps are not uniformly spaced at row " + std::to_string(k + 2));
    }
  }
  log.ego_speed = data["ego_speed_mps"];
  log.range = data["range_m"];
  if (col.count("range_rate_mps")) log.range_rate = data["range_rate_mps"];
  if (col.count("lat_deg")) log.latitude = data["lat_deg"];
  if (col.count("lon_deg")) log.longitude = data["lon_deg"];
  auto flags = [&](const char* name, std::vector<std::uint8_t>& out) {
    if (!col.count(name)) return;
    for (double v : data[name]) out.push_back(v != 0.0 ? 1 : 0);
  };
  flags("cut_in_flag", log.cut_in);
  flags("lane_change_flag", log.lane_change);
  log.validate();
  return log;
}

TrajectoryLog read_trajectory_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trajectory file " + path);
  try {
    return read_trajectory_csv(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::vector<ComparisonRow> compare_reports(const std::vector<EstimateReport>& reports,
                                           const std::vector<std::string>& labels) {
  std::vector<ComparisonRow> rows;
  auto runs = [](const EstimateReport& r) {
    return static_cast<double>(r.converged_at ? *r.converged_at : r.n_runs);
  };
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    ComparisonRow row;
    row.label = i < labels.size() ? labels[i] : "report" + std::to_string(i + 1);
    row.metric = r.metric;
    row.regime = r.regime;
    row.estimate = r.estimate;
    row.ci_low = r.ci_low;
    row.ci_high = r.ci_high;
    row.n_runs = r.n_runs;
    row.converged_at = r.converged_at;
    if (runs(reports.front()) >= 1.0 && runs(r) >= 1.0) {
      row.ratio = acceleration_rate(runs(reports.front()), runs(r));
    }
    rows.push_back(row);
  }
  return rows;
}

void write_comparison(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os << std::left << std::setw(24) << "report" << std::setw(10) << "metric" << std::setw(18)
     << "regime" << std::setw(14) << "estimate" << std::setw(30) << "ci" << std::setw(12)
     << "runs" << std::setw(12) << "converged" << "ratio\n";
  for (const auto& r : rows) {
    std::ostringstream ci;
    ci << '[' << std::setprecision(4) << r.ci_low << ", " << r.ci_high << ']';
    std::ostringstream est;
    est << std::setprecision(4) << r.estimate;
    os << std::left << std::setw(24) << r.label << std::setw(10) << to_string(r.metric)
       << std::setw(18) << to_string(r.regime) << std::setw(14) << est.str() << std::setw(30)
       << ci.str() << std::setw(12) << r.n_runs << std::setw(12)
       << (r.converged_at ? std::to_string(*r.converged_at) : std::string("-"));
    if (r.ratio) {
      os << std::setprecision(4) << *r.ratio;
    } else {
      os << '-';
    }
    os << '\n';
  }
}

}  // namespace acceval
