#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "acceval/campaign.hpp"
#include "acceval/config.hpp"
#include "acceval/error.hpp"
#include "acceval/hv_model.hpp"
#include "acceval/record_io.hpp"
#include "acceval/shift_planner.hpp"

using namespace acceval;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kUnreachable = 2, kData = 3 };

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? config_from_json(json::object()) : load_config(path);
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::trunc) {
  std::ofstream out(path, std::ios::out | mode);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

// Campaign identity for resume checks: output paths and the run cap may change.
json campaign_identity(const ExperimentConfig& cfg) {
  json j = config_to_json(cfg);
  j.erase("paths");
  j["campaign"].erase("max_runs");
  return j;
}

ShiftTable load_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open shift table " + path);
  return read_shift_table(in);
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string config;
  bool use_defaults = false;
  bool no_criteria = false;
  double min_duration = 50.0;
  std::size_t window = kDefaultSmoothingWindow;
};

int cmd_fit(const FitArgs& a) {
  const ExperimentConfig cfg = config_or_default(a.config);
  json doc;
  if (a.use_defaults) {
    doc = {{"hv", hv_params_to_json(HvModelParams{})}, {"source", "defaults"}};
    std::cout << "driver model: default parameters, no fitting\n";
  } else {
    if (a.inputs.empty()) throw std::invalid_argument("fit needs trajectory files or --use-paper-defaults");
    std::vector<TrajectoryLog> logs;
    int bad = 0;
    for (const auto& path : a.inputs) {
      try {
        logs.push_back(read_trajectory_file(path));
      } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        ++bad;
      }
    }
    if (bad > 0) throw DataError(std::to_string(bad) + " trajectory file(s) could not be read");

    EventCriteria criteria = a.no_criteria ? EventCriteria::none() : EventCriteria{};
    if (!a.no_criteria) criteria.min_duration = a.min_duration;
    const auto events = filter_events(logs, criteria);
    std::vector<LeadKinematics> kin;
    for (const auto& e : events) kin.push_back(estimate_lead_kinematics(e, a.window));
    const HvFit fit = fit_hv_params(kin, cfg.hv);
    doc = {{"hv", hv_params_to_json(fit.params)},
           {"fit",
            {{"events", events.size()},
             {"rows", fit.rows},
             {"residual_std", fit.residual_std},
             {"std_errors", fit.std_errors},
             {"iterations", fit.iterations},
             {"converged", fit.converged}}},
           {"source", a.inputs}};
    std::cout << "events " << events.size() << ", rows " << fit.rows << ", residual std "
              << format_double(fit.residual_std) << (fit.converged ? "" : " (not converged)") << '\n';
    std::cout << "h = [" << format_double(fit.params.h0) << ", " << format_double(fit.params.h1)
              << ", " << format_double(fit.params.h2) << "]\n";
  }
  if (a.out.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    open_out(a.out) << doc.dump(2) << '\n';
    std::cout << "wrote " << a.out << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------- plan

struct PlanArgs {
  std::string config;
  std::string out;
};

int cmd_plan(const PlanArgs& a) {
  const ExperimentConfig cfg = config_or_default(a.config);
  const std::string out = a.out.empty() ? cfg.paths.shift_table : a.out;
  if (out.empty()) throw std::invalid_argument("plan needs --out or paths.shift_table");
  const ClosedLoopModel m = build_model(cfg);
  const std::string fp = model_fingerprint(m);
  const std::string echo = config_to_json(cfg).dump();

  if (std::filesystem::exists(out)) {
    try {
      const ShiftTable old = load_table(out);
      if (old.fingerprint == fp && old.event_range == m.event_range && old.horizon == m.horizon &&
          old.config == echo) {
        std::cout << "fingerprint " << fp << " unchanged, k_min " << old.k_min << ": " << out
                  << " is up to date\n";
        return kOk;
      }
    } catch (const DataError&) {
      // unreadable old table is simply replaced
    }
  }

  ShiftTable t = compute_shift_table(m, cfg.solver);
  t.config = echo;
  const ShiftVerification v = verify_shift_table(t, m);
  if (!v.ok) {
    throw DataError("planned shifts failed verification (terminal excess " +
                    format_double(v.worst_terminal_excess) + ", bound excess " +
                    format_double(v.worst_bound_excess) + ")");
  }
  const std::string tmp = out + ".tmp";
  {
    std::ofstream os = open_out(tmp);
    write_shift_table(os, t);
    if (!os) throw DataError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, out);
  std::cout << "fingerprint " << fp << ", k_min " << t.k_min << ", " << t.table_size()
            << " entries -> " << out << '\n';
  if (!t.monotone_feasibility) std::cout << "warning: feasibility is not monotone in k*\n";
  return kOk;
}

// ---------------------------------------------------------------- run

struct RunArgs {
  std::string config;
  std::string table;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_runs;
  std::size_t threads = 0;
  bool resume = false;
};

int cmd_run(const RunArgs& a) {
  ExperimentConfig cfg = config_or_default(a.config);
  if (a.seed) cfg.campaign.base_seed = *a.seed;
  if (a.max_runs) {
    cfg.campaign.max_runs = *a.max_runs;
    cfg.campaign.batch_size = std::min(cfg.campaign.batch_size, *a.max_runs);
  }
  cfg.validate();
  const std::string out = a.out.empty() ? cfg.paths.records : a.out;
  if (out.empty()) throw std::invalid_argument("run needs --out or paths.records");
  const ClosedLoopModel m = build_model(cfg);
  const std::string fp = model_fingerprint(m);

  std::optional<ShiftTable> table;
  if (cfg.campaign.regime == Regime::accelerated) {
    const std::string path = a.table.empty() ? cfg.paths.shift_table : a.table;
    if (path.empty()) throw std::invalid_argument("accelerated regime needs --table");
    table = load_table(path);
    check_table_matches(*table, m, cfg.campaign.event);
  } else if (!a.table.empty()) {
    throw std::invalid_argument("--table only applies to the accelerated regime");
  }

  std::vector<RunRecord> prior;
  if (a.resume && std::filesystem::exists(out)) {
    RecordStream s = read_record_file(out);
    if (!s.fingerprint.empty()) {
      if (s.fingerprint != fp) throw FingerprintMismatch("existing stream has fingerprint " + s.fingerprint);
      if (campaign_identity(config_from_json(s.config)) != campaign_identity(cfg)) {
        throw DataError("existing stream was written by a different campaign config");
      }
    }
    prior = std::move(s.records);
    if (s.truncated_tail) std::cerr << "note: dropped an incomplete final record\n";
  }

  // Rewriting header and prior records leaves a clean file after a torn write.
  std::ofstream os = open_out(out);
  write_record_header(os, fp, config_to_json(cfg));
  for (const auto& r : prior) write_record(os, r);
  os.flush();

  const std::size_t threads = a.threads > 0 ? a.threads : std::max(1u, std::thread::hardware_concurrency());
  std::size_t written = 0;
  const CampaignResult res = run_campaign(
      m, table ? &*table : nullptr, cfg.campaign, cfg.estimate_options(), threads,
      [&](const RunRecord& r) {
        write_record(os, r);
        if (++written % cfg.campaign.batch_size == 0) os.flush();
        if (!os) throw DataError("write failed for " + out);
      },
      prior);
  os.flush();
  if (!os) throw DataError("write failed for " + out);

  const auto& r = res.report;
  std::cout << to_string(cfg.campaign.regime) << ' ' << to_string(r.metric) << ": " << r.n_runs
            << " runs (" << res.resumed_from << " resumed), " << r.n_events << " events, estimate "
            << format_double(r.estimate) << ", " << (r.converged_at ? "converged at " + std::to_string(*r.converged_at) : std::string("not converged"))
            << '\n';
  return kOk;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
  std::vector<std::string> inputs;
  std::string config;
  std::string out;
  std::string trace;
  std::string metric;
};

int cmd_estimate(const EstimateArgs& a) {
  ExperimentConfig cfg = config_or_default(a.config);
  if (!a.metric.empty()) cfg.metric = parse_metric(a.metric);
  const ClosedLoopModel m = build_model(cfg);
  const std::string fp = model_fingerprint(m);

  std::vector<RunRecord> records;
  std::optional<Regime> regime;
  for (const auto& path : a.inputs) {
    RecordStream s = read_record_file(path);
    if (s.fingerprint.empty() && s.records.empty()) continue;
    if (s.fingerprint != fp) {
      throw FingerprintMismatch(path + ": fingerprint " + s.fingerprint + " does not match config " + fp);
    }
    const Regime r = parse_regime(s.config.at("campaign").at("regime").get<std::string>());
    if (regime && *regime != r) throw DataError("record files mix regimes");
    regime = r;
    records.insert(records.end(), s.records.begin(), s.records.end());
  }

  const EstimateReport rep = is_estimate(records, cfg.estimate_options(),
                                         regime.value_or(cfg.campaign.regime), fp);
  const double per_mile = per_mile_rate(rep.estimate, cfg.scenario.v0, cfg.scenario.horizon, cfg.scenario.ts);
  const json doc = report_to_json(rep, config_to_json(cfg), per_mile);

  const std::string out = a.out.empty() ? cfg.paths.report : a.out;
  if (out.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    open_out(out) << doc.dump(2) << '\n';
  }
  const std::string trace = a.trace.empty() ? cfg.paths.trace : a.trace;
  if (!trace.empty()) {
    std::ofstream ts = open_out(trace);
    write_trace(ts, rep.trace);
  }
  std::cerr << to_string(rep.metric) << " estimate " << format_double(rep.estimate) << " +- "
            << format_double(rep.std_error) << " over " << rep.n_runs << " runs\n";
  return kOk;
}

// ---------------------------------------------------------------- compare

struct CompareArgs {
  std::vector<std::string> inputs;
  std::string out;
};

int cmd_compare(const CompareArgs& a) {
  if (a.inputs.size() < 2) throw std::invalid_argument("compare needs at least two reports");
  std::vector<EstimateReport> reports;
  std::vector<std::string> labels;
  for (const auto& path : a.inputs) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open report " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError(path + " is not valid JSON");
    reports.push_back(report_from_json(j));
    labels.push_back(std::filesystem::path(path).stem().string());
  }
  const auto rows = compare_reports(reports, labels);
  write_comparison(std::cout, rows);
  if (!a.out.empty()) {
    std::ofstream os = open_out(a.out);
    write_comparison(os, rows);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Accelerated evaluation of a car-following controller"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "fit the lead-driver model from trajectory CSV files");
  f->add_option("inputs", fit.inputs, "trajectory files");
  f->add_option("--out", fit.out, "parameter file to write");
  f->add_option("--config", fit.config, "config supplying the bound values");
  f->add_flag("--use-paper-defaults", fit.use_defaults, "skip fitting and emit the default parameters");
  f->add_flag("--no-criteria", fit.no_criteria, "use every sample of every log");
  f->add_option("--min-duration", fit.min_duration, "minimum event duration in seconds");
  f->add_option("--window", fit.window, "acceleration smoothing window")->check(CLI::PositiveNumber);

  PlanArgs plan;
  auto* p = app.add_subcommand("plan", "compute the mean-shift table");
  p->add_option("--config", plan.config);
  p->add_option("--out", plan.out);

  RunArgs run;
  auto* r = app.add_subcommand("run", "run a simulation campaign");
  r->add_option("--config", run.config);
  r->add_option("--table", run.table, "shift table (accelerated regime)");
  r->add_option("--out", run.out, "record stream to write");
  r->add_option("--seed", run.seed, "base seed override");
  r->add_option("--max-runs", run.max_runs, "run cap override")->check(CLI::PositiveNumber);
  r->add_option("--threads", run.threads, "worker threads (0 = all cores)");
  r->add_flag("--resume", run.resume, "continue an existing stream");

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "estimate from record streams");
  e->add_option("inputs", est.inputs, "record files")->required();
  e->add_option("--config", est.config);
  e->add_option("--out", est.out, "report JSON");
  e->add_option("--trace", est.trace, "two-column convergence trace");
  e->add_option("--metric", est.metric, "crash, injury or conflict");

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "tabulate reports against the first one");
  c->add_option("inputs", cmp.inputs, "report files")->required();
  c->add_option("--out", cmp.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (f->parsed()) return cmd_fit(fit);
    if (p->parsed()) return cmd_plan(plan);
    if (r->parsed()) return cmd_run(run);
    if (e->parsed()) return cmd_estimate(est);
    if (c->parsed()) return cmd_compare(cmp);
  } catch (const UnreachableEvent& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kUnreachable;
  } catch (const DataError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kData;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kUsage;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kData;
  }
  return kUsage;
}
