#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "resched/scheduler.hpp"

namespace resched::cli {

int RunReport::exit_code() const {
  if (infeasible) return kInfeasible;
  if (!failures.empty()) return kAuditFailure;
  return kOk;
}

std::string RunReport::summary(SchedulerKind scheduler) const {
  std::size_t max_realloc = 0;
  std::size_t max_migr = 0;
  std::size_t max_migr_plain = 0;
  for (const auto& r : ledger.records()) {
    max_realloc = std::max(max_realloc, r.reallocations);
    max_migr = std::max(max_migr, r.total_migrations());
    if (!r.rebuilt) max_migr_plain = std::max(max_migr_plain, r.migrations);
  }
  const double mean =
      ledger.empty() ? 0.0 : static_cast<double>(ledger.total_reallocations()) / static_cast<double>(ledger.size());
  char mean_text[32];
  std::snprintf(mean_text, sizeof mean_text, "%.4f", mean);

  std::ostringstream line;
  line << "summary scheduler=" << to_string(scheduler) << " requests=" << ledger.size()
       << " total_reallocations=" << ledger.total_reallocations() << " max_reallocations=" << max_realloc
       << " mean_reallocations=" << mean_text << " total_migrations=" << ledger.total_migrations()
       << " max_migrations=" << max_migr << " max_migrations_nonrebuild=" << max_migr_plain
       << " rebuilds=" << ledger.rebuilds() << " rebuild_reallocations=" << ledger.total_rebuild_reallocations()
       << " audit_failures=" << failures.size();
  if (infeasible) {
    line << " status=infeasible failed_index=" << failed_index;
  } else if (!failures.empty()) {
    line << " status=audit_failure";
  } else {
    line << " status=ok";
  }
  return line.str();
}

RunReport replay(const Trace& trace, const ReplayOptions& options) {
  RunReport report;
  const auto started = std::chrono::steady_clock::now();
  auto scheduler = open(options.scheduler, options.config);
  bool warned = false;
  for (std::size_t i = 0; i < trace.requests.size(); ++i) {
    try {
      scheduler->apply(trace.requests[i]);
    } catch (const SchedulerError& e) {
      report.infeasible = true;
      report.failed_index = i;
      report.error = e.what();
      break;
    }
    AuditLevel level = options.config.audit;
    if (level == AuditLevel::full_oracle && scheduler->active() > options.oracle_limit) {
      level = AuditLevel::invariants;
      if (!warned) {
        report.warnings.push_back("full-oracle audit degraded to invariants above " +
                                  std::to_string(options.oracle_limit) + " active jobs (request " +
                                  std::to_string(i) + ")");
        warned = true;
      }
    }
    if (level == AuditLevel::off) continue;
    auto failures = audit(scheduler->snapshot(), {level, options.config.gamma, options.underallocated, i});
    report.failures.insert(report.failures.end(), failures.begin(), failures.end());
  }
  report.ledger = scheduler->ledger();
  report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return report;
}

namespace {

std::string row_line(const RequestRecord& r) {
  std::ostringstream line;
  line << "row index=" << r.index << " op=" << (r.kind == RequestKind::insert ? "insert" : "delete")
       << " id=" << r.job_id << " n=" << r.active << " delta=" << r.max_span << " levels=" << r.levels
       << " reallocations=" << r.reallocations << " migrations=" << r.migrations << " rebuild=" << (r.rebuilt ? 1 : 0)
       << " rebuild_reallocations=" << r.rebuild_reallocations << " rebuild_migrations=" << r.rebuild_migrations;
  return line.str();
}

int meta_int(const Trace& trace, const char* key, int fallback) {
  auto v = trace.meta(key);
  if (!v) return fallback;
  try {
    return std::stoi(*v);
  } catch (const std::exception&) {
    return fallback;
  }
}

AuditLevel parse_audit(const std::string& name) {
  if (name == "off") return AuditLevel::off;
  if (name == "invariants") return AuditLevel::invariants;
  if (name == "full-oracle") return AuditLevel::full_oracle;
  throw std::invalid_argument("unknown audit level '" + name + "'");
}

struct TraceOutput {
  std::string out;
  std::string err;
  int code = kOk;
};

struct RunArgs {
  std::vector<std::string> traces;
  std::string scheduler = "reservation";
  int machines = 0;
  int gamma = 0;
  std::string audit = "off";
  bool csv = false;
  bool rows = false;
  unsigned jobs = 1;
};

TraceOutput run_one(const std::string& path, const RunArgs& args, bool label) {
  TraceOutput result;
  Trace trace;
  try {
    trace = read_trace_file(path);
  } catch (const TraceFormatError& e) {
    result.err = path + ": malformed trace: " + e.what() + "\n";
    result.code = kMalformedTrace;
    return result;
  } catch (const std::exception& e) {
    result.err = path + ": " + e.what() + "\n";
    result.code = kMalformedTrace;
    return result;
  }
  if (auto bad = first_unreplayable(trace)) {
    result.err = path + ": malformed trace: request " + std::to_string(*bad) + " is not replayable\n";
    result.code = kMalformedTrace;
    return result;
  }

  ReplayOptions options;
  options.scheduler = parse_scheduler_kind(args.scheduler);
  options.config.machines = args.machines > 0 ? args.machines : meta_int(trace, "m", 1);
  options.config.gamma = args.gamma > 0 ? args.gamma : meta_int(trace, "gamma", 1);
  options.config.audit = parse_audit(args.audit);
  options.underallocated = trace.declared_underallocated() &&
                           options.config.gamma <= meta_int(trace, "gamma", 0) &&
                           options.config.machines >= meta_int(trace, "m", 1);

  const RunReport report = replay(trace, options);
  std::ostringstream out;
  std::ostringstream err;
  std::ostream& records = args.csv ? err : out;
  const std::string prefix = label ? "trace=" + path + " " : "";
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";
  if (report.infeasible) {
    err << "error: request " << report.failed_index << ": " << report.error << "\n";
  }
  for (const auto& f : report.failures) records << "audit " << to_string(f) << "\n";
  if (args.csv) {
    out << report.ledger.to_csv();
  } else if (args.rows) {
    for (const auto& r : report.ledger.records()) out << row_line(r) << "\n";
  }
  records << prefix << report.summary(options.scheduler) << "\n";
  char wall[64];
  std::snprintf(wall, sizeof wall, "wall_time_ms=%.1f", report.wall_ms);
  err << prefix << wall << "\n";
  result.out = out.str();
  result.err = err.str();
  result.code = report.exit_code();
  return result;
}

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
  parse_scheduler_kind(args.scheduler);
  parse_audit(args.audit);
  std::vector<TraceOutput> results(args.traces.size());
  const bool label = args.traces.size() > 1;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < args.traces.size(); i = next++) {
      try {
        results[i] = run_one(args.traces[i], args, label);
      } catch (const std::exception& e) {
        results[i].err = args.traces[i] + ": " + e.what() + "\n";
        results[i].code = kUsage;
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(args.jobs, static_cast<unsigned>(args.traces.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int code = kOk;
  for (const auto& r : results) {
    out << r.out;
    err << r.err;
    code = std::max(code, r.code);
  }
  return code;
}

struct GenArgs {
  std::string kind;
  std::string out_path;
  std::size_t n_max = 100;
  int machines = 1;
  int gamma = 192;
  std::uint64_t seed = 1;
  std::size_t s = 0;
  int max_span_log = 12;
  std::size_t length = 0;
  bool aligned = false;
  Slot horizon = 0;
  std::string scheduler = "edf";
};

int cmd_gen(const GenArgs& args, std::ostream& out, std::ostream& err) {
  Trace trace;
  try {
    if (args.kind == "random" || args.kind == "churn") {
      RandomTraceParams p;
      p.n_max = args.n_max;
      p.machines = args.machines;
      p.gamma = args.gamma;
      p.seed = args.seed;
      p.max_span_log = args.max_span_log;
      p.length = args.length;
      p.aligned = args.aligned;
      p.horizon = args.horizon;
      p.churn = args.kind == "churn";
      trace = gen_random_underallocated(p);
    } else if (args.kind == "realloc-adversary") {
      trace = gen_realloc_adversary(args.s);
    } else if (args.kind == "migration-adversary") {
      auto target = open(parse_scheduler_kind(args.scheduler), Config{args.machines, 1, AuditLevel::off});
      trace = gen_migration_adversary(args.machines, args.s, *target);
    } else {
      err << "error: unknown generator '" << args.kind << "'\n";
      return kUsage;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  if (args.out_path.empty() || args.out_path == "-") {
    out << format_trace(trace);
  } else {
    write_trace_file(args.out_path, trace);
    err << "wrote " << trace.requests.size() << " requests to " << args.out_path << "\n";
  }
  return kOk;
}

int cmd_verify(const std::string& path, int machines, int gamma, std::ostream& out, std::ostream& err) {
  Trace trace;
  try {
    trace = read_trace_file(path);
  } catch (const TraceFormatError& e) {
    err << path << ": malformed trace: " << e.what() << "\n";
    return kMalformedTrace;
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kMalformedTrace;
  }
  if (auto bad = first_unreplayable(trace)) {
    err << path << ": malformed trace: request " << *bad << " is not replayable\n";
    return kMalformedTrace;
  }
  const int m = machines > 0 ? machines : meta_int(trace, "m", 1);
  const int g = gamma > 0 ? gamma : meta_int(trace, "gamma", 1);
  if (auto first = first_violation(trace, m, g)) {
    out << "violation request=" << *first << " machines=" << m << " gamma=" << g << "\n";
    return kAuditFailure;
  }
  out << "underallocated\n";
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reallocating scheduler for unit jobs with windows"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a trace");
  gen_cmd->add_option("generator", gen.kind, "random | churn | realloc-adversary | migration-adversary")->required();
  gen_cmd->add_option("--out,-o", gen.out_path, "Output file (default stdout)");
  gen_cmd->add_option("--n-max", gen.n_max, "Largest active job count (random, churn)");
  gen_cmd->add_option("--machines,-m", gen.machines, "Machine count");
  gen_cmd->add_option("--gamma", gen.gamma, "Underallocation factor (random, churn)");
  gen_cmd->add_option("--seed", gen.seed, "RNG seed");
  gen_cmd->add_option("--s", gen.s, "Trace length parameter (adversaries)");
  gen_cmd->add_option("--max-span-log", gen.max_span_log, "Spans are at most 2^k (k <= 16)");
  gen_cmd->add_option("--length", gen.length, "Request count (random, churn)");
  gen_cmd->add_flag("--aligned", gen.aligned, "Only aligned power-of-two windows");
  gen_cmd->add_option("--horizon", gen.horizon, "Window starts lie below this slot (default: derived)");
  gen_cmd->add_option("--scheduler", gen.scheduler, "Scheduler the migration adversary plays against");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Replay traces through a scheduler");
  run_cmd->add_option("traces", run.traces, "Trace files")->required();
  run_cmd->add_option("--scheduler", run.scheduler, "reservation | naive | edf");
  run_cmd->add_option("--machines,-m", run.machines, "Machine count (default: from trace)");
  run_cmd->add_option("--gamma", run.gamma, "Underallocation factor (default: from trace)");
  run_cmd->add_option("--audit", run.audit, "off | invariants | full-oracle");
  run_cmd->add_flag("--csv", run.csv, "Write the ledger as CSV to stdout");
  run_cmd->add_flag("--rows", run.rows, "Print one record per request");
  run_cmd->add_option("--jobs,-j", run.jobs, "Replay this many traces in parallel");

  std::string verify_path;
  int verify_machines = 0;
  int verify_gamma = 0;
  auto* verify_cmd = app.add_subcommand("verify", "Check that every prefix of a trace is underallocated");
  verify_cmd->add_option("trace", verify_path, "Trace file")->required();
  verify_cmd->add_option("--machines,-m", verify_machines, "Machine count (default: from trace)");
  verify_cmd->add_option("--gamma", verify_gamma, "Underallocation factor (default: from trace)");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen, out, err);
    if (*run_cmd) return cmd_run(run, out, err);
    if (*verify_cmd) return cmd_verify(verify_path, verify_machines, verify_gamma, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace resched::cli
