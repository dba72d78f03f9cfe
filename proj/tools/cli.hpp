#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "resched/core.hpp"
#include "resched/snapshot.hpp"
#include "resched/traces.hpp"
#include "resched/verifier.hpp"

namespace resched::cli {

enum ExitCode : int {
  kOk = 0,
  kAuditFailure = 1,
  kInfeasible = 2,
  kMalformedTrace = 3,
  kUsage = 4,
};

struct ReplayOptions {
  SchedulerKind scheduler = SchedulerKind::reservation;
  Config config;
  bool underallocated = false;  // precondition known to hold for `config`
  std::size_t oracle_limit = 500;
};

struct RunReport {
  CostLedger ledger;
  std::vector<AuditFailure> failures;
  std::vector<std::string> warnings;
  bool infeasible = false;
  std::size_t failed_index = 0;
  std::string error;
  double wall_ms = 0;

  int exit_code() const;
  /// One "summary key=value ..." line.
  std::string summary(SchedulerKind scheduler) const;
};

/// Replays a trace through a fresh scheduler, auditing after every request.
RunReport replay(const Trace& trace, const ReplayOptions& options);

/// Entry point for the `resched` tool: gen | run | verify.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace resched::cli
