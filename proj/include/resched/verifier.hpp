#pragma once

#include <string>
#include <vector>

#include "resched/core.hpp"
#include "resched/snapshot.hpp"

namespace resched {

struct AuditFailure {
  std::string invariant;  // check name, e.g. "validity", "invariant1_total"
  std::size_t request_index = 0;
  std::string entity;   // offending window, interval, slot or machine
  std::string excerpt;  // the state that breaks the check
};

struct AuditOptions {
  AuditLevel level = AuditLevel::invariants;
  int gamma = 1;
  /// Whether the active set is known to satisfy the scheduler's
  /// underallocation precondition; gates the checks that depend on it.
  bool underallocated = true;
  std::size_t request_index = 0;
};

/// Checks a snapshot. Always: validity, window containment, delegation
/// balance; for reservation schedules also Invariant 1 (total and per-interval
/// split), base reservations, fulfillment priority, allowance consistency and
/// job placement on fulfilled slots. With the precondition: at least x+1
/// fulfilled reservations per window group and the counting bound. full_oracle
/// adds per-machine EDF feasibility and the underallocation checks.
std::vector<AuditFailure> audit(const FleetSnapshot& snapshot, const AuditOptions& options);

std::string to_string(const AuditFailure& failure);

}  // namespace resched
