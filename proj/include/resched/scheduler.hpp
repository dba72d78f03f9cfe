#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "resched/core.hpp"
#include "resched/snapshot.hpp"

namespace resched {

/// Result of applying one request: every job whose assignment changed (the
/// request proper and any capacity rebuild merged), plus the ledger row.
struct Outcome {
  std::vector<AssignmentChange> changes;
  RequestRecord record;
};

/// Common facade of the reallocating scheduler and the baselines.
class Scheduler {
 public:
  virtual ~Scheduler() = default;

  virtual Outcome apply(const Request& request) = 0;
  virtual FleetSnapshot snapshot() const = 0;
  virtual const CostLedger& ledger() const = 0;
  virtual std::optional<Assignment> assignment_of(const std::string& id) const = 0;
  virtual std::size_t active() const = 0;
  virtual SchedulerKind kind() const = 0;
  virtual const Config& config() const = 0;
};

std::unique_ptr<Scheduler> open(SchedulerKind kind, const Config& config);

}  // namespace resched
