#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "resched/alignment.hpp"
#include "resched/baselines.hpp"
#include "resched/machine_schedule.hpp"
#include "resched/scheduler.hpp"

namespace resched {

/// Multi-machine front end. Aligns each window, optionally trims it against the
/// global capacity estimate, and delegates jobs of each effective window
/// round-robin so per-window counts never differ by more than one across
/// machines. A delete that unbalances a window migrates exactly one job back.
template <class Machine>
class Fleet final : public Scheduler {
 public:
  /// `trim` enables global capacity tracking and rebuilds.
  Fleet(const Config& config, SchedulerKind kind, bool trim);

  Outcome apply(const Request& request) override;
  FleetSnapshot snapshot() const override;
  const CostLedger& ledger() const override { return ledger_; }
  std::optional<Assignment> assignment_of(const std::string& id) const override;
  std::size_t active() const override { return entries_.size(); }
  SchedulerKind kind() const override { return kind_; }
  const Config& config() const override { return config_; }

  const Machine& machine(int i) const { return machines_.at(static_cast<std::size_t>(i)); }
  std::size_t capacity() const { return capacity_.target(); }

 private:
  struct Entry {
    std::string id;
    Window raw;
    AlignedWindow aligned;
    AlignedWindow effective;
    int machine = 0;
  };

  struct Delegation {
    std::vector<std::vector<JobHandle>> per_machine;  // delegation order
    std::size_t count = 0;
  };

  class ChangeSet;

  Outcome apply_request(const Request& request);
  void insert_request(const Request& request, ChangeSet& changes);
  void erase_request(const Request& request, ChangeSet& changes);
  void rebuild_all(ChangeSet& changes);

  Config config_;
  SchedulerKind kind_;
  bool trim_;
  std::vector<Machine> machines_;
  Capacity capacity_;
  std::unordered_map<std::string, JobHandle> ids_;
  std::unordered_map<JobHandle, Entry> entries_;
  JobHandle next_handle_ = 0;
  std::map<AlignedWindow, Delegation> delegation_;
  std::multiset<Slot> raw_spans_;
  std::array<std::size_t, kMaxLevel + 1> level_counts_{};
  CostLedger ledger_;
};

using ReservationFleet = Fleet<MachineSchedule>;
using NaiveFleet = Fleet<NaiveMachine>;

extern template class Fleet<MachineSchedule>;
extern template class Fleet<NaiveMachine>;

}  // namespace resched
