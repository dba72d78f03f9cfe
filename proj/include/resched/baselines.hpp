#pragma once

#include <map>
#include <span>
#include <unordered_map>
#include <vector>

#include "resched/alignment.hpp"
#include "resched/machine_schedule.hpp"
#include "resched/scheduler.hpp"

namespace resched {

/// Naive pecking-order scheduler for aligned windows: take an empty slot in the
/// window, otherwise displace the shortest job there with at least twice the
/// span and reinsert it recursively. Same machine interface as MachineSchedule.
class NaiveMachine {
 public:
  explicit NaiveMachine(int gamma = 1);

  std::vector<SlotChange> insert(JobHandle job, AlignedWindow window);
  std::vector<SlotChange> erase(JobHandle job);
  std::vector<SlotChange> rebuild(Slot trim_span, std::span<const std::pair<JobHandle, AlignedWindow>> jobs);

  /// Jobs displaced by the most recent insert.
  std::size_t last_cascade() const { return last_cascade_; }

  bool contains(JobHandle job) const { return jobs_.contains(job); }
  std::optional<Slot> slot_of(JobHandle job) const;
  AlignedWindow window_of(JobHandle job) const { return jobs_.at(job).window; }
  std::size_t size() const { return jobs_.size(); }
  MachineSnapshot snapshot() const;

 private:
  struct Entry {
    AlignedWindow base;
    AlignedWindow window;
    Slot slot = 0;
  };

  std::size_t insert_job(JobHandle job, AlignedWindow base);

  Slot trim_span_ = kMaxSlot;
  std::map<Slot, JobHandle> occupant_;
  std::unordered_map<JobHandle, Entry> jobs_;
  std::size_t last_cascade_ = 0;
};

/// Recomputes the full EDF schedule on the raw windows after every request.
/// Has no cost guarantee; used to observe the lower-bound constructions.
class EdfRepackScheduler final : public Scheduler {
 public:
  explicit EdfRepackScheduler(const Config& config);

  Outcome apply(const Request& request) override;
  FleetSnapshot snapshot() const override;
  const CostLedger& ledger() const override { return ledger_; }
  std::optional<Assignment> assignment_of(const std::string& id) const override;
  std::size_t active() const override { return jobs_.size(); }
  SchedulerKind kind() const override { return SchedulerKind::edf; }
  const Config& config() const override { return config_; }

 private:
  Config config_;
  std::map<std::string, Window> jobs_;
  std::map<std::string, Assignment> placed_;
  CostLedger ledger_;
};

}  // namespace resched
