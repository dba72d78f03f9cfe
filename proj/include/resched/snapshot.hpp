#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "resched/alignment.hpp"
#include "resched/core.hpp"

namespace resched {

/// Reservation book of one level-ℓ interval. Index k of `reserved` refers to the
/// window of span 2^(first_log_span(level) + k) containing the interval.
struct BookView {
  int level = 1;
  Slot index = 0;
  std::vector<int> reserved;
  /// Per slot offset: index k of the owning window, or -1 when unassigned.
  std::vector<std::int8_t> owner;

  IntervalId interval() const { return {level, index}; }
};

struct GroupView {
  AlignedWindow window;
  int jobs = 0;
};

struct MachineJobView {
  JobHandle job = 0;
  AlignedWindow base;    // aligned, untrimmed
  AlignedWindow window;  // trimmed window actually scheduled
  int level = 0;
  Slot slot = 0;
};

struct MachineSnapshot {
  bool reservations = true;  // false for baselines without reservation books
  std::vector<MachineJobView> jobs;
  std::vector<BookView> books;
  std::vector<GroupView> groups;
};

enum class SchedulerKind { reservation, naive, edf };

const char* to_string(SchedulerKind kind);
SchedulerKind parse_scheduler_kind(const std::string& name);

struct JobView {
  std::string id;
  JobHandle handle = 0;
  Window raw;
  AlignedWindow aligned;
  AlignedWindow effective;
  Assignment assignment;
};

/// Immutable copy of a scheduler's full state, consumed by the auditor.
struct FleetSnapshot {
  SchedulerKind kind = SchedulerKind::reservation;
  int machines = 1;
  int gamma = 1;
  std::vector<JobView> jobs;  // sorted by id
  std::vector<MachineSnapshot> per_machine;
};

}  // namespace resched
