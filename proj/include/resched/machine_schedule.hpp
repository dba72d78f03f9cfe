#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "resched/alignment.hpp"
#include "resched/core.hpp"
#include "resched/snapshot.hpp"

namespace resched {

/// Slot movement of one job on one machine during a single operation.
struct SlotChange {
  JobHandle job = 0;
  std::optional<Slot> before;
  std::optional<Slot> after;
};

/// Maintained estimate n* of the active job count. Doubles when the count
/// exceeds it and halves when the count drops below a quarter of it; windows
/// are trimmed to the largest power of two not above 2γn*.
class Capacity {
 public:
  explicit Capacity(int gamma);

  /// Returns true when n* changed.
  bool update(std::size_t active);

  std::size_t target() const { return target_; }
  Slot trim_span() const;

 private:
  int gamma_;
  std::size_t target_ = 1;
};

/// (level, interval index, lg span) -> number of fulfilled reservations.
using FulfilledProfile = std::map<std::tuple<int, Slot, int>, int>;

/// Single-machine pecking-order scheduler with reservations.
///
/// Jobs with span <= 32 (level 0) are placed by a cascade that only displaces
/// level-0 jobs of at least twice their span. Longer jobs reserve slots inside
/// the level-ℓ intervals of their window: each window with x jobs keeps one
/// permanent reservation per interval plus 2x job reservations spread
/// round-robin, and every interval fulfills its shortest reservations from its
/// allowance (the slots not held by lower-level jobs). A job only ever sits in a
/// slot fulfilled for its window, or displaces a higher-level job.
///
/// After a NoFulfilledSlot error the schedule is left in an unspecified state.
class MachineSchedule {
 public:
  explicit MachineSchedule(int gamma = 1);

  /// Inserts a job with an aligned window; the window is trimmed to trim_span().
  std::vector<SlotChange> insert(JobHandle job, AlignedWindow window);
  std::vector<SlotChange> erase(JobHandle job);

  /// Standalone capacity tracking: updates n* for `active` jobs and rebuilds on change.
  std::vector<SlotChange> set_capacity(std::size_t active);

  /// Discards the schedule and re-inserts `jobs` (shortest trimmed window first,
  /// input order among equals) with a new trim bound. Jobs not listed are dropped.
  std::vector<SlotChange> rebuild(Slot trim_span, std::span<const std::pair<JobHandle, AlignedWindow>> jobs);

  bool contains(JobHandle job) const { return jobs_.contains(job); }
  std::optional<Slot> slot_of(JobHandle job) const;
  AlignedWindow window_of(JobHandle job) const { return jobs_.at(job).window; }
  AlignedWindow base_window_of(JobHandle job) const { return jobs_.at(job).base; }
  int level_of_job(JobHandle job) const { return jobs_.at(job).level; }
  std::size_t size() const { return jobs_.size(); }
  std::size_t capacity() const { return capacity_.target(); }
  Slot trim_span() const { return trim_span_; }

  /// Fulfilled reservation counts per (interval, window). Depends only on the
  /// set of active jobs, not on the order they arrived in.
  FulfilledProfile fulfilled_profile() const;

  MachineSnapshot snapshot() const;

 private:
  struct JobState {
    AlignedWindow base;
    AlignedWindow window;
    int level = 0;
    std::optional<Slot> slot;
  };

  struct Book {
    IntervalId id;
    std::vector<int> reserved;
    std::vector<int> fulfilled;
    std::vector<std::int8_t> owner;  // per slot offset, -1 = unassigned
  };

  struct Group {
    int jobs = 0;
    std::set<Slot> slots;  // slots currently assigned to this window
  };

  // Operation bracketing and movement tracking.
  void begin_op();
  std::vector<SlotChange> end_op();
  void touch(JobHandle job);

  void insert_job(JobHandle job, AlignedWindow base);
  void erase_job(JobHandle job);

  std::optional<JobHandle> occupant(Slot s) const;
  bool in_allowance(Slot s, int level) const;
  std::optional<JobHandle> same_level_job(Slot s, int level) const;

  Book* book_at(int level, Slot s);
  Book& materialize(const IntervalId& id);
  Group& ensure_group(const AlignedWindow& w);
  AlignedWindow owner_window(const Book& book, int k) const;
  static std::size_t offset(const Book& book, Slot s) {
    return static_cast<std::size_t>(s - book.id.start());
  }

  void assign(Book& book, Slot s, int k);
  void unassign(Book& book, Slot s);

  /// Restores the shortest-window-first fulfillment rule in `book`.
  void settle(Book& book);
  /// Picks a slot assigned to `w` free of level-`level` jobs: empty slots first, then leftmost.
  std::optional<Slot> pick_fulfilled_slot(const AlignedWindow& w, int level, std::optional<Slot> exclude) const;

  void place(JobHandle job);
  void place_base_level(JobHandle job);
  void occupy(JobHandle job, Slot s);
  void move_job(JobHandle job);

  [[noreturn]] void fail_no_slot(const AlignedWindow& w, int level) const;

  int gamma_;
  Capacity capacity_;
  Slot trim_span_;
  std::unordered_map<JobHandle, JobState> jobs_;
  std::unordered_map<Slot, JobHandle> occupant_;
  std::map<IntervalId, Book> books_;
  std::map<AlignedWindow, Group> groups_;
  std::unordered_map<JobHandle, std::optional<Slot>> origin_;
};

}  // namespace resched
