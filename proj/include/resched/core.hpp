#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace resched {

using Slot = std::int64_t;
using JobHandle = std::uint32_t;

/// Largest admissible window end. Keeps every aligned span representable.
inline constexpr Slot kMaxSlot = Slot{1} << 62;

/// Half-open range of unit timeslots [start, end).
struct Window {
  Slot start = 0;
  Slot end = 1;

  constexpr Slot span() const { return end - start; }
  constexpr bool contains(Slot s) const { return start <= s && s < end; }
  constexpr bool contains(const Window& o) const { return start <= o.start && o.end <= end; }
  constexpr bool overlaps(const Window& o) const { return start < o.end && o.start < end; }
  friend constexpr auto operator<=>(const Window&, const Window&) = default;
};

constexpr bool is_valid(const Window& w) { return w.start >= 0 && w.end > w.start && w.end <= kMaxSlot; }

std::string to_string(const Window& w);

struct Job {
  std::string id;
  Window window;
};

struct Assignment {
  int machine = 0;
  Slot slot = 0;
  friend constexpr auto operator<=>(const Assignment&, const Assignment&) = default;
};

/// One job's movement while a single request was processed. `before` is empty
/// for the job being inserted, `after` is empty for the job being deleted.
struct AssignmentChange {
  std::string job_id;
  std::optional<Assignment> before;
  std::optional<Assignment> after;
};

enum class RequestKind { insert, erase };

struct Request {
  RequestKind kind = RequestKind::insert;
  std::string job_id;
  Window window;  // meaningful for inserts only

  static Request insert(std::string id, Window w) { return {RequestKind::insert, std::move(id), w}; }
  static Request erase(std::string id) { return {RequestKind::erase, std::move(id), {}}; }
  friend bool operator==(const Request&, const Request&) = default;
};

enum class AuditLevel { off, invariants, full_oracle };

struct Config {
  int machines = 1;
  int gamma = 1;
  AuditLevel audit = AuditLevel::off;
};

void validate(const Config& config);

struct RequestCost {
  std::size_t reallocations = 0;
  std::size_t migrations = 0;
};

/// Counts reallocations (pre-existing jobs whose machine or slot changed) and
/// migrations (those whose machine changed). First placements and removals are free.
RequestCost tally_changes(std::span<const AssignmentChange> changes);

struct RequestRecord {
  std::size_t index = 0;
  RequestKind kind = RequestKind::insert;
  std::string job_id;
  std::size_t active = 0;  // n_i, after the request
  Slot max_span = 0;       // Δ_i, largest untrimmed span among active jobs
  int levels = 0;          // number of distinct occupied levels
  std::size_t reallocations = 0;
  std::size_t migrations = 0;
  bool rebuilt = false;
  std::size_t rebuild_reallocations = 0;
  std::size_t rebuild_migrations = 0;

  std::size_t total_reallocations() const { return reallocations + rebuild_reallocations; }
  std::size_t total_migrations() const { return migrations + rebuild_migrations; }
};

class CostLedger {
 public:
  const RequestRecord& append(RequestRecord record);

  std::span<const RequestRecord> records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  std::size_t total_reallocations() const { return reallocations_; }
  std::size_t total_migrations() const { return migrations_; }
  std::size_t total_rebuild_reallocations() const { return rebuild_reallocations_; }
  std::size_t total_rebuild_migrations() const { return rebuild_migrations_; }
  std::size_t rebuilds() const { return rebuilds_; }

  /// Ledger as comma-separated rows with a header line.
  std::string to_csv() const;

 private:
  std::vector<RequestRecord> records_;
  std::size_t reallocations_ = 0;
  std::size_t migrations_ = 0;
  std::size_t rebuild_reallocations_ = 0;
  std::size_t rebuild_migrations_ = 0;
  std::size_t rebuilds_ = 0;
};

/// Appends the record for one processed request; costs are derived from `changes`.
const RequestRecord& record_request(CostLedger& ledger, RequestRecord record,
                                    std::span<const AssignmentChange> changes);

// Errors ---------------------------------------------------------------------

class SchedulerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No fulfilled reservation slot was available. Only happens when the
/// underallocation precondition is violated.
class NoFulfilledSlot : public SchedulerError {
 public:
  NoFulfilledSlot(Window window, std::string state)
      : SchedulerError("no fulfilled slot for window " + to_string(window) + ": " + state), window_(window) {}
  Window window() const { return window_; }

 private:
  Window window_;
};

class Infeasible : public SchedulerError {
 public:
  using SchedulerError::SchedulerError;
};

class UnknownJobId : public SchedulerError {
 public:
  explicit UnknownJobId(const std::string& id) : SchedulerError("unknown job id '" + id + "'") {}
};

class DuplicateJobId : public SchedulerError {
 public:
  explicit DuplicateJobId(const std::string& id) : SchedulerError("duplicate job id '" + id + "'") {}
};

}  // namespace resched
