#include "resched/baselines.hpp"

#include <algorithm>
#include <climits>
#include <numeric>

#include "resched/feasibility.hpp"

namespace resched {

NaiveMachine::NaiveMachine(int /*gamma*/) {}

std::optional<Slot> NaiveMachine::slot_of(JobHandle job) const {
  auto it = jobs_.find(job);
  if (it == jobs_.end()) return std::nullopt;
  return it->second.slot;
}

std::size_t NaiveMachine::insert_job(JobHandle job, AlignedWindow base) {
  if (jobs_.contains(job)) throw DuplicateJobId(std::to_string(job));
  const AlignedWindow w = trim_window(base, trim_span_);
  jobs_.emplace(job, Entry{base, w, 0});

  std::size_t displaced = 0;
  JobHandle current = job;
  for (;;) {
    const AlignedWindow cw = jobs_.at(current).window;
    // First gap in the window.
    Slot expected = cw.start;
    for (auto it = occupant_.lower_bound(cw.start); it != occupant_.end() && it->first < cw.end(); ++it) {
      if (it->first > expected) break;
      expected = it->first + 1;
    }
    if (expected < cw.end()) {
      occupant_[expected] = current;
      jobs_.at(current).slot = expected;
      return displaced;
    }
    std::optional<Slot> victim_slot;
    int victim_log = INT_MAX;
    for (auto it = occupant_.lower_bound(cw.start); it != occupant_.end() && it->first < cw.end(); ++it) {
      const int log = jobs_.at(it->second).window.log_span;
      if (log > cw.log_span && log < victim_log) {
        victim_log = log;
        victim_slot = it->first;
      }
    }
    if (!victim_slot) throw Infeasible("no empty slot and no longer job to displace in " + to_string(cw.window()));
    const JobHandle victim = occupant_.at(*victim_slot);
    occupant_[*victim_slot] = current;
    jobs_.at(current).slot = *victim_slot;
    ++displaced;
    current = victim;
  }
}

std::vector<SlotChange> NaiveMachine::insert(JobHandle job, AlignedWindow window) {
  std::unordered_map<JobHandle, Slot> before;
  for (const auto& [s, j] : occupant_) before.emplace(j, s);
  if (jobs_.contains(job)) throw DuplicateJobId(std::to_string(job));
  try {
    last_cascade_ = insert_job(job, window);
  } catch (const Infeasible&) {
    // Put the displaced chain back and drop the new job.
    jobs_.erase(job);
    occupant_.clear();
    for (auto& [j, entry] : jobs_) {
      entry.slot = before.at(j);
      occupant_.emplace(entry.slot, j);
    }
    throw;
  }
  // Only the displaced chain moved; collect it by scanning the chain's slots.
  std::vector<SlotChange> changes;
  for (const auto& [j, entry] : jobs_) {
    auto it = before.find(j);
    if (it == before.end()) {
      changes.push_back({j, std::nullopt, entry.slot});
    } else if (it->second != entry.slot) {
      changes.push_back({j, it->second, entry.slot});
    }
  }
  std::sort(changes.begin(), changes.end(), [](const auto& a, const auto& b) { return a.job < b.job; });
  return changes;
}

std::vector<SlotChange> NaiveMachine::erase(JobHandle job) {
  auto it = jobs_.find(job);
  if (it == jobs_.end()) throw UnknownJobId(std::to_string(job));
  const Slot s = it->second.slot;
  occupant_.erase(s);
  jobs_.erase(it);
  return {SlotChange{job, s, std::nullopt}};
}

std::vector<SlotChange> NaiveMachine::rebuild(Slot trim_span,
                                              std::span<const std::pair<JobHandle, AlignedWindow>> jobs) {
  std::unordered_map<JobHandle, Slot> before;
  for (const auto& [j, entry] : jobs_) before.emplace(j, entry.slot);
  jobs_.clear();
  occupant_.clear();
  trim_span_ = trim_span;
  std::vector<std::size_t> order(jobs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    const AlignedWindow a = trim_window(jobs[l].second, trim_span);
    const AlignedWindow b = trim_window(jobs[r].second, trim_span);
    return std::tie(a.log_span, a.start) < std::tie(b.log_span, b.start);
  });
  for (std::size_t i : order) insert_job(jobs[i].first, jobs[i].second);

  std::vector<SlotChange> changes;
  for (const auto& [j, s] : before) {
    auto it = jobs_.find(j);
    if (it == jobs_.end()) {
      changes.push_back({j, s, std::nullopt});
    } else if (it->second.slot != s) {
      changes.push_back({j, s, it->second.slot});
    }
  }
  for (const auto& [j, entry] : jobs_) {
    if (!before.contains(j)) changes.push_back({j, std::nullopt, entry.slot});
  }
  std::sort(changes.begin(), changes.end(), [](const auto& a, const auto& b) { return a.job < b.job; });
  return changes;
}

MachineSnapshot NaiveMachine::snapshot() const {
  MachineSnapshot snap;
  snap.reservations = false;
  for (const auto& [j, entry] : jobs_) {
    snap.jobs.push_back(
        {j, entry.base, entry.window, level_of(static_cast<std::uint64_t>(entry.window.span())), entry.slot});
  }
  std::sort(snap.jobs.begin(), snap.jobs.end(), [](const auto& a, const auto& b) { return a.job < b.job; });
  return snap;
}

// -- EDF repacking -------------------------------------------------------------

EdfRepackScheduler::EdfRepackScheduler(const Config& config) : config_(config) { validate(config_); }

std::optional<Assignment> EdfRepackScheduler::assignment_of(const std::string& id) const {
  auto it = placed_.find(id);
  if (it == placed_.end()) return std::nullopt;
  return it->second;
}

Outcome EdfRepackScheduler::apply(const Request& request) {
  std::map<std::string, Window> next = jobs_;
  if (request.kind == RequestKind::insert) {
    if (!is_valid(request.window)) throw std::invalid_argument("invalid window " + to_string(request.window));
    if (!next.emplace(request.job_id, request.window).second) throw DuplicateJobId(request.job_id);
  } else if (next.erase(request.job_id) == 0) {
    throw UnknownJobId(request.job_id);
  }

  std::vector<Job> jobs;
  jobs.reserve(next.size());
  for (const auto& [id, w] : next) jobs.push_back({id, w});
  const FeasibilityVerdict verdict = edf_feasible(jobs, config_.machines);
  if (!verdict.feasible) {
    throw Infeasible("no feasible schedule; overloaded range " +
                     (verdict.certificate ? to_string(*verdict.certificate) : std::string("?")));
  }

  std::map<std::string, Assignment> placed;
  for (std::size_t i = 0; i < jobs.size(); ++i) placed.emplace(jobs[i].id, verdict.witness[i]);

  Outcome out;
  for (const auto& [id, a] : placed_) {
    auto it = placed.find(id);
    std::optional<Assignment> after = it == placed.end() ? std::nullopt : std::optional<Assignment>(it->second);
    if (after != a) out.changes.push_back({id, a, after});
  }
  for (const auto& [id, a] : placed) {
    if (!placed_.contains(id)) out.changes.push_back({id, std::nullopt, a});
  }
  jobs_ = std::move(next);
  placed_ = std::move(placed);

  RequestRecord record;
  record.kind = request.kind;
  record.job_id = request.job_id;
  record.active = jobs_.size();
  std::array<bool, kMaxLevel + 1> seen{};
  for (const auto& [id, w] : jobs_) {
    record.max_span = std::max(record.max_span, w.span());
    seen[static_cast<std::size_t>(level_of(static_cast<std::uint64_t>(w.span())))] = true;
  }
  record.levels = static_cast<int>(std::count(seen.begin(), seen.end(), true));
  out.record = record_request(ledger_, record, out.changes);
  return out;
}

FleetSnapshot EdfRepackScheduler::snapshot() const {
  FleetSnapshot snap;
  snap.kind = SchedulerKind::edf;
  snap.machines = config_.machines;
  snap.gamma = config_.gamma;
  JobHandle handle = 0;
  for (const auto& [id, w] : jobs_) {
    const AlignedWindow aligned = align_window(w);
    snap.jobs.push_back({id, handle++, w, aligned, aligned, placed_.at(id)});
  }
  return snap;
}

}  // namespace resched
