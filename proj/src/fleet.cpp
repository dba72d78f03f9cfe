#include "resched/fleet.hpp"

#include <algorithm>
#include <tuple>

namespace resched {

template <class Machine>
class Fleet<Machine>::ChangeSet {
 public:
  void add(const std::string& id, std::optional<Assignment> before, std::optional<Assignment> after) {
    auto [it, fresh] = index_.emplace(id, changes_.size());
    if (fresh) {
      changes_.push_back({id, before, after});
    } else {
      changes_[it->second].after = after;
    }
  }

  void add_slots(const Fleet& fleet, int machine, const std::vector<SlotChange>& slots) {
    for (const SlotChange& c : slots) {
      auto at = [&](std::optional<Slot> s) -> std::optional<Assignment> {
        if (!s) return std::nullopt;
        return Assignment{machine, *s};
      };
      add(fleet.entries_.at(c.job).id, at(c.before), at(c.after));
    }
  }

  /// Net changes only, sorted by job id.
  std::vector<AssignmentChange> take() {
    std::vector<AssignmentChange> out;
    for (auto& c : changes_) {
      if (c.before != c.after) out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.job_id < b.job_id; });
    changes_.clear();
    index_.clear();
    return out;
  }

 private:
  std::vector<AssignmentChange> changes_;
  std::unordered_map<std::string, std::size_t> index_;
};

template <class Machine>
Fleet<Machine>::Fleet(const Config& config, SchedulerKind kind, bool trim)
    : config_(config), kind_(kind), trim_(trim), capacity_(config.gamma) {
  validate(config_);
  machines_.reserve(static_cast<std::size_t>(config_.machines));
  for (int i = 0; i < config_.machines; ++i) machines_.emplace_back(config_.gamma);
  if (trim_) {
    for (auto& m : machines_) m.rebuild(capacity_.trim_span(), {});
  }
}

template <class Machine>
std::optional<Assignment> Fleet<Machine>::assignment_of(const std::string& id) const {
  auto it = ids_.find(id);
  if (it == ids_.end()) return std::nullopt;
  const Entry& e = entries_.at(it->second);
  auto slot = machines_[static_cast<std::size_t>(e.machine)].slot_of(it->second);
  if (!slot) return std::nullopt;
  return Assignment{e.machine, *slot};
}

template <class Machine>
void Fleet<Machine>::insert_request(const Request& request, ChangeSet& changes) {
  if (!is_valid(request.window)) throw std::invalid_argument("invalid window " + to_string(request.window));
  if (ids_.contains(request.job_id)) throw DuplicateJobId(request.job_id);

  const JobHandle h = next_handle_++;
  const AlignedWindow aligned = align_window(request.window);
  const AlignedWindow effective = trim_ ? trim_window(aligned, capacity_.trim_span()) : aligned;
  Delegation& d = delegation_[effective];
  if (d.per_machine.empty()) d.per_machine.resize(machines_.size());
  const int target = static_cast<int>(d.count % machines_.size());

  entries_.emplace(h, Entry{request.job_id, request.window, aligned, effective, target});
  ids_.emplace(request.job_id, h);
  changes.add_slots(*this, target, machines_[static_cast<std::size_t>(target)].insert(h, aligned));
  d.per_machine[static_cast<std::size_t>(target)].push_back(h);
  ++d.count;
  raw_spans_.insert(request.window.span());
  ++level_counts_[static_cast<std::size_t>(level_of(static_cast<std::uint64_t>(effective.span())))];
}

template <class Machine>
void Fleet<Machine>::erase_request(const Request& request, ChangeSet& changes) {
  auto id_it = ids_.find(request.job_id);
  if (id_it == ids_.end()) throw UnknownJobId(request.job_id);
  const JobHandle h = id_it->second;
  const Entry entry = entries_.at(h);
  const auto mi = static_cast<std::size_t>(entry.machine);

  changes.add_slots(*this, entry.machine, machines_[mi].erase(h));
  Delegation& d = delegation_.at(entry.effective);
  auto& mine = d.per_machine[mi];
  mine.erase(std::find(mine.begin(), mine.end(), h));
  --d.count;
  entries_.erase(h);
  ids_.erase(id_it);
  raw_spans_.erase(raw_spans_.find(entry.raw.span()));
  --level_counts_[static_cast<std::size_t>(level_of(static_cast<std::uint64_t>(entry.effective.span())))];

  // Machines below count % m hold one extra job; only the first such position
  // past the new remainder can now be over.
  const std::size_t donor = d.count % machines_.size();
  if (donor != mi) {
    auto& theirs = d.per_machine[donor];
    const JobHandle moved = theirs.back();
    theirs.pop_back();
    changes.add_slots(*this, static_cast<int>(donor), machines_[donor].erase(moved));
    Entry& me = entries_.at(moved);
    me.machine = entry.machine;
    changes.add_slots(*this, entry.machine, machines_[mi].insert(moved, me.aligned));
    mine.push_back(moved);
  }
  if (d.count == 0) delegation_.erase(entry.effective);
}

template <class Machine>
void Fleet<Machine>::rebuild_all(ChangeSet& changes) {
  const Slot trim = capacity_.trim_span();
  std::unordered_map<JobHandle, Assignment> before;
  for (const auto& [h, e] : entries_) {
    before.emplace(h, Assignment{e.machine, *machines_[static_cast<std::size_t>(e.machine)].slot_of(h)});
  }

  std::map<AlignedWindow, std::vector<JobHandle>> groups;
  level_counts_ = {};
  for (auto& [h, e] : entries_) {
    e.effective = trim_window(e.aligned, trim);
    groups[e.effective].push_back(h);
    ++level_counts_[static_cast<std::size_t>(level_of(static_cast<std::uint64_t>(e.effective.span())))];
  }

  const std::size_t m = machines_.size();
  delegation_.clear();
  std::vector<std::vector<std::pair<JobHandle, AlignedWindow>>> lists(m);
  for (auto& [w, handles] : groups) {
    std::sort(handles.begin(), handles.end(),
              [&](JobHandle a, JobHandle b) { return entries_.at(a).id < entries_.at(b).id; });
    Delegation& d = delegation_[w];
    d.per_machine.resize(m);
    for (std::size_t i = 0; i < handles.size(); ++i) {
      Entry& e = entries_.at(handles[i]);
      e.machine = static_cast<int>(i % m);
      d.per_machine[i % m].push_back(handles[i]);
      lists[i % m].emplace_back(handles[i], e.aligned);
    }
    d.count = handles.size();
  }
  for (std::size_t i = 0; i < m; ++i) {
    std::sort(lists[i].begin(), lists[i].end(),
              [&](const auto& a, const auto& b) { return entries_.at(a.first).id < entries_.at(b.first).id; });
    machines_[i].rebuild(trim, lists[i]);
  }

  for (const auto& [h, e] : entries_) {
    const Assignment after{e.machine, *machines_[static_cast<std::size_t>(e.machine)].slot_of(h)};
    const Assignment& was = before.at(h);
    if (was != after) changes.add(e.id, was, after);
  }
}

template <class Machine>
Outcome Fleet<Machine>::apply(const Request& request) {
  // A request that throws must leave no trace, so keep the state to restore.
  auto saved = std::make_tuple(machines_, capacity_, ids_, entries_, next_handle_, delegation_, raw_spans_,
                               level_counts_);
  try {
    return apply_request(request);
  } catch (...) {
    std::tie(machines_, capacity_, ids_, entries_, next_handle_, delegation_, raw_spans_, level_counts_) =
        std::move(saved);
    throw;
  }
}

template <class Machine>
Outcome Fleet<Machine>::apply_request(const Request& request) {
  ChangeSet proper;
  if (request.kind == RequestKind::insert) {
    insert_request(request, proper);
  } else {
    erase_request(request, proper);
  }
  std::vector<AssignmentChange> changes = proper.take();

  RequestRecord record;
  record.kind = request.kind;
  record.job_id = request.job_id;

  std::vector<AssignmentChange> rebuild_changes;
  if (trim_ && capacity_.update(entries_.size())) {
    ChangeSet rebuilt;
    rebuild_all(rebuilt);
    rebuild_changes = rebuilt.take();
    record.rebuilt = true;
    // The job inserted by this request was not active before it; its rebuild
    // movement is part of an allocation, not a reallocation.
    std::vector<AssignmentChange> counted;
    for (const auto& c : rebuild_changes) {
      if (!(request.kind == RequestKind::insert && c.job_id == request.job_id)) counted.push_back(c);
    }
    const RequestCost cost = tally_changes(counted);
    record.rebuild_reallocations = cost.reallocations;
    record.rebuild_migrations = cost.migrations;
  }

  record.active = entries_.size();
  record.max_span = raw_spans_.empty() ? 0 : *raw_spans_.rbegin();
  record.levels = static_cast<int>(
      std::count_if(level_counts_.begin(), level_counts_.end(), [](std::size_t c) { return c > 0; }));

  Outcome out;
  out.record = record_request(ledger_, record, changes);

  // Merge request-proper and rebuild movement into one net list.
  std::map<std::string, AssignmentChange> merged;
  for (auto& c : changes) merged.emplace(c.job_id, std::move(c));
  for (auto& c : rebuild_changes) {
    auto [it, fresh] = merged.emplace(c.job_id, c);
    if (!fresh) it->second.after = c.after;
  }
  for (auto& [id, c] : merged) {
    if (c.before != c.after) out.changes.push_back(std::move(c));
  }
  return out;
}

template <class Machine>
FleetSnapshot Fleet<Machine>::snapshot() const {
  FleetSnapshot snap;
  snap.kind = kind_;
  snap.machines = config_.machines;
  snap.gamma = config_.gamma;
  for (const auto& [h, e] : entries_) {
    snap.jobs.push_back({e.id, h, e.raw, e.aligned, e.effective,
                         Assignment{e.machine, *machines_[static_cast<std::size_t>(e.machine)].slot_of(h)}});
  }
  std::sort(snap.jobs.begin(), snap.jobs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (const auto& m : machines_) snap.per_machine.push_back(m.snapshot());
  return snap;
}

template class Fleet<MachineSchedule>;
template class Fleet<NaiveMachine>;

std::unique_ptr<Scheduler> open(SchedulerKind kind, const Config& config) {
  switch (kind) {
    case SchedulerKind::reservation:
      return std::make_unique<ReservationFleet>(config, kind, true);
    case SchedulerKind::naive:
      return std::make_unique<NaiveFleet>(config, kind, false);
    case SchedulerKind::edf:
      return std::make_unique<EdfRepackScheduler>(config);
  }
  throw std::invalid_argument("unknown scheduler kind");
}

const char* to_string(SchedulerKind kind) {
  switch (kind) {
    case SchedulerKind::reservation:
      return "reservation";
    case SchedulerKind::naive:
      return "naive";
    case SchedulerKind::edf:
      return "edf";
  }
  return "?";
}

SchedulerKind parse_scheduler_kind(const std::string& name) {
  if (name == "reservation") return SchedulerKind::reservation;
  if (name == "naive") return SchedulerKind::naive;
  if (name == "edf") return SchedulerKind::edf;
  throw std::invalid_argument("unknown scheduler '" + name + "' (expected reservation, naive or edf)");
}

}  // namespace resched
