#include "resched/machine_schedule.hpp"

#include <algorithm>
#include <climits>
#include <numeric>
#include <sstream>

namespace resched {

Capacity::Capacity(int gamma) : gamma_(gamma) {
  if (gamma < 1) throw std::invalid_argument("gamma must be at least 1");
}

bool Capacity::update(std::size_t active) {
  if (active > target_) {
    target_ *= 2;
    return true;
  }
  if (target_ > 1 && 4 * active < target_) {
    target_ /= 2;
    return true;
  }
  return false;
}

Slot Capacity::trim_span() const {
  const unsigned __int128 bound = static_cast<unsigned __int128>(2) * static_cast<unsigned>(gamma_) * target_;
  return floor_pow2(bound >= static_cast<unsigned __int128>(kMaxSlot) ? kMaxSlot : static_cast<Slot>(bound));
}

MachineSchedule::MachineSchedule(int gamma) : gamma_(gamma), capacity_(gamma), trim_span_(kMaxSlot) {}

// -- bookkeeping ---------------------------------------------------------------

void MachineSchedule::begin_op() { origin_.clear(); }

void MachineSchedule::touch(JobHandle job) {
  if (origin_.contains(job)) return;
  auto it = jobs_.find(job);
  origin_.emplace(job, it == jobs_.end() ? std::nullopt : it->second.slot);
}

std::vector<SlotChange> MachineSchedule::end_op() {
  std::vector<SlotChange> changes;
  for (const auto& [job, before] : origin_) {
    auto it = jobs_.find(job);
    std::optional<Slot> after = it == jobs_.end() ? std::nullopt : it->second.slot;
    if (before != after) changes.push_back({job, before, after});
  }
  origin_.clear();
  std::sort(changes.begin(), changes.end(), [](const auto& a, const auto& b) { return a.job < b.job; });
  return changes;
}

std::optional<JobHandle> MachineSchedule::occupant(Slot s) const {
  auto it = occupant_.find(s);
  if (it == occupant_.end()) return std::nullopt;
  return it->second;
}

bool MachineSchedule::in_allowance(Slot s, int level) const {
  auto it = occupant_.find(s);
  return it == occupant_.end() || jobs_.at(it->second).level >= level;
}

std::optional<JobHandle> MachineSchedule::same_level_job(Slot s, int level) const {
  auto j = occupant(s);
  if (j && jobs_.at(*j).level == level) return j;
  return std::nullopt;
}

std::optional<Slot> MachineSchedule::slot_of(JobHandle job) const {
  auto it = jobs_.find(job);
  if (it == jobs_.end()) return std::nullopt;
  return it->second.slot;
}

MachineSchedule::Book* MachineSchedule::book_at(int level, Slot s) {
  auto it = books_.find(interval_at(level, s));
  return it == books_.end() ? nullptr : &it->second;
}

AlignedWindow MachineSchedule::owner_window(const Book& book, int k) const {
  const int log = first_log_span(book.id.level) + k;
  return {(book.id.start() >> log) << log, log};
}

void MachineSchedule::assign(Book& book, Slot s, int k) {
  book.owner[offset(book, s)] = static_cast<std::int8_t>(k);
  ++book.fulfilled[static_cast<std::size_t>(k)];
  if (auto g = groups_.find(owner_window(book, k)); g != groups_.end()) g->second.slots.insert(s);
}

void MachineSchedule::unassign(Book& book, Slot s) {
  auto& cell = book.owner[offset(book, s)];
  const int k = cell;
  cell = -1;
  --book.fulfilled[static_cast<std::size_t>(k)];
  if (auto g = groups_.find(owner_window(book, k)); g != groups_.end()) g->second.slots.erase(s);
}

MachineSchedule::Book& MachineSchedule::materialize(const IntervalId& id) {
  auto it = books_.find(id);
  if (it != books_.end()) return it->second;
  const auto count = static_cast<std::size_t>(log_span_count(id.level));
  Book fresh{id, std::vector<int>(count, 1), std::vector<int>(count, 0),
             std::vector<std::int8_t>(static_cast<std::size_t>(id.size()), -1)};
  Book& book = books_.emplace(id, std::move(fresh)).first->second;
  settle(book);
  return book;
}

MachineSchedule::Group& MachineSchedule::ensure_group(const AlignedWindow& w) {
  auto [it, fresh] = groups_.try_emplace(w);
  if (!fresh) return it->second;
  const int level = level_of(static_cast<std::uint64_t>(w.span()));
  const int k = w.log_span - first_log_span(level);
  for (const auto& id : intervals_of(w)) {
    Book& book = materialize(id);
    for (std::size_t off = 0; off < book.owner.size(); ++off) {
      if (book.owner[off] == k) it->second.slots.insert(book.id.start() + static_cast<Slot>(off));
    }
  }
  return it->second;
}

// -- reservations --------------------------------------------------------------

void MachineSchedule::settle(Book& book) {
  const int level = book.id.level;
  const int count = static_cast<int>(book.reserved.size());
  const Slot start = book.id.start();
  for (;;) {
    int waiting = -1;
    for (int k = 0; k < count; ++k) {
      if (book.reserved[static_cast<std::size_t>(k)] > book.fulfilled[static_cast<std::size_t>(k)]) {
        waiting = k;
        break;
      }
    }
    if (waiting < 0) return;

    std::optional<Slot> free;
    for (std::size_t off = 0; off < book.owner.size(); ++off) {
      const Slot s = start + static_cast<Slot>(off);
      if (book.owner[off] == -1 && in_allowance(s, level)) {
        free = s;
        break;
      }
    }
    if (free) {
      assign(book, *free, waiting);
      continue;
    }

    int longest = -1;
    for (int k = count - 1; k >= 0; --k) {
      if (book.fulfilled[static_cast<std::size_t>(k)] > 0) {
        longest = k;
        break;
      }
    }
    if (longest <= waiting) return;

    // Take a slot from the longest fulfilled window, preferring one it does not occupy.
    std::optional<Slot> idle;
    std::optional<Slot> busy;
    for (std::size_t off = 0; off < book.owner.size() && !idle; ++off) {
      if (book.owner[off] != longest) continue;
      const Slot s = start + static_cast<Slot>(off);
      if (same_level_job(s, level)) {
        if (!busy) busy = s;
      } else {
        idle = s;
      }
    }
    const Slot taken = idle ? *idle : *busy;
    const auto evicted = same_level_job(taken, level);
    unassign(book, taken);
    assign(book, taken, waiting);
    if (evicted) move_job(*evicted);
  }
}

std::optional<Slot> MachineSchedule::pick_fulfilled_slot(const AlignedWindow& w, int level,
                                                        std::optional<Slot> exclude) const {
  auto g = groups_.find(w);
  if (g == groups_.end()) return std::nullopt;
  std::optional<Slot> fallback;
  for (Slot s : g->second.slots) {
    if (s == exclude) continue;
    auto occ = occupant(s);
    if (!occ) return s;
    if (!fallback && jobs_.at(*occ).level > level) fallback = s;
  }
  return fallback;
}

void MachineSchedule::fail_no_slot(const AlignedWindow& w, int level) const {
  std::ostringstream state;
  state << "level " << level;
  if (auto g = groups_.find(w); g != groups_.end()) {
    state << ", " << g->second.jobs << " jobs, " << g->second.slots.size() << " fulfilled slots";
    const int k = w.log_span - first_log_span(level);
    state << ", intervals (reserved/fulfilled):";
    int shown = 0;
    for (const auto& id : intervals_of(w)) {
      if (++shown > 8) {
        state << " ...";
        break;
      }
      const Book& b = books_.at(id);
      state << ' ' << id.index << ':' << b.reserved[static_cast<std::size_t>(k)] << '/'
            << b.fulfilled[static_cast<std::size_t>(k)];
    }
  }
  throw NoFulfilledSlot(w.window(), state.str());
}

// -- placement -----------------------------------------------------------------

void MachineSchedule::occupy(JobHandle job, Slot s) {
  const auto displaced = occupant(s);
  touch(job);
  if (displaced) {
    touch(*displaced);
    jobs_.at(*displaced).slot.reset();
  }
  occupant_[s] = job;
  JobState& state = jobs_.at(job);
  state.slot = s;
  // s leaves the allowance of every higher level where it was usable.
  for (int level = state.level + 1; level <= kMaxLevel; ++level) {
    Book* book = book_at(level, s);
    if (book == nullptr || book->owner[offset(*book, s)] < 0) continue;
    unassign(*book, s);
    settle(*book);
  }
  if (displaced) place(*displaced);
}

void MachineSchedule::place(JobHandle job) {
  const JobState& state = jobs_.at(job);
  if (state.level == 0) {
    place_base_level(job);
    return;
  }
  const auto s = pick_fulfilled_slot(state.window, state.level, std::nullopt);
  if (!s) fail_no_slot(state.window, state.level);
  occupy(job, *s);
}

void MachineSchedule::place_base_level(JobHandle job) {
  JobHandle current = job;
  for (;;) {
    const AlignedWindow w = jobs_.at(current).window;
    std::optional<Slot> empty;
    std::optional<Slot> higher;
    for (Slot s = w.start; s < w.end() && !empty; ++s) {
      auto occ = occupant(s);
      if (!occ) {
        empty = s;
      } else if (!higher && jobs_.at(*occ).level > 0) {
        higher = s;
      }
    }
    if (empty || higher) {
      occupy(current, empty ? *empty : *higher);
      return;
    }
    // Every slot holds a base-level job: displace the shortest one of at least twice the span.
    std::optional<Slot> victim_slot;
    int victim_log = INT_MAX;
    for (Slot s = w.start; s < w.end(); ++s) {
      const int log = jobs_.at(*occupant(s)).window.log_span;
      if (log > w.log_span && log < victim_log) {
        victim_log = log;
        victim_slot = s;
      }
    }
    if (!victim_slot) fail_no_slot(w, 0);
    const JobHandle victim = *occupant(*victim_slot);
    touch(current);
    touch(victim);
    occupant_[*victim_slot] = current;
    jobs_.at(current).slot = *victim_slot;
    jobs_.at(victim).slot.reset();
    current = victim;
  }
}

void MachineSchedule::move_job(JobHandle job) {
  JobState& state = jobs_.at(job);
  const Slot from = *state.slot;
  const auto to = pick_fulfilled_slot(state.window, state.level, from);
  if (!to) fail_no_slot(state.window, state.level);
  const auto higher = occupant(*to);

  // Both slots lie in the same interval at every higher level; swap their roles there.
  for (int level = state.level + 1; level <= kMaxLevel; ++level) {
    Book* book = book_at(level, from);
    if (book == nullptr || !in_allowance(*to, level)) continue;
    const int k = book->owner[offset(*book, *to)];
    if (k < 0) continue;
    unassign(*book, *to);
    assign(*book, from, k);
  }

  touch(job);
  if (higher) touch(*higher);
  occupant_[*to] = job;
  state.slot = *to;
  if (higher) {
    occupant_[from] = *higher;
    jobs_.at(*higher).slot = from;
  } else {
    occupant_.erase(from);
  }
}

// -- requests ------------------------------------------------------------------

void MachineSchedule::insert_job(JobHandle job, AlignedWindow base) {
  if (jobs_.contains(job)) throw DuplicateJobId(std::to_string(job));
  const AlignedWindow w = trim_window(base, trim_span_);
  const int level = level_of(static_cast<std::uint64_t>(w.span()));
  jobs_.emplace(job, JobState{base, w, level, std::nullopt});
  touch(job);
  if (level >= 1) {
    Group& group = ensure_group(w);
    const auto intervals = intervals_of(w);
    const std::size_t count = intervals.size();
    const std::size_t first = (2 * static_cast<std::size_t>(group.jobs)) % count;
    ++group.jobs;
    const auto k = static_cast<std::size_t>(w.log_span - first_log_span(level));
    for (std::size_t q : {first, (first + 1) % count}) {
      Book& book = books_.at(intervals[q]);
      ++book.reserved[k];
      settle(book);
    }
  }
  place(job);
}

void MachineSchedule::erase_job(JobHandle job) {
  auto it = jobs_.find(job);
  if (it == jobs_.end()) throw UnknownJobId(std::to_string(job));
  touch(job);
  const JobState state = it->second;
  const Slot vacated = *state.slot;
  occupant_.erase(vacated);
  jobs_.erase(it);

  if (state.level >= 1) {
    Group& group = groups_.at(state.window);
    --group.jobs;
    const auto intervals = intervals_of(state.window);
    const std::size_t count = intervals.size();
    const std::size_t first = (2 * static_cast<std::size_t>(group.jobs)) % count;
    const int k = state.window.log_span - first_log_span(state.level);
    for (std::size_t q : {first, (first + 1) % count}) {
      Book& book = books_.at(intervals[q]);
      --book.reserved[static_cast<std::size_t>(k)];
      if (book.fulfilled[static_cast<std::size_t>(k)] <= book.reserved[static_cast<std::size_t>(k)]) continue;
      // Give back one slot, preferring one no job of this window sits in.
      std::optional<Slot> idle;
      std::optional<Slot> busy;
      for (std::size_t off = 0; off < book.owner.size() && !idle; ++off) {
        if (book.owner[off] != k) continue;
        const Slot s = book.id.start() + static_cast<Slot>(off);
        if (same_level_job(s, state.level)) {
          if (!busy) busy = s;
        } else {
          idle = s;
        }
      }
      const Slot released = idle ? *idle : *busy;
      const auto mover = same_level_job(released, state.level);
      unassign(book, released);
      if (mover) move_job(*mover);
      settle(book);
    }
    if (group.jobs == 0) {
      groups_.erase(state.window);
      for (const auto& id : intervals) {
        const Book& book = books_.at(id);
        bool used = false;
        for (int k2 = 0; k2 < static_cast<int>(book.reserved.size()) && !used; ++k2) {
          used = groups_.contains(owner_window(book, k2));
        }
        if (!used) books_.erase(id);
      }
    }
  }
  // The vacated slot rejoins the allowance of every higher level.
  for (int level = state.level + 1; level <= kMaxLevel; ++level) {
    if (Book* book = book_at(level, vacated)) settle(*book);
  }
}

std::vector<SlotChange> MachineSchedule::insert(JobHandle job, AlignedWindow window) {
  begin_op();
  insert_job(job, window);
  return end_op();
}

std::vector<SlotChange> MachineSchedule::erase(JobHandle job) {
  begin_op();
  erase_job(job);
  return end_op();
}

std::vector<SlotChange> MachineSchedule::rebuild(Slot trim_span,
                                                 std::span<const std::pair<JobHandle, AlignedWindow>> jobs) {
  begin_op();
  for (const auto& [job, state] : jobs_) touch(job);
  jobs_.clear();
  occupant_.clear();
  books_.clear();
  groups_.clear();
  trim_span_ = trim_span;

  std::vector<std::size_t> order(jobs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    const AlignedWindow a = trim_window(jobs[l].second, trim_span);
    const AlignedWindow b = trim_window(jobs[r].second, trim_span);
    return std::tie(a.log_span, a.start) < std::tie(b.log_span, b.start);
  });
  for (std::size_t i : order) insert_job(jobs[i].first, jobs[i].second);
  return end_op();
}

std::vector<SlotChange> MachineSchedule::set_capacity(std::size_t active) {
  const bool changed = capacity_.update(active);
  if (!changed && trim_span_ == capacity_.trim_span()) return {};
  std::vector<std::pair<JobHandle, AlignedWindow>> all;
  all.reserve(jobs_.size());
  for (const auto& [job, state] : jobs_) all.emplace_back(job, state.base);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return rebuild(capacity_.trim_span(), all);
}

// -- views ---------------------------------------------------------------------

FulfilledProfile MachineSchedule::fulfilled_profile() const {
  FulfilledProfile profile;
  for (const auto& [id, book] : books_) {
    for (std::size_t k = 0; k < book.fulfilled.size(); ++k) {
      profile[{id.level, id.index, first_log_span(id.level) + static_cast<int>(k)}] = book.fulfilled[k];
    }
  }
  return profile;
}

MachineSnapshot MachineSchedule::snapshot() const {
  MachineSnapshot snap;
  snap.reservations = true;
  snap.jobs.reserve(jobs_.size());
  for (const auto& [job, state] : jobs_) {
    snap.jobs.push_back({job, state.base, state.window, state.level, state.slot.value_or(-1)});
  }
  std::sort(snap.jobs.begin(), snap.jobs.end(), [](const auto& a, const auto& b) { return a.job < b.job; });
  snap.books.reserve(books_.size());
  for (const auto& [id, book] : books_) snap.books.push_back({id.level, id.index, book.reserved, book.owner});
  for (const auto& [w, group] : groups_) snap.groups.push_back({w, group.jobs});
  return snap;
}

}  // namespace resched
