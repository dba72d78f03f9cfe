#include "resched/verifier.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "resched/alignment.hpp"
#include "resched/feasibility.hpp"

namespace resched {

std::string to_string(const AuditFailure& failure) {
  return "request " + std::to_string(failure.request_index) + " " + failure.invariant + " at " + failure.entity +
         ": " + failure.excerpt;
}

namespace {

std::string window_name(const AlignedWindow& w) { return to_string(w.window()); }

std::string interval_name(const IntervalId& id) {
  return "interval L" + std::to_string(id.level) + "#" + std::to_string(id.index) + " " +
         to_string(id.window().window());
}

class Auditor {
 public:
  Auditor(const FleetSnapshot& snap, const AuditOptions& opt) : snap_(snap), opt_(opt) {}

  std::vector<AuditFailure> run() {
    check_validity();
    check_containment();
    if (snap_.kind != SchedulerKind::edf) check_balance();
    for (std::size_t m = 0; m < snap_.per_machine.size(); ++m) {
      if (snap_.per_machine[m].reservations) check_reservations(static_cast<int>(m), snap_.per_machine[m]);
    }
    if (opt_.underallocated && opt_.gamma >= 4) check_counting_bound();
    if (opt_.level == AuditLevel::full_oracle) check_oracles();
    return std::move(failures_);
  }

 private:
  void fail(std::string invariant, std::string entity, std::string excerpt) {
    failures_.push_back({std::move(invariant), opt_.request_index, std::move(entity), std::move(excerpt)});
  }

  Window scheduled_window(const JobView& j) const {
    return snap_.kind == SchedulerKind::edf ? j.raw : j.effective.window();
  }

  void check_validity() {
    std::map<Assignment, std::string> taken;
    for (const JobView& j : snap_.jobs) {
      const Assignment& a = j.assignment;
      if (a.machine < 0 || a.machine >= snap_.machines) {
        fail("validity", "job " + j.id, "machine " + std::to_string(a.machine) + " out of range");
        continue;
      }
      if (!scheduled_window(j).contains(a.slot)) {
        fail("validity", "job " + j.id,
             "slot " + std::to_string(a.slot) + " outside window " + to_string(scheduled_window(j)));
      }
      auto [it, fresh] = taken.emplace(a, j.id);
      if (!fresh) {
        fail("validity", "machine " + std::to_string(a.machine) + " slot " + std::to_string(a.slot),
             "jobs " + it->second + " and " + j.id + " share the slot");
      }
    }
    // Machine-level views must agree with the fleet view.
    std::map<std::pair<int, JobHandle>, Slot> local;
    for (std::size_t m = 0; m < snap_.per_machine.size(); ++m) {
      for (const auto& v : snap_.per_machine[m].jobs) local[{static_cast<int>(m), v.job}] = v.slot;
    }
    if (snap_.kind != SchedulerKind::edf) {
      if (local.size() != snap_.jobs.size()) {
        fail("validity", "fleet",
             std::to_string(local.size()) + " machine-level jobs vs " + std::to_string(snap_.jobs.size()) + " active");
      }
      for (const JobView& j : snap_.jobs) {
        auto it = local.find({j.assignment.machine, j.handle});
        if (it == local.end() || it->second != j.assignment.slot) {
          fail("validity", "job " + j.id, "machine view disagrees with the fleet assignment");
        }
      }
    }
  }

  void check_containment() {
    for (const JobView& j : snap_.jobs) {
      if (!j.raw.contains(j.aligned.window()) || j.aligned != align_window(j.raw) ||
          !j.aligned.contains(j.effective) || j.effective.start % j.effective.span() != 0) {
        fail("window_containment", "job " + j.id,
             "raw " + to_string(j.raw) + " aligned " + window_name(j.aligned) + " effective " +
                 window_name(j.effective));
      }
    }
  }

  void check_balance() {
    std::map<AlignedWindow, std::vector<std::size_t>> counts;
    for (const JobView& j : snap_.jobs) {
      auto& c = counts[j.effective];
      if (c.empty()) c.assign(static_cast<std::size_t>(snap_.machines), 0);
      if (j.assignment.machine >= 0 && j.assignment.machine < snap_.machines) {
        ++c[static_cast<std::size_t>(j.assignment.machine)];
      }
    }
    const auto m = static_cast<std::size_t>(snap_.machines);
    for (const auto& [w, c] : counts) {
      std::size_t n = 0;
      for (std::size_t x : c) n += x;
      for (std::size_t i = 0; i < m; ++i) {
        if (c[i] < n / m || c[i] > (n + m - 1) / m) {
          fail("balance", "window " + window_name(w),
               "machine " + std::to_string(i) + " holds " + std::to_string(c[i]) + " of " + std::to_string(n));
        }
      }
    }
  }

  void check_reservations(int machine, const MachineSnapshot& ms) {
    const std::string where = "machine " + std::to_string(machine) + " ";
    std::map<IntervalId, const BookView*> books;
    for (const auto& b : ms.books) books[b.interval()] = &b;
    std::map<Slot, const MachineJobView*> occupant;
    for (const auto& j : ms.jobs) occupant[j.slot] = &j;
    std::map<AlignedWindow, int> groups;
    for (const auto& g : ms.groups) groups[g.window] = g.jobs;

    // Group sizes must match the jobs actually scheduled.
    std::map<AlignedWindow, int> actual;
    for (const auto& j : ms.jobs) {
      if (j.level >= 1) ++actual[j.window];
    }
    for (const auto& [w, x] : actual) {
      auto it = groups.find(w);
      if (it == groups.end() || it->second != x) {
        fail("invariant1_total", where + "window " + window_name(w),
             std::to_string(x) + " jobs but group records " +
                 (it == groups.end() ? std::string("none") : std::to_string(it->second)));
      }
    }

    for (const auto& [w, x] : groups) {
      const int level = level_of(static_cast<std::uint64_t>(w.span()));
      const auto k = static_cast<std::size_t>(w.log_span - first_log_span(level));
      const auto intervals = intervals_of(w);
      const auto count = static_cast<long long>(intervals.size());
      long long total = 0;
      long long fulfilled = 0;
      for (long long q = 0; q < count; ++q) {
        auto it = books.find(intervals[static_cast<std::size_t>(q)]);
        if (it == books.end()) {
          fail("invariant1_total", where + "window " + window_name(w),
               "missing book for " + interval_name(intervals[static_cast<std::size_t>(q)]));
          continue;
        }
        const BookView& b = *it->second;
        const long long r = b.reserved[k];
        total += r;
        const long long expected = 1 + (2LL * x) / count + (q < (2LL * x) % count ? 1 : 0);
        if (r != expected) {
          fail("invariant1_split", where + interval_name(b.interval()),
               "window " + window_name(w) + " with " + std::to_string(x) + " jobs reserves " + std::to_string(r) +
                   ", expected " + std::to_string(expected));
        }
        fulfilled += std::count(b.owner.begin(), b.owner.end(), static_cast<std::int8_t>(k));
      }
      if (total != 2LL * x + count) {
        fail("invariant1_total", where + "window " + window_name(w),
             std::to_string(total) + " reservations for " + std::to_string(x) + " jobs over " + std::to_string(count) +
                 " intervals, expected " + std::to_string(2LL * x + count));
      }
      if (opt_.underallocated && fulfilled < x + 1) {
        fail("reservation_space", where + "window " + window_name(w),
             std::to_string(fulfilled) + " fulfilled reservations for " + std::to_string(x) + " jobs");
      }
    }

    for (const auto& [id, bp] : books) {
      const BookView& b = *bp;
      const int first = first_log_span(b.level);
      const Slot start = id.start();
      std::vector<long long> fulfilled(b.reserved.size(), 0);
      bool free_allowance = false;
      std::vector<const MachineJobView*>& held = held_;
      held.assign(b.owner.size(), nullptr);
      for (auto it = occupant.lower_bound(start); it != occupant.end() && it->first < start + id.size(); ++it) {
        held[static_cast<std::size_t>(it->first - start)] = it->second;
      }
      for (std::size_t off = 0; off < b.owner.size(); ++off) {
        const Slot s = start + static_cast<Slot>(off);
        const MachineJobView* occ = held[off];
        const bool allowed = occ == nullptr || occ->level >= b.level;
        const int owner = b.owner[off];
        if (owner < 0) {
          if (allowed) free_allowance = true;
          continue;
        }
        if (owner >= static_cast<int>(b.reserved.size())) {
          fail("allowance", where + interval_name(id), "slot " + std::to_string(s) + " has bad owner index");
          continue;
        }
        ++fulfilled[static_cast<std::size_t>(owner)];
        if (!allowed) {
          fail("allowance", where + interval_name(id),
               "slot " + std::to_string(s) + " assigned while held by a level-" + std::to_string(occ->level) +
                   " job");
        }
      }
      int shortest_waiting = -1;
      for (std::size_t k = 0; k < b.reserved.size(); ++k) {
        const AlignedWindow w{(start >> (first + static_cast<int>(k))) << (first + static_cast<int>(k)),
                              first + static_cast<int>(k)};
        const bool has_group = groups.contains(w);
        if (b.reserved[k] < 1 || (!has_group && b.reserved[k] != 1)) {
          fail("base_reservation", where + interval_name(id),
               "window " + window_name(w) + " reserves " + std::to_string(b.reserved[k]) +
                   (has_group ? "" : " without jobs"));
        }
        if (fulfilled[k] > b.reserved[k]) {
          fail("priority", where + interval_name(id),
               "window " + window_name(w) + " fulfilled " + std::to_string(fulfilled[k]) + " > reserved " +
                   std::to_string(b.reserved[k]));
        }
        if (shortest_waiting < 0 && fulfilled[k] < b.reserved[k]) shortest_waiting = static_cast<int>(k);
      }
      if (shortest_waiting >= 0) {
        if (free_allowance) {
          fail("priority", where + interval_name(id), "reservation waits while an allowance slot is unassigned");
        }
        for (std::size_t k = static_cast<std::size_t>(shortest_waiting) + 1; k < b.reserved.size(); ++k) {
          if (fulfilled[k] > 0) {
            fail("priority", where + interval_name(id),
                 "span 2^" + std::to_string(first + static_cast<int>(k)) + " fulfilled while span 2^" +
                     std::to_string(first + shortest_waiting) + " waits");
            break;
          }
        }
      }
    }

    for (const auto& j : ms.jobs) {
      if (j.level < 1) continue;
      const IntervalId id = interval_at(j.level, j.slot);
      auto it = books.find(id);
      const int k = j.window.log_span - first_log_span(j.level);
      if (it == books.end() || it->second->owner[static_cast<std::size_t>(j.slot - id.start())] != k) {
        fail("job_on_assigned_slot", where + "slot " + std::to_string(j.slot),
             "level-" + std::to_string(j.level) + " job of window " + window_name(j.window) +
                 " sits on a slot not fulfilled for it");
      }
    }
  }

  void check_counting_bound() {
    std::vector<AlignedWindow> windows;
    windows.reserve(snap_.jobs.size());
    for (const JobView& j : snap_.jobs) windows.push_back(j.aligned);
    if (!audit_counting_bound(windows, snap_.machines, opt_.gamma / 4)) {
      fail("counting_bound", "aligned job set",
           "some aligned window W holds more than m|W|/(γ/4) jobs, γ=" + std::to_string(opt_.gamma));
    }
  }

  void check_oracles() {
    std::vector<std::vector<Job>> per_machine(static_cast<std::size_t>(snap_.machines));
    std::vector<Job> raw;
    std::vector<Job> effective;
    for (const JobView& j : snap_.jobs) {
      raw.push_back({j.id, j.raw});
      effective.push_back({j.id, j.effective.window()});
      if (j.assignment.machine >= 0 && j.assignment.machine < snap_.machines) {
        per_machine[static_cast<std::size_t>(j.assignment.machine)].push_back({j.id, scheduled_window(j)});
      }
    }
    for (std::size_t m = 0; m < per_machine.size(); ++m) {
      const FeasibilityVerdict v = edf_feasible(per_machine[m], 1);
      if (!v.feasible) {
        fail("machine_feasible", "machine " + std::to_string(m),
             "jobs overload " + (v.certificate ? to_string(*v.certificate) : std::string("?")));
      }
    }
    if (!opt_.underallocated) return;
    if (!underallocated(raw, snap_.machines, opt_.gamma)) {
      fail("global_underallocated", "active set",
           "not " + std::to_string(opt_.gamma) + "-underallocated on " + std::to_string(snap_.machines) +
               " machines");
    }
    // With the trimmed global set 6γ'-underallocated, every machine's share is
    // 1-machine γ'-underallocated.
    const int gamma_prime = opt_.gamma / 24;
    if (snap_.kind == SchedulerKind::edf || gamma_prime < 1) return;
    if (!underallocated(effective, snap_.machines, 6 * gamma_prime)) return;
    for (std::size_t m = 0; m < per_machine.size(); ++m) {
      if (!underallocated(per_machine[m], 1, gamma_prime)) {
        fail("machine_underallocated", "machine " + std::to_string(m),
             "share not 1-machine " + std::to_string(gamma_prime) + "-underallocated");
      }
    }
  }

  const FleetSnapshot& snap_;
  const AuditOptions& opt_;
  std::vector<AuditFailure> failures_;
  std::vector<const MachineJobView*> held_;
};

}  // namespace

std::vector<AuditFailure> audit(const FleetSnapshot& snapshot, const AuditOptions& options) {
  if (options.level == AuditLevel::off) return {};
  return Auditor(snapshot, options).run();
}

}  // namespace resched
