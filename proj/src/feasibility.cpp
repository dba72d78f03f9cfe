#include "resched/feasibility.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <queue>

namespace resched {

namespace {

// Some [a, d) holding more windows than m(d - a) machine-slots; exists whenever
// the instance is infeasible.
std::optional<Window> overloaded_range(std::span<const Job> jobs, int machines) {
  std::vector<Slot> starts;
  for (const auto& j : jobs) starts.push_back(j.window.start);
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
  std::vector<Slot> ends;
  for (Slot a : starts) {
    ends.clear();
    for (const auto& j : jobs) {
      if (j.window.start >= a) ends.push_back(j.window.end);
    }
    std::sort(ends.begin(), ends.end());
    for (std::size_t i = 0; i < ends.size(); ++i) {
      if (i + 1 < ends.size() && ends[i + 1] == ends[i]) continue;
      if (static_cast<Slot>(i + 1) > static_cast<Slot>(machines) * (ends[i] - a)) return Window{a, ends[i]};
    }
  }
  return std::nullopt;
}

}  // namespace

FeasibilityVerdict edf_feasible(std::span<const Job> jobs, int machines) {
  if (machines < 1) throw std::invalid_argument("machine count must be at least 1");
  FeasibilityVerdict verdict;
  const std::size_t n = jobs.size();
  std::vector<std::size_t> by_release(n);
  std::iota(by_release.begin(), by_release.end(), std::size_t{0});
  std::sort(by_release.begin(), by_release.end(), [&](std::size_t l, std::size_t r) {
    const auto& a = jobs[l];
    const auto& b = jobs[r];
    if (a.window.start != b.window.start) return a.window.start < b.window.start;
    return l < r;
  });

  auto later = [&](std::size_t l, std::size_t r) {
    const auto& a = jobs[l];
    const auto& b = jobs[r];
    if (a.window.end != b.window.end) return a.window.end > b.window.end;
    if (a.id != b.id) return a.id > b.id;
    return l > r;
  };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(later)> ready(later);

  verdict.witness.assign(n, Assignment{});
  std::size_t next = 0;
  Slot t = 0;
  while (next < n || !ready.empty()) {
    if (ready.empty()) {
      t = std::max(t, jobs[by_release[next]].window.start);
    }
    while (next < n && jobs[by_release[next]].window.start <= t) ready.push(by_release[next++]);
    for (int m = 0; m < machines && !ready.empty(); ++m) {
      const std::size_t j = ready.top();
      ready.pop();
      if (jobs[j].window.end <= t) {
        verdict.feasible = false;
        verdict.witness.clear();
        verdict.certificate = overloaded_range(jobs, machines);
        return verdict;
      }
      verdict.witness[j] = Assignment{m, t};
    }
    ++t;
  }
  verdict.feasible = true;
  return verdict;
}

FeasibilityVerdict matching_feasible(std::span<const Job> jobs, int machines) {
  if (machines < 1) throw std::invalid_argument("machine count must be at least 1");
  std::size_t total_span = 0;
  for (const auto& j : jobs) total_span += static_cast<std::size_t>(j.window.span());
  if (jobs.size() * total_span > kMatchingLimit) {
    throw InstanceTooLarge("matching oracle limited to |jobs| * sum(spans) <= 1e6");
  }

  // Right-hand vertices: every (machine, slot) pair inside some window.
  std::map<Assignment, std::size_t> right_index;
  std::vector<std::vector<std::size_t>> adjacent(jobs.size());
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    for (Slot s = jobs[j].window.start; s < jobs[j].window.end; ++s) {
      for (int m = 0; m < machines; ++m) {
        auto [it, fresh] = right_index.try_emplace(Assignment{m, s}, right_index.size());
        adjacent[j].push_back(it->second);
      }
    }
  }
  std::vector<Assignment> right(right_index.size());
  for (const auto& [a, i] : right_index) right[i] = a;

  constexpr std::size_t kFree = static_cast<std::size_t>(-1);
  std::vector<std::size_t> match_right(right.size(), kFree);
  std::vector<char> visited;
  std::function<bool(std::size_t)> augment = [&](std::size_t j) {
    for (std::size_t r : adjacent[j]) {
      if (visited[r]) continue;
      visited[r] = 1;
      if (match_right[r] == kFree || augment(match_right[r])) {
        match_right[r] = j;
        return true;
      }
    }
    return false;
  };

  FeasibilityVerdict verdict;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    visited.assign(right.size(), 0);
    if (!augment(j)) {
      verdict.feasible = false;
      verdict.certificate = overloaded_range(jobs, machines);
      return verdict;
    }
  }
  verdict.feasible = true;
  verdict.witness.assign(jobs.size(), Assignment{});
  for (std::size_t r = 0; r < right.size(); ++r) {
    if (match_right[r] != kFree) verdict.witness[match_right[r]] = right[r];
  }
  return verdict;
}

Window grid_window(const Window& w, int gamma) {
  const Slot g = gamma;
  return {(w.start + g - 1) / g, w.end / g};
}

bool underallocated(std::span<const Job> jobs, int machines, int gamma) {
  if (gamma < 1) throw std::invalid_argument("gamma must be at least 1");
  std::vector<Job> grid;
  grid.reserve(jobs.size());
  for (const auto& j : jobs) {
    const Window g = grid_window(j.window, gamma);
    if (g.end <= g.start) return false;
    grid.push_back({j.id, g});
  }
  return edf_feasible(grid, machines).feasible;
}

}  // namespace resched
