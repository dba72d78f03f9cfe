#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "resched/core.hpp"

namespace resched {

struct FeasibilityVerdict {
  bool feasible = false;
  /// When feasible: one assignment per input job, in input order.
  std::vector<Assignment> witness;
  /// When infeasible: a range [a, d) holding more job windows than m(d - a).
  std::optional<Window> certificate;
};

class InstanceTooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Earliest-deadline-first sweep; exact for unit jobs with integral windows.
/// Equal deadlines are broken by job id.
FeasibilityVerdict edf_feasible(std::span<const Job> jobs, int machines);

/// Maximum bipartite matching of jobs against (machine, slot) pairs.
/// Throws InstanceTooLarge when |jobs| * (sum of spans) exceeds kMatchingLimit.
FeasibilityVerdict matching_feasible(std::span<const Job> jobs, int machines);

inline constexpr std::size_t kMatchingLimit = 1'000'000;

/// Grid-restricted γ-underallocation: jobs stretched to length γ and started on
/// multiples of γ must fit. Sufficient for γ-underallocation; exact when γ = 1.
bool underallocated(std::span<const Job> jobs, int machines, int gamma);

/// Window [ceil(a/γ), floor(d/γ)) of γ-sized grid cells inside `w`; may be empty.
Window grid_window(const Window& w, int gamma);

}  // namespace resched
