#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <vector>

#include "resched/core.hpp"

namespace resched {

/// Window of span 2^log_span whose start is a multiple of its span.
struct AlignedWindow {
  Slot start = 0;
  int log_span = 0;

  constexpr Slot span() const { return Slot{1} << log_span; }
  constexpr Slot end() const { return start + span(); }
  constexpr Window window() const { return {start, end()}; }
  constexpr bool contains(Slot s) const { return start <= s && s < end(); }
  constexpr bool contains(const AlignedWindow& o) const { return start <= o.start && o.end() <= end(); }
  friend constexpr auto operator<=>(const AlignedWindow&, const AlignedWindow&) = default;
};

/// Highest level the scheduler distinguishes. L_3 = 2^64 exceeds every admissible span.
inline constexpr int kMaxLevel = 2;

/// lg L_ℓ for ℓ >= 1, saturating at 64: L_1 = 2^5 and L_{ℓ+1} = 2^{L_ℓ/4}.
int threshold_log(int level);

struct LevelParams {
  int level = 0;
  /// L_ℓ, the size of a level-ℓ interval (0 for the base level, which has no intervals).
  std::uint64_t interval_size = 0;
  /// L_{ℓ+1}, the largest span handled at this level; saturates at UINT64_MAX.
  std::uint64_t span_bound = 0;
};

LevelParams level_params(int level);

/// 0 for spans up to 32, otherwise the ℓ with L_ℓ < span <= L_{ℓ+1}.
int level_of(std::uint64_t span);

/// Exponent range [first, last] of aligned spans living at `level` (level >= 1).
int first_log_span(int level);
int last_log_span(int level);
inline int log_span_count(int level) { return last_log_span(level) - first_log_span(level) + 1; }

/// lg of the interval size for level >= 1.
inline int interval_log(int level) { return threshold_log(level); }

struct IntervalId {
  int level = 1;
  Slot index = 0;

  Slot size() const { return Slot{1} << interval_log(level); }
  Slot start() const { return index * size(); }
  AlignedWindow window() const { return {start(), interval_log(level)}; }
  friend constexpr auto operator<=>(const IntervalId&, const IntervalId&) = default;
};

/// Level-`level` interval containing slot `s`.
IntervalId interval_at(int level, Slot s);

bool is_aligned(const Window& w);

/// The window itself when it is aligned.
std::optional<AlignedWindow> as_aligned(const Window& w);

/// Largest aligned subwindow of `w`; leftmost among equals.
AlignedWindow align_window(const Window& w);

/// Intervals covering a level-ℓ window (ℓ >= 1), left to right.
std::vector<IntervalId> intervals_of(const AlignedWindow& w);

/// Largest power of two not exceeding `value` (value >= 1).
Slot floor_pow2(Slot value);

/// Leftmost aligned subwindow of `w` with span min(span(w), max_span); `max_span` is
/// rounded down to a power of two.
AlignedWindow trim_window(const AlignedWindow& w, Slot max_span);

/// Necessary condition for m-machine γ-underallocation of aligned jobs: for every job
/// window W, at most m|W|/γ jobs of span <= |W| overlap W.
bool audit_counting_bound(std::span<const AlignedWindow> windows, int machines, int gamma);

}  // namespace resched
