#include "resched/alignment.hpp"

#include <algorithm>
#include <bit>
#include <limits>

namespace resched {

int threshold_log(int level) {
  if (level < 1) throw std::invalid_argument("thresholds start at level 1");
  int log = 5;
  for (int l = 1; l < level && log < 64; ++l) {
    // lg L_{l+1} = L_l / 4 = 2^{lg L_l - 2}
    log = log - 2 >= 7 ? 64 : std::min(64, 1 << (log - 2));
  }
  return log;
}

LevelParams level_params(int level) {
  LevelParams p;
  p.level = level;
  auto pow2_saturating = [](int log) {
    return log >= 64 ? std::numeric_limits<std::uint64_t>::max() : std::uint64_t{1} << log;
  };
  p.interval_size = level == 0 ? 0 : pow2_saturating(threshold_log(level));
  p.span_bound = pow2_saturating(threshold_log(level + 1));
  return p;
}

int level_of(std::uint64_t span) {
  if (span <= 32) return 0;
  const int ceil_log = static_cast<int>(std::bit_width(span - 1));
  for (int level = 1;; ++level) {
    if (ceil_log <= threshold_log(level + 1)) return level;
  }
}

int first_log_span(int level) { return level == 0 ? 0 : threshold_log(level) + 1; }

int last_log_span(int level) { return std::min(threshold_log(level + 1), 62); }

IntervalId interval_at(int level, Slot s) { return {level, s >> interval_log(level)}; }

bool is_aligned(const Window& w) {
  const Slot span = w.span();
  return span > 0 && std::has_single_bit(static_cast<std::uint64_t>(span)) && w.start % span == 0;
}

std::optional<AlignedWindow> as_aligned(const Window& w) {
  if (!is_aligned(w)) return std::nullopt;
  return AlignedWindow{w.start, std::countr_zero(static_cast<std::uint64_t>(w.span()))};
}

Slot floor_pow2(Slot value) { return static_cast<Slot>(std::bit_floor(static_cast<std::uint64_t>(value))); }

AlignedWindow align_window(const Window& w) {
  if (!is_valid(w)) throw std::invalid_argument("invalid window " + to_string(w));
  for (int log = std::bit_width(static_cast<std::uint64_t>(w.span())) - 1; log >= 0; --log) {
    const Slot p = Slot{1} << log;
    const Slot first = (w.start + p - 1) / p * p;
    if (first + p <= w.end) return {first, log};
  }
  return {w.start, 0};  // unreachable: span-1 windows always fit
}

std::vector<IntervalId> intervals_of(const AlignedWindow& w) {
  const int level = level_of(static_cast<std::uint64_t>(w.span()));
  if (level < 1) throw std::invalid_argument("base-level windows have no intervals");
  const int ilog = interval_log(level);
  std::vector<IntervalId> out;
  const Slot first = w.start >> ilog;
  const Slot count = w.span() >> ilog;
  out.reserve(static_cast<std::size_t>(count));
  for (Slot i = 0; i < count; ++i) out.push_back({level, first + i});
  return out;
}

AlignedWindow trim_window(const AlignedWindow& w, Slot max_span) {
  const Slot cap = floor_pow2(std::max<Slot>(max_span, 1));
  if (w.span() <= cap) return w;
  return {w.start, std::countr_zero(static_cast<std::uint64_t>(cap))};
}

bool audit_counting_bound(std::span<const AlignedWindow> windows, int machines, int gamma) {
  for (const auto& w : windows) {
    __int128 count = 0;
    for (const auto& o : windows) {
      if (o.log_span <= w.log_span && o.start < w.end() && w.start < o.end()) ++count;
    }
    if (count * gamma > static_cast<__int128>(machines) * w.span()) return false;
  }
  return true;
}

}  // namespace resched
