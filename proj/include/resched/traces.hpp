#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "resched/core.hpp"
#include "resched/scheduler.hpp"

namespace resched {

struct Trace {
  /// Header key=value pairs, in file order.
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<Request> requests;

  std::optional<std::string> meta(const std::string& key) const;
  void set_meta(const std::string& key, std::string value);
  bool declared_underallocated() const { return meta("underallocated") == "true"; }
};

class TraceFormatError : public std::runtime_error {
 public:
  TraceFormatError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Header line "# k=v k=v", then one "op=insert id=.. a=.. d=.." or "op=delete id=.." per line.
std::string format_trace(const Trace& trace);
Trace parse_trace(const std::string& text);
Trace read_trace_file(const std::string& path);
void write_trace_file(const std::string& path, const Trace& trace);

/// Checks that deletes name active ids, inserts are fresh and windows valid.
/// Returns the index of the first bad request.
std::optional<std::size_t> first_unreplayable(const Trace& trace);

/// Index of the first request after which the active set is not
/// underallocated(·, machines, gamma); nullopt when every prefix passes.
std::optional<std::size_t> first_violation(const Trace& trace, int machines, int gamma);

struct RandomTraceParams {
  std::size_t n_max = 100;
  int machines = 1;
  int gamma = 192;
  std::uint64_t seed = 1;
  int max_span_log = 12;        // spans lie in [2γ, 2^max_span_log], capped at 2^16
  std::size_t length = 0;       // request count; 0 = 3·n_max
  bool aligned = false;         // power-of-two spans on aligned starts
  bool churn = false;           // n swings between n_max and n_max/8 repeatedly
  Slot horizon = 0;             // window starts lie in [0, horizon); 0 = derived
};

/// Random insert/delete mix with log-uniform spans; every insert is
/// rejection-sampled so each prefix stays underallocated(·, m, γ).
Trace gen_random_underallocated(const RandomTraceParams& params);

/// η = s/2 jobs with windows [j, j+2), then η rounds of: insert [0,1), delete
/// it, insert [η, η+1), delete it.
Trace gen_realloc_adversary(std::size_t s);

/// Adaptive construction against `target` (which must be empty and is driven
/// by the generator): s/(6m) rounds of inserting 2m jobs in [0,2), deleting the
/// jobs on the first m/2 machines, inserting m jobs in [0,1), deleting the rest.
/// Requires m > 1 and 6m | s.
Trace gen_migration_adversary(int machines, std::size_t s, Scheduler& target);

}  // namespace resched
