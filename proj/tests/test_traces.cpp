#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "resched/feasibility.hpp"
#include "resched/traces.hpp"

using namespace resched;

namespace {

std::size_t line_of(const std::string& text) {
  try {
    parse_trace(text);
  } catch (const TraceFormatError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("format and parse round trip") {
  Trace t;
  t.metadata = {{"generator", "hand"}, {"m", "2"}};
  t.requests = {Request::insert("x", {0, 8}), Request::insert("y-1", {3, 5}), Request::erase("x")};
  const std::string text = format_trace(t);
  CHECK(text == "# generator=hand m=2\nop=insert id=x a=0 d=8\nop=insert id=y-1 a=3 d=5\nop=delete id=x\n");
  const Trace back = parse_trace(text);
  CHECK(back.metadata == t.metadata);
  CHECK(back.requests == t.requests);
  CHECK(format_trace(back) == text);
  CHECK(back.meta("m") == "2");
  CHECK_FALSE(back.meta("gamma").has_value());
  CHECK_FALSE(back.declared_underallocated());

  const auto path = std::filesystem::temp_directory_path() / "resched_roundtrip.trace";
  write_trace_file(path.string(), t);
  CHECK(format_trace(read_trace_file(path.string())) == text);
  std::filesystem::remove(path);
  CHECK_THROWS(read_trace_file("/nonexistent/dir/none.trace"));
}

TEST_CASE("parse errors carry line numbers") {
  CHECK(line_of("op=insert id=a a=0 d=4\nop=frob id=b\n") == 2);
  CHECK(line_of("op=insert id=a a=0\n") == 1);
  CHECK(line_of("op=insert id=a a=4 d=4\n") == 1);
  CHECK(line_of("op=insert id=a a=x d=4\n") == 1);
  CHECK(line_of("op=insert id=a a=0 d=4 id=b\n") == 1);
  CHECK(line_of("op=insert id=a a=0 d=4 w=3\n") == 1);
  CHECK(line_of("op=delete id=a d=3\n") == 1);
  CHECK(line_of("op=insert id=a a=0 d=4\n\nop=delete id=a\n") == 2);
  CHECK(line_of("op=insert id=a a=0 d=4\n# late=header\n") == 2);
  CHECK(line_of("op=insert a=0 d=4\n") == 1);
  CHECK(line_of("op=insert id=a a=-1 d=4\n") == 1);
  CHECK(line_of("op=insert id=a a=0 d=4\r\nop=delete id=a\r\n") == 0);
  CHECK(parse_trace("").requests.empty());
}

TEST_CASE("replayability") {
  Trace t;
  t.requests = {Request::insert("a", {0, 4}), Request::erase("a"), Request::erase("a")};
  CHECK(first_unreplayable(t) == 2);
  t.requests = {Request::insert("a", {0, 4}), Request::erase("a"), Request::insert("a", {0, 4})};
  CHECK(first_unreplayable(t) == 2);
  t.requests = {Request::insert("a", {0, 4}), Request::erase("a")};
  CHECK_FALSE(first_unreplayable(t).has_value());
}

TEST_CASE("random generator is deterministic and underallocated") {
  RandomTraceParams p;
  p.n_max = 40;
  p.machines = 2;
  p.gamma = 8;
  p.seed = 5;
  const Trace a = gen_random_underallocated(p);
  const Trace b = gen_random_underallocated(p);
  CHECK(format_trace(a) == format_trace(b));
  CHECK(a.requests.size() == 3 * p.n_max);
  CHECK(a.declared_underallocated());
  CHECK(a.meta("seed") == "5");
  CHECK_FALSE(first_unreplayable(a).has_value());
  CHECK_FALSE(first_violation(a, 2, 8).has_value());
  p.seed = 6;
  CHECK(format_trace(gen_random_underallocated(p)) != format_trace(a));

  p.aligned = true;
  for (const auto& r : gen_random_underallocated(p).requests) {
    if (r.kind != RequestKind::insert) continue;
    const Slot span = r.window.span();
    CHECK((span & (span - 1)) == 0);
    CHECK(r.window.start % span == 0);
  }

  p.aligned = false;
  p.churn = true;
  const Trace c = gen_random_underallocated(p);
  CHECK(c.meta("generator") == "churn");
  CHECK(c.requests.size() == 8 * p.n_max);
  CHECK_FALSE(first_violation(c, 2, 8).has_value());

  p.n_max = 0;
  CHECK(gen_random_underallocated(p).requests.empty());

  p.n_max = 10;
  p.horizon = 1024;
  CHECK_THROWS_AS(gen_random_underallocated(p), std::invalid_argument);
  p.horizon = 0;
  p.gamma = 4096;
  CHECK_THROWS_AS(gen_random_underallocated(p), std::invalid_argument);
}

TEST_CASE("reallocation adversary shape") {
  const Trace t = gen_realloc_adversary(8);
  REQUIRE(t.requests.size() == 4 + 4 * 4);
  CHECK(t.requests[0] == Request::insert("b0", {0, 2}));
  CHECK(t.requests[3] == Request::insert("b3", {3, 5}));
  CHECK(t.requests[4] == Request::insert("l0", {0, 1}));
  CHECK(t.requests[5] == Request::erase("l0"));
  CHECK(t.requests[6] == Request::insert("r0", {4, 5}));
  CHECK(t.requests[7] == Request::erase("r0"));
  CHECK(gen_realloc_adversary(4).requests.size() == 2 + 8);
  CHECK_THROWS(gen_realloc_adversary(7));
  CHECK_THROWS(gen_realloc_adversary(2));

  // one machine fits every prefix, but no slack is left for gamma = 2
  CHECK_FALSE(first_violation(t, 1, 1).has_value());
  CHECK(first_violation(t, 1, 2).has_value());
}

TEST_CASE("migration adversary") {
  auto edf = open(SchedulerKind::edf, {2, 1});
  const Trace t = gen_migration_adversary(2, 24, *edf);
  CHECK(t.requests.size() == 24);
  CHECK(edf->active() == 0);
  CHECK_FALSE(first_unreplayable(t).has_value());
  CHECK_FALSE(first_violation(t, 2, 1).has_value());

  // the adaptive trace is a plain trace afterwards: replaying it gives the same costs
  auto again = open(SchedulerKind::edf, {2, 1});
  for (const auto& r : t.requests) again->apply(r);
  CHECK(again->ledger().to_csv() == edf->ledger().to_csv());

  auto fresh = open(SchedulerKind::edf, {2, 1});
  CHECK_THROWS_AS(gen_migration_adversary(2, 13, *fresh), std::invalid_argument);
  CHECK_THROWS_AS(gen_migration_adversary(3, 20, *fresh), std::invalid_argument);
  auto single = open(SchedulerKind::edf, {1, 1});
  CHECK_THROWS_AS(gen_migration_adversary(1, 12, *single), std::invalid_argument);
  fresh->apply(Request::insert("x", {5, 9}));
  CHECK_THROWS_AS(gen_migration_adversary(2, 12, *fresh), std::invalid_argument);
}
