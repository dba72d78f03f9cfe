#include <doctest.h>

#include <map>

#include "resched/fleet.hpp"
#include "resched/traces.hpp"
#include "resched/verifier.hpp"

using namespace resched;

namespace {

std::vector<int> per_machine_counts(const Scheduler& s, const Window& raw) {
  const FleetSnapshot snap = s.snapshot();
  std::vector<int> counts(static_cast<std::size_t>(snap.machines), 0);
  for (const auto& j : snap.jobs) {
    if (j.raw == raw) ++counts[static_cast<std::size_t>(j.assignment.machine)];
  }
  return counts;
}

}  // namespace

TEST_CASE("delegation is round robin per window") {
  ReservationFleet fleet({3, 64}, SchedulerKind::reservation, true);
  for (int i = 0; i < 5; ++i) fleet.apply(Request::insert("j" + std::to_string(i), {0, 32}));
  CHECK(per_machine_counts(fleet, {0, 32}) == std::vector<int>{2, 2, 1});
  fleet.apply(Request::insert("j5", {0, 32}));
  CHECK(fleet.assignment_of("j5")->machine == 2);
  CHECK(per_machine_counts(fleet, {0, 32}) == std::vector<int>{2, 2, 2});
}

TEST_CASE("delete rebalances with one migration") {
  ReservationFleet fleet({2, 64}, SchedulerKind::reservation, true);
  for (int i = 0; i < 4; ++i) fleet.apply(Request::insert("j" + std::to_string(i), {0, 32}));
  REQUIRE(fleet.assignment_of("j0")->machine == 0);
  REQUIRE(per_machine_counts(fleet, {0, 32}) == std::vector<int>{2, 2});
  const Outcome out = fleet.apply(Request::erase("j0"));
  CHECK(out.record.migrations == 1);
  CHECK(out.record.reallocations == 1);
  CHECK_FALSE(out.record.rebuilt);
  CHECK(per_machine_counts(fleet, {0, 32}) == std::vector<int>{2, 1});

  // deleting from the machine that is already over needs no migration
  const int m3 = fleet.assignment_of("j3")->machine;
  const std::string other = m3 == 0 ? "j3" : "j1";
  const Outcome again = fleet.apply(Request::erase(other));
  CHECK(again.record.migrations == 0);
  CHECK(per_machine_counts(fleet, {0, 32}) == std::vector<int>{1, 1});
}

TEST_CASE("one machine never migrates") {
  RandomTraceParams p;
  p.n_max = 60;
  p.machines = 1;
  p.gamma = 16;
  p.seed = 3;
  p.churn = true;
  const Trace trace = gen_random_underallocated(p);
  ReservationFleet fleet({1, 16}, SchedulerKind::reservation, true);
  for (const auto& r : trace.requests) fleet.apply(r);
  CHECK(fleet.ledger().total_migrations() == 0);
  for (const auto& rec : fleet.ledger().records()) CHECK(rec.rebuild_migrations == 0);
}

TEST_CASE("capacity rebuilds keep windows balanced and audits clean") {
  for (int m : {2, 3}) {
    RandomTraceParams p;
    p.n_max = 80;
    p.machines = m;
    p.gamma = 32;
    p.seed = 100 + static_cast<std::uint64_t>(m);
    p.churn = true;
    const Trace trace = gen_random_underallocated(p);
    for (SchedulerKind kind : {SchedulerKind::reservation, SchedulerKind::naive}) {
      auto s = open(kind, {m, 32});
      std::size_t failures = 0;
      for (std::size_t i = 0; i < trace.requests.size(); ++i) {
        const Outcome out = s->apply(trace.requests[i]);
        if (!out.record.rebuilt) CHECK(out.record.migrations <= 1);
        AuditOptions opt;
        opt.gamma = 32;
        opt.request_index = i;
        failures += audit(s->snapshot(), opt).size();
      }
      CHECK(failures == 0);
      if (kind == SchedulerKind::reservation) CHECK(s->ledger().rebuilds() > 0);
    }
  }
}

TEST_CASE("outcome changes describe the assignment diff") {
  RandomTraceParams p;
  p.n_max = 40;
  p.machines = 2;
  p.gamma = 16;
  p.seed = 9;
  const Trace trace = gen_random_underallocated(p);
  auto s = open(SchedulerKind::reservation, {2, 16});
  std::map<std::string, Assignment> mirror;
  for (const auto& r : trace.requests) {
    const Outcome out = s->apply(r);
    for (const auto& c : out.changes) {
      if (c.after) {
        mirror[c.job_id] = *c.after;
      } else {
        mirror.erase(c.job_id);
      }
    }
    std::map<std::string, Assignment> truth;
    for (const auto& j : s->snapshot().jobs) truth[j.id] = j.assignment;
    CHECK(mirror == truth);
  }
}

TEST_CASE("replay is deterministic") {
  RandomTraceParams p;
  p.n_max = 50;
  p.machines = 2;
  p.gamma = 8;
  p.seed = 77;
  const Trace trace = gen_random_underallocated(p);
  std::string first;
  for (int run = 0; run < 2; ++run) {
    auto s = open(SchedulerKind::reservation, {2, 8});
    for (const auto& r : trace.requests) s->apply(r);
    if (run == 0) {
      first = s->ledger().to_csv();
    } else {
      CHECK(s->ledger().to_csv() == first);
    }
  }
}

TEST_CASE("fleet errors leave the state unchanged") {
  auto s = open(SchedulerKind::reservation, {1, 1});
  s->apply(Request::insert("a", {0, 1}));
  CHECK_THROWS_AS(s->apply(Request::insert("a", {0, 4})), DuplicateJobId);
  CHECK_THROWS_AS(s->apply(Request::erase("zz")), UnknownJobId);
  CHECK_THROWS_AS(s->apply(Request::insert("b", {0, 1})), NoFulfilledSlot);
  CHECK(s->active() == 1);
  CHECK_FALSE(s->assignment_of("b").has_value());
  CHECK(s->ledger().size() == 1);
  CHECK(to_string(SchedulerKind::naive) == std::string("naive"));
  CHECK(parse_scheduler_kind("edf") == SchedulerKind::edf);
  CHECK_THROWS(parse_scheduler_kind("lifo"));
}

TEST_CASE("a failed request leaves the fleet as it was") {
  for (SchedulerKind kind : {SchedulerKind::reservation, SchedulerKind::naive}) {
    auto s = open(kind, {2, 1});
    std::size_t placed = 0;
    std::string last_csv;
    FleetSnapshot last;
    bool threw = false;
    for (int i = 0; i < 400 && !threw; ++i) {
      const Window w = i % 3 ? Window{0, 64} : Window{static_cast<Slot>(i % 40), static_cast<Slot>(i % 40 + 1)};
      try {
        s->apply(Request::insert("j" + std::to_string(i), w));
        ++placed;
        last = s->snapshot();
        last_csv = s->ledger().to_csv();
      } catch (const SchedulerError&) {
        threw = true;
      }
    }
    REQUIRE(threw);
    CHECK(s->active() == placed);
    const FleetSnapshot now = s->snapshot();
    REQUIRE(now.jobs.size() == last.jobs.size());
    for (std::size_t i = 0; i < now.jobs.size(); ++i) {
      CHECK(now.jobs[i].id == last.jobs[i].id);
      CHECK(now.jobs[i].assignment == last.jobs[i].assignment);
    }
    CHECK(s->ledger().to_csv() == last_csv);
    AuditOptions opt;
    opt.underallocated = false;
    CHECK(audit(now, opt).empty());
    s->apply(Request::erase("j1"));
    CHECK(audit(s->snapshot(), opt).empty());
  }
}
