#include <doctest.h>

#include <algorithm>
#include <set>

#include "resched/fleet.hpp"
#include "resched/traces.hpp"
#include "resched/verifier.hpp"

using namespace resched;

namespace {

FleetSnapshot sample() {
  auto s = open(SchedulerKind::reservation, {1, 64});
  for (int i = 0; i < 3; ++i) s->apply(Request::insert("w" + std::to_string(i), {0, 64}));
  s->apply(Request::insert("v", {0, 128}));
  s->apply(Request::insert("u", {0, 32}));
  return s->snapshot();
}

std::set<std::string> names(const FleetSnapshot& snap, AuditLevel level = AuditLevel::invariants, int gamma = 64,
                            bool underallocated = true) {
  AuditOptions opt;
  opt.level = level;
  opt.gamma = gamma;
  opt.underallocated = underallocated;
  std::set<std::string> out;
  for (const auto& f : audit(snap, opt)) out.insert(f.invariant);
  return out;
}

BookView& book(FleetSnapshot& snap, int level, Slot index) {
  for (auto& b : snap.per_machine[0].books) {
    if (b.level == level && b.index == index) return b;
  }
  FAIL("missing book");
  return snap.per_machine[0].books.front();
}

JobView synthetic(const std::string& id, Window w, Assignment a) {
  JobView j;
  j.id = id;
  j.raw = w;
  j.aligned = align_window(w);
  j.effective = j.aligned;
  j.assignment = a;
  return j;
}

}  // namespace

TEST_CASE("clean schedules pass every check") {
  CHECK(names(sample()).empty());
  CHECK(names(sample(), AuditLevel::full_oracle, 4).empty());
  AuditOptions off;
  off.level = AuditLevel::off;
  FleetSnapshot broken = sample();
  broken.jobs[0].assignment.machine = 7;
  CHECK(audit(broken, off).empty());
}

std::size_t count_of(const FleetSnapshot& snap, const std::string& invariant) {
  AuditOptions opt;
  opt.gamma = 64;
  const auto failures = audit(snap, opt);
  return static_cast<std::size_t>(std::count_if(failures.begin(), failures.end(),
                                                [&](const AuditFailure& f) { return f.invariant == invariant; }));
}

TEST_CASE("validity") {
  FleetSnapshot snap = sample();
  // two jobs in one slot, consistently in both views
  snap.jobs[1].assignment = snap.jobs[0].assignment;
  for (auto& j : snap.per_machine[0].jobs) {
    if (j.job == snap.jobs[1].handle) j.slot = snap.jobs[0].assignment.slot;
  }
  CHECK(count_of(snap, "validity") == 1);
  snap = sample();
  snap.jobs[1].assignment = snap.jobs[0].assignment;
  CHECK(names(snap).contains("validity"));
  snap = sample();
  snap.jobs[0].assignment.machine = 3;
  CHECK(names(snap).contains("validity"));
  snap = sample();
  snap.jobs[0].assignment.slot = 5000;
  CHECK(names(snap).contains("validity"));
}

TEST_CASE("window containment") {
  FleetSnapshot snap = sample();
  snap.jobs[0].aligned = {0, 3};
  CHECK(names(snap).contains("window_containment"));
  snap = sample();
  snap.jobs[0].effective = {0, 9};
  CHECK(names(snap).contains("window_containment"));
}

TEST_CASE("balance") {
  auto s = open(SchedulerKind::reservation, {2, 64});
  for (int i = 0; i < 4; ++i) s->apply(Request::insert("j" + std::to_string(i), {0, 32}));
  FleetSnapshot snap = s->snapshot();
  CHECK(names(snap).empty());
  auto on_one = std::find_if(snap.jobs.begin(), snap.jobs.end(), [](const JobView& j) { return j.assignment.machine == 1; });
  REQUIRE(on_one != snap.jobs.end());
  on_one->assignment = {0, 40};
  CHECK(names(snap).contains("balance"));
}

TEST_CASE("invariant 1") {
  FleetSnapshot snap = sample();
  BookView& left = book(snap, 1, 0);
  BookView& right = book(snap, 1, 1);
  REQUIRE(left.reserved[0] == 4);  // 1 + 2·3/2
  REQUIRE(right.reserved[0] == 4);
  ++left.reserved[0];
  --right.reserved[0];
  const auto got = names(snap);
  CHECK(got.contains("invariant1_split"));
  CHECK_FALSE(got.contains("invariant1_total"));

  // one reservation short of 2x + 2^k
  snap = sample();
  --book(snap, 1, 1).reserved[0];
  CHECK(count_of(snap, "invariant1_total") == 1);

  snap = sample();
  for (auto& g : snap.per_machine[0].groups) {
    if (g.window == AlignedWindow{0, 6}) ++g.jobs;
  }
  CHECK(names(snap).contains("invariant1_total"));
}

TEST_CASE("base reservation") {
  FleetSnapshot snap = sample();
  BookView& b = book(snap, 1, 0);
  REQUIRE(b.reserved[2] == 1);  // [0, 256) has no jobs
  b.reserved[2] = 0;
  CHECK(names(snap).contains("base_reservation"));
  snap = sample();
  book(snap, 1, 0).reserved[2] = 2;
  CHECK(names(snap).contains("base_reservation"));
}

TEST_CASE("allowance and priority") {
  FleetSnapshot snap = sample();
  std::set<Slot> occupied;
  for (const auto& j : snap.per_machine[0].jobs) occupied.insert(j.slot);

  BookView& b = book(snap, 1, 0);
  auto assigned = std::find_if(b.owner.begin(), b.owner.end(), [](std::int8_t o) { return o >= 0; });
  REQUIRE(assigned != b.owner.end());
  *assigned = 9;
  CHECK(names(snap).contains("allowance"));

  // a slot held by a level-0 job cannot serve a reservation
  snap = sample();
  const auto& held = snap.per_machine[0].jobs;
  const auto low = std::find_if(held.begin(), held.end(), [](const MachineJobView& j) { return j.level == 0; });
  REQUIRE(low != held.end());
  book(snap, 1, 0).owner[static_cast<std::size_t>(low->slot)] = 0;
  CHECK(names(snap).contains("allowance"));

  snap = sample();
  BookView& p = book(snap, 1, 0);
  bool dropped = false;
  for (std::size_t off = 0; off < p.owner.size() && !dropped; ++off) {
    if (p.owner[off] >= 0 && !occupied.contains(static_cast<Slot>(off))) {
      p.owner[off] = -1;
      dropped = true;
    }
  }
  REQUIRE(dropped);
  CHECK(names(snap).contains("priority"));
}

TEST_CASE("jobs sit on slots fulfilled for their window") {
  FleetSnapshot snap = sample();
  const auto& jobs = snap.per_machine[0].jobs;
  auto level1 = std::find_if(jobs.begin(), jobs.end(), [](const MachineJobView& j) { return j.level == 1; });
  REQUIRE(level1 != jobs.end());
  REQUIRE(level1->slot < 32);
  book(snap, 1, 0).owner[static_cast<std::size_t>(level1->slot)] = 2;
  CHECK(names(snap).contains("job_on_assigned_slot"));
}

TEST_CASE("reservation space is gated on the precondition") {
  FleetSnapshot snap = sample();
  for (Slot i : {0, 1}) {
    for (auto& o : book(snap, 1, i).owner) {
      if (o == 0) o = -1;
    }
  }
  CHECK(names(snap).contains("reservation_space"));
  CHECK_FALSE(names(snap, AuditLevel::invariants, 64, false).contains("reservation_space"));
}

TEST_CASE("counting bound") {
  FleetSnapshot snap = sample();
  for (int i = 0; i < 20; ++i) snap.jobs.push_back(synthetic("x" + std::to_string(i), {0, 64}, {0, 100 + i}));
  CHECK(names(snap).contains("counting_bound"));
  CHECK_FALSE(names(snap, AuditLevel::invariants, 64, false).contains("counting_bound"));
  CHECK_FALSE(names(snap, AuditLevel::invariants, 2).contains("counting_bound"));
}

TEST_CASE("oracle checks") {
  FleetSnapshot edf;
  edf.kind = SchedulerKind::edf;
  edf.machines = 2;
  edf.per_machine.resize(2);
  edf.jobs = {synthetic("a", {0, 1}, {0, 0}), synthetic("b", {0, 1}, {0, 1})};
  auto got = names(edf, AuditLevel::full_oracle, 1);
  CHECK(got.contains("machine_feasible"));
  CHECK_FALSE(got.contains("global_underallocated"));
  CHECK_FALSE(names(edf, AuditLevel::invariants, 1).contains("machine_feasible"));

  got = names(edf, AuditLevel::full_oracle, 8);
  CHECK(got.contains("global_underallocated"));
  CHECK_FALSE(names(edf, AuditLevel::full_oracle, 8, false).contains("global_underallocated"));

  // 70 jobs in a span-64 window are 6-underallocated on 8 machines but do not
  // fit on one
  FleetSnapshot crowded;
  crowded.kind = SchedulerKind::naive;
  crowded.machines = 8;
  crowded.per_machine.resize(8);
  for (auto& m : crowded.per_machine) m.reservations = false;
  for (int i = 0; i < 70; ++i) crowded.jobs.push_back(synthetic("c" + std::to_string(100 + i), {0, 64}, {0, i}));
  got = names(crowded, AuditLevel::full_oracle, 24);
  CHECK(got.contains("machine_underallocated"));
}

TEST_CASE("failure text names the check and request") {
  FleetSnapshot snap = sample();
  snap.jobs[1].assignment = snap.jobs[0].assignment;
  AuditOptions opt;
  opt.gamma = 64;
  opt.request_index = 17;
  const auto failures = audit(snap, opt);
  REQUIRE_FALSE(failures.empty());
  CHECK(failures[0].request_index == 17);
  const std::string text = to_string(failures[0]);
  CHECK(text.find("request 17 validity") == 0);
}

TEST_CASE("random replays audit cleanly at full strength") {
  for (SchedulerKind kind : {SchedulerKind::reservation, SchedulerKind::naive, SchedulerKind::edf}) {
    RandomTraceParams p;
    p.n_max = 30;
    p.machines = 2;
    p.gamma = 48;
    p.seed = 21;
    p.churn = true;
    const Trace trace = gen_random_underallocated(p);
    auto s = open(kind, {2, 48});
    std::size_t failures = 0;
    for (std::size_t i = 0; i < trace.requests.size(); ++i) {
      s->apply(trace.requests[i]);
      AuditOptions opt;
      opt.level = AuditLevel::full_oracle;
      opt.gamma = 48;
      opt.request_index = i;
      failures += audit(s->snapshot(), opt).size();
    }
    CHECK(failures == 0);
  }
}
