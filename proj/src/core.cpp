#include "resched/core.hpp"

#include <sstream>

namespace resched {

std::string to_string(const Window& w) {
  return "[" + std::to_string(w.start) + ", " + std::to_string(w.end) + ")";
}

void validate(const Config& config) {
  if (config.machines < 1) throw std::invalid_argument("machine count must be at least 1");
  if (config.gamma < 1) throw std::invalid_argument("gamma must be at least 1");
}

RequestCost tally_changes(std::span<const AssignmentChange> changes) {
  RequestCost cost;
  for (const auto& c : changes) {
    if (!c.before || !c.after || *c.before == *c.after) continue;
    ++cost.reallocations;
    if (c.before->machine != c.after->machine) ++cost.migrations;
  }
  return cost;
}

const RequestRecord& CostLedger::append(RequestRecord record) {
  record.index = records_.size();
  reallocations_ += record.reallocations;
  migrations_ += record.migrations;
  rebuild_reallocations_ += record.rebuild_reallocations;
  rebuild_migrations_ += record.rebuild_migrations;
  if (record.rebuilt) ++rebuilds_;
  records_.push_back(std::move(record));
  return records_.back();
}

std::string CostLedger::to_csv() const {
  std::ostringstream out;
  out << "index,op,id,n,delta,levels,reallocations,migrations,rebuild,rebuild_reallocations,"
         "rebuild_migrations\n";
  for (const auto& r : records_) {
    out << r.index << ',' << (r.kind == RequestKind::insert ? "insert" : "delete") << ',' << r.job_id << ','
        << r.active << ',' << r.max_span << ',' << r.levels << ',' << r.reallocations << ',' << r.migrations
        << ',' << (r.rebuilt ? 1 : 0) << ',' << r.rebuild_reallocations << ',' << r.rebuild_migrations << '\n';
  }
  return out.str();
}

const RequestRecord& record_request(CostLedger& ledger, RequestRecord record,
                                    std::span<const AssignmentChange> changes) {
  const RequestCost cost = tally_changes(changes);
  record.reallocations = cost.reallocations;
  record.migrations = cost.migrations;
  return ledger.append(std::move(record));
}

}  // namespace resched
