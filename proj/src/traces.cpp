#include "resched/traces.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "resched/alignment.hpp"
#include "resched/feasibility.hpp"

namespace resched {

std::optional<std::string> Trace::meta(const std::string& key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return v;
  }
  return std::nullopt;
}

void Trace::set_meta(const std::string& key, std::string value) {
  for (auto& [k, v] : metadata) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  metadata.emplace_back(key, std::move(value));
}

// -- serialization ---------------------------------------------------------------

std::string format_trace(const Trace& trace) {
  std::string out;
  if (!trace.metadata.empty()) {
    out += "#";
    for (const auto& [k, v] : trace.metadata) out += " " + k + "=" + v;
    out += "\n";
  }
  for (const Request& r : trace.requests) {
    if (r.kind == RequestKind::insert) {
      out += "op=insert id=" + r.job_id + " a=" + std::to_string(r.window.start) +
             " d=" + std::to_string(r.window.end) + "\n";
    } else {
      out += "op=delete id=" + r.job_id + "\n";
    }
  }
  return out;
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == ' ') {
      ++i;
      continue;
    }
    std::size_t j = line.find(' ', i);
    if (j == std::string_view::npos) j = line.size();
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool valid_id(std::string_view id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](char c) { return c > ' ' && c != '=' && c != '#' && c < 127; });
}

Slot parse_slot(std::string_view text, std::size_t line, const char* field) {
  Slot value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw TraceFormatError(line, std::string("bad integer for ") + field + ": '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

Trace parse_trace(const std::string& text) {
  Trace trace;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (!line.empty() && line.front() == '#') {
      if (line_no != 1) throw TraceFormatError(line_no, "header must be the first line");
      for (std::string_view tok : split(line.substr(1))) {
        const auto eq = tok.find('=');
        if (eq == std::string_view::npos || eq == 0) {
          throw TraceFormatError(line_no, "header field without key=value: '" + std::string(tok) + "'");
        }
        trace.metadata.emplace_back(std::string(tok.substr(0, eq)), std::string(tok.substr(eq + 1)));
      }
      continue;
    }
    if (line.empty()) throw TraceFormatError(line_no, "empty line");

    std::map<std::string_view, std::string_view> fields;
    for (std::string_view tok : split(line)) {
      const auto eq = tok.find('=');
      if (eq == std::string_view::npos) throw TraceFormatError(line_no, "expected key=value, got '" + std::string(tok) + "'");
      const auto key = tok.substr(0, eq);
      if (key != "op" && key != "id" && key != "a" && key != "d") {
        throw TraceFormatError(line_no, "unknown field '" + std::string(key) + "'");
      }
      if (!fields.emplace(key, tok.substr(eq + 1)).second) {
        throw TraceFormatError(line_no, "repeated field '" + std::string(key) + "'");
      }
    }
    auto field = [&](std::string_view key) -> std::string_view {
      auto it = fields.find(key);
      if (it == fields.end()) throw TraceFormatError(line_no, "missing field '" + std::string(key) + "'");
      return it->second;
    };
    const std::string_view op = field("op");
    const std::string_view id = field("id");
    if (!valid_id(id)) throw TraceFormatError(line_no, "bad job id '" + std::string(id) + "'");
    if (op == "insert") {
      const Window w{parse_slot(field("a"), line_no, "a"), parse_slot(field("d"), line_no, "d")};
      if (!is_valid(w)) throw TraceFormatError(line_no, "invalid window " + to_string(w));
      trace.requests.push_back(Request::insert(std::string(id), w));
    } else if (op == "delete") {
      if (fields.size() != 2) throw TraceFormatError(line_no, "delete takes only op and id");
      trace.requests.push_back(Request::erase(std::string(id)));
    } else {
      throw TraceFormatError(line_no, "unknown op '" + std::string(op) + "'");
    }
  }
  return trace;
}

Trace read_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str());
}

void write_trace_file(const std::string& path, const Trace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace '" + path + "'");
  out << format_trace(trace);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::optional<std::size_t> first_unreplayable(const Trace& trace) {
  std::unordered_set<std::string> seen;
  std::unordered_set<std::string> active;
  for (std::size_t i = 0; i < trace.requests.size(); ++i) {
    const Request& r = trace.requests[i];
    if (r.kind == RequestKind::insert) {
      if (!is_valid(r.window) || !seen.insert(r.job_id).second) return i;
      active.insert(r.job_id);
    } else if (active.erase(r.job_id) == 0) {
      return i;
    }
  }
  return std::nullopt;
}

std::optional<std::size_t> first_violation(const Trace& trace, int machines, int gamma) {
  std::map<std::string, Window> active;
  for (std::size_t i = 0; i < trace.requests.size(); ++i) {
    const Request& r = trace.requests[i];
    if (r.kind == RequestKind::insert) {
      active[r.job_id] = r.window;
    } else {
      active.erase(r.job_id);
    }
    std::vector<Job> jobs;
    jobs.reserve(active.size());
    for (const auto& [id, w] : active) jobs.push_back({id, w});
    if (!underallocated(jobs, machines, gamma)) return i;
  }
  return std::nullopt;
}

// -- generators --------------------------------------------------------------------

namespace {

Slot ceil_pow2(Slot v) {
  Slot p = 1;
  while (p < v) p <<= 1;
  return p;
}

int ceil_log2(Slot v) {
  int k = 0;
  while ((Slot{1} << k) < v) ++k;
  return k;
}

}  // namespace

Trace gen_random_underallocated(const RandomTraceParams& params) {
  if (params.machines < 1 || params.gamma < 1) throw std::invalid_argument("machines and gamma must be positive");
  const int max_log = std::min(params.max_span_log, 16);
  const Slot min_span = params.aligned ? Slot{1} << ceil_log2(params.gamma) : Slot{2} * params.gamma;
  if (min_span > (Slot{1} << max_log)) {
    throw std::invalid_argument("max span 2^" + std::to_string(max_log) + " is below the minimum span " +
                                std::to_string(min_span));
  }

  Trace trace;
  trace.metadata = {{"generator", params.churn ? "churn" : "random"},
                    {"seed", std::to_string(params.seed)},
                    {"m", std::to_string(params.machines)},
                    {"gamma", std::to_string(params.gamma)},
                    {"n_max", std::to_string(params.n_max)},
                    {"underallocated", "true"}};
  if (params.n_max == 0) return trace;

  const std::size_t length = params.length ? params.length : (params.churn ? 8 : 3) * params.n_max;
  const auto demand = static_cast<Slot>(params.gamma) * static_cast<Slot>(params.n_max) * 2 / params.machines;
  const Slot horizon = params.horizon ? params.horizon : ceil_pow2(std::max(Slot{2} << max_log, demand));
  if (horizon < (Slot{1} << max_log)) {
    throw std::invalid_argument("horizon " + std::to_string(horizon) + " is below the max span 2^" +
                                std::to_string(max_log));
  }

  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double lo = std::log2(static_cast<double>(min_span));
  const double hi = static_cast<double>(max_log);

  auto draw_window = [&]() -> Window {
    if (params.aligned) {
      std::uniform_int_distribution<int> logs(static_cast<int>(lo), max_log);
      const Slot span = Slot{1} << logs(rng);
      std::uniform_int_distribution<Slot> starts(0, horizon / span - 1);
      const Slot a = starts(rng) * span;
      return {a, a + span};
    }
    const auto span = std::clamp(static_cast<Slot>(std::exp2(lo + (hi - lo) * unit(rng))), min_span,
                                 Slot{1} << max_log);
    std::uniform_int_distribution<Slot> starts(0, horizon - span);
    const Slot a = starts(rng);
    return {a, a + span};
  };

  std::vector<Job> active;  // kept in insertion order for reproducible deletes
  std::size_t counter = 0;
  bool growing = true;
  const std::size_t low_mark = std::max<std::size_t>(1, params.n_max / 8);

  for (std::size_t step = 0; step < length; ++step) {
    bool insert;
    if (active.empty()) {
      insert = true;
    } else if (active.size() >= params.n_max) {
      insert = false;
    } else if (params.churn) {
      insert = unit(rng) < (growing ? 0.85 : 0.15);
    } else {
      insert = unit(rng) < 0.6;
    }
    if (params.churn) {
      if (active.size() >= params.n_max) growing = false;
      if (active.size() <= low_mark) growing = true;
    }

    if (insert) {
      bool placed = false;
      for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
        Job candidate{"j" + std::to_string(counter), draw_window()};
        active.push_back(candidate);
        if (underallocated(active, params.machines, params.gamma)) {
          placed = true;
          ++counter;
          trace.requests.push_back(Request::insert(candidate.id, candidate.window));
        } else {
          active.pop_back();
        }
      }
      if (placed || active.empty()) continue;
    }
    std::uniform_int_distribution<std::size_t> pick(0, active.size() - 1);
    const std::size_t victim = pick(rng);
    trace.requests.push_back(Request::erase(active[victim].id));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(victim));
  }
  return trace;
}

Trace gen_realloc_adversary(std::size_t s) {
  if (s < 4 || s % 2 != 0) throw std::invalid_argument("realloc adversary needs an even s >= 4");
  const auto eta = static_cast<Slot>(s / 2);
  Trace trace;
  trace.metadata = {{"generator", "realloc-adversary"}, {"s", std::to_string(s)}, {"m", "1"}, {"gamma", "1"},
                    {"underallocated", "false"}};
  for (Slot j = 0; j < eta; ++j) trace.requests.push_back(Request::insert("b" + std::to_string(j), {j, j + 2}));
  for (Slot t = 0; t < eta; ++t) {
    const std::string left = "l" + std::to_string(t);
    const std::string right = "r" + std::to_string(t);
    trace.requests.push_back(Request::insert(left, {0, 1}));
    trace.requests.push_back(Request::erase(left));
    trace.requests.push_back(Request::insert(right, {eta, eta + 1}));
    trace.requests.push_back(Request::erase(right));
  }
  return trace;
}

Trace gen_migration_adversary(int machines, std::size_t s, Scheduler& target) {
  if (machines <= 1) throw std::invalid_argument("migration adversary needs m > 1");
  const auto m = static_cast<std::size_t>(machines);
  if (s == 0 || s % (6 * m) != 0) {
    throw std::invalid_argument("migration adversary needs 6m to divide s (m=" + std::to_string(m) +
                                ", s=" + std::to_string(s) + ")");
  }
  if (target.active() != 0) throw std::invalid_argument("migration adversary needs an empty scheduler");

  Trace trace;
  trace.metadata = {{"generator", "migration-adversary"}, {"s", std::to_string(s)}, {"m", std::to_string(m)},
                    {"gamma", "1"}, {"scheduler", to_string(target.kind())}, {"underallocated", "false"}};
  auto issue = [&](Request r) {
    target.apply(r);
    trace.requests.push_back(std::move(r));
  };

  std::size_t counter = 0;
  for (std::size_t round = 0; round < s / (6 * m); ++round) {
    std::vector<std::string> wide;
    for (std::size_t i = 0; i < 2 * m; ++i) {
      wide.push_back("w" + std::to_string(counter++));
      issue(Request::insert(wide.back(), {0, 2}));
    }
    // Delete m jobs, taking the machines in order: the jobs on the first m/2
    // machines when each machine holds two.
    std::vector<std::pair<Assignment, std::string>> placed;
    for (const auto& id : wide) placed.emplace_back(*target.assignment_of(id), id);
    std::sort(placed.begin(), placed.end());
    std::set<std::string> gone;
    for (std::size_t i = 0; i < m; ++i) {
      gone.insert(placed[i].second);
      issue(Request::erase(placed[i].second));
    }
    std::vector<std::string> narrow;
    for (std::size_t i = 0; i < m; ++i) {
      narrow.push_back("n" + std::to_string(counter++));
      issue(Request::insert(narrow.back(), {0, 1}));
    }
    std::vector<std::string> rest;
    for (const auto& id : wide) {
      if (!gone.contains(id)) rest.push_back(id);
    }
    rest.insert(rest.end(), narrow.begin(), narrow.end());
    std::sort(rest.begin(), rest.end());
    for (const auto& id : rest) issue(Request::erase(id));
  }
  return trace;
}

}  // namespace resched
