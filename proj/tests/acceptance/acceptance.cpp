// End-to-end acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.
#include <chrono>
#include <cstdio>
#include <deque>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "forge/error.hpp"
#include "forge/orchestrator.hpp"
#include "forge/process.hpp"
#include "forge/util.hpp"
#include "forge/verifier.hpp"
#include "support.hpp"

using namespace forge;
using namespace std::chrono_literals;
using testing_support::corpus_subset;
using testing_support::fixture;
using testing_support::scenario_config;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void check(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const SessionRecord* find(const RunResult& r, const std::string& target) {
  for (const auto& x : r.records)
    if (x.target == target) return &x;
  return nullptr;
}

std::filesystem::path last_iteration_dir(const std::filesystem::path& target_dir, const SessionRecord& rec) {
  return target_dir / ("iter_" + std::to_string(rec.entries.back().iteration));
}

// 1. ten corpus functions reach full line coverage within four iterations
Outcome coverage_to_full() {
  Outcome o;
  TempDir out;
  auto t0 = std::chrono::steady_clock::now();
  auto cfg = scenario_config("coverage", fixture("corpus"), out.path(), true);
  auto result = run_pipeline(cfg);
  double secs = seconds_since(t0);
  int full = 0;
  for (const auto& r : result.records) {
    if (r.final_coverage_pct && *r.final_coverage_pct == 100.0) ++full;
    o.check(static_cast<int>(r.entries.size()) <= cfg.max_iterations || r.final_status != FinalStatus::completed,
            r.target + " ran past the budget");
  }
  o.check(cfg.max_iterations == 4, "default budget is not 4");
  o.check(result.records.size() == 10, "expected 10 targets");
  o.check(full >= 9, std::to_string(full) + "/10 at 100%");
  o.check(secs < 120, "took " + fmt("%.1f", secs) + " s");
  if (o.ok) o.detail = std::to_string(full) + "/10 targets at 100% line coverage in " + fmt("%.1f", secs) + " s";
  return o;
}

// 2. a non-compiling first iteration is recovered from
Outcome compile_recovery() {
  Outcome o;
  TempDir out;
  auto src = corpus_subset(out.path(), {"clamp"});
  auto cfg = scenario_config("compile_recovery", src, out.path() / "run");
  auto result = run_pipeline(cfg);
  const SessionRecord* r = find(result, "clamp");
  if (!r) return {false, "no record for clamp"};
  o.check(r->final_status == FinalStatus::completed, "status " + std::string(to_string(r->final_status)));
  o.check(result.report.counters.compile_errors == 1,
          "compile_errors_total " + std::to_string(result.report.counters.compile_errors));
  o.check(!r->entries.empty() && !r->entries.front().compile_ok, "first iteration compiled");
  o.check(!r->entries.empty() && r->entries.back().compile_ok, "final iteration did not compile");

  auto dir = last_iteration_dir(cfg.output_dir / "clamp", *r);
  auto cc = run_process({{"cc", "-std=gnu11", "-o", (dir / "recheck").string(), (dir / "clamp_test.c").string(), "-lm"},
                         dir, 60s});
  o.check(cc.exit_code == 0, "final suite does not compile standalone: " + cc.err);
  if (o.ok) o.detail = "completed, compile_errors_total=1, final suite compiles";
  return o;
}

// 3. a crashing test ends up as exactly one commented-out CRASH block
Outcome crash_annotation() {
  Outcome o;
  TempDir out;
  auto src = out.path() / "src";
  std::filesystem::create_directories(src);
  std::filesystem::copy_file(fixture("crash/first.c"), src / "first.c");
  auto cfg = scenario_config("crash", src, out.path() / "run");
  auto result = run_pipeline(cfg);
  const SessionRecord* r = find(result, "first");
  if (!r || r->entries.empty()) return {false, "no iterations for first"};
  o.check(r->final_status == FinalStatus::completed, "status " + std::string(to_string(r->final_status)));

  auto dir = last_iteration_dir(cfg.output_dir / "first", *r);
  auto harness = read_text_file(dir / "first_test.c");
  auto lines = split_lines(harness);
  int markers = 0;
  size_t at = 0;
  for (size_t i = 0; i < lines.size(); ++i)
    if (lines[i].rfind("// CRASH", 0) == 0) {
      ++markers;
      at = i;
    }
  o.check(markers == 1, std::to_string(markers) + " CRASH blocks");

  if (markers == 1) {
    // strip "// " from the block and compare with the case as the script emitted it
    std::string restored;
    for (size_t i = at + 1; i < lines.size() && lines[i].rfind("//", 0) == 0; ++i) {
      std::string l = lines[i].size() >= 3 ? lines[i].substr(3) : "";
      restored += l + "\n";
    }
    auto reply = read_text_file(fixture("scenarios/crash/first/000.txt"));
    auto start = reply.find("static void test_null_zero(void)");
    auto end = reply.find("\n}\n", start) + 3;
    o.check(start != std::string::npos && restored == reply.substr(start, end - start),
            "uncommented block differs from the original case");
  }

  auto bin = dir / "recheck";
  auto cc = run_process({{"cc", "-std=gnu11", "-o", bin.string(), (dir / "first_test.c").string(), "-lm"}, dir, 60s});
  o.check(cc.exit_code == 0, "final harness does not compile: " + cc.err);
  if (cc.exit_code == 0) {
    auto run = run_process({{bin.string()}, dir, 30s});
    o.check(run.exited_cleanly() && run.exit_code == 0, "suite exit status " + std::to_string(run.exit_code));
  }
  const auto& verdicts = r->entries.back().verdicts;
  int passed = 0;
  for (const auto& [name, status] : verdicts) {
    if (status == "disabled_crash") continue;
    o.check(status == "passed", name + " " + status);
    ++passed;
  }
  o.check(passed > 0, "no remaining cases ran");
  if (o.ok) o.detail = "one CRASH block, suite exits 0, " + std::to_string(passed) + " remaining cases passed, block round-trips";
  return o;
}

// 4. a hung checker is killed at the timeout and the target still gets tests
Outcome verifier_timeout() {
  Outcome o;
  TempDir out;
  auto src = corpus_subset(out.path(), {"clamp"});
  auto cfg = scenario_config("coverage", src, out.path() / "run", true);
  cfg.verifier.extra_flags.insert(cfg.verifier.extra_flags.end(), {"--sleep", "60"});
  cfg.verifier.timeout = 10s;

  auto tu = parse_unit(src / "clamp.c");
  auto g = build_graph(tu);
  auto mockup = generate_mockup(implied_closure(g, "clamp"), tu, g.external_unresolved());
  auto report = run_verifier(mockup, cfg.verifier);
  double e = report.elapsed.count();
  o.check(report.verdict == Verdict::timeout, "verdict " + std::string(to_string(report.verdict)));
  o.check(e >= 10.0 && e <= 11.0, "elapsed " + fmt("%.2f", e) + " s");

  auto result = run_pipeline(cfg);
  const SessionRecord* r = find(result, "clamp");
  o.check(r && r->verifier_verdict == "timeout", "pipeline did not record the timeout");
  o.check(r && r->totals.verifier_timeouts == 1, "verifier timeout not counted");
  o.check(r && !r->entries.empty() && r->entries.front().generation_ok, "no generation after the timeout");
  o.check(r && r->final_status == FinalStatus::completed, "target did not complete");
  if (o.ok) o.detail = "verdict=timeout after " + fmt("%.2f", e) + " s; pipeline went on to generate and completed";
  return o;
}

// 5. closure against an independent BFS on random graphs
Outcome closure_oracle() {
  Outcome o;
  std::mt19937 rng(20240917);
  int agree = 0;
  for (int round = 0; round < 100; ++round) {
    int n = std::uniform_int_distribution<int>(1, 20)(rng);
    std::vector<SymbolDecl> nodes(n);
    for (int i = 0; i < n; ++i) {
      nodes[i].name = "f" + std::to_string(i);
      nodes[i].kind = SymbolKind::function;
      nodes[i].is_definition = true;
      nodes[i].span = {10 * i + 1, 10 * i + 5};
    }
    std::vector<std::vector<int>> adj(n);
    std::vector<Edge> edges;
    std::bernoulli_distribution coin(std::uniform_real_distribution<double>(0.03, 0.35)(rng));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (a != b && coin(rng)) {
          adj[a].push_back(b);
          edges.emplace_back(nodes[a].name, nodes[b].name);
        }
    auto reach = [&](int from) {
      std::set<int> seen{from};
      std::deque<int> q{from};
      while (!q.empty()) {
        int v = q.front();
        q.pop_front();
        for (int w : adj[v])
          if (seen.insert(w).second) q.push_back(w);
      }
      return seen;
    };
    int target = std::uniform_int_distribution<int>(0, n - 1)(rng);
    auto closure = implied_closure(SymbolGraph(nodes, edges), nodes[target].name);
    std::map<int, size_t> pos;
    for (size_t k = 0; k < closure.size(); ++k) pos[std::stoi(closure[k].name.substr(1))] = k;
    std::set<int> got;
    for (const auto& [id, _] : pos) got.insert(id);
    bool ok = got == reach(target) && pos.size() == closure.size();
    for (int a : got)
      for (int b : adj[a])
        if (!reach(b).count(a) && pos[b] > pos[a]) ok = false;
    if (ok) ++agree;
  }
  o.check(agree == 100, std::to_string(agree) + "/100 graphs agree");
  if (o.ok) o.detail = "100/100 random graphs match BFS reachability with a valid order";
  return o;
}

// 6. recorded checker outputs parse exactly; fuzzed text never throws
Outcome counterexample_parsing() {
  Outcome o;
  auto expected = testing_support::golden_violations();
  int exact = 0;
  std::vector<std::string> seeds;
  for (const auto& [file, want] : expected) {
    auto text = read_text_file(fixture("verifier/" + file));
    seeds.push_back(text);
    if (parse_counterexample(text) == want) ++exact;
    else o.check(false, file + " differs");
  }
  o.check(exact >= 5, std::to_string(exact) + " golden files");

  std::mt19937 rng(6);
  int survived = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string s;
    if (i % 4 == 0) {
      size_t len = rng() % 2000;
      for (size_t k = 0; k < len; ++k) s += static_cast<char>(rng() % 256);
    } else {
      s = seeds[rng() % seeds.size()];
      for (int e = 0, edits = 1 + static_cast<int>(rng() % 10); e < edits; ++e) {
        size_t at = s.empty() ? 0 : rng() % (s.size() + 1);
        switch (rng() % 5) {
          case 0: s.erase(at, rng() % 64); break;
          case 1: s.insert(at, seeds[rng() % seeds.size()].substr(0, rng() % 300)); break;
          case 2: s.insert(at, 1, static_cast<char>(rng() % 256)); break;
          case 3: s.insert(at, "\nState 99999999999999999999 file  line -3 function\n"); break;
          default: s.insert(at, "\n[Counterexample]\nViolated property:\n"); break;
        }
      }
    }
    try {
      parse_counterexample(s);
      ++survived;
    } catch (...) {
    }
  }
  o.check(survived == 10000, std::to_string(10000 - survived) + " fuzzed inputs threw");
  if (o.ok) o.detail = std::to_string(exact) + " golden files exact, 10000 fuzzed inputs parsed without error";
  return o;
}

// 7. frozen statistics
Outcome statistics() {
  Outcome o;
  auto j = nlohmann::json::parse(read_text_file(fixture("stats/pearson20.json")));
  auto r = pearson(j["xs"].get<std::vector<double>>(), j["ys"].get<std::vector<double>>());
  double want_r = std::stod(j["r"].get<std::string>());
  double want_p = std::stod(j["p"].get<std::string>());
  o.check(std::abs(r.r - want_r) <= 1e-9, "r off by " + fmt("%.3g", std::abs(r.r - want_r)));
  o.check(std::abs(r.p - want_p) <= 1e-9, "p off by " + fmt("%.3g", std::abs(r.p - want_p)));

  std::vector<SessionRecord> records;
  for (int i = 0; i < 199; ++i) {
    SessionRecord rec;
    char name[16];
    std::snprintf(name, sizeof name, "fn%03d", i);
    rec.target = name;
    rec.final_status = FinalStatus::completed;
    rec.initial_rating = 4;
    rec.final_rating = i < 66 ? 4 + 1 + i % 4 : 4 - i % 3;
    records.push_back(rec);
  }
  auto s = improvement_stats(records);
  auto rate = fmt("%.1f", s.improvement_rate);
  o.check(s.n_improved == 66 && rate == "33.2", "rate " + rate + "% from " + std::to_string(s.n_improved));
  if (o.ok) o.detail = "pearson r/p within 1e-9; 66/199 improved = " + rate + "%";
  return o;
}

// 8. two identical scripted runs give identical reports
Outcome determinism() {
  Outcome o;
  TempDir a, b;
  auto ra = run_pipeline(scenario_config("coverage", fixture("corpus"), a.path(), true));
  auto rb = run_pipeline(scenario_config("coverage", fixture("corpus"), b.path(), true));
  o.check(ra.report == rb.report, "aggregate reports differ");
  for (const char* f : {"summary.json", "targets.csv", "ratings_scatter.csv", "cycles_gain.csv"})
    o.check(read_text_file(a.path() / "reports" / f) == read_text_file(b.path() / "reports" / f),
            std::string(f) + " differs");
  if (o.ok) o.detail = "AggregateReport and all four report files identical";
  return o;
}

// 9. always-broken code still terminates at the hard cap
Outcome loop_termination() {
  Outcome o;
  TempDir out;
  auto src = corpus_subset(out.path(), {"clamp", "sign_of", "fizz_code"});
  auto cfg = scenario_config("broken", src, out.path() / "run");
  auto result = run_pipeline(cfg);
  int cap = 2 * cfg.max_iterations;
  int longest = 0;
  for (const auto& r : result.records) {
    o.check(r.final_status == FinalStatus::never_compiled, r.target + " " + std::string(to_string(r.final_status)));
    o.check(static_cast<int>(r.entries.size()) <= cap, r.target + " ran " + std::to_string(r.entries.size()));
    longest = std::max(longest, static_cast<int>(r.entries.size()));
  }
  o.check(result.records.size() == 3, "expected 3 targets");
  if (o.ok)
    o.detail = "3/3 never_compiled, longest run " + std::to_string(longest) + " iterations (cap " + std::to_string(cap) + ")";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"coverage reaches 100% on the corpus", coverage_to_full},
      {"compile-error recovery", compile_recovery},
      {"crash annotation", crash_annotation},
      {"verifier timeout handling", verifier_timeout},
      {"closure oracle equivalence", closure_oracle},
      {"counterexample golden files and fuzzing", counterexample_parsing},
      {"statistics", statistics},
      {"determinism", determinism},
      {"loop termination", loop_termination},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %zu %s: %s\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.ok) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
