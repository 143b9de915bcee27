#include "forge/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <memory>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "forge/error.hpp"
#include "forge/frontend.hpp"
#include "forge/process.hpp"
#include "forge/util.hpp"

namespace forge {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(FinalStatus status) {
  switch (status) {
    case FinalStatus::completed: return "completed";
    case FinalStatus::parse_failed: return "parse_failed";
    case FinalStatus::never_compiled: return "never_compiled";
    case FinalStatus::mockup_failed: return "mockup_failed";
    case FinalStatus::budget_exhausted: return "budget_exhausted";
    case FinalStatus::internal_error: return "internal_error";
  }
  return "?";
}

FinalStatus final_status_from_string(std::string_view text) {
  for (auto s : {FinalStatus::completed, FinalStatus::parse_failed, FinalStatus::never_compiled,
                 FinalStatus::mockup_failed, FinalStatus::budget_exhausted, FinalStatus::internal_error})
    if (to_string(s) == text) return s;
  throw IoFailure("unknown final status '" + std::string(text) + "'");
}

bool SessionRecord::executed() const {
  return std::any_of(entries.begin(), entries.end(), [](const IterationEntry& e) { return e.compile_ok; });
}

bool SessionRecord::coverage_measured() const {
  return std::any_of(entries.begin(), entries.end(), [](const IterationEntry& e) { return e.coverage_pct.has_value(); });
}

namespace {

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> get_opt(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

json counters_json(const ErrorCounters& c) {
  return {{"compile_errors", c.compile_errors},
          {"crashes", c.crashes},
          {"verifier_timeouts", c.verifier_timeouts},
          {"generation_errors", c.generation_errors}};
}

ErrorCounters counters_from_json(const json& j) {
  ErrorCounters c;
  c.compile_errors = j.value("compile_errors", 0);
  c.crashes = j.value("crashes", 0);
  c.verifier_timeouts = j.value("verifier_timeouts", 0);
  c.generation_errors = j.value("generation_errors", 0);
  return c;
}

}  // namespace

json to_json(const SessionRecord& r) {
  json entries = json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"iteration", e.iteration},
                       {"generation_ok", e.generation_ok},
                       {"compile_ok", e.compile_ok},
                       {"n_cases", e.n_cases},
                       {"n_passed", e.n_passed},
                       {"n_failed_assert", e.n_failed_assert},
                       {"n_crashed", e.n_crashed},
                       {"n_disabled", e.n_disabled},
                       {"coverage_pct", opt(e.coverage_pct)},
                       {"rating", opt(e.rating)},
                       {"rating_source", opt(e.rating_source)},
                       {"errors", counters_json(e.errors)},
                       {"verdicts", e.verdicts},
                       {"decision", e.decision}});
  }
  return {{"target", r.target},
          {"source_file", r.source_file},
          {"entries", entries},
          {"final_status", to_string(r.final_status)},
          {"failure", r.failure},
          {"verifier_verdict", opt(r.verifier_verdict)},
          {"verifier_violations", r.verifier_violations},
          {"verifier_elapsed", r.verifier_elapsed},
          {"initial_rating", opt(r.initial_rating)},
          {"final_rating", opt(r.final_rating)},
          {"reflection_cycles", r.reflection_cycles},
          {"final_coverage_pct", opt(r.final_coverage_pct)},
          {"totals", counters_json(r.totals)},
          {"wall_time", r.wall_time}};
}

SessionRecord record_from_json(const json& j) {
  SessionRecord r;
  try {
    r.target = j.at("target").get<std::string>();
    r.source_file = j.value("source_file", "");
    for (const auto& e : j.at("entries")) {
      IterationEntry it;
      it.iteration = e.at("iteration").get<int>();
      it.generation_ok = e.value("generation_ok", false);
      it.compile_ok = e.value("compile_ok", false);
      it.n_cases = e.value("n_cases", 0);
      it.n_passed = e.value("n_passed", 0);
      it.n_failed_assert = e.value("n_failed_assert", 0);
      it.n_crashed = e.value("n_crashed", 0);
      it.n_disabled = e.value("n_disabled", 0);
      it.coverage_pct = get_opt<double>(e, "coverage_pct");
      it.rating = get_opt<int>(e, "rating");
      it.rating_source = get_opt<std::string>(e, "rating_source");
      if (e.contains("errors")) it.errors = counters_from_json(e.at("errors"));
      if (e.contains("verdicts")) it.verdicts = e.at("verdicts").get<std::map<std::string, std::string>>();
      it.decision = e.value("decision", "");
      r.entries.push_back(std::move(it));
    }
    r.final_status = final_status_from_string(j.at("final_status").get<std::string>());
    r.failure = j.value("failure", "");
    r.verifier_verdict = get_opt<std::string>(j, "verifier_verdict");
    r.verifier_violations = j.value("verifier_violations", 0);
    r.verifier_elapsed = j.value("verifier_elapsed", 0.0);
    r.initial_rating = get_opt<int>(j, "initial_rating");
    r.final_rating = get_opt<int>(j, "final_rating");
    r.reflection_cycles = j.value("reflection_cycles", 0);
    r.final_coverage_pct = get_opt<double>(j, "final_coverage_pct");
    if (j.contains("totals")) r.totals = counters_from_json(j.at("totals"));
    r.wall_time = j.value("wall_time", 0.0);
  } catch (const json::exception& e) {
    throw IoFailure(std::string("malformed session record: ") + e.what());
  }
  return r;
}

ImprovementStats improvement_stats(const std::vector<SessionRecord>& records) {
  std::vector<std::pair<int, int>> pairs;
  for (const auto& r : records)
    if (r.initial_rating && r.final_rating) pairs.emplace_back(*r.initial_rating, *r.final_rating);
  return improvement_stats(pairs);
}

AggregateReport aggregate(const std::vector<SessionRecord>& records) {
  AggregateReport a;
  a.n_targets = static_cast<int>(records.size());
  std::vector<double> cycles, gains;
  for (const auto& r : records) {
    TargetRow row;
    row.target = r.target;
    row.status = std::string(to_string(r.final_status));
    row.initial_rating = r.initial_rating;
    row.final_rating = r.final_rating;
    row.cycles = r.reflection_cycles;
    if (r.initial_rating && r.final_rating) {
      row.gain = *r.final_rating - *r.initial_rating;
      cycles.push_back(row.cycles);
      gains.push_back(*row.gain);
      if (*row.gain > 0) ++a.n_improved;
    }
    row.coverage_pct = r.final_coverage_pct;
    row.counters = r.totals;
    a.counters += r.totals;
    if (r.executed()) ++a.n_executed;
    if (r.coverage_measured()) ++a.n_coverage_measured;
    if (r.final_status == FinalStatus::completed) ++a.n_completed;
    a.rows.push_back(std::move(row));
  }
  std::sort(a.rows.begin(), a.rows.end(), [](const TargetRow& x, const TargetRow& y) { return x.target < y.target; });
  try {
    a.improvement = improvement_stats(records);
  } catch (const EmptyInput&) {
  }
  try {
    auto p = pearson(cycles, gains);
    a.pearson_r = p.r;
    a.pearson_p = p.p;
  } catch (const DegenerateInput&) {
  }
  return a;
}

json to_json(const AggregateReport& a) {
  json rows = json::array();
  json pairs = json::array();
  for (const auto& r : a.rows) {
    rows.push_back({{"target", r.target},
                    {"status", r.status},
                    {"initial_rating", opt(r.initial_rating)},
                    {"final_rating", opt(r.final_rating)},
                    {"cycles", r.cycles},
                    {"gain", opt(r.gain)},
                    {"coverage_pct", opt(r.coverage_pct)},
                    {"counters", counters_json(r.counters)}});
    if (r.initial_rating && r.final_rating)
      pairs.push_back({{"target", r.target}, {"initial", *r.initial_rating}, {"final", *r.final_rating}});
  }
  json improvement = nullptr;
  if (a.improvement)
    improvement = {{"n", a.improvement->n},
                   {"n_improved", a.improvement->n_improved},
                   {"improvement_rate", a.improvement->improvement_rate},
                   {"median_gain", a.improvement->median_gain},
                   {"max_gain", a.improvement->max_gain}};
  return {{"n_targets", a.n_targets},
          {"n_executed", a.n_executed},
          {"n_coverage_measured", a.n_coverage_measured},
          {"n_improved", a.n_improved},
          {"n_completed", a.n_completed},
          {"counters",
           {{"compile_errors_total", a.counters.compile_errors},
            {"crash_tests_total", a.counters.crashes},
            {"verifier_timeouts_total", a.counters.verifier_timeouts},
            {"generation_errors_total", a.counters.generation_errors}}},
          {"improvement", improvement},
          {"pearson_r", opt(a.pearson_r)},
          {"pearson_p", opt(a.pearson_p)},
          {"rating_pairs", pairs},
          {"targets", rows}};
}

bool operator==(const AggregateReport& a, const AggregateReport& b) { return to_json(a) == to_json(b); }

namespace {

template <class T>
std::string cell(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_floating_point_v<T>) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", *v);
    return buf;
  } else {
    return std::to_string(*v);
  }
}

}  // namespace

std::vector<fs::path> emit_reports(const AggregateReport& report, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoFailure("cannot create " + dir.string() + ": " + ec.message());

  std::vector<fs::path> written;
  auto put = [&](const std::string& name, const std::string& text) {
    write_text_file(dir / name, text);
    written.push_back(dir / name);
  };
  put("summary.json", to_json(report).dump(2) + "\n");

  std::string targets =
      "target,status,initial_rating,final_rating,cycles,gain,coverage_pct,compile_errors,crashes,verifier_timeouts,"
      "generation_errors\n";
  std::string scatter = "target,initial_rating,final_rating\n";
  std::string cycles = "target,reflection_cycles,rating_gain\n";
  for (const auto& r : report.rows) {
    targets += r.target + "," + r.status + "," + cell(r.initial_rating) + "," + cell(r.final_rating) + "," +
               std::to_string(r.cycles) + "," + cell(r.gain) + "," + cell(r.coverage_pct) + "," +
               std::to_string(r.counters.compile_errors) + "," + std::to_string(r.counters.crashes) + "," +
               std::to_string(r.counters.verifier_timeouts) + "," + std::to_string(r.counters.generation_errors) + "\n";
    if (r.gain) {
      scatter += r.target + "," + cell(r.initial_rating) + "," + cell(r.final_rating) + "\n";
      cycles += r.target + "," + std::to_string(r.cycles) + "," + cell(r.gain) + "\n";
    }
  }
  put("targets.csv", targets);
  put("ratings_scatter.csv", scatter);
  put("cycles_gain.csv", cycles);
  return written;
}

std::vector<SessionRecord> load_records(const fs::path& output_dir) {
  std::vector<SessionRecord> out;
  if (!fs::is_directory(output_dir)) throw IoFailure("no output directory " + output_dir.string());
  for (const auto& entry : fs::directory_iterator(output_dir)) {
    auto session = entry.path() / "session.json";
    if (!entry.is_directory() || !fs::is_regular_file(session)) continue;
    try {
      out.push_back(record_from_json(json::parse(read_text_file(session))));
    } catch (const json::exception& e) {
      throw IoFailure("cannot parse " + session.string() + ": " + e.what());
    }
  }
  std::sort(out.begin(), out.end(), [](const SessionRecord& a, const SessionRecord& b) { return a.target < b.target; });
  return out;
}

int exit_code_for(const std::vector<SessionRecord>& records) {
  for (const auto& r : records)
    if (r.final_status != FinalStatus::completed) return 2;
  return 0;
}

namespace {

struct TargetJob {
  std::string id;    // directory name and routing key
  std::string name;  // function name in the unit
  fs::path source;
  std::shared_ptr<const TranslationUnit> unit;
  std::shared_ptr<const SymbolGraph> graph;
  std::optional<std::string> parse_error;
};

struct Context {
  const RunConfig& config;
  ModelBackend& backend;
  std::set<std::string> reserved;
};

std::vector<fs::path> discover_sources(const std::vector<fs::path>& roots) {
  std::set<fs::path> files;
  for (const auto& root : roots) {
    if (fs::is_regular_file(root)) {
      files.insert(fs::absolute(root).lexically_normal());
      continue;
    }
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file() && e.path().extension() == ".c") files.insert(fs::absolute(e.path()).lexically_normal());
  }
  return {files.begin(), files.end()};
}

std::vector<TargetJob> collect_jobs(const RunConfig& cfg) {
  ParseOptions po;
  po.include_dirs = cfg.include_dirs;
  po.defines = cfg.defines;
  po.preprocessor = cfg.preprocessor;

  std::vector<TargetJob> jobs;
  std::set<std::string> ids;
  for (const auto& file : discover_sources(cfg.source_roots)) {
    std::shared_ptr<TranslationUnit> unit;
    std::string error;
    try {
      unit = std::make_shared<TranslationUnit>(parse_unit(file, po));
    } catch (const ParseFailed& e) {
      error = std::string(e.what()) + " at line " + std::to_string(e.line_no()) + ": " + e.offending_line();
    } catch (const PreprocessFailed& e) {
      error = std::string(e.what()) + "\n" + e.stderr_text();
    } catch (const Error& e) {
      error = e.what();
    }
    if (!unit) {
      std::string id = file.filename().string();
      if (cfg.targets.all() || cfg.targets.matches(id)) {
        TargetJob job;
        job.id = ids.insert(id).second ? id : id + "__" + std::to_string(ids.size());
        job.name = id;
        job.source = file;
        job.parse_error = error;
        jobs.push_back(std::move(job));
      }
      continue;
    }
    auto graph = std::make_shared<SymbolGraph>(build_graph(*unit));
    for (const auto& s : unit->symbols) {
      if (s.kind != SymbolKind::function || !s.is_definition || s.system || s.storage != Storage::external) continue;
      if (s.name == "main") continue;
      if (fs::path(unit->origin_of(s.span.start_line).file).lexically_normal() != file) continue;
      if (!cfg.targets.matches(s.name)) continue;
      TargetJob job;
      job.name = s.name;
      job.id = s.name;
      if (!ids.insert(job.id).second) {
        job.id = s.name + "__" + file.stem().string();
        ids.insert(job.id);
      }
      job.source = file;
      job.unit = unit;
      job.graph = graph;
      jobs.push_back(std::move(job));
    }
  }
  return jobs;
}

void run_loop(const TargetJob& job, const Context& ctx, const fs::path& dir, SessionRecord& rec,
              std::vector<std::string>& log) {
  const RunConfig& cfg = ctx.config;
  auto note = [&](const std::string& s) { log.push_back(s); };

  MockupUnit mockup;
  try {
    auto closure = implied_closure(*job.graph, job.name);
    MockupOptions mo;
    mo.prelude = cfg.prelude_includes;
    mo.defines = cfg.defines;
    mo.reserved_names = ctx.reserved;
    mockup = generate_mockup(closure, *job.unit, job.graph->external_unresolved(), {}, mo);
  } catch (const Error& e) {
    rec.final_status = FinalStatus::mockup_failed;
    rec.failure = e.what();
    note("mockup failed: " + rec.failure);
    return;
  }
  write_mockup(mockup, dir);
  note("mockup: " + std::to_string(mockup.line_count()) + " lines, " + std::to_string(mockup.stubs.size()) + " stubs");

  std::optional<std::string> verifier_summary;
  if (cfg.verifier_enabled) {
    auto vdir = dir / "verify";
    fs::create_directories(vdir);
    auto vr = run_verifier(mockup, cfg.verifier, vdir);
    rec.verifier_verdict = std::string(to_string(vr.verdict));
    rec.verifier_violations = static_cast<int>(vr.violations.size());
    rec.verifier_elapsed = vr.elapsed.count();
    if (vr.verdict == Verdict::timeout) ++rec.totals.verifier_timeouts;
    verifier_summary = sensitization_summary(vr, mockup);
    write_text_file(vdir / "output.txt", vr.raw_output);
    write_text_file(vdir / "summary.txt", *verifier_summary);
    write_text_file(vdir / "report.json", to_json(vr).dump(2) + "\n");
    note("verifier: " + *rec.verifier_verdict + ", " + std::to_string(vr.violations.size()) + " violations");

    std::vector<std::pair<int, std::string>> notes;
    int n = mockup.line_count();
    for (const auto& v : vr.violations) {
      if (!v.location || v.location->line > n || !map_back(mockup, v.location->line)) continue;
      std::string first = v.description.substr(0, v.description.find('\n'));
      notes.emplace_back(v.location->line, "/* model checker: " + std::string(to_string(v.property_kind)) + ": " + first + " */");
    }
    write_text_file(dir / "annotations.json", to_json(annotate_original(mockup, notes)).dump(2) + "\n");
  }

  LoopState state;
  state.max_iterations = cfg.max_iterations;
  std::optional<TestSuite> last_executed;
  std::optional<std::string> prior_tests;
  std::optional<std::string> diagnostics;
  std::optional<CoverageReport> last_coverage;
  bool ever_compiled = false;
  LoopDecision decision = LoopDecision::continue_loop;

  for (int it = 1; decision == LoopDecision::continue_loop; ++it) {
    IterationEntry e;
    e.iteration = it;
    auto idir = dir / ("iter_" + std::to_string(it));
    fs::create_directories(idir);

    PromptBundle b;
    b.instruction = Instruction::generate_tests;
    b.mockup_source = mockup.source_text;
    b.verifier_summary = verifier_summary;
    if (last_coverage) b.coverage_summary = coverage_summary(*last_coverage, mockup);
    b.diagnostics = diagnostics;
    b.prior_tests = prior_tests;
    if (!state.rating_history.empty()) b.plan = state.rating_history.back().plan;
    b.token_budget = cfg.token_budget;

    std::optional<TestSuite> suite;
    try {
      std::string prompt = assemble_prompt(b);
      write_text_file(idir / "prompt.txt", prompt);
      auto resp = complete(ctx.backend, prompt, {job.id, Instruction::generate_tests});
      write_text_file(idir / "response.txt", resp.text);
      if (!resp.extracted_code) throw NoTestsFound("reply has no fenced code block");
      if (resp.code_blocks > 1) note("iteration " + std::to_string(it) + ": reply has several code blocks, first used");
      suite = build_harness(mockup, *resp.extracted_code, it, last_executed ? &*last_executed : nullptr);
      e.generation_ok = true;
    } catch (const Error& err) {
      e.errors.generation_errors = 1;
      note("iteration " + std::to_string(it) + ": generation error: " + err.what());
    }

    const CoverageReport* this_coverage = nullptr;
    if (suite) {
      auto cr = compile_suite(*suite, cfg.compiler, idir);
      prior_tests = tests_source(*suite);
      e.n_disabled = static_cast<int>(suite->count(CaseStatus::disabled_crash));
      if (!cr.ok) {
        e.errors.compile_errors = 1;
        diagnostics = cr.diagnostics;
        write_text_file(idir / "compile.log", cr.diagnostics);
        note("iteration " + std::to_string(it) + ": compile failed");
      } else {
        diagnostics.reset();
        ever_compiled = true;
        e.compile_ok = true;
        auto ran = execute_suite(cr.binary, *suite, cfg.per_case_timeout);
        for (const auto& c : ran.cases) {
          if (c.status == CaseStatus::disabled_crash) continue;
          ++e.n_cases;
          if (c.status == CaseStatus::passed) ++e.n_passed;
          if (c.status == CaseStatus::failed_assert) ++e.n_failed_assert;
          if (c.status == CaseStatus::crashed) ++e.n_crashed;
          e.verdicts[c.name] = std::string(to_string(c.status));
        }
        e.errors.crashes = e.n_crashed;
        try {
          last_coverage = measure_coverage(idir, mockup, cfg.coverage_tool);
          this_coverage = &*last_coverage;
          e.coverage_pct = last_coverage->line_coverage_pct;
          write_text_file(idir / (mockup.target + "_coverage.json"), to_json(*last_coverage, mockup).dump(2) + "\n");
        } catch (const Error& err) {
          note("iteration " + std::to_string(it) + ": no coverage: " + err.what());
        }
        auto done = disable_crashed(ran);
        for (const auto& c : done.cases)
          if (c.status == CaseStatus::disabled_crash && !e.verdicts.count(c.name))
            e.verdicts[c.name] = std::string(to_string(c.status));
        e.n_disabled = static_cast<int>(done.count(CaseStatus::disabled_crash));
        write_text_file(idir / done.file_name(), done.harness_source);
        write_text_file(dir / done.file_name(), done.harness_source);
        write_text_file(idir / "suite.json", to_json(done).dump(2) + "\n");
        prior_tests = tests_source(done);
        last_executed = std::move(done);
        note("iteration " + std::to_string(it) + ": " + std::to_string(e.n_passed) + " passed, " +
             std::to_string(e.n_failed_assert) + " failed, " + std::to_string(e.n_crashed) + " crashed");
      }
    }

    rec.totals += e.errors;
    state.iteration = it;
    state.last_errors = e.errors;
    decision = should_continue(state);
    if (decision == LoopDecision::continue_loop && e.compile_ok) {
      ReflectInputs in;
      in.mockup = &mockup;
      in.verifier_summary = verifier_summary;
      in.token_budget = cfg.token_budget;
      in.request_key = job.id;
      auto verdict = reflect(this_coverage, *last_executed, ctx.backend, in);
      if (verdict.rating_clamped) note("iteration " + std::to_string(it) + ": model rating out of range, clamped");
      if (!verdict.fallback_reason.empty())
        note("iteration " + std::to_string(it) + ": heuristic rating used: " + verdict.fallback_reason);
      e.rating = verdict.rating;
      e.rating_source = std::string(to_string(verdict.source));
      write_text_file(idir / "reflection.json", json{{"rating", verdict.rating},
                                                      {"plan", verdict.plan},
                                                      {"source", to_string(verdict.source)},
                                                      {"rating_clamped", verdict.rating_clamped}}
                                                     .dump(2) + "\n");
      state.rating_history.push_back(std::move(verdict));
    }
    e.decision = std::string(to_string(decision));
    rec.entries.push_back(std::move(e));
  }

  rec.reflection_cycles = static_cast<int>(state.rating_history.size());
  if (!state.rating_history.empty()) {
    rec.initial_rating = state.rating_history.front().rating;
    rec.final_rating = state.rating_history.back().rating;
  } else if (ever_compiled) {
    auto v = heuristic_verdict(last_coverage ? &*last_coverage : nullptr, mockup);
    rec.initial_rating = rec.final_rating = v.rating;
  }
  if (last_coverage) rec.final_coverage_pct = last_coverage->line_coverage_pct;
  if (decision == LoopDecision::exit_success) {
    rec.final_status = FinalStatus::completed;
  } else if (!ever_compiled) {
    rec.final_status = FinalStatus::never_compiled;
    rec.failure = "no generated suite compiled in " + std::to_string(state.iteration) + " iterations";
  } else {
    rec.final_status = FinalStatus::budget_exhausted;
    rec.failure = "errors in the last iteration at the hard cap of " + std::to_string(state.iteration);
  }
}

SessionRecord run_target(const TargetJob& job, const Context& ctx) {
  auto t0 = std::chrono::steady_clock::now();
  SessionRecord rec;
  rec.target = job.id;
  rec.source_file = job.source.string();
  fs::path dir = ctx.config.output_dir / job.id;
  std::vector<std::string> log;
  try {
    fs::create_directories(dir);
    if (job.parse_error) {
      rec.final_status = FinalStatus::parse_failed;
      rec.failure = *job.parse_error;
      log.push_back("parse failed: " + rec.failure);
    } else {
      run_loop(job, ctx, dir, rec, log);
    }
  } catch (const std::exception& e) {
    rec.final_status = FinalStatus::internal_error;
    rec.failure = e.what();
    log.push_back("internal error: " + rec.failure);
  }
  log.push_back("final status: " + std::string(to_string(rec.final_status)));
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    write_text_file(dir / "session.log", join_lines(log));
    write_text_file(dir / "session.json", to_json(rec).dump(2) + "\n");
  } catch (const std::exception& e) {
    rec.final_status = FinalStatus::internal_error;
    rec.failure = e.what();
  }
  return rec;
}

std::optional<SessionRecord> completed_record(const fs::path& dir) {
  auto session = dir / "session.json";
  if (!fs::is_regular_file(session)) return std::nullopt;
  try {
    auto rec = record_from_json(json::parse(read_text_file(session)));
    if (rec.final_status == FinalStatus::completed) return rec;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

}  // namespace

RunResult run_pipeline(const RunConfig& config, ModelBackend* backend, std::ostream* progress) {
  config.validate();
  for (const auto& tool : {split_command(config.compiler.compiler), split_command(config.coverage_tool)})
    if (tool.empty() || !find_executable(tool.front()))
      throw FatalConfig("tool not found: " + (tool.empty() ? std::string("(empty)") : tool.front()));
  if (config.verifier_enabled && !find_executable(config.verifier.executable))
    throw FatalConfig("verifier not found: " + config.verifier.executable);

  std::unique_ptr<ModelBackend> owned;
  if (!backend) {
    owned = make_backend(config.backend);
    backend = owned.get();
  }

  Context ctx{config, *backend, {}};
  try {
    ctx.reserved = prelude_symbols(config.prelude_includes, config.preprocessor);
  } catch (const Error& e) {
    throw FatalConfig(std::string("cannot preprocess the prelude headers: ") + e.what());
  }

  auto jobs = collect_jobs(config);
  std::vector<SessionRecord> records(jobs.size());
  std::atomic<size_t> next{0};
  std::atomic<size_t> finished{0};
  std::mutex out_mu;

  auto worker = [&] {
    for (size_t i = next++; i < jobs.size(); i = next++) {
      auto resumed = completed_record(config.output_dir / jobs[i].id);
      records[i] = resumed ? *resumed : run_target(jobs[i], ctx);
      size_t k = ++finished;
      if (progress) {
        std::lock_guard lock(out_mu);
        *progress << "[" << k << "/" << jobs.size() << "] " << records[i].target << ": "
                  << to_string(records[i].final_status) << (resumed ? " (resumed)" : "");
        if (records[i].final_coverage_pct) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.1f", *records[i].final_coverage_pct);
          *progress << ", coverage " << buf << "%";
        }
        if (records[i].final_rating) *progress << ", rating " << *records[i].final_rating;
        *progress << "\n";
      }
    }
  };
  size_t n_workers = std::min<size_t>(static_cast<size_t>(config.parallelism), std::max<size_t>(jobs.size(), 1));
  std::vector<std::thread> pool;
  for (size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::sort(records.begin(), records.end(), [](const SessionRecord& a, const SessionRecord& b) { return a.target < b.target; });
  RunResult result;
  result.report = aggregate(records);
  emit_reports(result.report, config.output_dir / "reports");
  result.exit_code = exit_code_for(records);
  result.records = std::move(records);
  return result;
}

}  // namespace forge
