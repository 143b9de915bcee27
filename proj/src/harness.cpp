#include "forge/harness.hpp"

#include <algorithm>
#include <regex>
#include <set>
#include <sstream>

#include "forge/ctoken.hpp"
#include "forge/error.hpp"
#include "forge/process.hpp"
#include "forge/util.hpp"

namespace forge {

std::string_view to_string(CaseStatus status) {
  switch (status) {
    case CaseStatus::untried: return "untried";
    case CaseStatus::passed: return "passed";
    case CaseStatus::failed_assert: return "failed_assert";
    case CaseStatus::crashed: return "crashed";
    case CaseStatus::disabled_crash: return "disabled_crash";
  }
  return "?";
}

const TestCase* TestSuite::find(std::string_view name) const {
  for (const auto& c : cases)
    if (c.name == name) return &c;
  return nullptr;
}

size_t TestSuite::count(CaseStatus status) const {
  return static_cast<size_t>(std::count_if(cases.begin(), cases.end(), [&](const TestCase& c) { return c.status == status; }));
}

namespace {

constexpr std::string_view kCrashMarker = "// CRASH: ";
constexpr std::string_view kCommentPrefix = "// ";

const char* const kAssertMacro =
    "#define TENX_ASSERT(cond) \\\n"
    "  do { \\\n"
    "    if (!(cond)) { \\\n"
    "      fprintf(stderr, \"%s:%d: assertion failed: %s\\n\", __FILE__, __LINE__, #cond); \\\n"
    "      exit(1); \\\n"
    "    } \\\n"
    "  } while (0)";

struct FunctionSpan {
  std::string name;
  size_t begin = 0;  // byte offsets into the generated text
  size_t end = 0;
  size_t name_offset = 0;
};

// Top-level function definitions named test_* or main.
std::vector<FunctionSpan> find_functions(const std::string& text) {
  auto toks = c::tokenize(text).tokens;
  std::vector<FunctionSpan> out;
  size_t decl_start = 0;
  int depth = 0;
  for (size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    if (t.is("{")) {
      ++depth;
      continue;
    }
    if (t.is("}")) {
      if (depth > 0) --depth;
      if (depth == 0) decl_start = i + 1;
      continue;
    }
    if (depth > 0) continue;
    if (t.is(";")) {
      decl_start = i + 1;
      continue;
    }
    if (!t.is_ident() || i + 1 >= toks.size() || !toks[i + 1].is("(")) continue;
    if (t.text.rfind("test_", 0) != 0 && t.text != "main") continue;
    size_t j = i + 1;
    int paren = 0;
    for (; j < toks.size(); ++j) {
      if (toks[j].is("(")) ++paren;
      if (toks[j].is(")") && --paren == 0) break;
    }
    if (j + 1 >= toks.size() || !toks[j + 1].is("{")) continue;
    size_t k = j + 1;
    int braces = 0;
    for (; k < toks.size(); ++k) {
      if (toks[k].is("{")) ++braces;
      if (toks[k].is("}") && --braces == 0) break;
    }
    if (k >= toks.size()) break;  // unterminated; left in support code for the compiler to report
    FunctionSpan f;
    f.name = t.text;
    f.begin = toks[std::min(decl_start, i)].offset;
    f.end = toks[k].end;
    f.name_offset = t.offset;
    out.push_back(f);
    i = k;
    decl_start = k + 1;
  }
  return out;
}

std::string collapse_blank_lines(const std::string& text) {
  std::vector<std::string> out;
  int blanks = 0;
  for (auto& l : split_lines(text)) {
    if (trim(l).empty()) {
      if (++blanks > 1) continue;
    } else {
      blanks = 0;
    }
    out.push_back(l);
  }
  while (!out.empty() && trim(out.front()).empty()) out.erase(out.begin());
  while (!out.empty() && trim(out.back()).empty()) out.pop_back();
  return out.empty() ? std::string() : join_lines(out);
}

std::string strip_quoted_includes(const std::string& text) {
  static const std::regex quoted(R"(^\s*#\s*include\s*".*$)");
  std::vector<std::string> out;
  for (auto& l : split_lines(text))
    if (!std::regex_match(l, quoted)) out.push_back(l);
  return join_lines(out);
}

}  // namespace

std::string crash_block(const TestCase& tc) {
  std::string out(kCrashMarker);
  out += tc.crash_signal.value_or("unknown");
  out += '\n';
  // split exactly on '\n' so a trailing empty line survives the round trip
  size_t from = 0;
  while (true) {
    size_t nl = tc.body.find('\n', from);
    out += kCommentPrefix;
    out.append(tc.body, from, nl == std::string::npos ? std::string::npos : nl - from);
    out += '\n';
    if (nl == std::string::npos) break;
    from = nl + 1;
  }
  return out;
}

std::string uncomment_crash_block(std::string_view commented) {
  std::vector<std::string> out;
  for (const auto& l : split_lines(commented)) {
    std::string_view v(l);
    if (v.rfind(kCommentPrefix, 0) == 0)
      v.remove_prefix(kCommentPrefix.size());
    else if (v == "//")
      v = {};
    out.emplace_back(v);
  }
  std::string s = join_lines(out);
  if (!s.empty()) s.pop_back();
  return s;
}

std::string tests_source(const TestSuite& suite) {
  std::string out;
  if (!suite.support_code.empty()) out += suite.support_code + "\n";
  for (const auto& c : suite.cases) {
    if (!out.empty()) out += "\n";
    if (c.status == CaseStatus::disabled_crash)
      out += crash_block(c);
    else
      out += c.body + "\n";
  }
  return out;
}

void render_harness(TestSuite& suite) {
  std::vector<std::string> lines;
  auto add = [&](const std::string& text) {
    for (auto& l : split_lines(text)) lines.push_back(l);
  };
  add("/* unit tests for " + suite.target + ", iteration " + std::to_string(suite.iteration) + " */");
  add("#include <stdio.h>\n#include <stdlib.h>\n#include <string.h>");
  add(kAssertMacro);
  lines.push_back("#line 1 \"" + suite.mockup_file + "\"");
  add(suite.mockup_source);
  lines.push_back("#line " + std::to_string(lines.size() + 2) + " \"" + suite.file_name() + "\"");
  if (!suite.support_code.empty()) {
    lines.emplace_back();
    add(suite.support_code);
  }
  for (const auto& c : suite.cases) {
    lines.emplace_back();
    if (c.status == CaseStatus::disabled_crash)
      add(crash_block(c));
    else
      add(c.body);
  }
  lines.emplace_back();
  lines.push_back("static const struct { const char *name; void (*fn)(void); } tenx_cases[] = {");
  for (const auto& c : suite.cases)
    if (c.status != CaseStatus::disabled_crash)
      lines.push_back("  {\"" + c.name + "\", (void (*)(void))" + c.name + "},");
  lines.push_back("  {0, 0}");
  lines.push_back("};");
  add(R"(
int main(int argc, char **argv)
{
  int i;
  if (argc < 2) {
    for (i = 0; tenx_cases[i].name; i++)
      tenx_cases[i].fn();
    return 0;
  }
  for (i = 0; tenx_cases[i].name; i++) {
    if (strcmp(tenx_cases[i].name, argv[1]) == 0) {
      tenx_cases[i].fn();
      return 0;
    }
  }
  fprintf(stderr, "unknown test case %s\n", argv[1]);
  return 2;
})");
  suite.harness_source = join_lines(lines);
}

TestSuite build_harness(const MockupUnit& mockup, const std::string& generated_code, int iteration,
                        const TestSuite* previous) {
  TestSuite suite;
  suite.target = mockup.target;
  suite.iteration = iteration;
  suite.mockup_file = mockup.file_name();
  suite.mockup_source = mockup.source_text;

  auto spans = find_functions(generated_code);
  bool any_test = std::any_of(spans.begin(), spans.end(), [](const FunctionSpan& f) { return f.name != "main"; });
  if (!any_test) throw NoTestsFound("no test_* function in generated code for " + mockup.target);

  std::set<std::string> taken;
  if (previous) {
    for (const auto& c : previous->cases)
      if (c.status == CaseStatus::disabled_crash) {
        suite.cases.push_back(c);
        taken.insert(c.name);
      }
  }

  std::string support;
  size_t pos = 0;
  for (const auto& f : spans) {
    support += generated_code.substr(pos, f.begin - pos);
    pos = f.end;
    if (f.name == "main") continue;
    TestCase tc;
    tc.iteration = iteration;
    tc.name = f.name;
    tc.body = generated_code.substr(f.begin, f.end - f.begin);
    if (taken.count(tc.name)) {
      std::string base = tc.name + "_v" + std::to_string(iteration);
      std::string name = base;
      for (int k = 2; taken.count(name); ++k) name = base + "_" + std::to_string(k);
      tc.body.replace(f.name_offset - f.begin, f.name.size(), name);
      tc.name = name;
    }
    taken.insert(tc.name);
    suite.cases.push_back(std::move(tc));
  }
  support += generated_code.substr(pos);
  suite.support_code = collapse_blank_lines(strip_quoted_includes(support));
  render_harness(suite);
  return suite;
}

CompileResult compile_suite(const TestSuite& suite, const CompilerConfig& config, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_text_file(dir / suite.file_name(), suite.harness_source);
  write_text_file(dir / suite.mockup_file, suite.mockup_source);
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".gcda" || entry.path().extension() == ".gcov") fs::remove(entry.path(), ec);

  std::string stem = suite.target + "_test";
  CompileResult result;
  result.binary = dir / stem;
  fs::remove(result.binary, ec);

  auto base = split_command(config.compiler);
  if (base.empty()) throw FatalConfig("compiler command is empty");
  if (!find_executable(base.front())) throw ToolMissing("compiler not found: " + base.front());

  ProcessSpec cc;
  cc.argv = base;
  cc.argv.insert(cc.argv.end(), config.flags.begin(), config.flags.end());
  cc.argv.insert(cc.argv.end(), config.coverage_flags.begin(), config.coverage_flags.end());
  cc.argv.insert(cc.argv.end(), {"-c", suite.file_name(), "-o", stem + ".o"});
  cc.cwd = dir;
  cc.timeout = config.timeout;
  auto res = run_process(cc);
  result.diagnostics = res.err;
  if (!res.exited_cleanly() || res.exit_code != 0) {
    if (res.timed_out) result.diagnostics += "\ncompiler timed out\n";
    return result;
  }

  ProcessSpec ld;
  ld.argv = base;
  ld.argv.insert(ld.argv.end(), config.coverage_flags.begin(), config.coverage_flags.end());
  ld.argv.insert(ld.argv.end(), {"-o", stem, stem + ".o"});
  ld.argv.insert(ld.argv.end(), config.link_libs.begin(), config.link_libs.end());
  ld.cwd = dir;
  ld.timeout = config.timeout;
  res = run_process(ld);
  result.diagnostics += res.err;
  result.ok = res.exited_cleanly() && res.exit_code == 0;
  return result;
}

TestSuite execute_suite(const std::filesystem::path& binary, const TestSuite& suite,
                        std::chrono::milliseconds per_case_timeout) {
  TestSuite out = suite;
  for (auto& c : out.cases) {
    if (c.status == CaseStatus::disabled_crash) continue;
    ProcessSpec spec;
    spec.argv = {binary.string(), c.name};
    spec.cwd = binary.parent_path();
    spec.timeout = per_case_timeout;
    auto res = run_process(spec);
    c.crash_signal.reset();
    if (res.timed_out) {
      c.status = CaseStatus::crashed;
      c.crash_signal = "timeout";
    } else if (res.spawn_failed) {
      c.status = CaseStatus::crashed;
      c.crash_signal = "could not start";
    } else if (res.term_signal != 0) {
      c.status = CaseStatus::crashed;
      c.crash_signal = describe_signal(res.term_signal);
    } else {
      c.status = res.exit_code == 0 ? CaseStatus::passed : CaseStatus::failed_assert;
    }
  }
  return out;
}

TestSuite disable_crashed(const TestSuite& suite) {
  TestSuite out = suite;
  bool changed = false;
  for (auto& c : out.cases)
    if (c.status == CaseStatus::crashed) {
      c.status = CaseStatus::disabled_crash;
      changed = true;
    }
  if (changed) render_harness(out);
  return out;
}

std::vector<GcovLine> parse_gcov(std::string_view text) {
  std::vector<GcovLine> out;
  for (const auto& raw : split_lines(text)) {
    size_t c1 = raw.find(':');
    if (c1 == std::string::npos) continue;
    size_t c2 = raw.find(':', c1 + 1);
    if (c2 == std::string::npos) continue;
    std::string count = trim(std::string_view(raw).substr(0, c1));
    std::string lineno = trim(std::string_view(raw).substr(c1 + 1, c2 - c1 - 1));
    if (lineno.empty() || !std::all_of(lineno.begin(), lineno.end(), ::isdigit)) continue;
    int line = std::stoi(lineno);
    if (line == 0) continue;  // header records
    if (!count.empty() && count.back() == '*') count.pop_back();
    GcovLine g;
    g.line = line;
    if (count == "-") {
      // not executable
    } else if (count == "#####" || count == "=====") {
      g.count = 0;
    } else if (!count.empty() && std::all_of(count.begin(), count.end(), ::isdigit)) {
      g.count = std::stoll(count);
    } else {
      continue;
    }
    out.push_back(g);
  }
  return out;
}

CoverageReport coverage_from_gcov(const std::vector<GcovLine>& lines, const MockupUnit& mockup) {
  CoverageReport r;
  int n = mockup.line_count();
  for (const auto& g : lines) {
    if (!g.count || g.line < 1 || g.line > n) continue;
    if (!map_back(mockup, g.line)) continue;
    r.per_line[g.line] += *g.count;
  }
  for (const auto& [line, count] : r.per_line)
    if (count == 0) r.uncovered_lines.push_back(line);
  if (r.total() > 0) r.line_coverage_pct = 100.0 * r.covered() / r.total();
  return r;
}

CoverageReport measure_coverage(const std::filesystem::path& binary_dir, const MockupUnit& mockup,
                                const std::string& coverage_tool) {
  namespace fs = std::filesystem;
  std::string stem = mockup.target + "_test";
  if (!fs::exists(binary_dir / (stem + ".gcda"))) throw NoCoverageData("no coverage counters for " + mockup.target);
  auto argv = split_command(coverage_tool);
  if (argv.empty() || !find_executable(argv.front())) throw ToolMissing("coverage tool not found: " + coverage_tool);
  argv.insert(argv.end(), {"-o", ".", stem + ".c"});
  ProcessSpec spec;
  spec.argv = argv;
  spec.cwd = binary_dir;
  spec.timeout = std::chrono::seconds(60);
  auto res = run_process(spec);
  if (!res.exited_cleanly() || res.exit_code != 0)
    throw CoverageToolFailed("coverage tool failed for " + mockup.target, res.err);
  auto report = binary_dir / (mockup.file_name() + ".gcov");
  if (!fs::exists(report)) throw CoverageToolFailed("no annotated source for " + mockup.file_name(), res.err + res.out);
  return coverage_from_gcov(parse_gcov(read_text_file(report)), mockup);
}

std::string coverage_summary(const CoverageReport& report, const MockupUnit& mockup) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(1);
  os << "Line coverage: " << report.line_coverage_pct << "% (" << report.covered() << " of " << report.total()
     << " executable lines).\n";
  if (report.uncovered_lines.empty()) return os.str();
  os << "Lines never executed:\n";
  auto lines = split_lines(mockup.source_text);
  for (int l : report.uncovered_lines) {
    auto origin = map_back(mockup, l);
    os << "  line " << l;
    if (origin) os << " (" << origin->file << ":" << origin->line << ")";
    os << ": " << trim(lines[static_cast<size_t>(l - 1)]) << "\n";
  }
  return os.str();
}

nlohmann::json to_json(const CoverageReport& report, const MockupUnit& mockup) {
  nlohmann::json lines = nlohmann::json::array();
  for (const auto& [line, count] : report.per_line) {
    nlohmann::json e{{"line", line}, {"count", count}};
    if (auto o = map_back(mockup, line)) {
      e["file"] = o->file;
      e["original_line"] = o->line;
    }
    lines.push_back(e);
  }
  return {{"target", mockup.target},
          {"line_coverage_pct", report.line_coverage_pct},
          {"covered", report.covered()},
          {"total", report.total()},
          {"uncovered_lines", report.uncovered_lines},
          {"lines", lines}};
}

nlohmann::json to_json(const TestSuite& suite) {
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : suite.cases) {
    nlohmann::json e{{"name", c.name}, {"status", to_string(c.status)}, {"iteration", c.iteration}};
    e["crash_signal"] = c.crash_signal ? nlohmann::json(*c.crash_signal) : nlohmann::json(nullptr);
    cases.push_back(e);
  }
  return {{"target", suite.target}, {"iteration", suite.iteration}, {"cases", cases}};
}

}  // namespace forge
