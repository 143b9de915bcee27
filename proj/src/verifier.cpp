#include "forge/verifier.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "forge/ctoken.hpp"
#include "forge/error.hpp"
#include "forge/process.hpp"
#include "forge/util.hpp"

namespace forge {

namespace {

constexpr int kDriverBuffer = 16;
constexpr size_t kSummaryAssignments = 12;

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

int to_int(const std::string& s) {
  try {
    return std::stoi(s);
  } catch (...) {
    return 0;
  }
}

}  // namespace

void VerifierConfig::validate() const {
  if (executable.empty()) throw FatalConfig("verifier executable is empty");
  if (timeout.count() <= 0) throw FatalConfig("verifier timeout must be positive");
  if (unwind_bound < 1) throw FatalConfig("unwind bound must be at least 1");
}

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::verification_failed: return "verification_failed";
    case Verdict::verification_successful: return "verification_successful";
    case Verdict::timeout: return "timeout";
    case Verdict::tool_error: return "tool_error";
  }
  return "?";
}

std::string_view to_string(PropertyKind kind) {
  switch (kind) {
    case PropertyKind::array_bounds: return "array_bounds";
    case PropertyKind::pointer_deref: return "pointer_deref";
    case PropertyKind::arithmetic_overflow: return "arithmetic_overflow";
    case PropertyKind::division_by_zero: return "division_by_zero";
    case PropertyKind::assertion: return "assertion";
    case PropertyKind::other: return "other";
  }
  return "?";
}

bool VerifierReport::consistent() const {
  return (verdict == Verdict::verification_failed) == !violations.empty();
}

const CounterexampleGrammar& esbmc_grammar() {
  static const CounterexampleGrammar g{
      "esbmc",
      std::regex(R"(^\[Counterexample\]\s*$)"),
      std::regex(R"(^State (\d+)(?:\s+file (\S+) line (\d+)(?: column \d+)?(?: function (\S+))?)?.*$)"),
      std::regex(R"(^\s+(\S.*?) = (.*)$)"),
      std::regex(R"(^Violated property:\s*$)"),
      std::regex(R"(^\s*file (\S+) line (\d+)(?: column \d+)?(?: function (\S+))?.*$)"),
      std::regex(R"(^VERIFICATION (FAILED|SUCCESSFUL|UNKNOWN)\b.*$)"),
      {
          {"unwinding assertion", PropertyKind::other},
          {"array bounds violated", PropertyKind::array_bounds},
          {"access to object out of bounds", PropertyKind::array_bounds},
          {"dereference failure", PropertyKind::pointer_deref},
          {"arithmetic overflow", PropertyKind::arithmetic_overflow},
          {"division by zero", PropertyKind::division_by_zero},
          {"assertion", PropertyKind::assertion},
      },
  };
  return g;
}

PropertyKind classify_property(std::string_view text, const CounterexampleGrammar& grammar) {
  std::string l = lower(text);
  for (const auto& [needle, kind] : grammar.classification)
    if (l.find(needle) != std::string::npos) return kind;
  return PropertyKind::other;
}

namespace {

Violation parse_section(const std::vector<std::string>& lines, const CounterexampleGrammar& g) {
  static const std::regex binary_suffix(R"(^(.*?)\s+\([01 ]+\)$)");
  Violation v;
  std::optional<CodeLocation> last_state;
  std::optional<CodeLocation> violated_at;
  std::vector<std::string> property_lines;
  bool in_state = false;
  bool in_property = false;
  std::smatch m;

  for (size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (std::regex_match(line, m, g.state_header)) {
      ++v.trace_depth;
      in_state = true;
      in_property = false;
      if (m[2].matched) last_state = CodeLocation{m[2].str(), to_int(m[3].str()), m[4].matched ? m[4].str() : ""};
      continue;
    }
    if (std::regex_match(line, g.violated_header)) {
      in_state = false;
      in_property = true;
      continue;
    }
    if (in_property) {
      if (trim(line).empty()) {
        if (!property_lines.empty() || violated_at) in_property = false;
        continue;
      }
      if (!violated_at && property_lines.empty() && std::regex_match(line, m, g.location)) {
        violated_at = CodeLocation{m[1].str(), to_int(m[2].str()), m[3].matched ? m[3].str() : ""};
        continue;
      }
      property_lines.push_back(trim(line));
      continue;
    }
    if (in_state) {
      if (line.find_first_not_of('-') == std::string::npos && !line.empty()) continue;
      if (std::regex_match(line, m, g.assignment)) {
        std::string value = m[2].str();
        std::smatch b;
        if (std::regex_match(value, b, binary_suffix)) value = b[1].str();
        v.assignments.push_back({trim(m[1].str()), trim(value)});
      }
    }
  }

  if (!property_lines.empty()) {
    std::string desc;
    for (const auto& p : property_lines) desc += (desc.empty() ? "" : "\n") + p;
    v.description = desc;
    v.property_kind = classify_property(desc, g);
    v.location = violated_at ? violated_at : last_state;
  } else {
    v.property_kind = PropertyKind::other;
    v.description = trim(join_lines(lines));
    v.location = violated_at ? violated_at : last_state;
  }
  if (v.location && v.location->line < 1) v.location.reset();
  return v;
}

}  // namespace

std::vector<Violation> parse_counterexample(std::string_view raw_output, const CounterexampleGrammar& grammar) {
  std::vector<Violation> out;
  auto lines = split_lines(raw_output);
  for (auto& l : lines)
    if (!l.empty() && l.back() == '\r') l.pop_back();
  size_t i = 0;
  while (i < lines.size()) {
    if (!std::regex_match(lines[i], grammar.section_start)) {
      ++i;
      continue;
    }
    size_t j = i + 1;
    while (j < lines.size() && !std::regex_match(lines[j], grammar.section_start) &&
           !std::regex_match(lines[j], grammar.section_end))
      ++j;
    std::vector<std::string> section(lines.begin() + static_cast<long>(i + 1), lines.begin() + static_cast<long>(j));
    out.push_back(parse_section(section, grammar));
    i = j;
  }
  return out;
}

namespace {

void declare_argument(const Param& p, std::ostringstream& os) {
  if (p.function_pointer) {
    os << "  " << p.text << " = 0;\n";
    return;
  }
  if (p.text.find('[') != std::string::npos) {
    std::string t = std::regex_replace(p.text, std::regex(R"(\[\s*\])"), "[" + std::to_string(kDriverBuffer) + "]");
    os << "  " << t << ";\n";
    return;
  }
  if (!p.pointer) {
    os << "  " << p.text << ";\n";
    return;
  }
  auto toks = c::tokenize(p.text).tokens;
  size_t name_at = toks.size();
  for (size_t k = toks.size(); k-- > 0;)
    if (toks[k].is_ident() && toks[k].text == p.name) {
      name_at = k;
      break;
    }
  size_t star = toks.size();
  for (size_t k = 0; k < std::min(name_at, toks.size()); ++k)
    if (toks[k].is("*")) star = k;
  if (star == toks.size()) {
    os << "  " << p.text << ";\n";
    return;
  }
  std::string base = star == 0 ? "char" : c::join_tokens(toks, 0, star);
  bool is_void = true;
  for (size_t k = 0; k < star; ++k)
    if (!toks[k].is("void") && !toks[k].is("const") && !toks[k].is("volatile")) is_void = false;
  if (is_void) base = "char";
  os << "  " << base << " " << p.name << "_obj[" << kDriverBuffer << "];\n";
  os << "  " << p.text << " = " << (is_void ? "(void *)" : "") << p.name << "_obj;\n";
}

}  // namespace

std::string synthesize_driver(const MockupUnit& mockup) {
  std::ostringstream os;
  os << "\n/* verification driver: unconstrained arguments */\n";
  os << "int main(void)\n{\n";
  std::vector<std::string> args;
  for (const auto& p : mockup.target_params) {
    declare_argument(p, os);
    args.push_back(p.name);
  }
  os << "  " << mockup.target_symbol() << "(";
  for (size_t i = 0; i < args.size(); ++i) os << (i ? ", " : "") << args[i];
  os << ");\n  return 0;\n}\n";
  return os.str();
}

VerifierReport run_verifier(const MockupUnit& mockup, const VerifierConfig& config,
                            const std::filesystem::path& work_dir) {
  config.validate();
  auto exe = find_executable(config.executable);
  if (!exe) throw ToolMissing("verifier not found: " + config.executable);

  std::optional<TempDir> scratch;
  std::filesystem::path dir = work_dir;
  if (dir.empty()) {
    scratch.emplace("forge-verify");
    dir = scratch->path();
  }
  std::string input = mockup.target + "_verify.c";
  write_text_file(dir / input, mockup.source_text + synthesize_driver(mockup));

  ProcessSpec spec;
  spec.argv = {exe->string(), input, "--unwind", std::to_string(config.unwind_bound)};
  spec.argv.insert(spec.argv.end(), config.extra_flags.begin(), config.extra_flags.end());
  spec.cwd = dir;
  spec.timeout = config.timeout;
  auto res = run_process(spec);

  VerifierReport report;
  report.raw_output = res.out + res.err;
  report.elapsed = res.elapsed;
  report.unwind_bound = config.unwind_bound;
  report.timeout = config.timeout;
  if (res.timed_out) {
    report.verdict = Verdict::timeout;
  } else if (!res.exited_cleanly()) {
    report.verdict = Verdict::tool_error;
  } else if (res.exit_code == 0) {
    report.verdict = Verdict::verification_successful;
  } else if (std::regex_search(report.raw_output, std::regex(R"((^|\n)\[Counterexample\])"))) {
    report.violations = parse_counterexample(report.raw_output);
    report.verdict = report.violations.empty() ? Verdict::tool_error : Verdict::verification_failed;
  } else {
    report.verdict = Verdict::tool_error;
  }
  return report;
}

std::string sensitization_summary(const VerifierReport& report, const MockupUnit& mockup) {
  std::ostringstream os;
  auto secs = std::chrono::duration<double>(report.timeout).count();
  switch (report.verdict) {
    case Verdict::verification_successful:
      os << "The model checker found no property violation in " << mockup.target << " within unwind bound "
         << report.unwind_bound << ". Loops deeper than the bound were not explored.\n";
      return os.str();
    case Verdict::timeout:
      os << "The model checker was inconclusive for " << mockup.target << ": it hit the " << secs
         << " s time limit with unwind bound " << report.unwind_bound << ".\n";
      return os.str();
    case Verdict::tool_error:
      os << "The model checker could not analyse " << mockup.target << " (unwind bound " << report.unwind_bound
         << "). No property information is available.\n";
      return os.str();
    case Verdict::verification_failed:
      break;
  }
  int mockup_lines = mockup.line_count();
  os << "The model checker found " << report.violations.size() << " potential violation"
     << (report.violations.size() == 1 ? "" : "s") << " in " << mockup.target << " (unwind bound "
     << report.unwind_bound << ").\n";
  int n = 0;
  for (const auto& v : report.violations) {
    os << ++n << ". " << to_string(v.property_kind);
    if (v.location) {
      os << " in " << (v.location->function.empty() ? "?" : v.location->function);
      int line = v.location->line;
      if (line <= mockup_lines) {
        auto origin = map_back(mockup, line);
        if (origin)
          os << " at " << origin->file << ":" << origin->line << " (mockup line " << line << ")";
        else
          os << " at mockup line " << line << " (generated code)";
      } else {
        os << " in the verification driver";
      }
    }
    os << "\n   property: ";
    std::string desc = v.description;
    std::replace(desc.begin(), desc.end(), '\n', ' ');
    os << desc << "\n";
    if (!v.assignments.empty()) {
      os << "   trace (" << v.trace_depth << " states), last values:";
      size_t from = v.assignments.size() > kSummaryAssignments ? v.assignments.size() - kSummaryAssignments : 0;
      for (size_t i = from; i < v.assignments.size(); ++i)
        os << (i == from ? " " : ", ") << v.assignments[i].variable << " = " << v.assignments[i].value;
      os << "\n";
    }
  }
  return os.str();
}

nlohmann::json to_json(const Violation& v) {
  nlohmann::json j{{"property_kind", to_string(v.property_kind)},
                   {"description", v.description},
                   {"trace_depth", v.trace_depth}};
  if (v.location)
    j["location"] = {{"file", v.location->file}, {"line", v.location->line}, {"function", v.location->function}};
  else
    j["location"] = nullptr;
  auto& a = j["assignments"] = nlohmann::json::array();
  for (const auto& as : v.assignments) a.push_back({{"variable", as.variable}, {"value", as.value}});
  return j;
}

nlohmann::json to_json(const VerifierReport& report) {
  nlohmann::json j{{"verdict", to_string(report.verdict)},
                   {"unwind_bound", report.unwind_bound},
                   {"elapsed_s", report.elapsed.count()}};
  auto& vs = j["violations"] = nlohmann::json::array();
  for (const auto& v : report.violations) vs.push_back(to_json(v));
  return j;
}

}  // namespace forge
