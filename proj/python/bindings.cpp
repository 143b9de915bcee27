#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "forge/config.hpp"
#include "forge/error.hpp"
#include "forge/frontend.hpp"
#include "forge/harness.hpp"
#include "forge/llm.hpp"
#include "forge/mockup.hpp"
#include "forge/orchestrator.hpp"
#include "forge/stats.hpp"
#include "forge/verifier.hpp"

namespace py = pybind11;

// Structured results cross the boundary as JSON text; the Python package decodes them.
namespace {

std::string unit_json(const std::string& path, const std::vector<std::string>& include_dirs,
                      const std::vector<std::string>& defines) {
  forge::ParseOptions opts;
  for (const auto& d : include_dirs) opts.include_dirs.emplace_back(d);
  opts.defines = defines;
  auto tu = forge::parse_unit(path, opts);
  auto graph = forge::build_graph(tu);
  nlohmann::json symbols = nlohmann::json::array();
  for (const auto& s : tu.symbols) {
    if (s.system) continue;
    const auto& o = tu.origin_of(s.span.start_line);
    symbols.push_back({{"name", s.name},
                       {"kind", forge::to_string(s.kind)},
                       {"storage", forge::to_string(s.storage)},
                       {"file", o.file},
                       {"line", o.line},
                       {"is_definition", s.is_definition},
                       {"references", s.references}});
  }
  return nlohmann::json{{"path", tu.path.string()},
                        {"symbols", symbols},
                        {"declaration_count", tu.declaration_count},
                        {"external_unresolved", graph.external_unresolved()}}
      .dump();
}

std::vector<std::string> closure_names(const std::string& path, const std::string& target) {
  auto tu = forge::parse_unit(path);
  std::vector<std::string> out;
  for (const auto& s : forge::implied_closure(forge::build_graph(tu), target))
    if (!s.system) out.push_back(s.name);
  return out;
}

std::string mockup_json(const std::string& path, const std::string& target) {
  auto tu = forge::parse_unit(path);
  auto graph = forge::build_graph(tu);
  auto m = forge::generate_mockup(forge::implied_closure(graph, target), tu, graph.external_unresolved());
  nlohmann::json stubs = nlohmann::json::array();
  for (const auto& s : m.stubs) stubs.push_back({{"name", s.name}, {"behavior", forge::to_string(s.behavior)}});
  return nlohmann::json{{"target", m.target},
                        {"source", m.source_text},
                        {"source_map", forge::source_map_json(m)},
                        {"stubs", stubs}}
      .dump();
}

std::string violations_json(const std::string& raw) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& v : forge::parse_counterexample(raw)) out.push_back(forge::to_json(v));
  return out.dump();
}

std::string response_json(const std::string& text) {
  auto r = forge::parse_response(text);
  auto opt = [](const auto& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return nlohmann::json{{"text", r.text},
                        {"extracted_code", opt(r.extracted_code)},
                        {"extracted_rating", opt(r.extracted_rating)},
                        {"extracted_plan", opt(r.extracted_plan)},
                        {"code_blocks", r.code_blocks},
                        {"rating_clamped", r.rating_clamped}}
      .dump();
}

std::string prompt(const std::string& source, const std::string& instruction, std::optional<std::string> prior_tests,
                   std::optional<std::string> coverage, std::optional<std::string> verifier, size_t budget) {
  forge::PromptBundle b;
  b.mockup_source = source;
  b.instruction = instruction == "reflect" ? forge::Instruction::reflect : forge::Instruction::generate_tests;
  b.prior_tests = std::move(prior_tests);
  b.coverage_summary = std::move(coverage);
  b.verifier_summary = std::move(verifier);
  b.token_budget = budget;
  return forge::assemble_prompt(b);
}

std::string run_json(const std::string& config_path, std::optional<std::string> output_dir,
                     std::optional<std::string> backend, std::optional<int> max_iterations) {
  auto cfg = forge::load_config(config_path);
  if (output_dir) cfg.output_dir = *output_dir;
  if (backend) {
    auto http = cfg.backend.http;
    cfg.backend = forge::parse_backend(*backend);
    cfg.backend.http = http;
  }
  if (max_iterations) cfg.max_iterations = *max_iterations;
  forge::RunResult result;
  {
    py::gil_scoped_release release;
    result = forge::run_pipeline(cfg);
  }
  auto j = forge::to_json(result.report);
  j["exit_code"] = result.exit_code;
  return j.dump();
}

std::string report_json(const std::string& output_dir) {
  auto records = forge::load_records(output_dir);
  auto agg = forge::aggregate(records);
  forge::emit_reports(agg, std::filesystem::path(output_dir) / "reports");
  return forge::to_json(agg).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "C++ core of legacy_forge";

  auto base = py::register_exception<forge::Error>(m, "ForgeError");
  py::register_exception<forge::FatalConfig>(m, "FatalConfig", base.ptr());
  py::register_exception<forge::ParseFailed>(m, "ParseFailed", base.ptr());
  py::register_exception<forge::PreprocessFailed>(m, "PreprocessFailed", base.ptr());
  py::register_exception<forge::TargetNotFound>(m, "TargetNotFound", base.ptr());
  py::register_exception<forge::SourceTooLarge>(m, "SourceTooLarge", base.ptr());
  py::register_exception<forge::DegenerateInput>(m, "DegenerateInput", base.ptr());
  py::register_exception<forge::EmptyInput>(m, "EmptyInput", base.ptr());

  m.def("parse_unit_json", &unit_json, py::arg("path"), py::arg("include_dirs") = std::vector<std::string>{},
        py::arg("defines") = std::vector<std::string>{});
  m.def("implied_closure", &closure_names, py::arg("path"), py::arg("target"));
  m.def("generate_mockup_json", &mockup_json, py::arg("path"), py::arg("target"));
  m.def("parse_counterexample_json", &violations_json, py::arg("raw_output"));
  m.def("parse_response_json", &response_json, py::arg("text"));
  m.def("assemble_prompt", &prompt, py::arg("source"), py::arg("instruction") = "generate_tests",
        py::arg("prior_tests") = py::none(), py::arg("coverage") = py::none(), py::arg("verifier") = py::none(),
        py::arg("token_budget") = 32768);
  m.def(
      "pearson",
      [](const std::vector<double>& xs, const std::vector<double>& ys) {
        auto r = forge::pearson(xs, ys);
        return std::make_pair(r.r, r.p);
      },
      py::arg("xs"), py::arg("ys"));
  m.def(
      "improvement_stats",
      [](const std::vector<std::pair<int, int>>& pairs) {
        auto s = forge::improvement_stats(pairs);
        return py::make_tuple(s.n_improved, s.improvement_rate, s.median_gain, s.max_gain);
      },
      py::arg("rating_pairs"));
  m.def("run_pipeline_json", &run_json, py::arg("config"), py::arg("output_dir") = py::none(),
        py::arg("backend") = py::none(), py::arg("max_iterations") = py::none());
  m.def("report_json", &report_json, py::arg("output_dir"));
}
