#pragma once

#include <filesystem>
#include <string>

#include "forge/frontend.hpp"
#include "forge/mockup.hpp"
#include "forge/util.hpp"

namespace testing_support {

inline std::filesystem::path fixture(const std::string& rel) { return std::filesystem::path(FORGE_TEST_DIR) / "fixtures" / rel; }
inline std::filesystem::path tool(const std::string& rel) { return std::filesystem::path(FORGE_TEST_DIR) / "tools" / rel; }

inline forge::TranslationUnit parse_text(const forge::TempDir& dir, const std::string& name, const std::string& text) {
  auto p = dir.path() / name;
  forge::write_text_file(p, text);
  return forge::parse_unit(p);
}

inline forge::MockupUnit mockup_of(const std::filesystem::path& file, const std::string& target) {
  auto tu = forge::parse_unit(file);
  auto g = forge::build_graph(tu);
  return forge::generate_mockup(forge::implied_closure(g, target), tu, g.external_unresolved());
}

}  // namespace testing_support

#include <map>

#include <nlohmann/json.hpp>

#include "forge/verifier.hpp"

namespace testing_support {

inline forge::PropertyKind kind_from(const std::string& s) {
  using forge::PropertyKind;
  for (auto k : {PropertyKind::array_bounds, PropertyKind::pointer_deref, PropertyKind::arithmetic_overflow,
                 PropertyKind::division_by_zero, PropertyKind::assertion, PropertyKind::other})
    if (forge::to_string(k) == s) return k;
  throw std::runtime_error("unknown property kind " + s);
}

/// expected.json: file name -> violations, written by hand from each recorded output.
inline std::map<std::string, std::vector<forge::Violation>> golden_violations() {
  auto j = nlohmann::json::parse(forge::read_text_file(fixture("verifier/expected.json")));
  std::map<std::string, std::vector<forge::Violation>> out;
  for (const auto& [file, list] : j.items()) {
    auto& vs = out[file];
    for (const auto& v : list) {
      forge::Violation x;
      x.property_kind = kind_from(v["property_kind"]);
      x.description = v["description"];
      if (!v["location"].is_null())
        x.location = forge::CodeLocation{v["location"]["file"], v["location"]["line"], v["location"]["function"]};
      x.trace_depth = v["trace_depth"];
      for (const auto& a : v["assignments"]) x.assignments.push_back({a["variable"], a["value"]});
      vs.push_back(std::move(x));
    }
  }
  return out;
}

}  // namespace testing_support

#include "forge/config.hpp"

namespace testing_support {

/// Scripted run over `sources` replaying tests/fixtures/scenarios/<scenario>.
inline forge::RunConfig scenario_config(const std::string& scenario, const std::filesystem::path& sources,
                                        const std::filesystem::path& out, bool verifier = false) {
  forge::RunConfig cfg;
  cfg.source_roots = {sources};
  cfg.backend.kind = forge::BackendDescriptor::Kind::scripted;
  cfg.backend.script_dir = fixture("scenarios/" + scenario);
  cfg.verifier_enabled = verifier;
  cfg.verifier.executable = tool("fake_checker.py").string();
  cfg.verifier.extra_flags = {"--fixtures", fixture("verifier").string()};
  cfg.output_dir = out;
  return cfg;
}

/// Copies the named corpus files into a fresh directory under `dir`.
inline std::filesystem::path corpus_subset(const std::filesystem::path& dir, const std::vector<std::string>& names) {
  auto root = dir / "src";
  std::filesystem::create_directories(root);
  for (const auto& n : names) std::filesystem::copy_file(fixture("corpus/" + n + ".c"), root / (n + ".c"));
  return root;
}

}  // namespace testing_support
