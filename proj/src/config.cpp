#include "forge/config.hpp"

#include <fnmatch.h>

#include <functional>
#include <sstream>

#include "forge/error.hpp"
#include "forge/process.hpp"
#include "forge/util.hpp"

namespace forge {

namespace {

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_absolute() || base.empty()) return path.lexically_normal();
  return (base / path).lexically_normal();
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw FatalConfig(key + ": expected true or false, got '" + v + "'");
}

long parse_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    long n = std::stol(v, &used);
    if (used == v.size()) return n;
  } catch (...) {
  }
  throw FatalConfig(key + ": expected an integer, got '" + v + "'");
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (...) {
  }
  throw FatalConfig(key + ": expected a number, got '" + v + "'");
}

std::chrono::milliseconds parse_seconds(const std::string& key, const std::string& v) {
  return std::chrono::milliseconds(static_cast<long long>(parse_real(key, v) * 1000.0));
}

}  // namespace

bool TargetSelector::matches(const std::string& name) const {
  if (patterns.empty()) return true;
  for (const auto& p : patterns)
    if (::fnmatch(p.c_str(), name.c_str(), 0) == 0) return true;
  return false;
}

TargetSelector TargetSelector::parse(const std::string& text) {
  TargetSelector s;
  std::string t = trim(text);
  if (t.empty() || t == "all" || t == "*") return s;
  s.patterns = split_list(t);
  return s;
}

BackendDescriptor parse_backend(const std::string& text, const std::filesystem::path& base_dir) {
  BackendDescriptor d;
  std::string t = trim(text);
  if (t.rfind("scripted:", 0) == 0) {
    d.kind = BackendDescriptor::Kind::scripted;
    std::string dir = t.substr(9);
    if (dir.empty()) throw FatalConfig("backend: scripted needs a directory");
    d.script_dir = resolve(base_dir, dir);
  } else if (t == "http") {
    d.kind = BackendDescriptor::Kind::http;
  } else {
    throw FatalConfig("backend: expected scripted:<dir> or http, got '" + t + "'");
  }
  return d;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  RunConfig c;
  std::string backend_kind;
  HttpBackendConfig http;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"source_roots", [&](auto&, auto& v) {
         c.source_roots.clear();
         for (auto& p : split_list(v)) c.source_roots.push_back(resolve(base_dir, p));
       }},
      {"targets", [&](auto&, auto& v) { c.targets = TargetSelector::parse(v); }},
      {"include_dirs", [&](auto&, auto& v) {
         c.include_dirs.clear();
         for (auto& p : split_list(v)) c.include_dirs.push_back(resolve(base_dir, p));
       }},
      {"defines", [&](auto&, auto& v) { c.defines = split_list(v); }},
      {"preprocessor", [&](auto&, auto& v) { c.preprocessor = v; }},
      {"prelude_includes", [&](auto&, auto& v) { c.prelude_includes = split_list(v); }},
      {"verifier.executable", [&](auto&, auto& v) {
         c.verifier.executable = v.find('/') == std::string::npos ? v : resolve(base_dir, v).string();
       }},
      {"verifier.extra_flags", [&](auto&, auto& v) { c.verifier.extra_flags = split_command(v); }},
      {"verifier.timeout", [&](auto& k, auto& v) { c.verifier.timeout = parse_seconds(k, v); }},
      {"verifier.unwind_bound", [&](auto& k, auto& v) { c.verifier.unwind_bound = static_cast<int>(parse_int(k, v)); }},
      {"verifier.enabled", [&](auto& k, auto& v) { c.verifier_enabled = parse_bool(k, v); }},
      {"backend", [&](auto&, auto& v) { backend_kind = v; }},
      {"backend.url", [&](auto&, auto& v) { http.url = v; }},
      {"backend.model", [&](auto&, auto& v) { http.model = v; }},
      {"backend.credentials_env", [&](auto&, auto& v) { http.credentials_env = v; }},
      {"backend.temperature", [&](auto& k, auto& v) { http.temperature = parse_real(k, v); }},
      {"backend.retries", [&](auto& k, auto& v) { http.retries = static_cast<int>(parse_int(k, v)); }},
      {"token_budget", [&](auto& k, auto& v) {
         long n = parse_int(k, v);
         if (n <= 0) throw FatalConfig("token_budget must be positive");
         c.token_budget = static_cast<size_t>(n);
       }},
      {"max_iterations", [&](auto& k, auto& v) { c.max_iterations = static_cast<int>(parse_int(k, v)); }},
      {"compiler", [&](auto&, auto& v) { c.compiler.compiler = v; }},
      {"compiler_flags", [&](auto&, auto& v) { c.compiler.flags = split_command(v); }},
      {"coverage_tool", [&](auto&, auto& v) { c.coverage_tool = v; }},
      {"per_case_timeout", [&](auto& k, auto& v) { c.per_case_timeout = parse_seconds(k, v); }},
      {"output_dir", [&](auto&, auto& v) { c.output_dir = resolve(base_dir, v); }},
      {"parallelism", [&](auto& k, auto& v) { c.parallelism = static_cast<int>(parse_int(k, v)); }},
  };

  int line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw FatalConfig("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) throw FatalConfig("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    it->second(key, value);
  }

  if (!backend_kind.empty()) c.backend = parse_backend(backend_kind, base_dir);
  c.backend.http = http;
  return c;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::string text;
  try {
    text = read_text_file(file);
  } catch (const IoFailure& e) {
    throw FatalConfig(e.what());
  }
  auto base = std::filesystem::absolute(file).parent_path();
  return parse_config(text, base);
}

void RunConfig::validate() const {
  if (source_roots.empty()) throw FatalConfig("source_roots is empty");
  for (const auto& r : source_roots)
    if (!std::filesystem::exists(r)) throw FatalConfig("source root not found: " + r.string());
  if (max_iterations < 1) throw FatalConfig("max_iterations must be at least 1");
  if (parallelism < 1) throw FatalConfig("parallelism must be at least 1");
  if (per_case_timeout.count() <= 0) throw FatalConfig("per_case_timeout must be positive");
  if (token_budget == 0) throw FatalConfig("token_budget must be positive");
  if (verifier_enabled) verifier.validate();
  if (backend.kind == BackendDescriptor::Kind::scripted) {
    if (!std::filesystem::is_directory(backend.script_dir))
      throw FatalConfig("script directory not found: " + backend.script_dir.string());
  } else if (backend.http.url.empty()) {
    throw FatalConfig("backend.url is required for the http backend");
  }
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec || !std::filesystem::is_directory(output_dir))
    throw FatalConfig("output_dir not writable: " + output_dir.string());
}

std::unique_ptr<ModelBackend> make_backend(const BackendDescriptor& descriptor) {
  if (descriptor.kind == BackendDescriptor::Kind::scripted) return std::make_unique<ScriptedBackend>(descriptor.script_dir);
  return std::make_unique<HttpBackend>(descriptor.http);
}

}  // namespace forge
