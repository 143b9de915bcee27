#include "forge/llm.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "forge/error.hpp"
#include "forge/util.hpp"

namespace forge {

namespace templates {
extern const char* const generate_tests_v1;
extern const char* const reflect_v1;
}  // namespace templates

std::string_view to_string(Instruction instruction) {
  switch (instruction) {
    case Instruction::generate_tests: return "generate_tests";
    case Instruction::reflect: return "reflect";
  }
  return "?";
}

const std::string& instruction_template(Instruction instruction, std::string_view version) {
  static const std::string generate = trim(templates::generate_tests_v1);
  static const std::string reflect = trim(templates::reflect_v1);
  if (version != "v1") throw FatalConfig("unknown instruction template version " + std::string(version));
  return instruction == Instruction::reflect ? reflect : generate;
}

namespace {

struct Section {
  std::string name;
  std::string body;
  int cut_rank;  // 0 never cut; lower positive ranks go first
  bool dropped = false;
};

std::string render(const std::vector<Section>& sections) {
  std::string out;
  for (const auto& s : sections) {
    if (s.dropped) continue;
    if (!out.empty()) out += '\n';
    out += "### " + s.name + "\n" + s.body;
    if (s.body.empty() || s.body.back() != '\n') out += '\n';
  }
  return out;
}

size_t utf8_floor(const std::string& s, size_t k) {
  while (k > 0 && k < s.size() && (static_cast<unsigned char>(s[k]) & 0xC0) == 0x80) --k;
  return k;
}

}  // namespace

std::string assemble_prompt(const PromptBundle& bundle) {
  if (bundle.mockup_source.empty()) throw EmptyInput("prompt needs the mockup source");
  if (bundle.token_budget == 0) throw FatalConfig("token budget must be positive");

  std::vector<Section> sections;
  sections.push_back({"INSTRUCTION", instruction_template(bundle.instruction), 0});
  sections.push_back({"SOURCE", bundle.mockup_source, 0});
  if (bundle.verifier_summary) sections.push_back({"VERIFIER", *bundle.verifier_summary, 4});
  if (bundle.coverage_summary) sections.push_back({"COVERAGE", *bundle.coverage_summary, 2});
  if (bundle.diagnostics) sections.push_back({"COMPILER DIAGNOSTICS", *bundle.diagnostics, 3});
  if (bundle.prior_tests || bundle.plan) {
    std::string body;
    if (bundle.plan) body += "Plan from the last review: " + *bundle.plan + "\n\n";
    if (bundle.prior_tests) body += *bundle.prior_tests;
    sections.push_back({"PRIOR TESTS", body, 1});
  }

  const size_t budget = bundle.token_budget;
  std::string text = render(sections);
  for (int rank = 1; rank <= 4 && text.size() > budget; ++rank) {
    for (auto& s : sections) {
      if (s.cut_rank != rank) continue;
      const std::string original = s.body;
      while (text.size() > budget && !s.dropped) {
        size_t over = text.size() - budget;
        size_t want = s.body.size() > over ? s.body.size() - over : 0;
        if (want <= kTruncationMarker.size()) {
          s.dropped = true;
        } else {
          size_t keep = utf8_floor(original, want - kTruncationMarker.size());
          s.body = original.substr(0, keep) + std::string(kTruncationMarker);
        }
        text = render(sections);
      }
    }
  }
  if (text.size() > budget)
    throw SourceTooLarge("source and instruction need " + std::to_string(text.size()) + " characters, budget is " +
                         std::to_string(budget));
  return text;
}

ModelResponse parse_response(std::string text) {
  ModelResponse r;
  r.text = std::move(text);

  auto lines = split_lines(r.text);
  bool open = false;
  std::string block;
  for (const auto& raw : lines) {
    std::string line = raw;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = trim(line);
    if (t.rfind("```", 0) == 0) {
      if (!open) {
        open = true;
        block.clear();
      } else {
        open = false;
        ++r.code_blocks;
        if (!r.extracted_code) r.extracted_code = block;
      }
      continue;
    }
    if (open) block += line + "\n";
  }

  static const std::regex rating(R"((^|\n)[ \t*]*RATING[ \t*]*:[ \t*]*(-?[0-9]+))");
  static const std::regex plan(R"((^|\n)[ \t*]*PLAN[ \t*]*:[ \t]*)");
  std::smatch m;
  if (std::regex_search(r.text, m, rating)) {
    long v = 0;
    try {
      v = std::stol(m[2].str());
    } catch (...) {
      v = m[2].str().front() == '-' ? -1 : 9;
    }
    long c = std::clamp(v, 0L, 8L);
    r.rating_clamped = c != v;
    r.extracted_rating = static_cast<int>(c);
  }
  if (std::regex_search(r.text, m, plan)) {
    std::string p = trim(m.suffix().str());
    if (!p.empty()) r.extracted_plan = p;
  }
  return r;
}

ScriptedBackend::ScriptedBackend(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_)) throw FatalConfig("script directory not found: " + dir_.string());
}

std::string ScriptedBackend::describe() const { return "scripted:" + dir_.string(); }

std::string ScriptedBackend::send(const std::string& prompt, const RequestContext& ctx) {
  std::lock_guard lock(mu_);
  prompts_.push_back(prompt);
  std::string key;
  if (!ctx.target.empty() && std::filesystem::is_directory(dir_ / ctx.target)) key = ctx.target;
  size_t& cursor = cursors_[key];
  char name[32];
  std::snprintf(name, sizeof name, "%03zu.txt", cursor);
  auto path = (key.empty() ? dir_ : dir_ / key) / name;
  if (!std::filesystem::is_regular_file(path))
    throw ScriptExhausted("script " + (key.empty() ? dir_ : dir_ / key).string() + " exhausted after " +
                          std::to_string(cursor) + " responses");
  ++cursor;
  return read_text_file(path);
}

std::vector<std::string> ScriptedBackend::prompts() const {
  std::lock_guard lock(mu_);
  return prompts_;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.url.empty()) throw FatalConfig("backend.url is empty");
  if (config_.retries < 0) throw FatalConfig("backend.retries must be >= 0");
}

std::string HttpBackend::describe() const { return "http:" + config_.url + " model=" + config_.model; }

std::string HttpBackend::send(const std::string& prompt, const RequestContext&) {
  static const std::regex url_re(R"(^(https?)://([^/:]+)(?::([0-9]+))?(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.url, m, url_re)) throw FatalConfig("cannot parse backend url " + config_.url);
  std::string scheme_host = m[1].str() + "://" + m[2].str() + (m[3].matched ? ":" + m[3].str() : "");
  std::string path = m[4].matched ? m[4].str() : "/";

  httplib::Headers headers;
  if (!config_.credentials_env.empty()) {
    const char* key = std::getenv(config_.credentials_env.c_str());
    if (!key || !*key) throw FatalConfig("credentials variable " + config_.credentials_env + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  nlohmann::json body{{"model", config_.model},
                      {"temperature", config_.temperature},
                      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
  std::string payload = body.dump();

  std::string last_error;
  auto backoff = config_.initial_backoff;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client cli(scheme_host);
    cli.set_connection_timeout(std::chrono::seconds(10));
    cli.set_read_timeout(config_.request_timeout);
    cli.set_write_timeout(config_.request_timeout);
    auto res = cli.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw EndpointUnreachable("endpoint returned HTTP " + std::to_string(res->status) + ": " +
                                res->body.substr(0, 300));
    try {
      auto j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw EndpointUnreachable(std::string("malformed completion response: ") + e.what());
    }
  }
  throw EndpointUnreachable("no response from " + config_.url + " after " + std::to_string(config_.retries + 1) +
                            " attempts: " + last_error);
}

ModelResponse complete(ModelBackend& backend, const std::string& prompt, const RequestContext& ctx) {
  return parse_response(backend.send(prompt, ctx));
}

}  // namespace forge
