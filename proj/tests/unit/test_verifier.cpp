#include <gtest/gtest.h>

#include <random>

#include "forge/error.hpp"
#include "forge/process.hpp"
#include "forge/util.hpp"
#include "forge/verifier.hpp"
#include "support.hpp"

using namespace forge;
using namespace std::chrono_literals;
using testing_support::fixture;
using testing_support::mockup_of;
using testing_support::tool;

namespace {

std::string golden(const std::string& name) { return read_text_file(fixture("verifier/" + name)); }

VerifierConfig fake_config(const std::filesystem::path& fixtures, std::vector<std::string> extra = {}) {
  VerifierConfig cfg;
  cfg.executable = tool("fake_checker.py").string();
  cfg.extra_flags = {"--fixtures", fixtures.string()};
  cfg.extra_flags.insert(cfg.extra_flags.end(), extra.begin(), extra.end());
  return cfg;
}

std::filesystem::path script(const TempDir& dir, const std::string& name, const std::string& body) {
  auto p = dir.path() / name;
  write_text_file(p, "#!/bin/sh\n" + body + "\n");
  std::filesystem::permissions(p, std::filesystem::perms::owner_all);
  return p;
}

}  // namespace

TEST(Verifier, GoldenFiles) {
  auto expected = testing_support::golden_violations();
  ASSERT_GE(expected.size(), 5u);
  for (const auto& [file, want] : expected) {
    auto got = parse_counterexample(golden(file));
    ASSERT_EQ(got.size(), want.size()) << file;
    for (size_t i = 0; i < want.size(); ++i) EXPECT_EQ(got[i], want[i]) << file << " #" << i;
  }
}

TEST(Verifier, EmptyOutput) { EXPECT_TRUE(parse_counterexample("").empty()); }

TEST(Verifier, NullDerefGolden) {
  auto v = parse_counterexample(golden("null_deref.out"));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].property_kind, PropertyKind::pointer_deref);
}

TEST(Verifier, TwoSectionsInDocumentOrder) {
  auto a = parse_counterexample(golden("null_deref.out"));
  auto b = parse_counterexample(golden("div_zero.out"));
  auto both = parse_counterexample(golden("null_deref.out") + golden("div_zero.out"));
  ASSERT_EQ(both.size(), 2u);
  EXPECT_EQ(both[0], a[0]);
  EXPECT_EQ(both[1], b[0]);
}

TEST(Verifier, Classification) {
  EXPECT_EQ(classify_property("array bounds violated: array `a' upper bound"), PropertyKind::array_bounds);
  EXPECT_EQ(classify_property("dereference failure: Access to object out of bounds"), PropertyKind::array_bounds);
  EXPECT_EQ(classify_property("dereference failure: NULL pointer"), PropertyKind::pointer_deref);
  EXPECT_EQ(classify_property("arithmetic overflow on sub"), PropertyKind::arithmetic_overflow);
  EXPECT_EQ(classify_property("division by zero"), PropertyKind::division_by_zero);
  EXPECT_EQ(classify_property("assertion x > 0"), PropertyKind::assertion);
  EXPECT_EQ(classify_property("unwinding assertion loop 0"), PropertyKind::other);
  EXPECT_EQ(classify_property("something else"), PropertyKind::other);
}

TEST(VerifierProperty, ParserIsTotalOnMutatedOutput) {
  std::vector<std::string> seeds;
  for (const auto& [file, _] : testing_support::golden_violations()) seeds.push_back(golden(file));
  std::mt19937 rng(99);
  const std::vector<std::string> tokens = {"[Counterexample]", "State 3 file x.c line 4 column 1 function f thread 0",
                                           "Violated property:", "  file a.c line 0 function", "  v = ",
                                           "VERIFICATION FAILED", "\n", "----"};
  for (int round = 0; round < 2000; ++round) {
    std::string s = seeds[rng() % seeds.size()];
    int edits = 1 + static_cast<int>(rng() % 8);
    for (int e = 0; e < edits; ++e) {
      size_t at = s.empty() ? 0 : rng() % (s.size() + 1);
      switch (rng() % 4) {
        case 0: s.erase(at, rng() % 40); break;
        case 1: s.insert(at, tokens[rng() % tokens.size()]); break;
        case 2: s.insert(at, 1, static_cast<char>(rng() % 256)); break;
        default: s = s.substr(0, at); break;
      }
    }
    std::vector<Violation> v;
    ASSERT_NO_THROW(v = parse_counterexample(s)) << "round " << round;
    for (const auto& x : v)
      if (x.location) {
        EXPECT_GE(x.location->line, 1);
      }
  }
}

TEST(Verifier, ConfigValidation) {
  VerifierConfig c;
  EXPECT_NO_THROW(c.validate());
  c.timeout = 0ms;
  EXPECT_THROW(c.validate(), FatalConfig);
  c.timeout = 10s;
  c.unwind_bound = 0;
  EXPECT_THROW(c.validate(), FatalConfig);
}

TEST(Verifier, DriverCompilesWithMockup) {
  ParseOptions opts;
  opts.include_dirs.push_back(fixture("djb"));
  auto tu = parse_unit(fixture("djb/socket_recv.c"), opts);
  auto g = build_graph(tu);
  auto m = generate_mockup(implied_closure(g, "socket_recv4"), tu, g.external_unresolved());
  auto driver = synthesize_driver(m);
  EXPECT_NE(driver.find("int main(void)"), std::string::npos);
  EXPECT_NE(driver.find("socket_recv4("), std::string::npos);
  TempDir dir;
  write_text_file(dir.path() / "v.c", m.source_text + driver);
  auto r = run_process({{"cc", "-std=gnu11", "-fsyntax-only", (dir.path() / "v.c").string()}, {}, 60s});
  EXPECT_EQ(r.exit_code, 0) << r.err;
}

TEST(Verifier, FailedVerdictFromReplayedOutput) {
  TempDir fx;
  std::filesystem::copy_file(fixture("verifier/null_deref.out"), fx.path() / "first.out");
  auto m = mockup_of(fixture("crash/first.c"), "first");
  TempDir work;
  auto report = run_verifier(m, fake_config(fx.path()), work.path());
  EXPECT_EQ(report.verdict, Verdict::verification_failed);
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0].property_kind, PropertyKind::pointer_deref);
  EXPECT_TRUE(report.consistent());
  EXPECT_TRUE(std::filesystem::exists(work.path() / "first_verify.c"));
  EXPECT_NE(report.raw_output.find("VERIFICATION FAILED"), std::string::npos);
}

TEST(Verifier, SuccessfulVerdict) {
  TempDir fx;
  auto m = mockup_of(fixture("corpus/clamp.c"), "clamp");
  auto report = run_verifier(m, fake_config(fx.path()));
  EXPECT_EQ(report.verdict, Verdict::verification_successful);
  EXPECT_TRUE(report.violations.empty());
  EXPECT_TRUE(report.consistent());
  EXPECT_TRUE(report.decisive());
}

TEST(Verifier, TimeoutWithinBound) {
  TempDir fx;
  auto m = mockup_of(fixture("corpus/clamp.c"), "clamp");
  auto cfg = fake_config(fx.path(), {"--sleep", "30"});
  cfg.timeout = 1s;
  auto report = run_verifier(m, cfg);
  EXPECT_EQ(report.verdict, Verdict::timeout);
  EXPECT_GE(report.elapsed.count(), 1.0);
  EXPECT_LE(report.elapsed.count(), 2.0);
  EXPECT_TRUE(report.violations.empty());
  EXPECT_FALSE(report.decisive());
}

TEST(Verifier, ToolProblems) {
  auto m = mockup_of(fixture("corpus/clamp.c"), "clamp");
  VerifierConfig missing;
  missing.executable = "/nonexistent/checker";
  EXPECT_THROW(run_verifier(m, missing), ToolMissing);

  TempDir dir;
  VerifierConfig crash;
  crash.executable = script(dir, "crash.sh", "kill -SEGV $$").string();
  auto r1 = run_verifier(m, crash);
  EXPECT_EQ(r1.verdict, Verdict::tool_error);
  EXPECT_TRUE(r1.consistent());

  VerifierConfig noisy;
  noisy.executable = script(dir, "noisy.sh", "echo 'PARSING ERROR' >&2; exit 6").string();
  auto r2 = run_verifier(m, noisy);
  EXPECT_EQ(r2.verdict, Verdict::tool_error);
  EXPECT_NE(r2.raw_output.find("PARSING ERROR"), std::string::npos);

  // a counterexample marker with nothing parseable after it cannot claim a violation
  VerifierConfig empty_cex;
  empty_cex.executable = script(dir, "cex.sh", "echo '[Counterexample]'; exit 1").string();
  auto r3 = run_verifier(m, empty_cex);
  EXPECT_TRUE(r3.consistent());
}

TEST(Verifier, SummaryTexts) {
  auto m = mockup_of(fixture("crash/first.c"), "first");
  VerifierReport ok;
  ok.verdict = Verdict::verification_successful;
  ok.unwind_bound = 8;
  EXPECT_EQ(sensitization_summary(ok, m),
            "The model checker found no property violation in first within unwind bound 8. Loops deeper than "
            "the bound were not explored.\n");

  VerifierReport slow;
  slow.verdict = Verdict::timeout;
  slow.unwind_bound = 8;
  slow.timeout = 10s;
  EXPECT_EQ(sensitization_summary(slow, m),
            "The model checker was inconclusive for first: it hit the 10 s time limit with unwind bound 8.\n");

  int line = 0;
  SourceOrigin origin;
  for (const auto& e : m.source_map)
    if (e.origin.line == 8) {
      line = e.emitted_line;
      origin = e.origin;
    }
  ASSERT_GT(line, 0);
  VerifierReport bad;
  bad.verdict = Verdict::verification_failed;
  bad.unwind_bound = 8;
  bad.violations.push_back({PropertyKind::arithmetic_overflow, "arithmetic overflow on add",
                            CodeLocation{"first_verify.c", line, "first"}, {{"len", "2147483647"}}, 1});
  EXPECT_EQ(sensitization_summary(bad, m),
            "The model checker found 1 potential violation in first (unwind bound 8).\n"
            "1. arithmetic_overflow in first at " + origin.file + ":8 (mockup line " + std::to_string(line) + ")\n"
            "   property: arithmetic overflow on add\n"
            "   trace (1 states), last values: len = 2147483647\n");
}

TEST(Verifier, JsonShape) {
  auto v = parse_counterexample(golden("null_deref.out"));
  auto j = to_json(v[0]);
  EXPECT_EQ(j["property_kind"], "pointer_deref");
  EXPECT_EQ(j["location"]["line"], 7);
  EXPECT_EQ(j["assignments"][0]["variable"], "p");
}
