#include <gtest/gtest.h>

#include <algorithm>
#include <deque>
#include <random>
#include <set>

#include "forge/error.hpp"
#include "forge/frontend.hpp"
#include "forge/util.hpp"
#include "support.hpp"

using namespace forge;
using testing_support::fixture;
using testing_support::parse_text;

namespace {

std::vector<const SymbolDecl*> user_symbols(const TranslationUnit& tu) {
  std::vector<const SymbolDecl*> out;
  for (const auto& s : tu.symbols)
    if (!s.system) out.push_back(&s);
  return out;
}

std::vector<std::string> names(const std::vector<SymbolDecl>& v) {
  std::vector<std::string> out;
  for (const auto& s : v) out.push_back(s.name);
  return out;
}

}  // namespace

TEST(Frontend, SingleFunction) {
  TempDir dir;
  auto tu = parse_text(dir, "add.c", "int add(int a,int b){return a+b;}\n");
  auto syms = user_symbols(tu);
  ASSERT_EQ(syms.size(), 1u);
  EXPECT_EQ(syms[0]->name, "add");
  EXPECT_EQ(syms[0]->kind, SymbolKind::function);
  EXPECT_EQ(syms[0]->storage, Storage::external);
  EXPECT_TRUE(syms[0]->references.empty());
  EXPECT_TRUE(syms[0]->is_definition);
  ASSERT_EQ(syms[0]->params.size(), 2u);
  EXPECT_EQ(syms[0]->params[1].name, "b");
}

TEST(Frontend, SocketRecvReferences) {
  ParseOptions opts;
  opts.include_dirs.push_back(fixture("djb"));
  auto tu = parse_unit(fixture("djb/socket_recv.c"), opts);
  const SymbolDecl* f = tu.find("socket_recv4");
  ASSERT_NE(f, nullptr);
  EXPECT_FALSE(f->system);
  for (const char* want : {"recvfrom", "byte_copy", "uint16_unpack_big"})
    EXPECT_NE(std::find(f->references.begin(), f->references.end(), want), f->references.end()) << want;

  auto g = build_graph(tu);
  EXPECT_TRUE(g.has_edge("socket_recv4", "byte_copy"));
  EXPECT_TRUE(g.external_unresolved().count("byte_copy"));
  EXPECT_TRUE(g.external_unresolved().count("uint16_unpack_big"));
  // declared by a system header: not ours to stub
  EXPECT_FALSE(g.external_unresolved().count("recvfrom"));
}

TEST(Frontend, StaticVariableEdge) {
  TempDir dir;
  auto tu = parse_text(dir, "c.c", "static int counter;\nint get(void){return counter;}\n");
  const SymbolDecl* counter = tu.find("counter");
  ASSERT_NE(counter, nullptr);
  EXPECT_EQ(counter->kind, SymbolKind::global_var);
  EXPECT_EQ(counter->storage, Storage::static_internal);
  auto g = build_graph(tu);
  EXPECT_TRUE(g.has_edge("get", "counter"));
  EXPECT_FALSE(g.has_edge("counter", "get"));
}

TEST(Frontend, ChainEdgesAndClosureOrder) {
  TempDir dir;
  auto tu = parse_text(dir, "chain.c",
                       "int h(void){return 1;}\nint g(void){return h();}\nint f(void){return g();}\n");
  auto g = build_graph(tu);
  std::set<Edge> user_edges;
  for (const auto& e : g.edges())
    if (!g.node(e.first)->system) user_edges.insert(e);
  EXPECT_EQ(user_edges, (std::set<Edge>{{"f", "g"}, {"g", "h"}}));
  EXPECT_EQ(names(implied_closure(g, "f")), (std::vector<std::string>{"h", "g", "f"}));
  EXPECT_EQ(names(implied_closure(g, "h")), (std::vector<std::string>{"h"}));
}

TEST(Frontend, AddressOfFunctionIsAnEdge) {
  TempDir dir;
  auto tu = parse_text(dir, "fp.c",
                       "int g(int x){return x;}\n"
                       "int apply(int (*fn)(int), int v){return fn(v);}\n"
                       "int f(void){return apply(&g, 3);}\n");
  auto graph = build_graph(tu);
  EXPECT_TRUE(graph.has_edge("f", "g"));
  EXPECT_TRUE(graph.has_edge("f", "apply"));
}

TEST(Frontend, EmptyUnit) {
  auto tu = parse_preprocessed("empty.i", "");
  auto g = build_graph(tu);
  EXPECT_TRUE(g.nodes().empty());
  EXPECT_TRUE(g.edges().empty());
  EXPECT_TRUE(g.external_unresolved().empty());
}

TEST(Frontend, MutualRecursionKeepsSourceOrder) {
  TempDir dir;
  auto tu = parse_text(dir, "mut.c",
                       "int odd(unsigned n);\n"
                       "int even(unsigned n){return n == 0 ? 1 : odd(n - 1);}\n"
                       "int odd(unsigned n){return n == 0 ? 0 : even(n - 1);}\n"
                       "int top(unsigned n){return even(n);}\n");
  auto order = names(implied_closure(build_graph(tu), "top"));
  EXPECT_EQ(order, (std::vector<std::string>{"even", "odd", "top"}));
}

TEST(Frontend, TargetNotFound) {
  TempDir dir;
  auto tu = parse_text(dir, "v.c", "int x;\nint f(void){return x;}\n");
  auto g = build_graph(tu);
  EXPECT_THROW(implied_closure(g, "nope"), TargetNotFound);
  EXPECT_THROW(implied_closure(g, "x"), TargetNotFound);
}

TEST(Frontend, PreprocessFailureCarriesStderr) {
  TempDir dir;
  auto p = dir.path() / "bad.c";
  write_text_file(p, "#include \"does_not_exist.h\"\nint f(void){return 0;}\n");
  try {
    parse_unit(p);
    FAIL() << "expected PreprocessFailed";
  } catch (const PreprocessFailed& e) {
    EXPECT_NE(e.stderr_text().find("does_not_exist.h"), std::string::npos);
  }
}

TEST(Frontend, KandRDefinitionRejected) {
  TempDir dir;
  try {
    parse_text(dir, "kr.c", "int old(a, b)\nint a; int b;\n{ return a + b; }\n");
    FAIL() << "expected ParseFailed";
  } catch (const ParseFailed& e) {
    EXPECT_GE(e.line_no(), 1);
  }
}

TEST(Frontend, InlineAsmRejected) {
  TempDir dir;
  EXPECT_THROW(parse_text(dir, "asm.c", "int f(void){ __asm__(\"nop\"); return 0; }\n"), ParseFailed);
}

TEST(Frontend, MissingFile) {
  EXPECT_THROW(parse_unit("/nonexistent/nowhere.c"), Error);
}

TEST(Frontend, RedeclarationsMerge) {
  TempDir dir;
  auto tu = parse_text(dir, "r.c", "int f(int);\nint f(int);\nint f(int v){return v;}\n");
  auto syms = user_symbols(tu);
  ASSERT_EQ(syms.size(), 1u);
  EXPECT_TRUE(syms[0]->is_definition);
  EXPECT_EQ(syms[0]->redeclarations.size(), 2u);
}

TEST(Frontend, OriginsPointIntoUserFile) {
  auto tu = parse_unit(fixture("corpus/max3.c"));
  const SymbolDecl* m = tu.find("max3");
  ASSERT_NE(m, nullptr);
  const auto& o = tu.origin_of(m->span.start_line);
  EXPECT_EQ(std::filesystem::path(o.file).filename(), "max3.c");
  EXPECT_EQ(o.line, 6);
}

TEST(Frontend, CorpusDeclarationsAllAccountedFor) {
  for (const auto& e : std::filesystem::directory_iterator(fixture("corpus"))) {
    auto tu = parse_unit(e.path());
    size_t merged = 0;
    for (const auto& s : tu.symbols) merged += s.redeclarations.size();
    EXPECT_EQ(tu.declaration_count, tu.symbols.size() + merged) << e.path();
  }
}

TEST(Frontend, ParseIdempotentOnPreprocessedText) {
  for (const auto& e : std::filesystem::directory_iterator(fixture("corpus"))) {
    auto tu = parse_unit(e.path());
    auto again = parse_preprocessed(tu.path, tu.preprocessed_text);
    EXPECT_EQ(again.symbols, tu.symbols) << e.path();
  }
}

TEST(Frontend, EdgesMatchReferences) {
  ParseOptions opts;
  opts.include_dirs.push_back(fixture("djb"));
  auto tu = parse_unit(fixture("djb/socket_recv.c"), opts);
  auto g = build_graph(tu);
  for (const auto& [a, b] : g.edges()) {
    ASSERT_NE(g.node(a), nullptr);
    ASSERT_NE(g.node(b), nullptr);
  }
  for (const auto& s : tu.symbols)
    for (const auto& r : s.references)
      if (tu.find(r)) {
        EXPECT_TRUE(g.has_edge(s.name, r)) << s.name << " -> " << r;
      }
}

// Independent oracle: plain BFS over an adjacency list.
namespace {

std::set<int> bfs(const std::vector<std::vector<int>>& adj, int from) {
  std::set<int> seen{from};
  std::deque<int> q{from};
  while (!q.empty()) {
    int v = q.front();
    q.pop_front();
    for (int w : adj[v])
      if (seen.insert(w).second) q.push_back(w);
  }
  return seen;
}

}  // namespace

TEST(FrontendProperty, ClosureMatchesBfsOnRandomGraphs) {
  std::mt19937 rng(7331);
  for (int round = 0; round < 100; ++round) {
    int n = std::uniform_int_distribution<int>(1, 20)(rng);
    double density = std::uniform_real_distribution<double>(0.02, 0.3)(rng);
    std::vector<SymbolDecl> nodes;
    for (int i = 0; i < n; ++i) {
      SymbolDecl d;
      d.name = "n" + std::to_string(i);
      d.kind = SymbolKind::function;
      d.is_definition = true;
      d.span = {i * 3 + 1, i * 3 + 2};
      nodes.push_back(d);
    }
    std::vector<std::vector<int>> adj(n);
    std::vector<Edge> edges;
    std::bernoulli_distribution coin(density);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (a != b && coin(rng)) {
          adj[a].push_back(b);
          edges.emplace_back(nodes[a].name, nodes[b].name);
        }
    SymbolGraph g(nodes, edges);
    int target = std::uniform_int_distribution<int>(0, n - 1)(rng);

    auto closure = implied_closure(g, nodes[target].name);
    std::set<int> got;
    std::map<int, size_t> pos;
    for (size_t k = 0; k < closure.size(); ++k) {
      int id = std::stoi(closure[k].name.substr(1));
      got.insert(id);
      pos[id] = k;
    }
    ASSERT_EQ(closure.size(), got.size()) << "duplicates in round " << round;
    auto want = bfs(adj, target);
    ASSERT_EQ(got, want) << "round " << round;

    for (int a : want)
      for (int b : adj[a]) {
        if (bfs(adj, b).count(a)) continue;  // same cycle group
        EXPECT_LT(pos[b], pos[a]) << "round " << round << " edge n" << a << "->n" << b;
      }
  }
}
