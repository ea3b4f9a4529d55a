#include "doctest.h"
#include "postural/graph.hpp"
#include "support.hpp"

using namespace postural;
using namespace postural::testing;

namespace {

CveInput input(const std::string& id, std::optional<double> base, std::vector<int> cwes,
               std::vector<std::string> post, std::vector<std::string> pre) {
  CveInput in;
  in.record.id = id;
  in.record.description = "foo bar baz";
  in.record.base_score = base;
  in.record.cwe_ids = std::move(cwes);
  in.attributes.postconditions = std::move(post);
  in.attributes.preconditions = std::move(pre);
  return in;
}

const EmbeddingModel& phrase_model() {
  static const EmbeddingModel m = toy_model({{"denial", {1, 0}},
                                             {"service", {1, 0}},
                                             {"base", {1, 0}},
                                             {"eighty", {4, 3}},
                                             {"below", {0.79f, 0.6131f}},
                                             {"other", {0, 1}}});
  return m;
}

std::size_t count_kind(const AttackGraph& g, EdgeKind k) {
  return static_cast<std::size_t>(
      std::count_if(g.edges.begin(), g.edges.end(), [&](const GraphEdge& e) { return e.kind == k; }));
}

AttackGraph two_layer_graph() {
  auto g = chain_fixture();
  g.nodes.at(kCve1).layers = {Layer::Network, Layer::Crypto};
  g.nodes.at(kCve2).layers = {Layer::Network};
  return g;
}

}  // namespace

TEST_CASE("two CVEs with mirrored ports keep one direction of the cycle") {
  const std::vector<CveInput> cves = {
      input("CVE-2021-0001", 7.5, {400}, {"denial of service"}, {"denial of service"}),
      input("CVE-2021-0002", std::nullopt, {79}, {"denial of service"}, {"denial of service"})};
  const auto g = build_graph(cves, phrase_model());
  CHECK(g.nodes.size() == 5);
  CHECK(g.count(NodeKind::Attacker) == 1);
  CHECK(g.count(NodeKind::Cwe) == 2);
  CHECK(count_kind(g, EdgeKind::AttackerToCve) == 2);
  CHECK(count_kind(g, EdgeKind::CveToCwe) == 2);
  CHECK(count_kind(g, EdgeKind::CveToCve) == 1);
  REQUIRE(g.removed_edges.size() == 1);
  CHECK(g.removed_edges[0] == RemovedEdge{"CVE-2021-0001", "CVE-2021-0002", 1.0});
  REQUIRE(g.find_edge("CVE-2021-0002", "CVE-2021-0001"));
  CHECK(g.find_edge("CVE-2021-0002", "CVE-2021-0001")->provenance.similarity == doctest::Approx(1.0));
  CHECK(is_acyclic(g));

  CHECK(g.find_edge(kAttackerId, "CVE-2021-0001")->weight == doctest::Approx(0.75));
  CHECK(g.find_edge(kAttackerId, "CVE-2021-0002")->weight == kMissingBaseWeight);
  CHECK(g.find_edge("CVE-2021-0001", "CWE-400")->weight == doctest::Approx(0.75));
  CHECK(g.find_edge("CVE-2021-0002", "CWE-79")->weight == kMissingBaseWeight);
}

TEST_CASE("similarity threshold boundary") {
  SUBCASE("0.79 stays below 0.8") {
    const auto g = build_graph({input("CVE-2021-0001", 5, {79}, {"base"}, {}),
                                input("CVE-2021-0002", 5, {79}, {}, {"below"})},
                               phrase_model());
    CHECK(count_kind(g, EdgeKind::CveToCve) == 0);
  }
  SUBCASE("exactly 0.8 is kept") {
    const auto g = build_graph({input("CVE-2021-0001", 5, {79}, {"base"}, {}),
                                input("CVE-2021-0002", 5, {79}, {}, {"eighty"})},
                               phrase_model());
    REQUIRE(count_kind(g, EdgeKind::CveToCve) == 1);
    CHECK(g.find_edge("CVE-2021-0001", "CVE-2021-0002")->weight == doctest::Approx(0.8));
  }
}

TEST_CASE("80 CVEs over 19 CWEs give 100 nodes") {
  std::vector<CveInput> cves;
  for (std::size_t i = 0; i < 80; ++i) {
    cves.push_back(input(cve_name(i), 6.0, {static_cast<int>(100 + i % 19)}, {"other"}, {"denial"}));
  }
  const auto g = build_graph(cves, phrase_model());
  CHECK(g.nodes.size() == 100);
  CHECK(g.count(NodeKind::Cve) == 80);
  CHECK(g.count(NodeKind::Cwe) == 19);
}

TEST_CASE("build_graph rejects bad input") {
  CHECK(error_code_of([] { build_graph({}, phrase_model()); }) == ErrorCode::EmptyInput);
  BuildOptions opt;
  opt.threshold = 1.5;
  CHECK(error_code_of([&] { build_graph({input("CVE-2021-0001", 5, {}, {}, {})}, phrase_model(), opt); }) ==
        ErrorCode::BadRequest);
}

TEST_CASE("strict ports only match postconditions to preconditions") {
  auto a = input("CVE-2021-0001", 5, {79}, {}, {});
  auto b = input("CVE-2021-0002", 5, {79}, {}, {});
  a.attributes.outputs = {"denial"};
  b.attributes.preconditions = {"service"};
  CHECK(count_kind(build_graph({a, b}, phrase_model()), EdgeKind::CveToCve) == 1);
  BuildOptions strict;
  strict.strict_ports = true;
  CHECK(count_kind(build_graph({a, b}, phrase_model(), strict), EdgeKind::CveToCve) == 0);
  CHECK(out_port(a.attributes, false) == std::vector<std::string>{"denial"});
  CHECK(out_port(a.attributes, true).empty());
}

TEST_CASE("dead ends are pruned only on request") {
  const std::vector<CveInput> cves = {input("CVE-2021-0001", 5, {}, {}, {}), input("CVE-2021-0002", 5, {79}, {}, {})};
  CHECK(build_graph(cves, phrase_model()).count(NodeKind::Cve) == 2);
  BuildOptions prune;
  prune.prune_dead_ends = true;
  const auto g = build_graph(cves, phrase_model(), prune);
  CHECK(g.count(NodeKind::Cve) == 1);
  CHECK_FALSE(g.find("CVE-2021-0001"));
}

TEST_CASE("construction is acyclic, deterministic and monotone in the threshold") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const auto in = random_build_inputs(rng, uniform_int(rng, 1, 12));
    std::set<std::pair<std::string, std::string>> previous;
    bool first = true;
    for (double t : {0.5, 0.7, 0.8, 0.9, 1.0}) {
      BuildOptions opt;
      opt.threshold = t;
      const auto g = build_graph(in.cves, in.model, opt);
      CHECK(is_acyclic(g));
      opt.parallel = false;
      CHECK(build_graph(in.cves, in.model, opt) == g);
      std::set<std::pair<std::string, std::string>> candidates;
      for (const auto& e : g.edges) {
        if (e.kind == EdgeKind::CveToCve) candidates.insert({e.src, e.dst});
      }
      for (const auto& r : g.removed_edges) candidates.insert({r.src, r.dst});
      if (!first) CHECK(std::includes(previous.begin(), previous.end(), candidates.begin(), candidates.end()));
      previous = candidates;
      first = false;
    }
  }
}

TEST_CASE("break_cycles drops the lightest edge of a cycle") {
  auto g = make_graph({cve("A", 1, 1), cve("B", 1, 1), cve("C", 1, 1)},
                      {{"A", "B", 0.9}, {"B", "C", 0.85}, {"C", "A", 0.95}});
  CHECK_FALSE(is_acyclic(g));
  break_cycles(g);
  CHECK(is_acyclic(g));
  CHECK(g.removed_edges == std::vector<RemovedEdge>{{"B", "C", 0.85}});

  auto kept = make_graph({cve("A", 1, 1), cve("B", 1, 1)}, {{"A", "B", 0.8}, {"B", "A", 0.9}});
  break_cycles(kept, {{"A", "B"}});
  CHECK(kept.find_edge("A", "B"));
  CHECK_FALSE(kept.find_edge("B", "A"));
}

TEST_CASE("layer classification") {
  const auto& rules = default_layer_rules();
  GraphNode n = cve("CVE-2021-0001", 1, 1);
  CHECK(classify_layers(n, "allows remote attackers to cause a denial of service", rules).layers.contains(
      Layer::Network));
  GraphNode sql = n;
  sql.cwe_ids = {89};
  CHECK(classify_layers(sql, "", rules).layers.contains(Layer::Network));
  CHECK(classify_layers(n, "tensorflow model evaluation bug", rules).layers == std::set<Layer>{Layer::MachineLearning});
  const auto none = classify_layers(n, "foo bar baz", rules);
  CHECK(none.unclassified());
  CHECK(classify_layers(n, "TensorFlow", rules).layers.contains(Layer::MachineLearning));
  CHECK_FALSE(classify_layers(n, "tensorflowish", rules).layers.contains(Layer::MachineLearning));
}

TEST_CASE("layer rule documents") {
  for (const auto& r : default_layer_rules()) {
    CHECK(parse_layer_rules(dump_layer_rules(r)) == r);
    CHECK_FALSE(r.keywords.empty());
    CHECK_FALSE(r.cwe_ids.empty());
  }
  const auto r = parse_layer_rules("format layer-rules-v1\nlayer Crypto\n# note\nkeyword Weak Cipher\ncwe 327\n");
  CHECK(r.layer == Layer::Crypto);
  CHECK(r.keywords == std::set<std::string>{"weak cipher"});
  CHECK(r.cwe_ids == std::set<int>{327});
  CHECK(error_code_of([] { parse_layer_rules("layer Network\n"); }) == ErrorCode::MalformedRules);
  CHECK(error_code_of([] { parse_layer_rules("format layer-rules-v1\nlayer Moon\n"); }) == ErrorCode::MalformedRules);
  CHECK(error_code_of([] { parse_layer_rules("format layer-rules-v1\nlayer Network\ncwe x\n"); }) ==
        ErrorCode::MalformedRules);
}

TEST_CASE("partitions") {
  const auto g = two_layer_graph();
  SUBCASE("empty layer leaves the attacker alone") {
    const auto p = partition(g, Layer::MachineLearning);
    CHECK(p.nodes.size() == 1);
    CHECK(p.edges.empty());
    CHECK(p.layer == Layer::MachineLearning);
  }
  SUBCASE("multi-layer node appears in both partitions") {
    CHECK(partition(g, Layer::Network).find(kCve1));
    CHECK(partition(g, Layer::Crypto).find(kCve1));
    CHECK_FALSE(partition(g, Layer::Crypto).find(kCve2));
  }
  SUBCASE("crypto partition regenerates the attacker edge") {
    const auto p = partition(g, Layer::Crypto);
    CHECK(p.nodes.size() == 2);
    REQUIRE(p.edges.size() == 1);
    CHECK(p.edges[0].provenance.regenerated);
  }
  SUBCASE("every non-regenerated partition edge exists in the cumulative graph") {
    for (auto layer : kAllLayers) {
      const auto p = partition(g, layer);
      CHECK(p.graph_id == g.graph_id);
      for (const auto& e : p.edges) {
        if (e.provenance.regenerated) continue;
        REQUIRE(g.find_edge(e.src, e.dst));
        CHECK(*g.find_edge(e.src, e.dst) == e);
      }
    }
  }
  SUBCASE("CVEs added to a partition get attacker edges") {
    auto extra = g;
    extra.nodes.emplace("CVE-2020-0003", cve("CVE-2020-0003", 1, 1));
    extra.nodes.at("CVE-2020-0003").layers = {Layer::Network};
    const auto p = partition(extra, Layer::Network);
    REQUIRE(p.find_edge(kAttackerId, "CVE-2020-0003"));
    CHECK(p.find_edge(kAttackerId, "CVE-2020-0003")->provenance.regenerated);
  }
}

TEST_CASE("edits") {
  const auto g = chain_fixture();
  SUBCASE("removing an intermediate CVE drops its edges and never adds paths") {
    auto shaped = apply_edit(g, AddEdge{std::string(kAttackerId), kCve2, 0.5});
    const auto before = oracle_paths(shaped).size();
    const auto h = apply_edit(shaped, RemoveNode{kCve1});
    CHECK(h.version == shaped.version + 1);
    CHECK_FALSE(h.find(kCve1));
    for (const auto& e : h.edges) CHECK((e.src != kCve1 && e.dst != kCve1));
    CHECK(oracle_paths(h).size() <= before);
    CHECK(error_code_of([&] { apply_edit(g, RemoveNode{kCve1}); }) == ErrorCode::WouldOrphanAttacker);
  }
  SUBCASE("score overrides flag the node") {
    const auto h = apply_edit(g, SetScore{kCve2, ScoreField::EScore, 10.0, {}});
    CHECK(h.find(kCve2)->user_overridden());
    CHECK(h.find(kCve2)->e_override == 10.0);
    CHECK_FALSE(g.find(kCve2)->user_overridden());
    const auto w = apply_edit(g, SetScore{kCve1, ScoreField::Weight, 0.3, kCve2});
    CHECK(w.find_edge(kCve1, kCve2)->weight == 0.3);
    CHECK(w.find_edge(kCve1, kCve2)->provenance.weight_overridden);
  }
  SUBCASE("illegal edits") {
    CHECK(error_code_of([&] { apply_edit(g, AddEdge{kChainCwe, kCve1, 0.5}); }) == ErrorCode::IllegalEdge);
    CHECK(error_code_of([&] { apply_edit(g, AddEdge{kCve1, std::string(kAttackerId), 0.5}); }) ==
          ErrorCode::IllegalEdge);
    CHECK(error_code_of([&] { apply_edit(g, AddEdge{kCve1, kCve2, 0.5}); }) == ErrorCode::IllegalEdge);
    CHECK(error_code_of([&] { apply_edit(g, RemoveNode{std::string(kAttackerId)}); }) ==
          ErrorCode::WouldOrphanAttacker);
    CHECK(error_code_of([&] { apply_edit(g, RemoveNode{"CVE-1999-0001"}); }) == ErrorCode::UnknownNode);
    CHECK(error_code_of([&] { apply_edit(g, RemoveEdge{kCve2, kCve1}); }) == ErrorCode::IllegalEdge);
    CHECK(error_code_of([&] { apply_edit(g, SetScore{kCve1, ScoreField::EScore, 11.0, {}}); }) ==
          ErrorCode::BadRequest);
    CHECK(error_code_of([&] { apply_edit(g, SetScore{kCve1, ScoreField::Weight, 0.5, {}}); }) ==
          ErrorCode::BadRequest);
  }
  SUBCASE("a user edge that closes a cycle is kept and the older edge goes") {
    auto h = apply_edit(g, AddEdge{kCve2, kCve1, 0.99});
    CHECK(is_acyclic(h));
    CHECK(h.find_edge(kCve2, kCve1));
    CHECK(h.find_edge(kCve2, kCve1)->provenance.user_added);
    CHECK_FALSE(h.find_edge(kCve1, kCve2));
  }
  SUBCASE("adding then removing a CVE restores the graph") {
    EditContext ctx{&phrase_model(), {}};
    AddCveNode add;
    add.record.id = "CVE-2021-0042";
    add.record.description = "foo";
    add.record.base_score = 5.0;
    add.record.cwe_ids = {79};
    add.attributes.postconditions = {"denial"};
    const auto added = apply_edit(g, add, ctx);
    CHECK(added.find("CVE-2021-0042"));
    CHECK(added.find_edge(kAttackerId, "CVE-2021-0042"));
    CHECK(added.find_edge("CVE-2021-0042", kChainCwe));
    auto restored = apply_edit(added, RemoveNode{"CVE-2021-0042"});
    CHECK(restored.version == g.version + 2);
    restored.version = g.version;
    CHECK(restored == g);
    CHECK(error_code_of([&] { apply_edit(added, add, ctx); }) == ErrorCode::IllegalEdge);
    CHECK(error_code_of([&] { apply_edit(g, add); }) == ErrorCode::BadRequest);
  }
}

TEST_CASE("graph documents round trip") {
  const auto cves = random_build_inputs(*std::make_unique<std::mt19937_64>(4), 8);
  auto g = build_graph(cves.cves, cves.model);
  g = apply_edit(g, SetScore{cve_name(0), ScoreField::IScore, 2.5, {}});
  CHECK(load_graph(dump_graph(g)) == g);
  CHECK(dump_graph(load_graph(dump_graph(g))) == dump_graph(g));
  const auto p = partition(two_layer_graph(), Layer::Crypto);
  CHECK(load_graph(dump_graph(p)) == p);
  CHECK(error_code_of([] { load_graph("{}"); }) == ErrorCode::MalformedGraph);
  CHECK(error_code_of([] { load_graph("nope"); }) == ErrorCode::MalformedGraph);
}

TEST_CASE("edit documents round trip") {
  AddCveNode add;
  add.record.id = "CVE-2021-0042";
  add.record.description = "x";
  add.attributes.inputs = {"remote attackers"};
  const std::vector<GraphEdit> edits = {add,
                                        RemoveNode{"CVE-2021-0001"},
                                        AddEdge{"CVE-2021-0001", "CWE-79", 0.4},
                                        RemoveEdge{"CVE-2021-0001", "CWE-79"},
                                        SetScore{"CVE-2021-0001", ScoreField::Weight, 0.2, "CWE-79"},
                                        SetScore{"CVE-2021-0001", ScoreField::IScore, 3.0, {}}};
  for (const auto& e : edits) CHECK(edit_from_json(edit_to_json(e)) == e);
  const auto resolved = resolve_edit(chain_fixture(), add, EditContext{&phrase_model(), {}});
  CHECK(edit_from_json(edit_to_json(resolved)) == resolved);
  CHECK(error_code_of([] { edit_from_json(nlohmann::json{{"op", "explode"}}); }) == ErrorCode::BadRequest);
  CHECK(error_code_of([] { edit_from_json(nlohmann::json{{"op", "remove_node"}}); }) == ErrorCode::BadRequest);
}
