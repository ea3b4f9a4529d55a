#pragma once

// Shared fixtures and brute-force oracles for the unit tests and the
// acceptance runner.

#include <stdlib.h>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "postural/error.hpp"
#include "postural/graph.hpp"
#include "postural/io.hpp"
#include "postural/risk.hpp"
#include "postural/semantics.hpp"

namespace postural::testing {

inline std::filesystem::path fixture(const std::string& rel) {
  return std::filesystem::path(POSTURAL_FIXTURE_DIR) / rel;
}

inline std::filesystem::path golden(const std::string& rel) {
  return std::filesystem::path(POSTURAL_GOLDEN_DIR) / rel;
}

inline std::filesystem::path cli_binary() { return std::filesystem::path(POSTURAL_CLI_PATH); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "postural-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
  std::filesystem::path path_;
};

/// Code of the postural::Error thrown by `f`, or nullopt when it returns.
template <class F>
std::optional<ErrorCode> error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// ---- graph construction helpers ----------------------------------------------------

inline GraphNode attacker() {
  GraphNode n;
  n.id = std::string(kAttackerId);
  n.kind = NodeKind::Attacker;
  n.description = "attacker";
  return n;
}

inline GraphNode cve(const std::string& id, std::optional<double> e, std::optional<double> i,
                     double criticality = 1.0) {
  GraphNode n;
  n.id = id;
  n.kind = NodeKind::Cve;
  n.exploitability = e;
  n.impact = i;
  n.criticality = criticality;
  n.description = id;
  return n;
}

inline GraphNode cwe(int id) {
  GraphNode n;
  n.id = cwe_node_id(id);
  n.kind = NodeKind::Cwe;
  n.description = n.id;
  return n;
}

inline EdgeKind kind_for(const GraphNode& src, const GraphNode& dst) {
  if (src.kind == NodeKind::Attacker) return EdgeKind::AttackerToCve;
  if (dst.kind == NodeKind::Cwe) return EdgeKind::CveToCwe;
  return EdgeKind::CveToCve;
}

inline AttackGraph make_graph(const std::vector<GraphNode>& nodes,
                              const std::vector<std::tuple<std::string, std::string, double>>& edges) {
  AttackGraph g;
  g.graph_id = "gtest";
  for (const auto& n : nodes) g.nodes.emplace(n.id, n);
  for (const auto& [s, d, w] : edges) {
    GraphEdge e;
    e.src = s;
    e.dst = d;
    e.weight = w;
    e.kind = kind_for(g.nodes.at(s), g.nodes.at(d));
    g.edges.push_back(e);
  }
  std::sort(g.edges.begin(), g.edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
    return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
  });
  return g;
}

inline const std::string kCve1 = "CVE-2020-0001";
inline const std::string kCve2 = "CVE-2020-0002";
inline const std::string kChainCwe = "CWE-79";

/// ATTACKER -e1-> CVE1(e=3.9, i=5.9) -e2(w=0.85)-> CVE2(e=2.2, i=3.6) -e3(w=0.9)-> CWE.
/// The CWE iScore is 3.6 under the default functions (mean of its only
/// in-neighbour).
inline AttackGraph chain_fixture() {
  return make_graph({attacker(), cve(kCve1, 3.9, 5.9), cve(kCve2, 2.2, 3.6), cwe(79)},
                    {{std::string(kAttackerId), kCve1, 1.0}, {kCve1, kCve2, 0.85}, {kCve2, kChainCwe, 0.9}});
}

/// Score functions reading from a fixed table.
struct ScoreTable {
  std::map<std::string, NodeScore> scores;

  ScoreFunctions fns() const {
    auto table = std::make_shared<std::map<std::string, NodeScore>>(scores);
    ScoreFunctions f;
    f.e_score = [table](const AttackGraph&, const GraphNode& n) { return table->at(n.id).e; };
    f.i_score = [table](const AttackGraph&, const GraphNode& n) { return table->at(n.id).i; };
    return f;
  }
};

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t uniform_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline bool coin(std::mt19937_64& rng, double p) { return uniform(rng, 0.0, 1.0) < p; }

/// Arbitrary DAG over nodes N00..N(n-1): edge i -> j (i < j) with
/// probability p, random weights in (0, 1], random scores in [0, 10].
inline AttackGraph random_dag(std::mt19937_64& rng, std::size_t n, double p, ScoreTable& table) {
  std::vector<GraphNode> nodes;
  std::vector<std::tuple<std::string, std::string, double>> edges;
  auto name = [](std::size_t i) { return std::string("N") + (i < 10 ? "0" : "") + std::to_string(i); };
  for (std::size_t i = 0; i < n; ++i) {
    nodes.push_back(cve(name(i), std::nullopt, std::nullopt));
    table.scores[name(i)] = {uniform(rng, 0.0, 10.0), uniform(rng, 0.0, 10.0)};
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (coin(rng, p)) edges.emplace_back(name(i), name(j), uniform(rng, 0.01, 1.0));
    }
  }
  return make_graph(nodes, edges);
}

inline std::string cve_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "CVE-2021-%04zu", 1000 + i);
  return buf;
}

/// Graph shaped like build_graph output: the attacker reaches every CVE,
/// CveToCve edges follow a random DAG order, and every CVE feeds at least one
/// of `cwes` CWE nodes. CVSS inputs are random in [0, 10).
inline AttackGraph random_attack_graph(std::mt19937_64& rng, std::size_t cves, std::size_t cwes,
                                       double p_cve, double p_extra_cwe) {
  std::vector<GraphNode> nodes{attacker()};
  std::vector<std::tuple<std::string, std::string, double>> edges;
  std::vector<std::size_t> order(cves);
  for (std::size_t i = 0; i < cves; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < cves; ++i) {
    nodes.push_back(cve(cve_name(i), uniform(rng, 0.0, 9.99), uniform(rng, 0.0, 9.99)));
    edges.emplace_back(std::string(kAttackerId), cve_name(i), uniform(rng, 0.1, 1.0));
  }
  for (std::size_t w = 0; w < cwes; ++w) nodes.push_back(cwe(100 + static_cast<int>(w)));
  for (std::size_t a = 0; a < cves; ++a) {
    for (std::size_t b = a + 1; b < cves; ++b) {
      if (coin(rng, p_cve)) edges.emplace_back(cve_name(order[a]), cve_name(order[b]), uniform(rng, 0.8, 1.0));
    }
  }
  for (std::size_t i = 0; i < cves; ++i) {
    const std::size_t first = uniform_int(rng, 0, cwes - 1);
    edges.emplace_back(cve_name(i), cwe_node_id(100 + static_cast<int>(first)), uniform(rng, 0.1, 1.0));
    for (std::size_t w = 0; w < cwes; ++w) {
      if (w != first && coin(rng, p_extra_cwe)) {
        edges.emplace_back(cve_name(i), cwe_node_id(100 + static_cast<int>(w)), uniform(rng, 0.1, 1.0));
      }
    }
  }
  return make_graph(nodes, edges);
}

// ---- oracles ------------------------------------------------------------------------

/// Every directed path starting (forward) or ending (backward) at `from`,
/// including the zero-length one, as explicit node lists.
inline std::vector<std::vector<std::string>> all_paths_from(const AttackGraph& g, const std::string& from,
                                                            bool forward) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> cur{from};
  std::function<void()> dfs = [&] {
    out.push_back(cur);
    for (const auto& e : g.edges) {
      const auto& here = forward ? e.src : e.dst;
      if (here != cur.back()) continue;
      cur.push_back(forward ? e.dst : e.src);
      dfs();
      cur.pop_back();
    }
  };
  dfs();
  return out;
}

/// EES of an edge leaving u, by path expansion: the sum over every backward
/// path u = x0 <- x1 <- ... <- xd of c^d eScore(xd).
inline double oracle_ees(const AttackGraph& g, const std::map<std::string, NodeScore>& s, double c,
                         const std::string& u) {
  double total = 0.0;
  for (const auto& path : all_paths_from(g, u, false)) {
    total += std::pow(c, static_cast<double>(path.size() - 1)) * s.at(path.back()).e;
  }
  return total;
}

/// EIS of an edge entering v: the sum over every forward path
/// v = x0 -> x1 -> ... -> xd of k^d iScore(xd).
inline double oracle_eis(const AttackGraph& g, const std::map<std::string, NodeScore>& s, double k,
                         const std::string& v) {
  double total = 0.0;
  for (const auto& path : all_paths_from(g, v, true)) {
    total += std::pow(k, static_cast<double>(path.size() - 1)) * s.at(path.back()).i;
  }
  return total;
}

/// Every Attacker -> Cwe node sequence, by exhaustive DFS.
inline std::set<std::vector<std::string>> oracle_paths(const AttackGraph& g) {
  std::set<std::vector<std::string>> out;
  std::vector<std::string> cur{std::string(kAttackerId)};
  std::function<void()> dfs = [&] {
    const std::string last = cur.back();
    if (g.nodes.at(last).kind == NodeKind::Cwe) {
      out.insert(cur);
      return;
    }
    for (const auto& e : g.edges) {
      if (e.src != last) continue;
      cur.push_back(e.dst);
      dfs();
      cur.pop_back();
    }
  };
  if (g.find(kAttackerId)) dfs();
  return out;
}

/// Minimum Cve-only set covering cover_edges(), by exhaustive search.
inline std::size_t oracle_min_cover(const AttackGraph& g) {
  std::vector<std::string> ids;
  for (const auto& [id, n] : g.nodes) {
    if (n.kind == NodeKind::Cve) ids.push_back(id);
  }
  const auto edges = cover_edges(g);
  std::size_t best = ids.size();
  for (std::uint32_t mask = 0; mask < (1u << ids.size()); ++mask) {
    const auto size = static_cast<std::size_t>(__builtin_popcount(mask));
    if (size >= best) continue;
    std::set<std::string> chosen;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (mask & (1u << i)) chosen.insert(ids[i]);
    }
    const bool covers = std::all_of(edges.begin(), edges.end(), [&](const auto& e) {
      return chosen.contains(e.first) || chosen.contains(e.second);
    });
    if (covers) best = size;
  }
  return best;
}

/// True when `cover` touches every cover edge and holds only Cve nodes.
inline bool is_cover(const AttackGraph& g, const std::vector<std::string>& cover) {
  const std::set<std::string> in(cover.begin(), cover.end());
  for (const auto& id : in) {
    const auto* n = g.find(id);
    if (!n || n->kind != NodeKind::Cve) return false;
  }
  const auto edges = cover_edges(g);
  return std::all_of(edges.begin(), edges.end(),
                     [&](const auto& e) { return in.contains(e.first) || in.contains(e.second); });
}

// ---- synonym corpus ----------------------------------------------------------------------

/// CBOW model trained on the synonym corpus, where "xss" and "cross site
/// scripting" (and "vulnerability" and "flaw") share every context.
inline EmbeddingModel synonym_model(std::uint64_t seed) {
  static const Corpus corpus = build_corpus({}, read_corpus_dir(fixture("corpus")));
  TrainConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 200;
  cfg.min_count = 1;
  cfg.seed = seed;
  return train_embeddings(corpus, cfg);
}

// ---- embedding gradient check ---------------------------------------------------------

/// Largest relative error between the analytic gradient applied by the CBOW
/// or Skip-Gram update and central finite differences of the matching loss,
/// on a 5-word vocabulary. The update runs with learning rate 1 so the
/// parameter change is exactly minus the gradient.
inline double gradient_check(bool skipgram, std::uint64_t seed) {
  using namespace w2v;
  std::mt19937_64 rng(seed);
  Params<double> p(5, 4);
  for (auto& x : p.input) x = uniform(rng, -0.5, 0.5);
  for (auto& x : p.output) x = uniform(rng, -0.5, 0.5);
  const std::size_t center = 0;
  const std::vector<std::size_t> context{1, 2};
  const std::vector<std::size_t> negatives =
      skipgram ? std::vector<std::size_t>{3, 4, 4, 3} : std::vector<std::size_t>{3, 4};
  auto loss = [&](const Params<double>& q) {
    return skipgram ? skipgram_loss<double>(q, center, context, negatives)
                    : cbow_loss<double>(q, center, context, negatives);
  };

  Params<double> stepped = p;
  Workspace<double> ws;
  if (skipgram) {
    skipgram_update<double>(stepped, center, context, negatives, 1.0, ws);
  } else {
    cbow_update<double>(stepped, center, context, negatives, 1.0, ws);
  }

  double worst = 0.0;
  const double h = 1e-6;
  using Block = std::vector<double> Params<double>::*;
  for (Block block : {Block{&Params<double>::input}, Block{&Params<double>::output}}) {
    for (std::size_t i = 0; i < (p.*block).size(); ++i) {
      const double analytic = (p.*block)[i] - (stepped.*block)[i];
      Params<double> hi = p;
      Params<double> lo = p;
      (hi.*block)[i] += h;
      (lo.*block)[i] -= h;
      const double numeric = (loss(hi) - loss(lo)) / (2 * h);
      const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(analytic - numeric) / scale);
    }
  }
  return worst;
}

// ---- process helpers ------------------------------------------------------------------

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

/// Runs `command` through the shell, capturing combined output.
inline RunResult run(const std::string& command) {
  RunResult r;
  FILE* pipe = popen((command + " 2>&1").c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string quote(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

/// Hand-built embedding model: each token gets the given vector.
inline EmbeddingModel toy_model(const std::vector<std::pair<std::string, std::vector<float>>>& rows) {
  std::vector<std::string> tokens;
  std::vector<float> values;
  const std::size_t dim = rows.empty() ? 0 : rows.front().second.size();
  for (const auto& [t, v] : rows) {
    tokens.push_back(t);
    values.insert(values.end(), v.begin(), v.end());
  }
  return EmbeddingModel(tokens, dim, values, TrainConfig{});
}

/// Random attribute sets over a small vocabulary, scored by a random model.
struct RandomBuildInputs {
  EmbeddingModel model;
  std::vector<CveInput> cves;
};

inline RandomBuildInputs random_build_inputs(std::mt19937_64& rng, std::size_t n) {
  const std::vector<std::string> words = {"alpha", "beta", "gamma", "delta", "eps", "zeta"};
  std::vector<std::pair<std::string, std::vector<float>>> rows;
  for (const auto& w : words) {
    std::vector<float> v(3);
    for (auto& x : v) x = static_cast<float>(uniform(rng, -1, 1));
    rows.emplace_back(w, v);
  }
  RandomBuildInputs out{toy_model(rows), {}};
  auto phrases = [&] {
    std::vector<std::string> ps;
    for (std::size_t k = uniform_int(rng, 1, 2); k > 0; --k) ps.push_back(words[uniform_int(rng, 0, words.size() - 1)]);
    return ps;
  };
  for (std::size_t i = 0; i < n; ++i) {
    CveInput in;
    in.record.id = cve_name(i);
    in.record.description = "foo bar baz";
    in.record.base_score = uniform(rng, 0, 10);
    in.record.cwe_ids = {static_cast<int>(100 + uniform_int(rng, 0, 3))};
    in.attributes.postconditions = phrases();
    in.attributes.preconditions = phrases();
    out.cves.push_back(std::move(in));
  }
  return out;
}

}  // namespace postural::testing
