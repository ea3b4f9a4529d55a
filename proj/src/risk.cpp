#include "postural/risk.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <queue>
#include <set>
#include <sstream>

#include "postural/error.hpp"
#include "postural/kernels.hpp"

namespace postural {

using nlohmann::json;

namespace {

double clamp10(double v) { return std::clamp(v, 0.0, 10.0); }

double default_cve_e(const GraphNode& n) {
  if (n.e_override) return *n.e_override;
  return clamp10(n.exploitability.value_or(0.0));
}

double default_cve_i(const GraphNode& n) {
  if (n.i_override) return *n.i_override;
  return clamp10(n.impact.value_or(0.0)) * n.criticality;
}

}  // namespace

ScoreFunctions ScoreFunctions::defaults() {
  ScoreFunctions f;
  f.e_score = [](const AttackGraph&, const GraphNode& n) -> double {
    if (n.e_override) return *n.e_override;
    return n.kind == NodeKind::Cve ? default_cve_e(n) : 0.0;
  };
  f.i_score = [](const AttackGraph& g, const GraphNode& n) -> double {
    if (n.i_override) return *n.i_override;
    switch (n.kind) {
      case NodeKind::Attacker: return 0.0;
      case NodeKind::Cve: return default_cve_i(n);
      case NodeKind::Cwe: {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& e : g.edges) {
          if (e.dst != n.id) continue;
          const auto* src = g.find(e.src);
          if (src && src->kind == NodeKind::Cve) {
            sum += default_cve_i(*src);
            ++count;
          }
        }
        return count ? sum / static_cast<double>(count) : 0.0;
      }
    }
    return 0.0;
  };
  return f;
}

std::map<std::string, NodeScore> node_scores(const AttackGraph& graph, const ScoreFunctions& fns) {
  std::map<std::string, NodeScore> out;
  for (const auto& [id, n] : graph.nodes) out[id] = {fns.e_score(graph, n), fns.i_score(graph, n)};
  return out;
}

std::vector<std::string> topological_order(const AttackGraph& graph) {
  std::map<std::string, std::size_t> indegree;
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& [id, n] : graph.nodes) indegree[id] = 0;
  for (const auto& e : graph.edges) {
    adj[e.src].push_back(e.dst);
    ++indegree[e.dst];
  }
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [id, d] : indegree) {
    if (d == 0) ready.push(id);
  }
  std::vector<std::string> order;
  order.reserve(indegree.size());
  while (!ready.empty()) {
    auto cur = ready.top();
    ready.pop();
    for (const auto& next : adj[cur]) {
      if (--indegree[next] == 0) ready.push(next);
    }
    order.push_back(std::move(cur));
  }
  if (order.size() != indegree.size()) throw Error(ErrorCode::CyclicGraph, "graph contains a directed cycle");
  return order;
}

std::vector<double> normalize(const std::vector<double>& family) {
  const double max = family.empty() ? 0.0 : *std::max_element(family.begin(), family.end());
  std::vector<double> out(family.size(), 0.0);
  if (max <= 0.0) return out;
  // x / max is exactly 1 at the maximum, so the top value is exactly 10.
  for (std::size_t i = 0; i < family.size(); ++i) out[i] = 10.0 * (family[i] / max);
  return out;
}

EdgeScoreSet compute_edge_scores(const AttackGraph& graph, const ScoreFunctions& fns,
                                 const Constants& consts) {
  const auto order = topological_order(graph);
  const auto scores = node_scores(graph, fns);
  std::map<std::string, std::vector<std::size_t>> in_edges;
  std::map<std::string, std::vector<std::size_t>> out_edges;
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    in_edges[graph.edges[i].dst].push_back(i);
    out_edges[graph.edges[i].src].push_back(i);
  }

  EdgeScoreSet set;
  set.edges.resize(graph.edges.size());
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    set.edges[i].src = graph.edges[i].src;
    set.edges[i].dst = graph.edges[i].dst;
  }

  // EES runs forward: every in-edge of a node is final before its out-edges.
  for (const auto& id : order) {
    double incoming = 0.0;
    for (std::size_t x : in_edges[id]) incoming += set.edges[x].ees;
    const double value = scores.at(id).e + consts.c * incoming;
    for (std::size_t x : out_edges[id]) set.edges[x].ees = value;
  }
  // EIS runs backward.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    double outgoing = 0.0;
    for (std::size_t x : out_edges[*it]) outgoing += set.edges[x].eis;
    const double value = scores.at(*it).i + consts.k * outgoing;
    for (std::size_t x : in_edges[*it]) set.edges[x].eis = value;
  }

  std::vector<double> ees, eis, ers;
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    auto& s = set.edges[i];
    s.ers = graph.edges[i].weight * (s.ees + s.eis);
    ees.push_back(s.ees);
    eis.push_back(s.eis);
    ers.push_back(s.ers);
  }
  const auto n_ees = normalize(ees);
  const auto n_eis = normalize(eis);
  const auto n_ers = normalize(ers);
  for (std::size_t i = 0; i < set.edges.size(); ++i) {
    set.edges[i].normalized_ees = n_ees[i];
    set.edges[i].normalized_eis = n_eis[i];
    set.edges[i].normalized_ers = n_ers[i];
  }
  return set;
}

GraphScores graph_scores(const EdgeScoreSet& scores) {
  if (scores.edges.empty()) throw Error(ErrorCode::EmptyGraph, "graph has no edges to score");
  GraphScores g;
  for (const auto& e : scores.edges) {
    g.exploit += e.normalized_ees;
    g.impact += e.normalized_eis;
    g.risk += e.normalized_ers;
  }
  const auto n = static_cast<double>(scores.edges.size());
  g.exploit /= n;
  g.impact /= n;
  g.risk /= n;
  return g;
}

namespace {

PathRecord make_record(const AttackGraph& graph, const EdgeScoreSet& scores,
                       const std::vector<std::size_t>& edge_ids) {
  PathRecord r;
  r.nodes.push_back(graph.edges[edge_ids.front()].src);
  for (std::size_t id : edge_ids) {
    r.nodes.push_back(graph.edges[id].dst);
    r.exploit_sum += scores.edges[id].ees;
    r.impact_sum += scores.edges[id].eis;
    r.risk_sum += scores.edges[id].ers;
  }
  return r;
}

std::size_t edge_index(const AttackGraph& graph, const std::string& src, const std::string& dst) {
  const auto* e = graph.find_edge(src, dst);
  if (!e) throw Error(ErrorCode::MalformedGraph, "no edge " + src + " -> " + dst);
  return static_cast<std::size_t>(e - graph.edges.data());
}

double max_exploit(const std::map<std::string, NodeScore>& scores) {
  double m = 0.0;
  for (const auto& [id, s] : scores) m = std::max(m, s.e);
  return m;
}

struct Dist {
  double weight = std::numeric_limits<double>::infinity();
  std::size_t hops = 0;
};

bool nearly_equal(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

// -1 when a is better, 0 when tied, 1 when b is better.
int compare(const Dist& a, const Dist& b) {
  if (!nearly_equal(a.weight, b.weight)) return a.weight < b.weight ? -1 : 1;
  if (a.hops != b.hops) return a.hops < b.hops ? -1 : 1;
  return 0;
}

}  // namespace

double path_weight(const AttackGraph& graph, const std::vector<std::string>& nodes,
                   const ScoreFunctions& fns) {
  const auto scores = node_scores(graph, fns);
  const double top = max_exploit(scores);
  double w = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) w += top - scores.at(nodes[i]).e;
  return w;
}

std::vector<PathRecord> shortest_attack_paths(const AttackGraph& graph, const ScoreFunctions& fns,
                                              const EdgeScoreSet* scores) {
  if (graph.count(NodeKind::Cwe) == 0) throw Error(ErrorCode::NoPath, "graph has no target (CWE) nodes");
  const auto attacker = std::string(kAttackerId);
  if (!graph.find(attacker)) throw Error(ErrorCode::NoPath, "graph has no attacker node");

  const auto order = topological_order(graph);
  const auto ns = node_scores(graph, fns);
  const double top = max_exploit(ns);
  std::map<std::string, std::vector<const GraphEdge*>> out;
  for (const auto& e : graph.edges) out[e.src].push_back(&e);

  std::map<std::string, Dist> dist;
  std::map<std::string, std::vector<std::string>> preds;
  dist[attacker] = {0.0, 0};
  for (const auto& u : order) {
    auto du = dist.find(u);
    if (du == dist.end()) continue;
    const double w = top - ns.at(u).e;
    for (const auto* e : out[u]) {
      const Dist cand{du->second.weight + w, du->second.hops + 1};
      auto [it, fresh] = dist.try_emplace(e->dst, cand);
      if (fresh) {
        preds[e->dst] = {u};
        continue;
      }
      const int c = compare(cand, it->second);
      if (c < 0) {
        it->second = cand;
        preds[e->dst] = {u};
      } else if (c == 0) {
        preds[e->dst].push_back(u);
      }
    }
  }

  // The supersink adds one zero-weight hop to every target, so the best
  // targets are simply the best-reached Cwe nodes.
  std::optional<Dist> best;
  for (const auto& [id, n] : graph.nodes) {
    if (n.kind != NodeKind::Cwe || !dist.contains(id)) continue;
    if (!best || compare(dist[id], *best) < 0) best = dist[id];
  }
  if (!best) throw Error(ErrorCode::NoPath, "no attacker-to-target path");

  const EdgeScoreSet owned = scores ? EdgeScoreSet{} : compute_edge_scores(graph, fns);
  const EdgeScoreSet& es = scores ? *scores : owned;

  std::vector<std::vector<std::string>> sequences;
  std::vector<std::string> suffix;
  std::function<void(const std::string&)> walk = [&](const std::string& v) {
    suffix.push_back(v);
    if (v == attacker) {
      sequences.emplace_back(suffix.rbegin(), suffix.rend());
    } else {
      for (const auto& u : preds[v]) walk(u);
    }
    suffix.pop_back();
  };
  for (const auto& [id, n] : graph.nodes) {
    if (n.kind == NodeKind::Cwe && dist.contains(id) && compare(dist[id], *best) == 0) walk(id);
  }
  std::sort(sequences.begin(), sequences.end());

  std::vector<PathRecord> paths;
  for (const auto& seq : sequences) {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) ids.push_back(edge_index(graph, seq[i], seq[i + 1]));
    paths.push_back(make_record(graph, es, ids));
  }
  return paths;
}

std::optional<PathKey> path_key_from_string(std::string_view s) noexcept {
  if (s == "risk") return PathKey::Risk;
  if (s == "exploit") return PathKey::Exploit;
  if (s == "impact") return PathKey::Impact;
  return std::nullopt;
}

std::string_view to_string(PathKey k) noexcept {
  switch (k) {
    case PathKey::Risk: return "risk";
    case PathKey::Exploit: return "exploit";
    case PathKey::Impact: return "impact";
  }
  return "?";
}

std::vector<PathKey> sort_order(PathKey primary) {
  std::vector<PathKey> order{primary};
  for (PathKey k : {PathKey::Risk, PathKey::Exploit, PathKey::Impact}) {
    if (k != primary) order.push_back(k);
  }
  return order;
}

std::vector<PathRecord> enumerate_paths(const AttackGraph& graph, const EdgeScoreSet& scores,
                                        std::optional<std::size_t> cutoff,
                                        const std::vector<PathKey>& order, bool parallel) {
  std::map<std::string, std::size_t> index;
  std::vector<char> is_sink;
  for (const auto& [id, n] : graph.nodes) {
    index.emplace(id, index.size());
    is_sink.push_back(n.kind == NodeKind::Cwe ? 1 : 0);
  }
  auto source = index.find(std::string(kAttackerId));
  if (source == index.end()) return {};

  kernels::Csr csr;
  csr.node_count = index.size();
  csr.offsets.assign(csr.node_count + 1, 0);
  for (const auto& e : graph.edges) ++csr.offsets[index.at(e.src) + 1];
  for (std::size_t i = 0; i < csr.node_count; ++i) csr.offsets[i + 1] += csr.offsets[i];
  csr.targets.resize(graph.edges.size());
  csr.edge_ids.resize(graph.edges.size());
  std::vector<std::size_t> fill(csr.offsets.begin(), csr.offsets.end() - 1);
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    const std::size_t slot = fill[index.at(graph.edges[i].src)]++;
    csr.targets[slot] = index.at(graph.edges[i].dst);
    csr.edge_ids[slot] = i;
  }

  const std::size_t max_edges = cutoff.value_or(std::numeric_limits<std::size_t>::max());
  const auto raw = parallel ? kernels::enumerate_paths(csr, source->second, is_sink, max_edges)
                            : kernels::enumerate_paths_serial(csr, source->second, is_sink, max_edges);
  std::vector<PathRecord> paths;
  paths.reserve(raw.size());
  for (const auto& ids : raw) {
    if (!ids.empty()) paths.push_back(make_record(graph, scores, ids));
  }

  auto key = [](const PathRecord& p, PathKey k) {
    switch (k) {
      case PathKey::Risk: return p.risk_sum;
      case PathKey::Exploit: return p.exploit_sum;
      case PathKey::Impact: return p.impact_sum;
    }
    return 0.0;
  };
  std::sort(paths.begin(), paths.end(), [&](const PathRecord& a, const PathRecord& b) {
    for (PathKey k : order) {
      const double x = key(a, k);
      const double y = key(b, k);
      if (x != y) return x > y;
    }
    return a.nodes < b.nodes;
  });
  return paths;
}

std::vector<std::pair<std::string, std::size_t>> key_vulnerabilities(const AttackGraph& graph,
                                                                     std::size_t top_n) {
  std::map<std::string, std::size_t> degree;
  for (const auto& [id, n] : graph.nodes) {
    if (n.kind == NodeKind::Cve) degree[id] = 0;
  }
  for (const auto& e : graph.edges) {
    if (auto it = degree.find(e.src); it != degree.end()) ++it->second;
    if (auto it = degree.find(e.dst); it != degree.end()) ++it->second;
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(degree.begin(), degree.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > top_n) ranked.resize(top_n);
  return ranked;
}

std::vector<std::pair<std::string, std::string>> cover_edges(const AttackGraph& graph) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : graph.edges) {
    if (e.kind == EdgeKind::CveToCve || e.kind == EdgeKind::CveToCwe) out.emplace_back(e.src, e.dst);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> vertex_cover(const AttackGraph& graph) {
  const auto edges = cover_edges(graph);
  auto eligible = [&](const std::string& id) {
    const auto* n = graph.find(id);
    return n && n->kind == NodeKind::Cve;
  };

  // Local ratio with unit weights; a non-patchable endpoint has infinite
  // weight, so the whole decrement lands on the Cve end.
  std::map<std::string, double> residual;
  for (const auto& [u, v] : edges) {
    for (const auto* id : {&u, &v}) {
      if (eligible(*id)) residual.try_emplace(*id, 1.0);
    }
  }
  auto weight = [&](const std::string& id) {
    return eligible(id) ? residual[id] : std::numeric_limits<double>::infinity();
  };
  for (const auto& [u, v] : edges) {
    const double delta = std::min(weight(u), weight(v));
    if (delta <= 0.0) continue;
    if (eligible(u)) residual[u] -= delta;
    if (eligible(v)) residual[v] -= delta;
  }
  std::set<std::string> cover;
  for (const auto& [id, w] : residual) {
    if (w <= 0.0) cover.insert(id);
  }

  // Drop members whose every edge is already covered by another member.
  std::map<std::string, std::vector<std::string>> incident;
  for (const auto& [u, v] : edges) {
    incident[u].push_back(v);
    incident[v].push_back(u);
  }
  std::vector<std::string> candidates(cover.begin(), cover.end());
  std::stable_sort(candidates.begin(), candidates.end(), [&](const auto& a, const auto& b) {
    return incident[a].size() < incident[b].size();
  });
  for (const auto& id : candidates) {
    const bool redundant = std::all_of(incident[id].begin(), incident[id].end(), [&](const auto& other) {
      return eligible(other) && cover.contains(other);
    });
    if (redundant) cover.erase(id);
  }
  return {cover.begin(), cover.end()};
}

GraphAnalytics analyze(const AttackGraph& graph, const ScoreFunctions& fns, const Constants& consts,
                       const AnalyzeOptions& options) {
  using Clock = std::chrono::steady_clock;
  GraphAnalytics a;
  a.graph_id = graph.graph_id;
  a.version = graph.version;
  a.layer = graph.layer;
  a.constants = consts;
  a.total_nodes = graph.nodes.size();
  a.edges = graph.edges;

  const auto t0 = Clock::now();
  a.node_scores = node_scores(graph, fns);
  a.edge_scores = compute_edge_scores(graph, fns, consts);
  const auto gs = graph_scores(a.edge_scores);
  a.exploit_score = gs.exploit;
  a.impact_score = gs.impact;
  a.risk_score = gs.risk;
  const auto t1 = Clock::now();

  try {
    a.shortest_paths = shortest_attack_paths(graph, fns, &a.edge_scores);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoPath) throw;
  }
  a.shortest_path_count = a.shortest_paths.size();
  a.all_paths = enumerate_paths(graph, a.edge_scores, consts.cutoff, sort_order(PathKey::Risk), options.parallel);
  a.path_count = a.all_paths.size();
  a.top_paths.assign(a.all_paths.begin(),
                     a.all_paths.begin() + static_cast<std::ptrdiff_t>(std::min(consts.top_n, a.all_paths.size())));
  a.key_vulnerabilities = key_vulnerabilities(graph, consts.top_n);
  a.vertex_cover = vertex_cover(graph);
  a.vertex_cover_size = a.vertex_cover.size();
  const auto t2 = Clock::now();

  a.timings.score_computation_seconds = std::chrono::duration<double>(t1 - t0).count();
  a.timings.risk_analysis_seconds = std::chrono::duration<double>(t2 - t1).count();
  return a;
}

// ---- documents ---------------------------------------------------------------------

namespace {

constexpr std::string_view kAnalyticsSchema = "analytics-v1";

json path_to_json(const PathRecord& p) {
  return {{"nodes", p.nodes}, {"exploit_sum", p.exploit_sum}, {"impact_sum", p.impact_sum}, {"risk_sum", p.risk_sum}};
}

PathRecord path_from_json(const json& j) {
  return {j.at("nodes").get<std::vector<std::string>>(), j.at("exploit_sum").get<double>(),
          j.at("impact_sum").get<double>(), j.at("risk_sum").get<double>()};
}

json ranked_to_json(const std::vector<std::pair<std::string, std::size_t>>& ranked) {
  json out = json::array();
  for (const auto& [id, degree] : ranked) out.push_back({{"id", id}, {"degree", degree}});
  return out;
}

}  // namespace

json analytics_to_json(const GraphAnalytics& a, bool include_timings) {
  json nodes = json::array();
  for (const auto& [id, s] : a.node_scores) nodes.push_back({{"id", id}, {"e_score", s.e}, {"i_score", s.i}});
  json edges = json::array();
  for (std::size_t i = 0; i < a.edge_scores.edges.size(); ++i) {
    const auto& s = a.edge_scores.edges[i];
    json row = {{"src", s.src},
                {"dst", s.dst},
                {"ees", s.ees},
                {"eis", s.eis},
                {"ers", s.ers},
                {"normalized_ees", s.normalized_ees},
                {"normalized_eis", s.normalized_eis},
                {"normalized_ers", s.normalized_ers}};
    if (i < a.edges.size()) {
      row["kind"] = to_string(a.edges[i].kind);
      row["weight"] = a.edges[i].weight;
    }
    edges.push_back(std::move(row));
  }
  json shortest = json::array();
  for (const auto& p : a.shortest_paths) shortest.push_back(path_to_json(p));
  json top = json::array();
  for (const auto& p : a.top_paths) top.push_back(path_to_json(p));

  json j = {{"schema", kAnalyticsSchema},
            {"graph_id", a.graph_id},
            {"version", a.version},
            {"layer", a.layer ? json(to_string(*a.layer)) : json(nullptr)},
            {"constants",
             {{"c", a.constants.c}, {"k", a.constants.k}, {"cutoff", a.constants.cutoff}, {"top_n", a.constants.top_n}}},
            {"exploit_score", a.exploit_score},
            {"impact_score", a.impact_score},
            {"risk_score", a.risk_score},
            {"total_nodes", a.total_nodes},
            {"path_count", a.path_count},
            {"shortest_path_count", a.shortest_path_count},
            {"vertex_cover_size", a.vertex_cover_size},
            {"node_scores", nodes},
            {"edge_scores", edges},
            {"shortest_paths", shortest},
            {"top_paths", top},
            {"key_vulnerabilities", ranked_to_json(a.key_vulnerabilities)},
            {"vertex_cover", a.vertex_cover}};
  if (include_timings) {
    j["timings"] = {{"score_computation_seconds", a.timings.score_computation_seconds},
                    {"risk_analysis_seconds", a.timings.risk_analysis_seconds}};
  }
  return j;
}

GraphAnalytics analytics_from_json(const json& j) {
  try {
    if (j.at("schema").get<std::string>() != kAnalyticsSchema) {
      throw Error(ErrorCode::UnsupportedSchema, "expected schema " + std::string(kAnalyticsSchema));
    }
    GraphAnalytics a;
    a.graph_id = j.at("graph_id").get<std::string>();
    a.version = j.at("version").get<std::uint64_t>();
    if (!j.at("layer").is_null()) a.layer = layer_from_string(j.at("layer").get<std::string>());
    const auto& c = j.at("constants");
    a.constants = {c.at("c").get<double>(), c.at("k").get<double>(), c.at("cutoff").get<std::size_t>(),
                   c.at("top_n").get<std::size_t>()};
    a.exploit_score = j.at("exploit_score").get<double>();
    a.impact_score = j.at("impact_score").get<double>();
    a.risk_score = j.at("risk_score").get<double>();
    a.total_nodes = j.at("total_nodes").get<std::size_t>();
    a.path_count = j.at("path_count").get<std::size_t>();
    a.shortest_path_count = j.at("shortest_path_count").get<std::size_t>();
    a.vertex_cover_size = j.at("vertex_cover_size").get<std::size_t>();
    for (const auto& n : j.at("node_scores")) {
      a.node_scores[n.at("id").get<std::string>()] = {n.at("e_score").get<double>(), n.at("i_score").get<double>()};
    }
    for (const auto& row : j.at("edge_scores")) {
      EdgeScore s;
      s.src = row.at("src").get<std::string>();
      s.dst = row.at("dst").get<std::string>();
      s.ees = row.at("ees").get<double>();
      s.eis = row.at("eis").get<double>();
      s.ers = row.at("ers").get<double>();
      s.normalized_ees = row.at("normalized_ees").get<double>();
      s.normalized_eis = row.at("normalized_eis").get<double>();
      s.normalized_ers = row.at("normalized_ers").get<double>();
      a.edge_scores.edges.push_back(s);
      GraphEdge e;
      e.src = s.src;
      e.dst = s.dst;
      e.weight = row.at("weight").get<double>();
      const auto kind = row.at("kind").get<std::string>();
      for (EdgeKind k : {EdgeKind::AttackerToCve, EdgeKind::CveToCve, EdgeKind::CveToCwe}) {
        if (kind == to_string(k)) e.kind = k;
      }
      a.edges.push_back(std::move(e));
    }
    for (const auto& p : j.at("shortest_paths")) a.shortest_paths.push_back(path_from_json(p));
    for (const auto& p : j.at("top_paths")) a.top_paths.push_back(path_from_json(p));
    for (const auto& k : j.at("key_vulnerabilities")) {
      a.key_vulnerabilities.emplace_back(k.at("id").get<std::string>(), k.at("degree").get<std::size_t>());
    }
    a.vertex_cover = j.at("vertex_cover").get<std::vector<std::string>>();
    if (j.contains("timings")) {
      a.timings.score_computation_seconds = j.at("timings").at("score_computation_seconds").get<double>();
      a.timings.risk_analysis_seconds = j.at("timings").at("risk_analysis_seconds").get<double>();
    }
    return a;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptDocument, std::string("analytics document: ") + e.what());
  }
}

std::string dump_analytics(const GraphAnalytics& a, bool include_timings) {
  return analytics_to_json(a, include_timings).dump(2) + "\n";
}

ChangeImpactReport change_impact(const GraphAnalytics& before, const GraphAnalytics& after) {
  ChangeImpactReport r;
  r.graph_id = after.graph_id;
  r.from_version = before.version;
  r.to_version = after.version;
  r.exploit_delta = after.exploit_score - before.exploit_score;
  r.impact_delta = after.impact_score - before.impact_score;
  r.risk_delta = after.risk_score - before.risk_score;

  std::set<std::vector<std::string>> old_paths;
  std::set<std::vector<std::string>> new_paths;
  for (const auto& p : before.all_paths) old_paths.insert(p.nodes);
  for (const auto& p : after.all_paths) new_paths.insert(p.nodes);
  for (const auto& p : new_paths) r.paths_added += old_paths.contains(p) ? 0 : 1;
  for (const auto& p : old_paths) r.paths_removed += new_paths.contains(p) ? 0 : 1;

  r.key_vulnerabilities_before = before.key_vulnerabilities;
  r.key_vulnerabilities_after = after.key_vulnerabilities;
  r.key_vulnerabilities_changed = before.key_vulnerabilities != after.key_vulnerabilities;

  std::set_difference(after.vertex_cover.begin(), after.vertex_cover.end(), before.vertex_cover.begin(),
                      before.vertex_cover.end(), std::back_inserter(r.cover_added));
  std::set_difference(before.vertex_cover.begin(), before.vertex_cover.end(), after.vertex_cover.begin(),
                      after.vertex_cover.end(), std::back_inserter(r.cover_removed));
  r.vertex_cover_changed = !r.cover_added.empty() || !r.cover_removed.empty();
  return r;
}

json change_impact_to_json(const ChangeImpactReport& r) {
  return {{"schema", "change-impact-v1"},
          {"graph_id", r.graph_id},
          {"from_version", r.from_version},
          {"to_version", r.to_version},
          {"deltas", {{"exploit_score", r.exploit_delta}, {"impact_score", r.impact_delta}, {"risk_score", r.risk_delta}}},
          {"paths_added", r.paths_added},
          {"paths_removed", r.paths_removed},
          {"key_vulnerabilities_changed", r.key_vulnerabilities_changed},
          {"key_vulnerabilities_before", ranked_to_json(r.key_vulnerabilities_before)},
          {"key_vulnerabilities_after", ranked_to_json(r.key_vulnerabilities_after)},
          {"vertex_cover_changed", r.vertex_cover_changed},
          {"cover_added", r.cover_added},
          {"cover_removed", r.cover_removed}};
}

std::string render_report(const GraphAnalytics& a, bool include_timings) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "graph " << a.graph_id << " v" << a.version;
  if (a.layer) out << " layer " << to_string(*a.layer);
  out << "\n";
  out << "  exploit score  " << a.exploit_score << "\n";
  out << "  impact score   " << a.impact_score << "\n";
  out << "  risk score     " << a.risk_score << "\n";
  out << "  total nodes    " << a.total_nodes << "\n";
  out << "  paths          " << a.path_count << " (cutoff " << a.constants.cutoff << ")\n";
  out << "  shortest paths " << a.shortest_path_count << "\n";
  out << "  cover size     " << a.vertex_cover_size << "\n";
  if (include_timings) {
    out << std::setprecision(4);
    out << "  score time     " << a.timings.score_computation_seconds << " s\n";
    out << "  analysis time  " << a.timings.risk_analysis_seconds << " s\n";
    out << std::setprecision(2);
  }
  out << "top paths\n";
  for (const auto& p : a.top_paths) {
    out << "  risk " << p.risk_sum << " exploit " << p.exploit_sum << " impact " << p.impact_sum << "  ";
    for (std::size_t i = 0; i < p.nodes.size(); ++i) out << (i ? " -> " : "") << p.nodes[i];
    out << "\n";
  }
  out << "shortest paths\n";
  for (const auto& p : a.shortest_paths) {
    out << "  ";
    for (std::size_t i = 0; i < p.nodes.size(); ++i) out << (i ? " -> " : "") << p.nodes[i];
    out << "\n";
  }
  out << "key vulnerabilities\n";
  for (const auto& [id, degree] : a.key_vulnerabilities) out << "  " << id << " degree " << degree << "\n";
  out << "vertex cover\n";
  out << " ";
  for (const auto& id : a.vertex_cover) out << " " << id;
  out << "\n";
  return out.str();
}

}  // namespace postural
