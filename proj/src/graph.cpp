#include "postural/graph.hpp"

#include <algorithm>
#include <deque>
#include <tuple>

#include "postural/cwe_catalog.hpp"
#include "postural/error.hpp"
#include "postural/kernels.hpp"
#include "postural/text.hpp"

namespace postural {

using nlohmann::json;

std::string_view to_string(NodeKind k) noexcept {
  switch (k) {
    case NodeKind::Attacker: return "Attacker";
    case NodeKind::Cve: return "Cve";
    case NodeKind::Cwe: return "Cwe";
  }
  return "?";
}

std::string_view to_string(Layer l) noexcept {
  switch (l) {
    case Layer::Network: return "Network";
    case Layer::SystemHardware: return "SystemHardware";
    case Layer::MachineLearning: return "MachineLearning";
    case Layer::Crypto: return "Crypto";
  }
  return "?";
}

std::string_view to_string(EdgeKind k) noexcept {
  switch (k) {
    case EdgeKind::AttackerToCve: return "AttackerToCve";
    case EdgeKind::CveToCve: return "CveToCve";
    case EdgeKind::CveToCwe: return "CveToCwe";
  }
  return "?";
}

std::optional<Layer> layer_from_string(std::string_view s) noexcept {
  for (Layer l : kAllLayers) {
    if (s == to_string(l) || s == layer_slug(l)) return l;
  }
  return std::nullopt;
}

std::string_view layer_slug(Layer l) noexcept {
  switch (l) {
    case Layer::Network: return "network";
    case Layer::SystemHardware: return "system-hardware";
    case Layer::MachineLearning: return "machine-learning";
    case Layer::Crypto: return "crypto";
  }
  return "?";
}

std::string cwe_node_id(int cwe) { return "CWE-" + std::to_string(cwe); }

namespace {

std::optional<NodeKind> node_kind_from_string(std::string_view s) {
  for (NodeKind k : {NodeKind::Attacker, NodeKind::Cve, NodeKind::Cwe}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

std::optional<EdgeKind> edge_kind_from_string(std::string_view s) {
  for (EdgeKind k : {EdgeKind::AttackerToCve, EdgeKind::CveToCve, EdgeKind::CveToCwe}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

bool edge_less(const GraphEdge& a, const GraphEdge& b) {
  return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
}

void sort_edges(AttackGraph& g) { std::sort(g.edges.begin(), g.edges.end(), edge_less); }

double base_weight(const std::optional<double>& base) {
  return base ? *base / 10.0 : kMissingBaseWeight;
}

GraphNode attacker_node() {
  GraphNode n;
  n.id = std::string(kAttackerId);
  n.kind = NodeKind::Attacker;
  n.description = "attacker";
  return n;
}

GraphNode cwe_node(int cwe) {
  GraphNode n;
  n.id = cwe_node_id(cwe);
  n.kind = NodeKind::Cwe;
  n.description = std::string(cwe_name(cwe).value_or(""));
  n.cwe_ids = {cwe};
  return n;
}

GraphNode cve_node(const CveRecord& r, const NodeAttributes& attrs, double criticality) {
  GraphNode n;
  n.id = r.id;
  n.kind = NodeKind::Cve;
  n.description = r.description;
  n.attributes = attrs;
  n.cwe_ids = r.cwe_ids;
  std::sort(n.cwe_ids.begin(), n.cwe_ids.end());
  n.cwe_ids.erase(std::unique(n.cwe_ids.begin(), n.cwe_ids.end()), n.cwe_ids.end());
  n.base_score = r.base_score;
  n.exploitability = r.exploitability_score;
  n.impact = r.impact_score;
  n.criticality = criticality;
  return n;
}

GraphEdge make_edge(std::string src, std::string dst, EdgeKind kind, double weight) {
  GraphEdge e;
  e.src = std::move(src);
  e.dst = std::move(dst);
  e.kind = kind;
  e.weight = weight;
  return e;
}

GraphEdge attacker_edge(const GraphNode& cve) {
  auto e = make_edge(std::string(kAttackerId), cve.id, EdgeKind::AttackerToCve,
                     base_weight(cve.base_score));
  e.provenance.base_score = cve.base_score;
  return e;
}

std::vector<GraphEdge> cwe_edges(const GraphNode& cve) {
  std::vector<GraphEdge> out;
  for (int c : cve.cwe_ids) {
    auto e = make_edge(cve.id, cwe_node_id(c), EdgeKind::CveToCwe, base_weight(cve.base_score));
    e.provenance.base_score = cve.base_score;
    out.push_back(std::move(e));
  }
  return out;
}

void apply_layers(GraphNode& n, const std::set<Layer>& layers) {
  n.layers = layers;
  n.unclassified = layers.empty();
}

// Adjacency over node ids restricted to the given edge list.
using Adjacency = std::map<std::string, std::vector<std::string>>;

bool reaches(const Adjacency& adj, const std::string& from, const std::string& to) {
  if (from == to) return true;
  std::set<std::string> seen{from};
  std::vector<std::string> stack{from};
  while (!stack.empty()) {
    const auto cur = std::move(stack.back());
    stack.pop_back();
    auto it = adj.find(cur);
    if (it == adj.end()) continue;
    for (const auto& next : it->second) {
      if (next == to) return true;
      if (seen.insert(next).second) stack.push_back(next);
    }
  }
  return false;
}

std::set<std::string> reachable_from(const AttackGraph& g, const std::string& start) {
  Adjacency adj;
  for (const auto& e : g.edges) adj[e.src].push_back(e.dst);
  std::set<std::string> seen{start};
  std::vector<std::string> stack{start};
  while (!stack.empty()) {
    const auto cur = std::move(stack.back());
    stack.pop_back();
    for (const auto& next : adj[cur]) {
      if (seen.insert(next).second) stack.push_back(next);
    }
  }
  return seen;
}

void check_attacker_reach(const AttackGraph& g) {
  const auto seen = reachable_from(g, std::string(kAttackerId));
  for (const auto& [id, n] : g.nodes) {
    if (n.kind == NodeKind::Cve && !seen.contains(id)) {
      throw Error(ErrorCode::WouldOrphanAttacker, id + " would become unreachable from the attacker");
    }
  }
}

std::vector<std::string> port_union(const std::vector<std::string>& a,
                                    const std::vector<std::string>& b) {
  std::vector<std::string> out = a;
  for (const auto& p : b) {
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
  return out;
}

std::string content_id(AttackGraph g) {
  g.graph_id.clear();
  g.version = 1;
  return "g" + text::hex64(text::fnv1a64(graph_to_json(g).dump()));
}

}  // namespace

const GraphNode* AttackGraph::find(std::string_view id) const {
  auto it = nodes.find(std::string(id));
  return it == nodes.end() ? nullptr : &it->second;
}

const GraphEdge* AttackGraph::find_edge(std::string_view src, std::string_view dst) const {
  auto it = std::lower_bound(edges.begin(), edges.end(), std::pair{src, dst},
                             [](const GraphEdge& e, const std::pair<std::string_view, std::string_view>& k) {
                               return std::tie(e.src, e.dst) < std::tie(k.first, k.second);
                             });
  if (it == edges.end() || it->src != src || it->dst != dst) return nullptr;
  return &*it;
}

std::size_t AttackGraph::count(NodeKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      nodes.begin(), nodes.end(), [&](const auto& kv) { return kv.second.kind == kind; }));
}

std::vector<std::string> out_port(const NodeAttributes& a, bool strict) {
  return strict ? a.postconditions : port_union(a.postconditions, a.outputs);
}

std::vector<std::string> in_port(const NodeAttributes& a, bool strict) {
  return strict ? a.preconditions : port_union(a.preconditions, a.inputs);
}

void break_cycles(AttackGraph& graph, const std::set<std::pair<std::string, std::string>>& keep) {
  // Greedy acceptance in descending weight order: an edge is rejected when
  // its head already reaches its tail through accepted edges, which makes it
  // the lightest edge of the cycle it would close.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    if (graph.edges[i].kind == EdgeKind::CveToCve) order.push_back(i);
  }
  auto kept = [&](const GraphEdge& e) { return keep.contains({e.src, e.dst}); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = graph.edges[a];
    const auto& y = graph.edges[b];
    if (kept(x) != kept(y)) return kept(x);
    if (x.weight != y.weight) return x.weight > y.weight;
    return std::tie(x.src, x.dst) > std::tie(y.src, y.dst);
  });

  Adjacency adj;
  std::vector<char> drop(graph.edges.size(), 0);
  for (std::size_t i : order) {
    const auto& e = graph.edges[i];
    if (reaches(adj, e.dst, e.src)) {
      drop[i] = 1;
      graph.removed_edges.push_back({e.src, e.dst, e.weight});
    } else {
      adj[e.src].push_back(e.dst);
    }
  }
  std::vector<GraphEdge> survivors;
  survivors.reserve(graph.edges.size());
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    if (!drop[i]) survivors.push_back(std::move(graph.edges[i]));
  }
  graph.edges = std::move(survivors);
}

bool is_acyclic(const AttackGraph& graph) {
  std::map<std::string, std::size_t> indegree;
  Adjacency adj;
  for (const auto& [id, n] : graph.nodes) indegree[id] = 0;
  for (const auto& e : graph.edges) {
    adj[e.src].push_back(e.dst);
    ++indegree[e.dst];
    indegree.try_emplace(e.src, 0);
  }
  std::deque<std::string> ready;
  for (const auto& [id, d] : indegree) {
    if (d == 0) ready.push_back(id);
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    const auto cur = ready.front();
    ready.pop_front();
    ++visited;
    for (const auto& next : adj[cur]) {
      if (--indegree[next] == 0) ready.push_back(next);
    }
  }
  return visited == indegree.size();
}

AttackGraph build_graph(const std::vector<CveInput>& cves, const EmbeddingModel& model,
                        const BuildOptions& options) {
  if (cves.empty()) throw Error(ErrorCode::EmptyInput, "no CVE records to build a graph from");
  if (!(options.threshold >= 0.0 && options.threshold <= 1.0)) {
    throw Error(ErrorCode::BadRequest, "threshold must lie in [0, 1]");
  }

  AttackGraph g;
  g.threshold = options.threshold;
  g.nodes.emplace(std::string(kAttackerId), attacker_node());

  std::vector<const GraphNode*> cve_nodes;
  for (const auto& in : cves) {
    auto node = cve_node(in.record, in.attributes, in.criticality);
    apply_layers(node, classify_layers(node, node.description, options.layer_rules).layers);
    auto [it, fresh] = g.nodes.emplace(node.id, std::move(node));
    if (!fresh) throw Error(ErrorCode::BadRequest, "duplicate CVE " + in.record.id);
    cve_nodes.push_back(&it->second);
  }

  for (const auto* n : cve_nodes) {
    g.edges.push_back(attacker_edge(*n));
    for (auto& e : cwe_edges(*n)) {
      const int cwe = std::stoi(e.dst.substr(4));
      g.nodes.try_emplace(e.dst, cwe_node(cwe));
      g.edges.push_back(std::move(e));
    }
  }

  std::vector<kernels::PortVectors> outs;
  std::vector<kernels::PortVectors> ins;
  for (const auto* n : cve_nodes) {
    outs.push_back(kernels::make_port_vectors(model, out_port(n->attributes, options.strict_ports)));
    ins.push_back(kernels::make_port_vectors(model, in_port(n->attributes, options.strict_ports)));
  }
  const auto sim = options.parallel ? kernels::similarity_matrix(outs, ins)
                                    : kernels::similarity_matrix_serial(outs, ins);
  const std::size_t n = cve_nodes.size();
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const double s = sim[a * n + b];
      if (a == b || s < options.threshold) continue;
      auto e = make_edge(cve_nodes[a]->id, cve_nodes[b]->id, EdgeKind::CveToCve, s);
      e.provenance.similarity = s;
      g.edges.push_back(std::move(e));
    }
  }
  sort_edges(g);
  break_cycles(g);

  if (options.prune_dead_ends) {
    // Reverse reachability from the sinks.
    Adjacency rev;
    for (const auto& e : g.edges) rev[e.dst].push_back(e.src);
    std::set<std::string> alive;
    std::vector<std::string> stack;
    for (const auto& [id, node] : g.nodes) {
      if (node.kind == NodeKind::Cwe) {
        alive.insert(id);
        stack.push_back(id);
      }
    }
    while (!stack.empty()) {
      const auto cur = std::move(stack.back());
      stack.pop_back();
      for (const auto& prev : rev[cur]) {
        if (alive.insert(prev).second) stack.push_back(prev);
      }
    }
    std::erase_if(g.nodes, [&](const auto& kv) {
      return kv.second.kind == NodeKind::Cve && !alive.contains(kv.first);
    });
    std::erase_if(g.edges, [&](const GraphEdge& e) {
      return !g.nodes.contains(e.src) || !g.nodes.contains(e.dst);
    });
  }

  g.graph_id = content_id(g);
  return g;
}

AttackGraph partition(const AttackGraph& graph, Layer layer) {
  AttackGraph p;
  p.graph_id = graph.graph_id;
  p.version = graph.version;
  p.threshold = graph.threshold;
  p.layer = layer;
  if (const auto* a = graph.find(kAttackerId)) p.nodes.emplace(a->id, *a);
  for (const auto& [id, n] : graph.nodes) {
    if (n.kind == NodeKind::Cve && n.layers.contains(layer)) p.nodes.emplace(id, n);
  }
  for (const auto& e : graph.edges) {
    if (e.kind == EdgeKind::CveToCwe && p.nodes.contains(e.src)) {
      p.nodes.try_emplace(e.dst, graph.nodes.at(e.dst));
    }
  }
  for (const auto& [id, n] : p.nodes) {
    if (n.kind != NodeKind::Cve) continue;
    GraphEdge e = attacker_edge(n);
    if (const auto* orig = graph.find_edge(kAttackerId, id)) e = *orig;
    e.provenance.regenerated = true;
    p.edges.push_back(std::move(e));
  }
  for (const auto& e : graph.edges) {
    if (e.kind != EdgeKind::AttackerToCve && p.nodes.contains(e.src) && p.nodes.contains(e.dst)) {
      p.edges.push_back(e);
    }
  }
  for (const auto& r : graph.removed_edges) {
    if (p.nodes.contains(r.src) && p.nodes.contains(r.dst)) p.removed_edges.push_back(r);
  }
  sort_edges(p);
  return p;
}

// ---- edits ---------------------------------------------------------------------------

GraphEdit resolve_edit(const AttackGraph& graph, const GraphEdit& edit, const EditContext& ctx) {
  const auto* add = std::get_if<AddCveNode>(&edit);
  if (!add || (add->resolved_edges && add->resolved_layers)) return edit;
  if (!is_valid_cve_id(add->record.id)) {
    throw Error(ErrorCode::BadRequest, "invalid CVE id '" + add->record.id + "'");
  }
  if (graph.find(add->record.id)) {
    throw Error(ErrorCode::IllegalEdge, "node " + add->record.id + " already exists");
  }
  if (!ctx.model) throw Error(ErrorCode::BadRequest, "adding a CVE node requires an embedding model");

  AddCveNode out = *add;
  const auto node = cve_node(add->record, add->attributes, add->criticality);
  const bool strict = ctx.options.strict_ports;
  std::vector<GraphEdge> edges{attacker_edge(node)};
  const auto new_out = kernels::make_port_vectors(*ctx.model, out_port(node.attributes, strict));
  const auto new_in = kernels::make_port_vectors(*ctx.model, in_port(node.attributes, strict));
  for (const auto& [id, other] : graph.nodes) {
    if (other.kind != NodeKind::Cve) continue;
    const double fwd = kernels::port_similarity(
        new_out, kernels::make_port_vectors(*ctx.model, in_port(other.attributes, strict)));
    const double back = kernels::port_similarity(
        kernels::make_port_vectors(*ctx.model, out_port(other.attributes, strict)), new_in);
    if (fwd >= graph.threshold) {
      auto e = make_edge(node.id, id, EdgeKind::CveToCve, fwd);
      e.provenance.similarity = fwd;
      edges.push_back(std::move(e));
    }
    if (back >= graph.threshold) {
      auto e = make_edge(id, node.id, EdgeKind::CveToCve, back);
      e.provenance.similarity = back;
      edges.push_back(std::move(e));
    }
  }
  for (auto& e : cwe_edges(node)) edges.push_back(std::move(e));
  std::sort(edges.begin(), edges.end(), edge_less);
  out.resolved_edges = std::move(edges);
  out.resolved_layers = classify_layers(node, node.description, ctx.options.layer_rules).layers;
  return out;
}

namespace {

void check_range(double v, double hi, const char* what) {
  if (!(v >= 0.0 && v <= hi)) {
    throw Error(ErrorCode::BadRequest, std::string(what) + " must lie in [0, " +
                                           (hi == 1.0 ? "1" : "10") + "]");
  }
}

const GraphNode& require_node(const AttackGraph& g, const std::string& id) {
  const auto* n = g.find(id);
  if (!n) throw Error(ErrorCode::UnknownNode, "unknown node " + id);
  return *n;
}

std::optional<EdgeKind> kind_between(const GraphNode& src, const GraphNode& dst) {
  if (src.kind == NodeKind::Attacker && dst.kind == NodeKind::Cve) return EdgeKind::AttackerToCve;
  if (src.kind == NodeKind::Cve && dst.kind == NodeKind::Cve && src.id != dst.id) {
    return EdgeKind::CveToCve;
  }
  if (src.kind == NodeKind::Cve && dst.kind == NodeKind::Cwe) return EdgeKind::CveToCwe;
  return std::nullopt;
}

void apply_add_cve(AttackGraph& g, const AddCveNode& add) {
  if (!add.resolved_edges || !add.resolved_layers) {
    throw Error(ErrorCode::BadRequest, "AddCveNode must be resolved before it is applied");
  }
  if (g.find(add.record.id)) {
    throw Error(ErrorCode::IllegalEdge, "node " + add.record.id + " already exists");
  }
  std::set<std::pair<std::string, std::string>> keep;
  for (const auto& e : g.edges) {
    if (e.kind == EdgeKind::CveToCve) keep.insert({e.src, e.dst});
  }
  auto node = cve_node(add.record, add.attributes, add.criticality);
  apply_layers(node, *add.resolved_layers);
  g.nodes.emplace(node.id, std::move(node));
  for (const auto& e : *add.resolved_edges) {
    const auto* src = g.find(e.src);
    if (!src) throw Error(ErrorCode::UnknownNode, "unknown node " + e.src);
    if (e.kind == EdgeKind::CveToCwe && !g.find(e.dst)) {
      g.nodes.emplace(e.dst, cwe_node(std::stoi(e.dst.substr(4))));
    }
    const auto* dst = g.find(e.dst);
    if (!dst) throw Error(ErrorCode::UnknownNode, "unknown node " + e.dst);
    if (kind_between(*src, *dst) != e.kind) {
      throw Error(ErrorCode::IllegalEdge, "edge " + e.src + " -> " + e.dst + " has the wrong kind");
    }
    g.edges.push_back(e);
  }
  sort_edges(g);
  break_cycles(g, keep);
}

void apply_remove_node(AttackGraph& g, const RemoveNode& rm) {
  const auto& node = require_node(g, rm.node_id);
  if (node.kind == NodeKind::Attacker) {
    throw Error(ErrorCode::WouldOrphanAttacker, "the attacker node cannot be removed");
  }
  std::set<std::string> touched_cwes;
  for (const auto& e : g.edges) {
    if (e.src == rm.node_id && e.kind == EdgeKind::CveToCwe) touched_cwes.insert(e.dst);
  }
  g.nodes.erase(rm.node_id);
  std::erase_if(g.edges, [&](const GraphEdge& e) { return e.src == rm.node_id || e.dst == rm.node_id; });
  std::erase_if(g.removed_edges,
                [&](const RemovedEdge& e) { return e.src == rm.node_id || e.dst == rm.node_id; });
  // A weakness sink only exists because some CVE points at it.
  for (const auto& cwe : touched_cwes) {
    const bool fed = std::any_of(g.edges.begin(), g.edges.end(),
                                 [&](const GraphEdge& e) { return e.dst == cwe; });
    if (!fed) g.nodes.erase(cwe);
  }
  check_attacker_reach(g);
}

void apply_add_edge(AttackGraph& g, const AddEdge& add) {
  const auto& src = require_node(g, add.src);
  const auto& dst = require_node(g, add.dst);
  const auto kind = kind_between(src, dst);
  if (!kind) {
    throw Error(ErrorCode::IllegalEdge, "no edge kind connects " + std::string(to_string(src.kind)) +
                                            " " + add.src + " to " + std::string(to_string(dst.kind)) +
                                            " " + add.dst);
  }
  if (g.find_edge(add.src, add.dst)) {
    throw Error(ErrorCode::IllegalEdge, "edge " + add.src + " -> " + add.dst + " already exists");
  }
  check_range(add.weight, 1.0, "edge weight");
  auto e = make_edge(add.src, add.dst, *kind, add.weight);
  e.provenance.user_added = true;
  g.edges.push_back(std::move(e));
  sort_edges(g);
  break_cycles(g);
}

void apply_remove_edge(AttackGraph& g, const RemoveEdge& rm) {
  require_node(g, rm.src);
  require_node(g, rm.dst);
  const auto before = g.edges.size();
  std::erase_if(g.edges, [&](const GraphEdge& e) { return e.src == rm.src && e.dst == rm.dst; });
  if (g.edges.size() == before) {
    throw Error(ErrorCode::IllegalEdge, "no edge " + rm.src + " -> " + rm.dst);
  }
  check_attacker_reach(g);
}

void apply_set_score(AttackGraph& g, const SetScore& set) {
  auto it = g.nodes.find(set.node_id);
  if (it == g.nodes.end()) throw Error(ErrorCode::UnknownNode, "unknown node " + set.node_id);
  switch (set.field) {
    case ScoreField::EScore:
      check_range(set.value, 10.0, "e_score");
      it->second.e_override = set.value;
      return;
    case ScoreField::IScore:
      check_range(set.value, 10.0, "i_score");
      it->second.i_override = set.value;
      return;
    case ScoreField::Weight: {
      if (!set.edge_dst) throw Error(ErrorCode::BadRequest, "weight override needs edge_dst");
      require_node(g, *set.edge_dst);
      check_range(set.value, 1.0, "edge weight");
      auto e = std::find_if(g.edges.begin(), g.edges.end(), [&](const GraphEdge& x) {
        return x.src == set.node_id && x.dst == *set.edge_dst;
      });
      if (e == g.edges.end()) {
        throw Error(ErrorCode::IllegalEdge, "no edge " + set.node_id + " -> " + *set.edge_dst);
      }
      e->weight = set.value;
      e->provenance.weight_overridden = true;
      return;
    }
  }
}

}  // namespace

AttackGraph apply_edit(const AttackGraph& graph, const GraphEdit& edit, const EditContext& ctx) {
  AttackGraph g = graph;
  const GraphEdit resolved = resolve_edit(graph, edit, ctx);
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, AddCveNode>) apply_add_cve(g, e);
        else if constexpr (std::is_same_v<T, RemoveNode>) apply_remove_node(g, e);
        else if constexpr (std::is_same_v<T, AddEdge>) apply_add_edge(g, e);
        else if constexpr (std::is_same_v<T, RemoveEdge>) apply_remove_edge(g, e);
        else apply_set_score(g, e);
      },
      resolved);
  ++g.version;
  return g;
}

// ---- documents ---------------------------------------------------------------------

namespace {

constexpr std::string_view kGraphSchema = "attack-graph-v1";

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_double(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::string_view port_name(Port p) {
  switch (p) {
    case Port::Preconditions: return "preconditions";
    case Port::Postconditions: return "postconditions";
    case Port::Inputs: return "inputs";
    case Port::Outputs: return "outputs";
  }
  return "?";
}

constexpr Port kPorts[] = {Port::Preconditions, Port::Postconditions, Port::Inputs, Port::Outputs};

Port port_from_name(std::string_view s) {
  for (Port p : kPorts) {
    if (s == port_name(p)) return p;
  }
  throw Error(ErrorCode::MalformedGraph, "unknown port '" + std::string(s) + "'");
}

json layers_to_json(const std::set<Layer>& layers) {
  json out = json::array();
  for (Layer l : layers) out.push_back(to_string(l));
  return out;
}

std::set<Layer> layers_from_json(const json& j) {
  std::set<Layer> out;
  for (const auto& s : j) {
    auto l = layer_from_string(s.get<std::string>());
    if (!l) throw Error(ErrorCode::MalformedGraph, "unknown layer " + s.dump());
    out.insert(*l);
  }
  return out;
}

json node_to_json(const GraphNode& n) {
  json j = {{"id", n.id},
            {"kind", to_string(n.kind)},
            {"description", n.description},
            {"cwe_ids", n.cwe_ids},
            {"base_score", opt(n.base_score)},
            {"exploitability", opt(n.exploitability)},
            {"impact", opt(n.impact)},
            {"criticality", n.criticality},
            {"e_override", opt(n.e_override)},
            {"i_override", opt(n.i_override)},
            {"layers", layers_to_json(n.layers)},
            {"unclassified", n.unclassified}};
  if (n.kind == NodeKind::Cve) j["attributes"] = attributes_to_json(n.attributes);
  return j;
}

GraphNode node_from_json(const json& j) {
  GraphNode n;
  n.id = j.at("id").get<std::string>();
  auto kind = node_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::MalformedGraph, "node " + n.id + " has an unknown kind");
  n.kind = *kind;
  n.description = j.at("description").get<std::string>();
  n.cwe_ids = j.at("cwe_ids").get<std::vector<int>>();
  n.base_score = opt_double(j, "base_score");
  n.exploitability = opt_double(j, "exploitability");
  n.impact = opt_double(j, "impact");
  n.criticality = j.at("criticality").get<double>();
  n.e_override = opt_double(j, "e_override");
  n.i_override = opt_double(j, "i_override");
  n.layers = layers_from_json(j.at("layers"));
  n.unclassified = j.at("unclassified").get<bool>();
  if (j.contains("attributes")) n.attributes = attributes_from_json(j.at("attributes"));
  return n;
}

json edge_to_json(const GraphEdge& e) {
  return {{"src", e.src},
          {"dst", e.dst},
          {"kind", to_string(e.kind)},
          {"weight", e.weight},
          {"provenance",
           {{"similarity", opt(e.provenance.similarity)},
            {"base_score", opt(e.provenance.base_score)},
            {"regenerated", e.provenance.regenerated},
            {"user_added", e.provenance.user_added},
            {"weight_overridden", e.provenance.weight_overridden}}}};
}

GraphEdge edge_from_json(const json& j) {
  GraphEdge e;
  e.src = j.at("src").get<std::string>();
  e.dst = j.at("dst").get<std::string>();
  auto kind = edge_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::MalformedGraph, "edge " + e.src + " -> " + e.dst + " has an unknown kind");
  e.kind = *kind;
  e.weight = j.at("weight").get<double>();
  const auto& p = j.at("provenance");
  e.provenance.similarity = opt_double(p, "similarity");
  e.provenance.base_score = opt_double(p, "base_score");
  e.provenance.regenerated = p.at("regenerated").get<bool>();
  e.provenance.user_added = p.at("user_added").get<bool>();
  e.provenance.weight_overridden = p.at("weight_overridden").get<bool>();
  return e;
}

std::string_view field_name(ScoreField f) {
  switch (f) {
    case ScoreField::EScore: return "e_score";
    case ScoreField::IScore: return "i_score";
    case ScoreField::Weight: return "weight";
  }
  return "?";
}

}  // namespace

json attributes_to_json(const NodeAttributes& a) {
  json j;
  for (Port p : kPorts) j[std::string(port_name(p))] = a.port(p);
  json fb = json::array();
  for (Port p : a.fallback_ports) fb.push_back(port_name(p));
  j["fallback_ports"] = fb;
  return j;
}

NodeAttributes attributes_from_json(const json& j) {
  NodeAttributes a;
  // An absent port is an empty one.
  for (Port p : kPorts) a.port(p) = j.value(std::string(port_name(p)), std::vector<std::string>{});
  if (j.contains("fallback_ports")) {
    for (const auto& s : j.at("fallback_ports")) a.fallback_ports.push_back(port_from_name(s.get<std::string>()));
  }
  return a;
}

json graph_to_json(const AttackGraph& graph) {
  json nodes = json::array();
  for (const auto& [id, n] : graph.nodes) nodes.push_back(node_to_json(n));
  json edges = json::array();
  for (const auto& e : graph.edges) edges.push_back(edge_to_json(e));
  json removed = json::array();
  for (const auto& r : graph.removed_edges) {
    removed.push_back({{"src", r.src}, {"dst", r.dst}, {"weight", r.weight}});
  }
  return {{"schema", kGraphSchema},
          {"graph_id", graph.graph_id},
          {"version", graph.version},
          {"threshold", graph.threshold},
          {"layer", graph.layer ? json(to_string(*graph.layer)) : json(nullptr)},
          {"nodes", nodes},
          {"edges", edges},
          {"removed_edges", removed}};
}

AttackGraph graph_from_json(const json& j) {
  try {
    if (j.at("schema").get<std::string>() != kGraphSchema) {
      throw Error(ErrorCode::UnsupportedSchema, "expected schema " + std::string(kGraphSchema));
    }
    AttackGraph g;
    g.graph_id = j.at("graph_id").get<std::string>();
    g.version = j.at("version").get<std::uint64_t>();
    g.threshold = j.at("threshold").get<double>();
    if (!j.at("layer").is_null()) {
      g.layer = layer_from_string(j.at("layer").get<std::string>());
      if (!g.layer) throw Error(ErrorCode::MalformedGraph, "unknown layer " + j.at("layer").dump());
    }
    for (const auto& nj : j.at("nodes")) {
      auto n = node_from_json(nj);
      const auto id = n.id;
      if (!g.nodes.emplace(id, std::move(n)).second) {
        throw Error(ErrorCode::MalformedGraph, "duplicate node " + id);
      }
    }
    for (const auto& ej : j.at("edges")) {
      auto e = edge_from_json(ej);
      if (!g.nodes.contains(e.src) || !g.nodes.contains(e.dst)) {
        throw Error(ErrorCode::MalformedGraph, "edge " + e.src + " -> " + e.dst + " names an unknown node");
      }
      g.edges.push_back(std::move(e));
    }
    for (const auto& rj : j.at("removed_edges")) {
      g.removed_edges.push_back(
          {rj.at("src").get<std::string>(), rj.at("dst").get<std::string>(), rj.at("weight").get<double>()});
    }
    sort_edges(g);
    return g;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedGraph, std::string("graph document: ") + e.what());
  }
}

std::string dump_graph(const AttackGraph& graph) { return graph_to_json(graph).dump(2) + "\n"; }

AttackGraph load_graph(std::string_view document) {
  json j;
  try {
    j = json::parse(document);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedGraph, "graph document at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return graph_from_json(j);
}

json edit_to_json(const GraphEdit& edit) {
  return std::visit(
      [](const auto& e) -> json {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, AddCveNode>) {
          json j = {{"op", "add_cve_node"},
                    {"record", record_to_json(e.record)},
                    {"attributes", attributes_to_json(e.attributes)},
                    {"criticality", e.criticality}};
          if (e.resolved_edges) {
            json edges = json::array();
            for (const auto& x : *e.resolved_edges) edges.push_back(edge_to_json(x));
            j["resolved_edges"] = edges;
          }
          if (e.resolved_layers) j["resolved_layers"] = layers_to_json(*e.resolved_layers);
          return j;
        } else if constexpr (std::is_same_v<T, RemoveNode>) {
          return {{"op", "remove_node"}, {"node_id", e.node_id}};
        } else if constexpr (std::is_same_v<T, AddEdge>) {
          return {{"op", "add_edge"}, {"src", e.src}, {"dst", e.dst}, {"weight", e.weight}};
        } else if constexpr (std::is_same_v<T, RemoveEdge>) {
          return {{"op", "remove_edge"}, {"src", e.src}, {"dst", e.dst}};
        } else {
          json j = {{"op", "set_score"}, {"node_id", e.node_id}, {"field", field_name(e.field)}, {"value", e.value}};
          if (e.edge_dst) j["edge_dst"] = *e.edge_dst;
          return j;
        }
      },
      edit);
}

GraphEdit edit_from_json(const json& j) {
  try {
    const auto op = j.at("op").get<std::string>();
    if (op == "add_cve_node") {
      AddCveNode a;
      a.record = record_from_json(j.at("record"));
      if (j.contains("attributes")) {
        a.attributes = attributes_from_json(j.at("attributes"));
      } else {
        a.attributes = assemble_attributes(a.record, extract_entities(a.record.description));
      }
      if (j.contains("criticality")) a.criticality = j.at("criticality").get<double>();
      if (j.contains("resolved_edges")) {
        std::vector<GraphEdge> edges;
        for (const auto& x : j.at("resolved_edges")) edges.push_back(edge_from_json(x));
        a.resolved_edges = std::move(edges);
      }
      if (j.contains("resolved_layers")) a.resolved_layers = layers_from_json(j.at("resolved_layers"));
      return a;
    }
    if (op == "remove_node") return RemoveNode{j.at("node_id").get<std::string>()};
    if (op == "add_edge") {
      AddEdge a{j.at("src").get<std::string>(), j.at("dst").get<std::string>()};
      if (j.contains("weight")) a.weight = j.at("weight").get<double>();
      return a;
    }
    if (op == "remove_edge") return RemoveEdge{j.at("src").get<std::string>(), j.at("dst").get<std::string>()};
    if (op == "set_score") {
      SetScore s;
      s.node_id = j.at("node_id").get<std::string>();
      const auto field = j.at("field").get<std::string>();
      if (field == "e_score") s.field = ScoreField::EScore;
      else if (field == "i_score") s.field = ScoreField::IScore;
      else if (field == "weight") s.field = ScoreField::Weight;
      else throw Error(ErrorCode::BadRequest, "unknown score field '" + field + "'");
      s.value = j.at("value").get<double>();
      if (j.contains("edge_dst")) s.edge_dst = j.at("edge_dst").get<std::string>();
      return s;
    }
    throw Error(ErrorCode::BadRequest, "unknown edit op '" + op + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadRequest, std::string("edit: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedGraph) throw Error(ErrorCode::BadRequest, e.what());
    throw;
  }
}

}  // namespace postural
