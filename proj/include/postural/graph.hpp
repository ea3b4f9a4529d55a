#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "postural/extraction.hpp"
#include "postural/ingest.hpp"
#include "postural/semantics.hpp"

namespace postural {

inline constexpr std::string_view kAttackerId = "ATTACKER";

enum class NodeKind { Attacker, Cve, Cwe };
enum class Layer { Network, SystemHardware, MachineLearning, Crypto };
enum class EdgeKind { AttackerToCve, CveToCve, CveToCwe };

inline constexpr Layer kAllLayers[] = {Layer::Network, Layer::SystemHardware,
                                       Layer::MachineLearning, Layer::Crypto};

std::string_view to_string(NodeKind k) noexcept;
std::string_view to_string(Layer l) noexcept;
std::string_view to_string(EdgeKind k) noexcept;
std::optional<Layer> layer_from_string(std::string_view s) noexcept;
/// Lowercase file-name form: network, system-hardware, machine-learning, crypto.
std::string_view layer_slug(Layer l) noexcept;

std::string cwe_node_id(int cwe);

struct GraphNode {
  std::string id;
  NodeKind kind = NodeKind::Cve;
  std::string description;
  NodeAttributes attributes;  // Cve only
  std::vector<int> cwe_ids;   // Cve only
  std::optional<double> base_score;
  std::optional<double> exploitability;  // CVSS inputs to the default score functions
  std::optional<double> impact;
  double criticality = 1.0;  // max criticality of matched devices
  std::optional<double> e_override;  // user-supplied eScore
  std::optional<double> i_override;  // user-supplied iScore
  std::set<Layer> layers;
  bool unclassified = false;

  bool user_overridden() const noexcept { return e_override || i_override; }
  bool operator==(const GraphNode&) const = default;
};

struct EdgeProvenance {
  std::optional<double> similarity;
  std::optional<double> base_score;
  bool regenerated = false;  // AttackerToCve edge re-created inside a partition
  bool user_added = false;
  bool weight_overridden = false;

  bool operator==(const EdgeProvenance&) const = default;
};

struct GraphEdge {
  std::string src;
  std::string dst;
  EdgeKind kind = EdgeKind::CveToCve;
  double weight = 0.0;
  EdgeProvenance provenance;

  bool operator==(const GraphEdge&) const = default;
};

/// Edge dropped to keep the graph acyclic.
struct RemovedEdge {
  std::string src;
  std::string dst;
  double weight = 0.0;

  bool operator==(const RemovedEdge&) const = default;
};

struct AttackGraph {
  std::string graph_id;
  std::uint64_t version = 1;
  double threshold = 0.8;
  std::optional<Layer> layer;  // set on partitions
  std::map<std::string, GraphNode> nodes;
  std::vector<GraphEdge> edges;  // kept sorted by (src, dst)
  std::vector<RemovedEdge> removed_edges;

  const GraphNode* find(std::string_view id) const;
  const GraphEdge* find_edge(std::string_view src, std::string_view dst) const;
  std::size_t count(NodeKind kind) const;

  bool operator==(const AttackGraph&) const = default;
};

// ---- layer rules -------------------------------------------------------------------

struct LayerRules {
  Layer layer = Layer::Network;
  std::set<std::string> keywords;
  std::set<std::string> protocols;
  std::set<int> cwe_ids;

  bool operator==(const LayerRules&) const = default;
};

/// Network lists are the published keyword / protocol / CWE tables; the
/// other three layers are curated lists maintained with this tool.
const std::vector<LayerRules>& default_layer_rules();

/// `layer-rules-v1` text format:
///   format layer-rules-v1
///   layer Network
///   keyword denial of service
///   protocol tls
///   cwe 79
LayerRules parse_layer_rules(std::string_view document);
std::string dump_layer_rules(const LayerRules& rules);

struct LayerMatch {
  std::set<Layer> layers;
  bool unclassified() const noexcept { return layers.empty(); }
};

LayerMatch classify_layers(const GraphNode& node, std::string_view description,
                           const std::vector<LayerRules>& rules);

// ---- construction -------------------------------------------------------------------

struct CveInput {
  CveRecord record;
  NodeAttributes attributes;
  double criticality = 1.0;
};

struct BuildOptions {
  double threshold = 0.8;
  /// Match postconditions against preconditions only, instead of
  /// (postconditions + outputs) against (preconditions + inputs).
  bool strict_ports = false;
  bool prune_dead_ends = false;
  bool parallel = true;
  std::vector<LayerRules> layer_rules = default_layer_rules();
};

/// Default weight for attacker and CWE edges when the CVE has no base score.
inline constexpr double kMissingBaseWeight = 0.5;

std::vector<std::string> out_port(const NodeAttributes& a, bool strict);
std::vector<std::string> in_port(const NodeAttributes& a, bool strict);

AttackGraph build_graph(const std::vector<CveInput>& cves, const EmbeddingModel& model,
                        const BuildOptions& options = {});

/// Drops CveToCve edges until the graph is acyclic. Each dropped edge is the
/// minimum-weight edge of a cycle (ties: lexicographically smallest
/// (src, dst)); edges in `keep` are only dropped when nothing else breaks a
/// cycle. Dropped edges are appended to graph.removed_edges.
void break_cycles(AttackGraph& graph, const std::set<std::pair<std::string, std::string>>& keep = {});

bool is_acyclic(const AttackGraph& graph);

AttackGraph partition(const AttackGraph& graph, Layer layer);

// ---- edits ---------------------------------------------------------------------------

enum class ScoreField { EScore, IScore, Weight };

struct AddCveNode {
  CveRecord record;
  NodeAttributes attributes;
  double criticality = 1.0;
  /// Filled by resolve_edit so replay does not need the embedding model.
  std::optional<std::vector<GraphEdge>> resolved_edges;
  std::optional<std::set<Layer>> resolved_layers;
  bool operator==(const AddCveNode&) const = default;
};
struct RemoveNode {
  std::string node_id;
  bool operator==(const RemoveNode&) const = default;
};
struct AddEdge {
  std::string src;
  std::string dst;
  double weight = 1.0;
  bool operator==(const AddEdge&) const = default;
};
struct RemoveEdge {
  std::string src;
  std::string dst;
  bool operator==(const RemoveEdge&) const = default;
};
struct SetScore {
  std::string node_id;
  ScoreField field = ScoreField::EScore;
  double value = 0.0;
  std::optional<std::string> edge_dst;  // required for Weight
  bool operator==(const SetScore&) const = default;
};

using GraphEdit = std::variant<AddCveNode, RemoveNode, AddEdge, RemoveEdge, SetScore>;

struct EditContext {
  const EmbeddingModel* model = nullptr;
  BuildOptions options;
};

/// Derives the edges and layers of an AddCveNode against the current graph;
/// other edits are returned unchanged.
GraphEdit resolve_edit(const AttackGraph& graph, const GraphEdit& edit, const EditContext& ctx);

/// Returns a new graph with version + 1.
AttackGraph apply_edit(const AttackGraph& graph, const GraphEdit& edit, const EditContext& ctx = {});

// ---- documents ---------------------------------------------------------------------

nlohmann::json graph_to_json(const AttackGraph& graph);
AttackGraph graph_from_json(const nlohmann::json& j);
/// Canonical `attack-graph-v1` text (2-space indent, trailing newline).
std::string dump_graph(const AttackGraph& graph);
AttackGraph load_graph(std::string_view document);

nlohmann::json attributes_to_json(const NodeAttributes& a);
NodeAttributes attributes_from_json(const nlohmann::json& j);
nlohmann::json edit_to_json(const GraphEdit& edit);
GraphEdit edit_from_json(const nlohmann::json& j);

}  // namespace postural
