#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "postural/graph.hpp"

namespace postural {

/// eScore() / iScore(). Both receive the whole graph so target-node scores
/// can depend on their neighbours.
struct ScoreFunctions {
  std::function<double(const AttackGraph&, const GraphNode&)> e_score;
  std::function<double(const AttackGraph&, const GraphNode&)> i_score;

  /// Overrides win. Cve: exploitability (missing -> 0) and impact (missing
  /// -> 0) clamped to [0,10], impact then scaled by criticality. Attacker: 0.
  /// Cwe: eScore 0, iScore mean iScore of the CVEs pointing at it.
  static ScoreFunctions defaults();
};

struct Constants {
  double c = 0.1;
  double k = 0.01;
  std::size_t cutoff = 8;
  std::size_t top_n = 3;
};

struct NodeScore {
  double e = 0.0;
  double i = 0.0;
  bool operator==(const NodeScore&) const = default;
};

std::map<std::string, NodeScore> node_scores(const AttackGraph& graph, const ScoreFunctions& fns);

struct EdgeScore {
  std::string src;
  std::string dst;
  double ees = 0.0;
  double eis = 0.0;
  double ers = 0.0;
  double normalized_ees = 0.0;
  double normalized_eis = 0.0;
  double normalized_ers = 0.0;
  bool operator==(const EdgeScore&) const = default;
};

/// Parallel to graph.edges.
struct EdgeScoreSet {
  std::vector<EdgeScore> edges;
  bool operator==(const EdgeScoreSet&) const = default;
};

/// Node ids in topological order; ready nodes are taken in id order.
/// Throws CyclicGraph.
std::vector<std::string> topological_order(const AttackGraph& graph);

/// 10 * x / max over the family, 0 everywhere when the max is 0.
std::vector<double> normalize(const std::vector<double>& family);

EdgeScoreSet compute_edge_scores(const AttackGraph& graph, const ScoreFunctions& fns = ScoreFunctions::defaults(),
                                 const Constants& consts = {});

struct GraphScores {
  double exploit = 0.0;
  double impact = 0.0;
  double risk = 0.0;
};

/// Means of the normalized families. Throws EmptyGraph.
GraphScores graph_scores(const EdgeScoreSet& scores);

struct PathRecord {
  std::vector<std::string> nodes;
  double exploit_sum = 0.0;
  double impact_sum = 0.0;
  double risk_sum = 0.0;
  bool operator==(const PathRecord&) const = default;
};

/// All minimum-weight Attacker -> Cwe paths under
/// weight(edge) = max_exploit - eScore(source); among equal weights only the
/// fewest-hop paths are kept. Sorted by node sequence. Throws NoPath.
std::vector<PathRecord> shortest_attack_paths(const AttackGraph& graph,
                                              const ScoreFunctions& fns = ScoreFunctions::defaults(),
                                              const EdgeScoreSet* scores = nullptr);

/// Sum of max_exploit - eScore(source) over the path edges.
double path_weight(const AttackGraph& graph, const std::vector<std::string>& nodes,
                   const ScoreFunctions& fns = ScoreFunctions::defaults());

enum class PathKey { Risk, Exploit, Impact };

std::optional<PathKey> path_key_from_string(std::string_view s) noexcept;
std::string_view to_string(PathKey k) noexcept;

/// `primary` first, the remaining keys in risk, exploit, impact order.
std::vector<PathKey> sort_order(PathKey primary);

/// Every Attacker -> Cwe path with at most `cutoff` edges (no limit when
/// empty), scored by summed EES/EIS/ERS and sorted descending by `order`,
/// ties by node sequence.
std::vector<PathRecord> enumerate_paths(const AttackGraph& graph, const EdgeScoreSet& scores,
                                        std::optional<std::size_t> cutoff,
                                        const std::vector<PathKey>& order = sort_order(PathKey::Risk),
                                        bool parallel = true);

/// Cve nodes by total degree, descending, ties by id.
std::vector<std::pair<std::string, std::size_t>> key_vulnerabilities(const AttackGraph& graph,
                                                                     std::size_t top_n);

/// Edges a patch set has to touch: CveToCve, and CveToCwe through its Cve end.
std::vector<std::pair<std::string, std::string>> cover_edges(const AttackGraph& graph);

/// Local-ratio cover over cover_edges() with unit weights, edges taken in
/// (src, dst) order, followed by removal of redundant members. Sorted ids.
std::vector<std::string> vertex_cover(const AttackGraph& graph);

struct Timings {
  double score_computation_seconds = 0.0;
  double risk_analysis_seconds = 0.0;
};

struct GraphAnalytics {
  std::string graph_id;
  std::uint64_t version = 1;
  std::optional<Layer> layer;
  Constants constants;
  std::map<std::string, NodeScore> node_scores;
  std::vector<GraphEdge> edges;  // the scored edges, parallel to edge_scores
  EdgeScoreSet edge_scores;
  double exploit_score = 0.0;
  double impact_score = 0.0;
  double risk_score = 0.0;
  std::size_t total_nodes = 0;
  std::size_t path_count = 0;
  std::size_t shortest_path_count = 0;
  std::size_t vertex_cover_size = 0;
  std::vector<PathRecord> shortest_paths;
  std::vector<PathRecord> top_paths;
  std::vector<std::pair<std::string, std::size_t>> key_vulnerabilities;
  std::vector<std::string> vertex_cover;
  Timings timings;
  /// Every enumerated path; kept in memory only, not exported.
  std::vector<PathRecord> all_paths;
};

struct AnalyzeOptions {
  bool parallel = true;
};

/// Runs every analysis. A graph with no Attacker -> Cwe path yields empty
/// shortest paths instead of NoPath.
GraphAnalytics analyze(const AttackGraph& graph, const ScoreFunctions& fns = ScoreFunctions::defaults(),
                       const Constants& consts = {}, const AnalyzeOptions& options = {});

/// `analytics-v1`. Timings are written only when asked for so batch output
/// stays byte-stable.
nlohmann::json analytics_to_json(const GraphAnalytics& a, bool include_timings = false);
GraphAnalytics analytics_from_json(const nlohmann::json& j);
std::string dump_analytics(const GraphAnalytics& a, bool include_timings = false);

struct ChangeImpactReport {
  std::string graph_id;
  std::uint64_t from_version = 0;
  std::uint64_t to_version = 0;
  double exploit_delta = 0.0;
  double impact_delta = 0.0;
  double risk_delta = 0.0;
  std::size_t paths_added = 0;
  std::size_t paths_removed = 0;
  bool key_vulnerabilities_changed = false;
  std::vector<std::pair<std::string, std::size_t>> key_vulnerabilities_before;
  std::vector<std::pair<std::string, std::size_t>> key_vulnerabilities_after;
  bool vertex_cover_changed = false;
  std::vector<std::string> cover_added;
  std::vector<std::string> cover_removed;
};

/// Both analytics must carry all_paths.
ChangeImpactReport change_impact(const GraphAnalytics& before, const GraphAnalytics& after);
nlohmann::json change_impact_to_json(const ChangeImpactReport& r);

/// Human-readable summary used by `analyze` and `report`.
std::string render_report(const GraphAnalytics& a, bool include_timings = true);

}  // namespace postural
