#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "postural/extraction.hpp"
#include "postural/graph.hpp"
#include "postural/ingest.hpp"
#include "postural/risk.hpp"
#include "postural/semantics.hpp"

// ingest -> match -> extract -> build -> partition -> analyze, shared by the
// `analyze` command and POST /v1/analyses so both produce identical documents.

namespace postural {

struct PipelineInputs {
  Topology topology;
  std::vector<CveRecord> records;
  const EmbeddingModel* model = nullptr;
  std::optional<AnnotationImport> annotations;
  BuildOptions build;
  Constants constants;
  /// Restricts the per-layer outputs to one layer.
  std::optional<Layer> layer;
  bool parallel = true;
};

struct LayerResult {
  AttackGraph graph;
  /// Empty when the partition has no edges to score.
  std::optional<GraphAnalytics> analytics;
};

struct PipelineResult {
  AttackGraph graph;
  GraphAnalytics analytics;
  std::map<Layer, LayerResult> layers;
  std::vector<std::string> warnings;
  std::size_t matched_cves = 0;
};

/// CveInputs for every record matched to some device; criticality is the
/// largest criticality among the matching devices. Sorted by CVE id; the
/// first record wins when an id repeats. Throws EmptyInput when nothing
/// matches.
std::vector<CveInput> select_cves(const std::vector<CveRecord>& records, const Topology& topology,
                                  const std::optional<AnnotationImport>& annotations,
                                  std::vector<std::string>* warnings = nullptr);

PipelineResult run_pipeline(const PipelineInputs& inputs);

}  // namespace postural
