#include "postural/pipeline.hpp"

#include <algorithm>
#include <set>

#include "postural/error.hpp"

namespace postural {

namespace {

bool spans_fit(const std::vector<EntitySpan>& spans, const std::string& description) {
  return std::all_of(spans.begin(), spans.end(), [&](const EntitySpan& s) {
    return s.end <= description.size() && description.compare(s.start, s.end - s.start, s.text) == 0;
  });
}

}  // namespace

std::vector<CveInput> select_cves(const std::vector<CveRecord>& records, const Topology& topology,
                                  const std::optional<AnnotationImport>& annotations,
                                  std::vector<std::string>* warnings) {
  std::map<std::string, const CveRecord*> by_id;
  for (const auto& r : records) by_id.try_emplace(r.id, &r);

  std::map<std::string, double> criticality;
  const auto matches = match_inventory(records, topology);
  for (const auto& item : topology.items) {
    for (const auto& cve : matches.at(item.device_id)) {
      auto [it, fresh] = criticality.try_emplace(cve, item.criticality);
      if (!fresh) it->second = std::max(it->second, item.criticality);
    }
  }
  if (criticality.empty()) throw Error(ErrorCode::EmptyInput, "no CVE record matches the topology");

  std::vector<CveInput> out;
  for (const auto& [id, crit] : criticality) {
    const auto& record = *by_id.at(id);
    std::vector<EntitySpan> spans;
    bool annotated = false;
    if (annotations) {
      if (auto it = annotations->spans.find(id); it != annotations->spans.end()) {
        if (spans_fit(it->second, record.description)) {
          spans = it->second;
          annotated = true;
        } else if (warnings) {
          warnings->push_back(id + ": annotations do not fit the feed description, using the extractor");
        }
      }
    }
    if (!annotated) spans = extract_entities(record.description);
    out.push_back({record, assemble_attributes(record, spans), crit});
  }
  return out;
}

PipelineResult run_pipeline(const PipelineInputs& inputs) {
  if (!inputs.model) throw Error(ErrorCode::BadRequest, "an embedding model is required");
  PipelineResult result;
  const auto cves = select_cves(inputs.records, inputs.topology, inputs.annotations, &result.warnings);
  result.matched_cves = cves.size();

  BuildOptions build = inputs.build;
  build.parallel = inputs.parallel;
  result.graph = build_graph(cves, *inputs.model, build);
  const AnalyzeOptions options{inputs.parallel};
  result.analytics = analyze(result.graph, ScoreFunctions::defaults(), inputs.constants, options);

  for (Layer layer : kAllLayers) {
    if (inputs.layer && *inputs.layer != layer) continue;
    LayerResult lr;
    lr.graph = partition(result.graph, layer);
    try {
      lr.analytics = analyze(lr.graph, ScoreFunctions::defaults(), inputs.constants, options);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyGraph) throw;
    }
    result.layers.emplace(layer, std::move(lr));
  }
  return result;
}

}  // namespace postural
