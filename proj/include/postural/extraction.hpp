#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "postural/error.hpp"
#include "postural/ingest.hpp"

namespace postural {

enum class EntityLabel {
  VulnerabilityType,
  AffectedProduct,
  RootCause,
  Impact,
  AttackerType,
  AttackVector,
};

inline constexpr std::array<EntityLabel, 6> kAllEntityLabels = {
    EntityLabel::VulnerabilityType, EntityLabel::AffectedProduct, EntityLabel::RootCause,
    EntityLabel::Impact,            EntityLabel::AttackerType,    EntityLabel::AttackVector};

std::string_view to_string(EntityLabel label) noexcept;
std::optional<EntityLabel> entity_label_from_string(std::string_view s) noexcept;

struct EntitySpan {
  EntityLabel label;
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive

  bool operator==(const EntitySpan&) const = default;
};

enum class Port { Preconditions, Postconditions, Inputs, Outputs };

/// Fixed label -> port routing.
Port port_for(EntityLabel label) noexcept;

struct NodeAttributes {
  std::vector<std::string> preconditions;
  std::vector<std::string> postconditions;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  /// Ports that were filled from fallbacks rather than extracted spans.
  std::vector<Port> fallback_ports;

  bool used_fallback() const noexcept { return !fallback_ports.empty(); }
  std::vector<std::string>& port(Port p);
  const std::vector<std::string>& port(Port p) const;

  bool operator==(const NodeAttributes&) const = default;
};

/// Phrase lists driving the template extractor. Defaults ship in code and as
/// data files under data/lexicons; both are kept identical by a test.
struct Lexicons {
  std::vector<std::string> attacker_types;
  std::vector<std::string> impacts;
  std::vector<std::string> vulnerability_types;

  static const Lexicons& defaults();
};

/// One phrase per line, `#` starts a comment, blank lines ignored.
std::vector<std::string> parse_lexicon(std::string_view document);

std::vector<EntitySpan> extract_entities(std::string_view description,
                                         const Lexicons& lexicons = Lexicons::defaults());

struct AnnotationRejection {
  std::string cve_id;
  ErrorCode code;
  std::string message;
};

struct AnnotationImport {
  std::map<std::string, std::vector<EntitySpan>> spans;
  std::vector<AnnotationRejection> rejected;
};

/// Parses an `annotations-v1` document. Structural problems with the whole
/// document throw MalformedAnnotations; problems confined to one entry reject
/// that entry only.
AnnotationImport import_annotations(std::string_view document);

std::string annotation_description_hash(std::string_view description);

NodeAttributes assemble_attributes(const CveRecord& record, const std::vector<EntitySpan>& spans);

}  // namespace postural
