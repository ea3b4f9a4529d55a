#include "postural/extraction.hpp"

#include <cctype>
#include <algorithm>
#include <regex>
#include <set>

#include "json.hpp"
#include "postural/cwe_catalog.hpp"
#include "postural/error.hpp"
#include "postural/text.hpp"

namespace postural {

using nlohmann::json;

std::string_view to_string(EntityLabel label) noexcept {
  switch (label) {
    case EntityLabel::VulnerabilityType: return "VulnerabilityType";
    case EntityLabel::AffectedProduct: return "AffectedProduct";
    case EntityLabel::RootCause: return "RootCause";
    case EntityLabel::Impact: return "Impact";
    case EntityLabel::AttackerType: return "AttackerType";
    case EntityLabel::AttackVector: return "AttackVector";
  }
  return "?";
}

std::optional<EntityLabel> entity_label_from_string(std::string_view s) noexcept {
  for (auto l : kAllEntityLabels) {
    if (to_string(l) == s) return l;
  }
  return std::nullopt;
}

Port port_for(EntityLabel label) noexcept {
  switch (label) {
    case EntityLabel::AffectedProduct: return Port::Preconditions;
    case EntityLabel::VulnerabilityType: return Port::Postconditions;
    case EntityLabel::AttackerType:
    case EntityLabel::RootCause: return Port::Inputs;
    case EntityLabel::Impact:
    case EntityLabel::AttackVector: return Port::Outputs;
  }
  return Port::Outputs;
}

std::vector<std::string>& NodeAttributes::port(Port p) {
  switch (p) {
    case Port::Preconditions: return preconditions;
    case Port::Postconditions: return postconditions;
    case Port::Inputs: return inputs;
    case Port::Outputs: return outputs;
  }
  return outputs;
}

const std::vector<std::string>& NodeAttributes::port(Port p) const {
  return const_cast<NodeAttributes*>(this)->port(p);
}

// ---- lexicons ----------------------------------------------------------------

const Lexicons& Lexicons::defaults() {
  static const Lexicons lex{
      {"remote attacker", "remote attackers", "remote authenticated user",
       "remote authenticated users", "local attacker", "local attackers", "local user",
       "local users", "authenticated user", "authenticated users", "physically proximate attacker",
       "physically proximate attackers", "unauthenticated attacker", "unauthenticated attackers",
       "unauthenticated remote attacker", "context-dependent attackers", "man-in-the-middle attackers"},
      {"denial of service", "execute arbitrary code", "arbitrary code execution",
       "execute arbitrary commands", "information disclosure", "obtain sensitive information",
       "privilege escalation", "gain privileges", "escalate privileges", "system crash",
       "application crash", "bypass authentication", "inject arbitrary web script",
       "clickjacking attacks", "memory corruption"},
      {"buffer overflow", "heap-based buffer overflow", "stack-based buffer overflow",
       "heap-based buffer over-read", "buffer over-read", "out-of-bounds read",
       "out-of-bounds write", "cross-site scripting", "xss", "cross-site request forgery", "csrf",
       "sql injection", "command injection", "os command injection", "code injection",
       "use after free", "use-after-free", "double free", "null pointer dereference",
       "integer overflow", "integer underflow", "directory traversal", "path traversal",
       "race condition", "format string", "open redirect", "server-side request forgery",
       "xml external entity", "type confusion", "uncontrolled recursion", "infinite loop"},
  };
  return lex;
}

std::vector<std::string> parse_lexicon(std::string_view document) {
  std::vector<std::string> out;
  for (const auto& raw : text::split(document, '\n')) {
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto phrase = text::to_lower(text::trim(line));
    if (!phrase.empty() && std::find(out.begin(), out.end(), phrase) == out.end()) {
      out.push_back(std::move(phrase));
    }
  }
  return out;
}

// ---- extraction ----------------------------------------------------------------

namespace {

class SpanSet {
public:
  explicit SpanSet(std::string_view description) : desc_(description) {}

  bool overlaps(std::size_t start, std::size_t end) const {
    return std::any_of(spans_.begin(), spans_.end(),
                       [&](const EntitySpan& s) { return start < s.end && s.start < end; });
  }

  bool add(EntityLabel label, std::size_t start, std::size_t end) {
    while (start < end && std::isspace(static_cast<unsigned char>(desc_[start]))) ++start;
    while (end > start && std::isspace(static_cast<unsigned char>(desc_[end - 1]))) --end;
    if (start >= end || overlaps(start, end)) return false;
    spans_.push_back({label, std::string(desc_.substr(start, end - start)), start, end});
    return true;
  }

  std::vector<EntitySpan> take() {
    std::sort(spans_.begin(), spans_.end(),
              [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
    return std::move(spans_);
  }

private:
  std::string_view desc_;
  std::vector<EntitySpan> spans_;
};

void lexicon_pass(SpanSet& spans, std::string_view lower, EntityLabel label,
                  std::vector<std::string> phrases) {
  // Longest phrases first so "heap-based buffer overflow" wins over "buffer overflow".
  std::stable_sort(phrases.begin(), phrases.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  for (const auto& p : phrases) {
    for (auto pos : text::find_whole_word(lower, p)) spans.add(label, pos, pos + p.size());
  }
}

void regex_pass(SpanSet& spans, const std::string& subject, EntityLabel label,
                const std::regex& re, int group) {
  for (auto it = std::sregex_iterator(subject.begin(), subject.end(), re);
       it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const auto start = static_cast<std::size_t>(m.position(group));
    spans.add(label, start, start + static_cast<std::size_t>(m.length(group)));
  }
}

}  // namespace

std::vector<EntitySpan> extract_entities(std::string_view description, const Lexicons& lexicons) {
  static const std::regex kReadMemory(R"(\bread\b(?:\s+[a-z0-9\-]+){0,4}?\s+memory\b)");
  static const std::regex kImproper(
      R"(\bimproper\s+[a-z]+(?:\s+[a-z\-]+)*?(?=\s+vulnerabilit|\s+in\s|\s+allows\s|\s+that\s|\s+which\s|[,.;:()]|$))");
  static const std::regex kInBefore(
      R"(\bin\s+([A-Za-z0-9][\w\-\.\+]*(?:\s+[A-Za-z0-9][\w\-\.\+]*){0,5}?\s+(?:before|through|prior to)\s+v?\d[\w\-]*(?:\.\d[\w\-]*)*))");
  static const std::regex kProductVersion(
      R"(\b[A-Z][\w\-\+]*(?:\s+[A-Z][\w\-\+]*){0,4}\s+v?\d+(?:\.\d+)+[a-z0-9\-]*(?:\s+(?:to|through)\s+v?\d+(?:\.\d+)+[a-z0-9\-]*)?)");
  static const std::regex kVia(R"(\bvia\s+([^.;,]+))");
  static const std::regex kRootCause(
      R"(\b(?:due to|because of|because)\s+([^.;,]+?)(?=\s+via\s|[.;,]|$))");

  const std::string original(description);
  const std::string lower = text::to_lower(description);
  SpanSet spans(description);

  lexicon_pass(spans, lower, EntityLabel::AttackerType, lexicons.attacker_types);

  lexicon_pass(spans, lower, EntityLabel::Impact, lexicons.impacts);
  regex_pass(spans, lower, EntityLabel::Impact, kReadMemory, 0);

  lexicon_pass(spans, lower, EntityLabel::VulnerabilityType, lexicons.vulnerability_types);
  // A "due to improper ..." clause is the cause, not the weakness itself.
  regex_pass(spans, lower, EntityLabel::RootCause, kRootCause, 1);
  regex_pass(spans, lower, EntityLabel::VulnerabilityType, kImproper, 0);

  // Affected product: the leading product-with-version phrase only.
  {
    struct Candidate {
      std::size_t start, end;
    };
    std::vector<Candidate> candidates;
    std::smatch m;
    if (std::regex_search(original, m, kInBefore)) {
      candidates.push_back({static_cast<std::size_t>(m.position(1)),
                            static_cast<std::size_t>(m.position(1) + m.length(1))});
    }
    for (auto it = std::sregex_iterator(original.begin(), original.end(), kProductVersion);
         it != std::sregex_iterator(); ++it) {
      candidates.push_back({static_cast<std::size_t>(it->position(0)),
                            static_cast<std::size_t>(it->position(0) + it->length(0))});
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.start < b.start; });
    for (const auto& c : candidates) {
      if (spans.add(EntityLabel::AffectedProduct, c.start, c.end)) break;
    }
  }

  regex_pass(spans, lower, EntityLabel::AttackVector, kVia, 1);
  return spans.take();
}

// ---- annotations ----------------------------------------------------------------

std::string annotation_description_hash(std::string_view description) {
  return text::hex64(text::fnv1a64(description));
}

AnnotationImport import_annotations(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedAnnotations,
                "syntax error at byte offset " + std::to_string(e.byte));
  }
  if (!doc.is_object() || doc.value("schema", std::string{}) != "annotations-v1" ||
      !doc.contains("entries") || !doc["entries"].is_array()) {
    throw Error(ErrorCode::MalformedAnnotations, "expected annotations-v1 document with entries");
  }

  AnnotationImport out;
  for (const auto& entry : doc["entries"]) {
    const std::string id = entry.is_object() ? entry.value("cve_id", std::string{}) : std::string{};
    auto reject = [&](ErrorCode code, const std::string& msg) {
      out.rejected.push_back({id, code, msg});
    };
    if (id.empty() || !entry.contains("description") || !entry["description"].is_string() ||
        !entry.contains("spans") || !entry["spans"].is_array()) {
      reject(ErrorCode::MalformedAnnotations, "entry lacks cve_id, description or spans");
      continue;
    }
    const auto description = entry["description"].get<std::string>();
    if (entry.contains("description_hash") &&
        entry["description_hash"] != annotation_description_hash(description)) {
      reject(ErrorCode::MalformedAnnotations, "description hash mismatch");
      continue;
    }

    std::vector<EntitySpan> spans;
    bool ok = true;
    for (const auto& t : entry["spans"]) {
      if (!t.is_array() || t.size() != 3 || !t[0].is_string() || !t[1].is_number_unsigned() ||
          !t[2].is_number_unsigned()) {
        reject(ErrorCode::MalformedAnnotations, "span must be [label, start, end]");
        ok = false;
        break;
      }
      auto label = entity_label_from_string(t[0].get<std::string>());
      if (!label) {
        reject(ErrorCode::MalformedAnnotations, "unknown label " + t[0].get<std::string>());
        ok = false;
        break;
      }
      const auto start = t[1].get<std::size_t>();
      const auto end = t[2].get<std::size_t>();
      if (start >= end || end > description.size()) {
        reject(ErrorCode::SpanOutOfBounds,
               "span [" + std::to_string(start) + "," + std::to_string(end) +
                   ") outside description of length " + std::to_string(description.size()));
        ok = false;
        break;
      }
      spans.push_back({*label, description.substr(start, end - start), start, end});
    }
    if (!ok) continue;
    std::sort(spans.begin(), spans.end(),
              [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
    for (std::size_t i = 1; i < spans.size(); ++i) {
      if (spans[i].start < spans[i - 1].end) {
        reject(ErrorCode::MalformedAnnotations, "overlapping spans");
        ok = false;
        break;
      }
    }
    if (ok) out.spans[id] = std::move(spans);
  }
  return out;
}

// ---- attributes ----------------------------------------------------------------

namespace {

void push_unique(std::vector<std::string>& port, std::string phrase) {
  if (phrase.empty()) return;
  if (std::find(port.begin(), port.end(), phrase) == port.end()) port.push_back(std::move(phrase));
}

// Label order within each port.
constexpr EntityLabel kFillOrder[] = {EntityLabel::AffectedProduct, EntityLabel::VulnerabilityType,
                                      EntityLabel::AttackerType,    EntityLabel::RootCause,
                                      EntityLabel::Impact,          EntityLabel::AttackVector};

}  // namespace

NodeAttributes assemble_attributes(const CveRecord& record, const std::vector<EntitySpan>& spans) {
  NodeAttributes attrs;
  for (auto label : kFillOrder) {
    for (const auto& s : spans) {
      if (s.label == label) push_unique(attrs.port(port_for(label)), text::normalize_phrase(s.text));
    }
  }

  if (attrs.preconditions.empty()) {
    for (const auto& p : record.products) push_unique(attrs.preconditions, text::normalize_phrase(p.product));
    if (attrs.preconditions.empty()) attrs.preconditions.push_back("vulnerable component");
    attrs.fallback_ports.push_back(Port::Preconditions);
  }
  if (attrs.postconditions.empty()) {
    for (int id : record.cwe_ids) {
      if (auto name = cwe_short_name(id)) push_unique(attrs.postconditions, text::normalize_phrase(*name));
    }
    if (attrs.postconditions.empty()) attrs.postconditions.push_back("vulnerability");
    attrs.fallback_ports.push_back(Port::Postconditions);
  }
  if (attrs.inputs.empty()) {
    attrs.inputs.push_back("attacker");
    attrs.fallback_ports.push_back(Port::Inputs);
  }
  if (attrs.outputs.empty()) {
    attrs.outputs.push_back("compromise");
    attrs.fallback_ports.push_back(Port::Outputs);
  }
  return attrs;
}

}  // namespace postural
