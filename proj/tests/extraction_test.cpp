#include "doctest.h"
#include "postural/extraction.hpp"
#include "postural/text.hpp"
#include "support.hpp"

using namespace postural;
using namespace postural::testing;

namespace {

const std::string kLibSass =
    "There is a heap-based buffer over-read in lexer.hpp of LibSass 3.4.5. A crafted input will lead "
    "to a remote denial of service attack.";
const std::string kEcCube =
    "Improper restriction of rendered UI layers or frames vulnerability in EC-CUBE 3.0.0 to 3.0.18 "
    "allows remote attackers to conduct clickjacking attacks via unspecified vectors.";

std::vector<std::string> texts(const std::vector<EntitySpan>& spans, EntityLabel label) {
  std::vector<std::string> out;
  for (const auto& s : spans) {
    if (s.label == label) out.push_back(s.text);
  }
  return out;
}

std::string annotation_doc(const std::string& description, const std::string& spans) {
  return R"({"schema":"annotations-v1","entries":[{"cve_id":"CVE-2017-11341","description":)" +
         nlohmann::json(description).dump() + R"(,"spans":)" + spans + "}]}";
}

}  // namespace

TEST_CASE("CVE-2017-11341 has a weakness and an impact but no attacker type") {
  const auto spans = extract_entities(kLibSass);
  CHECK(texts(spans, EntityLabel::VulnerabilityType) == std::vector<std::string>{"heap-based buffer over-read"});
  CHECK(texts(spans, EntityLabel::Impact) == std::vector<std::string>{"denial of service"});
  CHECK(texts(spans, EntityLabel::AttackerType).empty());
  for (const auto& s : spans) CHECK(kLibSass.substr(s.start, s.end - s.start) == s.text);
}

TEST_CASE("CVE-2020-5679 names the EC-CUBE product and the UI layer weakness") {
  const auto spans = extract_entities(kEcCube);
  const auto products = texts(spans, EntityLabel::AffectedProduct);
  REQUIRE(products.size() == 1);
  CHECK(products[0].find("EC-CUBE 3.0.0 to 3.0.18") != std::string::npos);
  const auto types = texts(spans, EntityLabel::VulnerabilityType);
  REQUIRE(types.size() == 1);
  CHECK(text::to_lower(types[0]).starts_with("improper restriction of rendered ui layers"));
  CHECK(texts(spans, EntityLabel::AttackerType) == std::vector<std::string>{"remote attackers"});
}

TEST_CASE("text without any rule hit yields no spans") { CHECK(extract_entities("foo bar baz").empty()); }

TEST_CASE("extraction is deterministic and spans never overlap") {
  const std::string d =
      "A use-after-free in the Foo Parser 2.1 before 2.1.4 allows remote attackers to execute arbitrary "
      "code due to a missing reference count via a crafted document.";
  const auto a = extract_entities(d);
  CHECK(a == extract_entities(d));
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1].end <= a[i].start);
  CHECK(texts(a, EntityLabel::RootCause) == std::vector<std::string>{"a missing reference count"});
  CHECK(texts(a, EntityLabel::AttackVector) == std::vector<std::string>{"a crafted document"});
}

TEST_CASE("a due-to clause is a root cause even when it starts with improper") {
  const auto spans = extract_entities("Foo 1.2 allows local users to gain privileges due to improper validation of input.");
  CHECK(texts(spans, EntityLabel::RootCause) == std::vector<std::string>{"improper validation of input"});
  CHECK(texts(spans, EntityLabel::VulnerabilityType).empty());
}

TEST_CASE("custom lexicons drive the extractor") {
  Lexicons lex;
  lex.impacts = {"melt the core"};
  const auto spans = extract_entities("this bug can melt the core", lex);
  CHECK(texts(spans, EntityLabel::Impact) == std::vector<std::string>{"melt the core"});
  CHECK(parse_lexicon("# comment\nMelt The Core\n\nmelt the core  # again\n") ==
        std::vector<std::string>{"melt the core"});
}

TEST_CASE("annotation import") {
  SUBCASE("one valid span") {
    const auto imp = import_annotations(annotation_doc(kLibSass, R"([["Impact", 108, 125]])"));
    REQUIRE(imp.spans.size() == 1);
    CHECK(imp.rejected.empty());
    const auto& s = imp.spans.at("CVE-2017-11341");
    REQUIRE(s.size() == 1);
    CHECK(s[0].text == "denial of service");
    CHECK(s[0].label == EntityLabel::Impact);
  }
  SUBCASE("span past the end of the description") {
    const auto imp = import_annotations(annotation_doc(kLibSass, R"([["Impact", 108, 999]])"));
    CHECK(imp.spans.empty());
    REQUIRE(imp.rejected.size() == 1);
    CHECK(imp.rejected[0].code == ErrorCode::SpanOutOfBounds);
  }
  SUBCASE("overlapping spans") {
    const auto imp = import_annotations(annotation_doc(kLibSass, R"([["Impact", 108, 125], ["Impact", 110, 120]])"));
    CHECK(imp.spans.empty());
    REQUIRE(imp.rejected.size() == 1);
    CHECK(imp.rejected[0].code == ErrorCode::MalformedAnnotations);
  }
  SUBCASE("unknown label") {
    const auto imp = import_annotations(annotation_doc(kLibSass, R"([["Mood", 0, 5]])"));
    REQUIRE(imp.rejected.size() == 1);
    CHECK(imp.rejected[0].code == ErrorCode::MalformedAnnotations);
  }
  SUBCASE("stale description hash") {
    auto doc = nlohmann::json::parse(annotation_doc(kLibSass, R"([["Impact", 108, 125]])"));
    doc["entries"][0]["description_hash"] = annotation_description_hash("other text");
    CHECK(import_annotations(doc.dump()).rejected.size() == 1);
    doc["entries"][0]["description_hash"] = annotation_description_hash(kLibSass);
    CHECK(import_annotations(doc.dump()).spans.size() == 1);
  }
  SUBCASE("whole-document problems throw") {
    CHECK(error_code_of([] { import_annotations("[]"); }) == ErrorCode::MalformedAnnotations);
    CHECK(error_code_of([] { import_annotations("{"); }) == ErrorCode::MalformedAnnotations);
  }
  SUBCASE("fixture file") {
    const auto imp = import_annotations(io::read_file(fixture("annotations/sample.json")));
    CHECK(imp.rejected.empty());
    CHECK(imp.spans.size() == 2);
  }
}

TEST_CASE("attributes follow the fixed label to port mapping") {
  CveRecord rec;
  rec.id = "CVE-2020-5679";
  rec.description = kEcCube;
  const std::vector<EntitySpan> spans = {
      {EntityLabel::AffectedProduct, "ec-cube 3.0.0 to 3.0.18", 70, 93},
      {EntityLabel::VulnerabilityType, "improper restriction of rendered ui layers", 0, 42}};
  const auto a = assemble_attributes(rec, spans);
  CHECK(a.preconditions == std::vector<std::string>{"ec-cube 3.0.0 to 3.0.18"});
  CHECK(a.postconditions == std::vector<std::string>{"improper restriction of rendered ui layers"});
  CHECK(a.fallback_ports == std::vector<Port>{Port::Inputs, Port::Outputs});
}

TEST_CASE("missing spans fall back to CPE product and CWE name") {
  CveRecord rec;
  rec.id = "CVE-2021-90001";
  rec.description = "foo bar baz";
  rec.products.push_back({"tp-link", "archer", "1.0"});
  rec.cwe_ids = {79};
  const auto a = assemble_attributes(rec, {});
  CHECK(a.preconditions == std::vector<std::string>{"archer"});
  CHECK(a.postconditions == std::vector<std::string>{"improper neutralization of input during web page generation"});
  CHECK(a.used_fallback());
  CHECK(a.fallback_ports.size() == 4);
}

TEST_CASE("attacker type precedes root cause in the inputs port") {
  CveRecord rec;
  rec.description = "x";
  const std::vector<EntitySpan> spans = {{EntityLabel::RootCause, "a missing check", 30, 45},
                                         {EntityLabel::AttackerType, "remote attackers", 0, 16}};
  CHECK(assemble_attributes(rec, spans).inputs == std::vector<std::string>{"remote attackers", "a missing check"});
}

TEST_CASE("port routing") {
  CHECK(port_for(EntityLabel::AffectedProduct) == Port::Preconditions);
  CHECK(port_for(EntityLabel::VulnerabilityType) == Port::Postconditions);
  CHECK(port_for(EntityLabel::AttackerType) == Port::Inputs);
  CHECK(port_for(EntityLabel::RootCause) == Port::Inputs);
  CHECK(port_for(EntityLabel::Impact) == Port::Outputs);
  CHECK(port_for(EntityLabel::AttackVector) == Port::Outputs);
  for (auto l : kAllEntityLabels) CHECK(entity_label_from_string(to_string(l)) == l);
}
