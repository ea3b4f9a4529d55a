#include "postural/ingest.hpp"

#include <algorithm>
#include <regex>
#include <set>

#include "postural/error.hpp"
#include "postural/io.hpp"
#include "postural/text.hpp"

namespace postural {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what, std::size_t offset = 0) {
  throw Error(ErrorCode::MalformedFeed, what + " (byte offset " + std::to_string(offset) + ")");
}

json parse_json_document(std::string_view doc, ErrorCode code) {
  try {
    return json::parse(doc);
  } catch (const json::parse_error& e) {
    throw Error(code, std::string("syntax error at byte offset ") + std::to_string(e.byte) +
                          ": " + e.what());
  }
}

bool is_placeholder_description(std::string_view d) {
  return d.starts_with("** REJECT **") || d.starts_with("** RESERVED **") ||
         d.starts_with("** REJECTED **");
}

std::optional<double> score_field(const json& obj, const char* key, const std::string& id) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  if (!obj[key].is_number()) malformed(id + ": non-numeric " + key);
  const double v = obj[key].get<double>();
  if (v < 0.0 || v > 10.0) malformed(id + ": " + key + " outside [0,10]");
  return v;
}

std::optional<int> parse_cwe(std::string_view value) {
  if (!value.starts_with("CWE-")) return std::nullopt;  // NVD-CWE-Other / NVD-CWE-noinfo
  int n = 0;
  const auto digits = value.substr(4);
  if (digits.empty()) return std::nullopt;
  for (char c : digits) {
    if (c < '0' || c > '9') return std::nullopt;
    n = n * 10 + (c - '0');
  }
  return n;
}

// Splits a CPE 2.3 formatted string, honouring backslash escapes.
std::vector<std::string> split_cpe(std::string_view cpe) {
  std::vector<std::string> fields;
  std::string cur;
  for (std::size_t i = 0; i < cpe.size(); ++i) {
    if (cpe[i] == '\\' && i + 1 < cpe.size()) {
      cur.push_back(cpe[++i]);
    } else if (cpe[i] == ':') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(cpe[i]);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

void add_cpe_match(const json& m, const std::string& uri_key, CveRecord& rec,
                   std::vector<std::string>& warnings) {
  if (m.contains("vulnerable") && m["vulnerable"].is_boolean() && !m["vulnerable"].get<bool>()) {
    return;
  }
  if (!m.contains(uri_key) || !m[uri_key].is_string()) return;
  const auto fields = split_cpe(m[uri_key].get<std::string>());
  if (fields.size() < 6 || fields[0] != "cpe") return;
  ProductId p{fields[3], fields[4], fields[5]};
  static constexpr const char* kRangeKeys[] = {"versionStartIncluding", "versionStartExcluding",
                                               "versionEndIncluding", "versionEndExcluding"};
  for (const char* k : kRangeKeys) {
    if (m.contains(k)) {
      warnings.push_back(rec.id + ": range predicate " + k + " on " + p.product +
                         " treated as wildcard");
      p.version = "*";
      break;
    }
  }
  if (p.version.empty()) p.version = "*";
  if (std::find(rec.products.begin(), rec.products.end(), p) == rec.products.end()) {
    rec.products.push_back(std::move(p));
  }
}

// JSON 1.1 configuration nodes nest via "children"; API 2.0 does not nest but
// shares the same recursion harmlessly.
void walk_config_nodes(const json& nodes, const std::string& match_key, const std::string& uri_key,
                       CveRecord& rec, std::vector<std::string>& warnings) {
  if (!nodes.is_array()) return;
  for (const auto& node : nodes) {
    if (node.contains(match_key) && node[match_key].is_array()) {
      for (const auto& m : node[match_key]) add_cpe_match(m, uri_key, rec, warnings);
    }
    if (node.contains("children")) walk_config_nodes(node["children"], match_key, uri_key, rec, warnings);
  }
}

std::string english_text(const json& arr) {
  if (!arr.is_array()) return {};
  std::string fallback;
  for (const auto& d : arr) {
    if (!d.contains("value") || !d["value"].is_string()) continue;
    const auto lang = d.value("lang", std::string{});
    if (lang == "en") return d["value"].get<std::string>();
    if (fallback.empty()) fallback = d["value"].get<std::string>();
  }
  return fallback;
}

std::string date_prefix(const json& j, const char* key, const std::string& id) {
  if (!j.contains(key) || !j[key].is_string()) return {};
  const auto s = j[key].get<std::string>();
  static const std::regex kDate(R"(^\d{4}-\d{2}-\d{2})");
  if (!std::regex_search(s, kDate)) malformed(id + ": bad date '" + s + "'");
  return s.substr(0, 10);
}

void finish_record(CveRecord& rec, std::set<int>& cwes) {
  rec.cwe_ids.assign(cwes.begin(), cwes.end());
  rec.description = text::trim(rec.description);
}

FeedParseResult parse_json11(const json& doc) {
  FeedParseResult out;
  if (!doc.is_object() || !doc.contains("CVE_Items") || !doc["CVE_Items"].is_array()) {
    malformed("missing CVE_Items array");
  }
  for (const auto& item : doc["CVE_Items"]) {
    CveRecord rec;
    try {
      rec.id = item.at("cve").at("CVE_data_meta").at("ID").get<std::string>();
    } catch (const json::exception&) {
      malformed("entry without cve.CVE_data_meta.ID");
    }
    if (!is_valid_cve_id(rec.id)) malformed("invalid CVE id '" + rec.id + "'");
    const auto& cve = item["cve"];
    if (cve.contains("description")) rec.description = english_text(cve["description"].value("description_data", json::array()));
    if (is_placeholder_description(rec.description) || text::trim(rec.description).empty()) {
      ++out.dropped;
      continue;
    }
    std::set<int> cwes;
    if (cve.contains("problemtype")) {
      for (const auto& pt : cve["problemtype"].value("problemtype_data", json::array())) {
        for (const auto& d : pt.value("description", json::array())) {
          if (auto n = parse_cwe(d.value("value", std::string{}))) cwes.insert(*n);
        }
      }
    }
    if (item.contains("impact") && item["impact"].contains("baseMetricV3")) {
      const auto& m = item["impact"]["baseMetricV3"];
      if (m.contains("cvssV3")) rec.base_score = score_field(m["cvssV3"], "baseScore", rec.id);
      rec.exploitability_score = score_field(m, "exploitabilityScore", rec.id);
      rec.impact_score = score_field(m, "impactScore", rec.id);
    }
    if (item.contains("configurations")) {
      walk_config_nodes(item["configurations"].value("nodes", json::array()), "cpe_match",
                        "cpe23Uri", rec, out.warnings);
    }
    rec.published = date_prefix(item, "publishedDate", rec.id);
    finish_record(rec, cwes);
    out.records.push_back(std::move(rec));
  }
  return out;
}

FeedParseResult parse_api20(const json& doc) {
  FeedParseResult out;
  if (!doc.is_object() || !doc.contains("vulnerabilities") || !doc["vulnerabilities"].is_array()) {
    malformed("missing vulnerabilities array");
  }
  for (const auto& entry : doc["vulnerabilities"]) {
    if (!entry.contains("cve") || !entry["cve"].is_object()) malformed("entry without cve object");
    const auto& cve = entry["cve"];
    CveRecord rec;
    if (!cve.contains("id") || !cve["id"].is_string()) malformed("entry without cve.id");
    rec.id = cve["id"].get<std::string>();
    if (!is_valid_cve_id(rec.id)) malformed("invalid CVE id '" + rec.id + "'");
    rec.description = english_text(cve.value("descriptions", json::array()));
    const auto status = cve.value("vulnStatus", std::string{});
    if (status == "Rejected" || is_placeholder_description(rec.description) ||
        text::trim(rec.description).empty()) {
      ++out.dropped;
      continue;
    }
    std::set<int> cwes;
    for (const auto& w : cve.value("weaknesses", json::array())) {
      for (const auto& d : w.value("description", json::array())) {
        if (auto n = parse_cwe(d.value("value", std::string{}))) cwes.insert(*n);
      }
    }
    if (cve.contains("metrics")) {
      const auto& metrics = cve["metrics"];
      for (const char* key : {"cvssMetricV31", "cvssMetricV30"}) {
        if (!metrics.contains(key) || !metrics[key].is_array() || metrics[key].empty()) continue;
        // Prefer the NVD "Primary" assessment when several sources score the CVE.
        const json* chosen = &metrics[key].front();
        for (const auto& m : metrics[key]) {
          if (m.value("type", std::string{}) == "Primary") {
            chosen = &m;
            break;
          }
        }
        if (chosen->contains("cvssData")) rec.base_score = score_field((*chosen)["cvssData"], "baseScore", rec.id);
        rec.exploitability_score = score_field(*chosen, "exploitabilityScore", rec.id);
        rec.impact_score = score_field(*chosen, "impactScore", rec.id);
        break;
      }
    }
    for (const auto& cfg : cve.value("configurations", json::array())) {
      walk_config_nodes(cfg.value("nodes", json::array()), "cpeMatch", "criteria", rec, out.warnings);
    }
    rec.published = date_prefix(cve, "published", rec.id);
    finish_record(rec, cwes);
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

bool is_valid_cve_id(std::string_view id) {
  static const std::regex kPattern(R"(CVE-\d{4}-\d{4,})");
  return std::regex_match(id.begin(), id.end(), kPattern);
}

std::optional<FeedFormat> feed_format_from_string(std::string_view s) {
  if (s == "NvdJson11" || s == "nvd-json-1.1") return FeedFormat::NvdJson11;
  if (s == "NvdApi20" || s == "nvd-api-2.0") return FeedFormat::NvdApi20;
  return std::nullopt;
}

FeedParseResult parse_feed(std::string_view feed_document, FeedFormat format) {
  const json doc = parse_json_document(feed_document, ErrorCode::MalformedFeed);
  try {
    return format == FeedFormat::NvdJson11 ? parse_json11(doc) : parse_api20(doc);
  } catch (const json::exception& e) {
    malformed(std::string("schema violation: ") + e.what());
  }
}

FeedParseResult parse_feed(std::string_view feed_document, std::string_view format_tag) {
  const auto fmt = feed_format_from_string(format_tag);
  if (!fmt) throw Error(ErrorCode::UnsupportedSchema, "unknown feed format '" + std::string(format_tag) + "'");
  return parse_feed(feed_document, *fmt);
}

FeedParseResult read_feed_file(const std::string& path, std::optional<FeedFormat> format) {
  const std::string data = io::read_file(path);
  if (!format) {
    const json doc = parse_json_document(data, ErrorCode::MalformedFeed);
    if (doc.is_object() && doc.contains("CVE_Items")) {
      format = FeedFormat::NvdJson11;
    } else if (doc.is_object() && doc.contains("vulnerabilities")) {
      format = FeedFormat::NvdApi20;
    } else {
      throw Error(ErrorCode::UnsupportedSchema, path + ": neither NVD JSON 1.1 nor API 2.0");
    }
  }
  return parse_feed(data, *format);
}

// ---- topology --------------------------------------------------------------

Topology load_topology(std::string_view document) {
  const json doc = parse_json_document(document, ErrorCode::MalformedTopology);
  auto bad = [](const std::string& what) -> Error { return Error(ErrorCode::MalformedTopology, what); };
  if (!doc.is_object() || doc.value("schema", std::string{}) != "topology-v1") {
    throw bad("expected schema topology-v1");
  }
  Topology topo;
  std::set<std::string> ids;
  try {
    for (const auto& d : doc.at("devices")) {
      InventoryItem item;
      item.device_id = d.at("device_id").get<std::string>();
      item.vendor = d.value("vendor", std::string{});
      item.product = d.at("product").get<std::string>();
      item.version = d.at("version").get<std::string>();
      item.criticality = d.value("criticality", 1.0);
      item.role_tags = d.value("role_tags", std::vector<std::string>{});
      if (item.device_id.empty()) throw bad("empty device_id");
      if (!(item.criticality > 0.0)) throw bad(item.device_id + ": criticality must be > 0");
      if (!ids.insert(item.device_id).second) throw bad("duplicate device_id " + item.device_id);
      topo.items.push_back(std::move(item));
    }
    for (const auto& l : doc.value("links", json::array())) {
      if (!l.is_array() || l.size() != 2) throw bad("link must be a [device_id, device_id] pair");
      auto a = l[0].get<std::string>();
      auto b = l[1].get<std::string>();
      for (const auto& end : {a, b}) {
        if (!ids.contains(end)) throw Error(ErrorCode::DanglingLink, "link names unknown device " + end);
      }
      topo.links.emplace_back(std::move(a), std::move(b));
    }
  } catch (const json::exception& e) {
    throw bad(std::string("schema violation: ") + e.what());
  }
  return topo;
}

std::string dump_topology(const Topology& topo) {
  json devices = json::array();
  for (const auto& it : topo.items) {
    devices.push_back({{"device_id", it.device_id},
                       {"vendor", it.vendor},
                       {"product", it.product},
                       {"version", it.version},
                       {"criticality", it.criticality},
                       {"role_tags", it.role_tags}});
  }
  json links = json::array();
  for (const auto& [a, b] : topo.links) links.push_back({a, b});
  return json{{"schema", "topology-v1"}, {"devices", devices}, {"links", links}}.dump(2) + "\n";
}

// ---- matching ---------------------------------------------------------------

std::map<std::string, std::vector<std::string>> match_inventory(
    const std::vector<CveRecord>& records, const Topology& topo) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& item : topo.items) {
    const auto product = text::to_lower(item.product);
    std::set<std::string> hits;
    for (const auto& rec : records) {
      for (const auto& p : rec.products) {
        if (text::to_lower(p.product) != product) continue;
        if (p.version == "*" || p.version == item.version) {
          hits.insert(rec.id);
          break;
        }
      }
    }
    out[item.device_id] = {hits.begin(), hits.end()};
  }
  return out;
}

// ---- record store -----------------------------------------------------------

namespace {
json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::optional<double> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}
}  // namespace

json record_to_json(const CveRecord& r) {
  json products = json::array();
  for (const auto& p : r.products) products.push_back({p.vendor, p.product, p.version});
  return {{"id", r.id},
          {"description", r.description},
          {"cwe_ids", r.cwe_ids},
          {"base_score", opt(r.base_score)},
          {"exploitability_score", opt(r.exploitability_score)},
          {"impact_score", opt(r.impact_score)},
          {"products", products},
          {"published", r.published}};
}

CveRecord record_from_json(const json& j) {
  CveRecord r;
  r.id = j.at("id").get<std::string>();
  r.description = j.at("description").get<std::string>();
  r.cwe_ids = j.value("cwe_ids", std::vector<int>{});
  r.base_score = opt_from(j, "base_score");
  r.exploitability_score = opt_from(j, "exploitability_score");
  r.impact_score = opt_from(j, "impact_score");
  for (const auto& p : j.value("products", json::array())) {
    r.products.push_back({p.at(0).get<std::string>(), p.at(1).get<std::string>(), p.at(2).get<std::string>()});
  }
  r.published = j.value("published", std::string{});
  return r;
}

std::string dump_record_store(const std::vector<CveRecord>& records) {
  json arr = json::array();
  for (const auto& r : records) arr.push_back(record_to_json(r));
  return json{{"schema", "cve-records-v1"}, {"records", arr}}.dump(1) + "\n";
}

std::vector<CveRecord> load_record_store(std::string_view document) {
  const json doc = parse_json_document(document, ErrorCode::MalformedFeed);
  if (doc.value("schema", std::string{}) != "cve-records-v1") {
    throw Error(ErrorCode::UnsupportedSchema, "expected schema cve-records-v1");
  }
  std::vector<CveRecord> out;
  try {
    for (const auto& j : doc.at("records")) out.push_back(record_from_json(j));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedFeed, std::string("record store: ") + e.what());
  }
  return out;
}

}  // namespace postural
