#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace postural {

struct ProductId {
  std::string vendor;
  std::string product;
  std::string version;  // "*" means any version

  bool operator==(const ProductId&) const = default;
};

/// Normalized vulnerability disclosure. Missing CVSS v3 scores stay
/// `nullopt`; defaults are applied at scoring time.
struct CveRecord {
  std::string id;
  std::string description;
  std::vector<int> cwe_ids;
  std::optional<double> base_score;
  std::optional<double> exploitability_score;
  std::optional<double> impact_score;
  std::vector<ProductId> products;
  std::string published;  // YYYY-MM-DD

  bool operator==(const CveRecord&) const = default;
};

bool is_valid_cve_id(std::string_view id);

enum class FeedFormat { NvdJson11, NvdApi20 };

std::optional<FeedFormat> feed_format_from_string(std::string_view s);

struct FeedParseResult {
  std::vector<CveRecord> records;
  std::size_t dropped = 0;  // REJECTED / RESERVED entries
  std::vector<std::string> warnings;
};

FeedParseResult parse_feed(std::string_view feed_document, FeedFormat format);

/// Overload for callers holding an untrusted format tag; throws
/// UnsupportedSchema for anything other than the two NVD layouts.
FeedParseResult parse_feed(std::string_view feed_document, std::string_view format_tag);

/// Reads a feed from disk, transparently inflating `.gz` files, and sniffs
/// the layout when `format` is empty.
FeedParseResult read_feed_file(const std::string& path,
                               std::optional<FeedFormat> format = std::nullopt);

struct InventoryItem {
  std::string device_id;
  std::string vendor;
  std::string product;
  std::string version;
  double criticality = 1.0;
  std::vector<std::string> role_tags;

  bool operator==(const InventoryItem&) const = default;
};

struct Topology {
  std::vector<InventoryItem> items;
  std::vector<std::pair<std::string, std::string>> links;

  bool operator==(const Topology&) const = default;
};

Topology load_topology(std::string_view document);
std::string dump_topology(const Topology& topo);

/// device_id -> sorted, de-duplicated CVE ids. Every device gets an entry.
std::map<std::string, std::vector<std::string>> match_inventory(
    const std::vector<CveRecord>& records, const Topology& topo);

// Record store written by `ingest` and read by the later pipeline stages.
nlohmann::json record_to_json(const CveRecord& r);
CveRecord record_from_json(const nlohmann::json& j);
std::string dump_record_store(const std::vector<CveRecord>& records);
std::vector<CveRecord> load_record_store(std::string_view document);

}  // namespace postural
