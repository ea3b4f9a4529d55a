#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "postural/graph.hpp"
#include "postural/risk.hpp"

namespace postural {

/// One committed version. Version 1 is the built graph and carries no edits;
/// every later entry holds the (resolved) batch that produced it.
struct EditLogEntry {
  std::uint64_t version = 1;
  std::vector<GraphEdit> edits;
  std::string timestamp;  // ISO-8601 UTC

  bool operator==(const EditLogEntry&) const = default;
};

struct GraphDocument {
  std::string graph_id;
  std::uint64_t version = 1;
  AttackGraph graph;  // payload at `version`
  std::optional<GraphAnalytics> analytics;
  std::vector<EditLogEntry> edit_log;
  std::uint32_t checksum = 0;
};

/// CRC-32 over the canonical graph, analytics and edit-log payloads.
std::uint32_t compute_checksum(const GraphDocument& doc);

/// Fresh version-1 document for a newly built graph, checksum filled in.
GraphDocument new_document(const AttackGraph& graph, std::optional<GraphAnalytics> analytics,
                           std::string timestamp);

std::string utc_timestamp();

// Envelope shared by every file in the store:
//   4-byte magic | uint32 schema version | uint64 payload length | payload | uint32 CRC-32
// Integers are little-endian; the CRC covers everything before it.
inline constexpr std::uint32_t kStoreSchemaVersion = 1;
std::string encode_envelope(std::string_view magic, std::string_view payload);
/// Throws CorruptDocument on a wrong magic, bad length or CRC failure.
std::string decode_envelope(std::string_view magic, std::string_view bytes);

struct GraphListing {
  std::string graph_id;
  std::uint64_t latest_version = 0;
  std::string created;
  std::set<Layer> layer_tags;
  std::optional<ErrorCode> error;  // set when the graph's files are unreadable
};

/// File-per-graph store rooted at `root`:
///   <root>/graphs/<id>/v<N>.graph, v<N>.analytics, edits.log
/// Every version is written as a snapshot; edits.log is the commit point, so
/// a save interrupted before it leaves the previous version intact.
class Store {
public:
  using Writer = std::function<void(const std::filesystem::path&, std::string_view)>;

  explicit Store(std::filesystem::path root, Writer writer = {});

  const std::filesystem::path& root() const noexcept { return root_; }

  /// Throws ChecksumMismatch when doc.checksum is stale or a written file
  /// does not read back intact; StorageFull when the disk is full.
  void save(const GraphDocument& doc);

  /// Latest version when `version` is empty. The graph is rebuilt by
  /// replaying the edit log over the version-1 payload.
  GraphDocument load(const std::string& graph_id, std::optional<std::uint64_t> version = std::nullopt) const;

  /// The snapshot file written for `version`, without replay.
  AttackGraph load_snapshot(const std::string& graph_id, std::uint64_t version) const;

  bool contains(const std::string& graph_id) const;
  std::uint64_t latest_version(const std::string& graph_id) const;
  std::vector<GraphListing> list_graphs() const;

private:
  std::filesystem::path graph_dir(const std::string& graph_id) const;
  std::vector<EditLogEntry> read_log(const std::string& graph_id) const;
  void write_checked(const std::filesystem::path& path, std::string_view magic, std::string_view payload);

  std::filesystem::path root_;
  Writer writer_;
};

}  // namespace postural
