#include "postural/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <ctime>
#include <regex>

#include "postural/error.hpp"
#include "postural/io.hpp"

namespace postural {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kGraphMagic = "PGRF";
constexpr std::string_view kAnalyticsMagic = "PANL";
constexpr std::string_view kLogMagic = "PLOG";

std::uint32_t crc32_of(std::string_view data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in slices.
  while (!data.empty()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(data.size(), 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data()), n);
    data.remove_prefix(n);
  }
  return static_cast<std::uint32_t>(crc);
}

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::string_view in, std::size_t at) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

std::string log_payload(const std::vector<EditLogEntry>& log) {
  json entries = json::array();
  for (const auto& e : log) {
    json edits = json::array();
    for (const auto& x : e.edits) edits.push_back(edit_to_json(x));
    entries.push_back({{"version", e.version}, {"edits", edits}, {"timestamp", e.timestamp}});
  }
  return json{{"schema", "edit-log-v1"}, {"entries", entries}}.dump(2) + "\n";
}

std::vector<EditLogEntry> parse_log(std::string_view payload) {
  try {
    const auto j = json::parse(payload);
    std::vector<EditLogEntry> log;
    for (const auto& e : j.at("entries")) {
      EditLogEntry entry;
      entry.version = e.at("version").get<std::uint64_t>();
      entry.timestamp = e.at("timestamp").get<std::string>();
      for (const auto& x : e.at("edits")) entry.edits.push_back(edit_from_json(x));
      log.push_back(std::move(entry));
    }
    return log;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptDocument, std::string("edit log: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptDocument, std::string("edit log: ") + e.what());
  }
}

void check_log(const std::vector<EditLogEntry>& log, std::uint64_t version) {
  if (log.empty() || log.back().version != version) {
    throw Error(ErrorCode::BadRequest, "edit log must end at the document version");
  }
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (log[i].version != i + 1) throw Error(ErrorCode::BadRequest, "edit log versions must be contiguous from 1");
  }
}

bool safe_id(const std::string& id) {
  static const std::regex pattern("[A-Za-z0-9_-]{1,128}");
  return std::regex_match(id, pattern);
}

// Advisory exclusive lock held for the duration of a save.
class FileLock {
public:
  explicit FileLock(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(ErrorCode::IoError, "cannot open lock " + path.string() + ": " + std::strerror(errno));
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw Error(ErrorCode::IoError, "cannot lock " + path.string());
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

private:
  int fd_ = -1;
};

}  // namespace

std::string encode_envelope(std::string_view magic, std::string_view payload) {
  std::string out(magic);
  put_le<std::uint32_t>(out, kStoreSchemaVersion);
  put_le<std::uint64_t>(out, payload.size());
  out.append(payload);
  put_le<std::uint32_t>(out, crc32_of(out));
  return out;
}

std::string decode_envelope(std::string_view magic, std::string_view bytes) {
  constexpr std::size_t header = 4 + 4 + 8;
  if (bytes.size() < header + 4 || bytes.substr(0, 4) != magic) {
    throw Error(ErrorCode::CorruptDocument, "bad magic or truncated header");
  }
  if (get_le<std::uint32_t>(bytes, 4) != kStoreSchemaVersion) {
    throw Error(ErrorCode::CorruptDocument, "unsupported store schema version");
  }
  const auto length = get_le<std::uint64_t>(bytes, 8);
  if (length != bytes.size() - header - 4) throw Error(ErrorCode::CorruptDocument, "payload length mismatch");
  const auto body = bytes.substr(0, bytes.size() - 4);
  if (crc32_of(body) != get_le<std::uint32_t>(bytes, bytes.size() - 4)) {
    throw Error(ErrorCode::CorruptDocument, "checksum mismatch");
  }
  return std::string(bytes.substr(header, length));
}

std::uint32_t compute_checksum(const GraphDocument& doc) {
  std::string all = dump_graph(doc.graph);
  all += doc.analytics ? dump_analytics(*doc.analytics, true) : std::string("null");
  all += log_payload(doc.edit_log);
  return crc32_of(all);
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

GraphDocument new_document(const AttackGraph& graph, std::optional<GraphAnalytics> analytics,
                           std::string timestamp) {
  GraphDocument doc;
  doc.graph_id = graph.graph_id;
  doc.version = graph.version;
  doc.graph = graph;
  doc.analytics = std::move(analytics);
  doc.edit_log.push_back({graph.version, {}, std::move(timestamp)});
  doc.checksum = compute_checksum(doc);
  return doc;
}

Store::Store(fs::path root, Writer writer) : root_(std::move(root)), writer_(std::move(writer)) {
  if (!writer_) writer_ = [](const fs::path& p, std::string_view data) { io::write_file_atomic(p, data); };
  std::error_code ec;
  fs::create_directories(root_ / "graphs", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create store at " + root_.string() + ": " + ec.message());
}

fs::path Store::graph_dir(const std::string& graph_id) const {
  if (!safe_id(graph_id)) throw Error(ErrorCode::NotFound, "invalid graph id '" + graph_id + "'");
  return root_ / "graphs" / graph_id;
}

void Store::write_checked(const fs::path& path, std::string_view magic, std::string_view payload) {
  const auto bytes = encode_envelope(magic, payload);
  writer_(path, bytes);
  std::string back;
  try {
    back = io::read_file(path);
  } catch (const Error&) {
    throw Error(ErrorCode::ChecksumMismatch, "verify-after-write could not read " + path.string());
  }
  if (back != bytes) throw Error(ErrorCode::ChecksumMismatch, "verify-after-write failed for " + path.string());
}

void Store::save(const GraphDocument& doc) {
  if (doc.checksum != compute_checksum(doc)) {
    throw Error(ErrorCode::ChecksumMismatch, "document checksum is stale for " + doc.graph_id);
  }
  if (doc.graph.graph_id != doc.graph_id || doc.graph.version != doc.version) {
    throw Error(ErrorCode::BadRequest, "graph payload does not match the document id/version");
  }
  check_log(doc.edit_log, doc.version);

  const auto dir = graph_dir(doc.graph_id);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  FileLock lock(dir / ".lock");

  const auto v = std::to_string(doc.version);
  write_checked(dir / ("v" + v + ".graph"), kGraphMagic, dump_graph(doc.graph));
  if (doc.analytics) {
    write_checked(dir / ("v" + v + ".analytics"), kAnalyticsMagic, dump_analytics(*doc.analytics, true));
  }
  write_checked(dir / "edits.log", kLogMagic, log_payload(doc.edit_log));
}

std::vector<EditLogEntry> Store::read_log(const std::string& graph_id) const {
  const auto dir = graph_dir(graph_id);
  if (!fs::exists(dir / "edits.log")) throw Error(ErrorCode::NotFound, "unknown graph " + graph_id);
  return parse_log(decode_envelope(kLogMagic, io::read_file(dir / "edits.log")));
}

bool Store::contains(const std::string& graph_id) const {
  return safe_id(graph_id) && fs::exists(root_ / "graphs" / graph_id / "edits.log");
}

std::uint64_t Store::latest_version(const std::string& graph_id) const {
  const auto log = read_log(graph_id);
  return log.empty() ? 0 : log.back().version;
}

AttackGraph Store::load_snapshot(const std::string& graph_id, std::uint64_t version) const {
  const auto path = graph_dir(graph_id) / ("v" + std::to_string(version) + ".graph");
  if (!fs::exists(path)) throw Error(ErrorCode::VersionNotFound, graph_id + " has no snapshot v" + std::to_string(version));
  try {
    return load_graph(decode_envelope(kGraphMagic, io::read_file(path)));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptDocument) throw;
    throw Error(ErrorCode::CorruptDocument, path.string() + ": " + e.what());
  }
}

GraphDocument Store::load(const std::string& graph_id, std::optional<std::uint64_t> version) const {
  auto log = read_log(graph_id);
  if (log.empty()) throw Error(ErrorCode::CorruptDocument, "empty edit log for " + graph_id);
  const std::uint64_t latest = log.back().version;
  const std::uint64_t want = version.value_or(latest);
  if (want == 0 || want > latest) {
    throw Error(ErrorCode::VersionNotFound, graph_id + " has no version " + std::to_string(want));
  }

  GraphDocument doc;
  doc.graph_id = graph_id;
  doc.version = want;
  doc.graph = load_snapshot(graph_id, 1);
  log.resize(want);
  for (std::size_t i = 1; i < log.size(); ++i) {
    for (const auto& edit : log[i].edits) doc.graph = apply_edit(doc.graph, edit);
    doc.graph.version = log[i].version;
  }
  doc.edit_log = std::move(log);

  const auto apath = graph_dir(graph_id) / ("v" + std::to_string(want) + ".analytics");
  if (fs::exists(apath)) {
    doc.analytics = analytics_from_json(json::parse(decode_envelope(kAnalyticsMagic, io::read_file(apath))));
  }
  doc.checksum = compute_checksum(doc);
  return doc;
}

std::vector<GraphListing> Store::list_graphs() const {
  std::vector<GraphListing> rows;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(root_ / "graphs", ec)) {
    if (!entry.is_directory()) continue;
    GraphListing row;
    row.graph_id = entry.path().filename().string();
    if (!safe_id(row.graph_id)) continue;
    try {
      const auto log = read_log(row.graph_id);
      row.latest_version = log.back().version;
      row.created = log.front().timestamp;
      const auto g = load_snapshot(row.graph_id, row.latest_version);
      for (const auto& [id, n] : g.nodes) row.layer_tags.insert(n.layers.begin(), n.layers.end());
    } catch (const Error& e) {
      row.error = ErrorCode::CorruptDocument;
    }
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.graph_id < b.graph_id; });
  return rows;
}

}  // namespace postural
