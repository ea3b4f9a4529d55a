#include "doctest.h"
#include "postural/store.hpp"
#include "support.hpp"

using namespace postural;
using namespace postural::testing;

namespace {

const std::string kAtk(kAttackerId);

/// Chain fixture with a direct attacker edge to CVE2 so either CVE can be
/// removed.
AttackGraph base_graph(const std::string& id = "gstore") {
  auto g = chain_fixture();
  g.graph_id = id;
  g = apply_edit(g, AddEdge{kAtk, kCve2, 0.4});
  g.version = 1;
  return g;
}

GraphDocument first_document(const std::string& id = "gstore") {
  const auto g = base_graph(id);
  return new_document(g, analyze(g), "2026-01-01T00:00:00Z");
}

GraphDocument next_version(const GraphDocument& doc, const std::vector<GraphEdit>& edits) {
  GraphDocument next = doc;
  for (const auto& e : edits) next.graph = apply_edit(next.graph, e);
  next.version = doc.version + 1;
  next.graph.version = next.version;
  next.analytics = analyze(next.graph);
  next.edit_log.push_back({next.version, edits, "2026-01-01T00:00:00Z"});
  next.checksum = compute_checksum(next);
  return next;
}

void check_same(const GraphDocument& a, const GraphDocument& b) {
  CHECK(a.graph_id == b.graph_id);
  CHECK(a.version == b.version);
  CHECK(a.graph == b.graph);
  CHECK(a.edit_log == b.edit_log);
  REQUIRE(a.analytics.has_value() == b.analytics.has_value());
  if (a.analytics) CHECK(dump_analytics(*a.analytics, true) == dump_analytics(*b.analytics, true));
  CHECK(a.checksum == b.checksum);
}

}  // namespace

TEST_CASE("envelope") {
  const auto bytes = encode_envelope("PGRF", "payload");
  CHECK(bytes.size() == 4 + 4 + 8 + 7 + 4);
  CHECK(decode_envelope("PGRF", bytes) == "payload");
  CHECK(error_code_of([&] { decode_envelope("PANL", bytes); }) == ErrorCode::CorruptDocument);
  auto flipped = bytes;
  flipped[18] ^= 1;
  CHECK(error_code_of([&] { decode_envelope("PGRF", flipped); }) == ErrorCode::CorruptDocument);
  CHECK(error_code_of([&] { decode_envelope("PGRF", bytes.substr(0, 10)); }) == ErrorCode::CorruptDocument);
}

TEST_CASE("save then load returns the same document") {
  TempDir dir;
  Store store(dir.path());
  const auto doc = first_document();
  store.save(doc);
  check_same(store.load("gstore"), doc);
  CHECK(store.contains("gstore"));
  CHECK(store.latest_version("gstore") == 1);
  CHECK(std::filesystem::exists(dir.path() / "graphs" / "gstore" / "v1.graph"));
  CHECK(std::filesystem::exists(dir.path() / "graphs" / "gstore" / "v1.analytics"));
  CHECK(std::filesystem::exists(dir.path() / "graphs" / "gstore" / "edits.log"));
}

TEST_CASE("a stale checksum is refused") {
  TempDir dir;
  Store store(dir.path());
  auto doc = first_document();
  doc.graph.threshold = 0.5;
  CHECK(error_code_of([&] { store.save(doc); }) == ErrorCode::ChecksumMismatch);
  CHECK_FALSE(store.contains("gstore"));
}

TEST_CASE("an interrupted write leaves the prior version loadable") {
  TempDir dir;
  const auto v1 = first_document();
  Store(dir.path()).save(v1);
  const auto v2 = next_version(v1, {RemoveNode{kCve1}});

  SUBCASE("writer truncates the file it writes") {
    Store::Writer truncating = [](const std::filesystem::path& p, std::string_view data) {
      io::write_file_atomic(p, data.substr(0, data.size() / 2));
    };
    Store broken(dir.path(), truncating);
    CHECK(error_code_of([&] { broken.save(v2); }) == ErrorCode::ChecksumMismatch);
  }
  SUBCASE("writer dies before the commit rename") {
    Store::Writer crashing = [](const std::filesystem::path& p, std::string_view data) {
      if (p.filename() == "edits.log") {
        io::write_file_atomic(p.string() + ".partial", data.substr(0, 5));
        throw Error(ErrorCode::IoError, "simulated crash");
      }
      io::write_file_atomic(p, data);
    };
    Store broken(dir.path(), crashing);
    CHECK(error_code_of([&] { broken.save(v2); }) == ErrorCode::IoError);
  }

  Store store(dir.path());
  CHECK(store.latest_version("gstore") == 1);
  check_same(store.load("gstore"), v1);
}

TEST_CASE("unknown graphs and versions") {
  TempDir dir;
  Store store(dir.path());
  CHECK(error_code_of([&] { store.load("gnothere"); }) == ErrorCode::NotFound);
  CHECK(error_code_of([&] { store.load("../etc"); }) == ErrorCode::NotFound);
  store.save(first_document());
  CHECK(error_code_of([&] { store.load("gstore", 2); }) == ErrorCode::VersionNotFound);
  CHECK(error_code_of([&] { store.load("gstore", 0); }) == ErrorCode::VersionNotFound);
  CHECK(error_code_of([&] { store.load_snapshot("gstore", 7); }) == ErrorCode::VersionNotFound);
}

TEST_CASE("replaying the edit log reproduces every saved snapshot") {
  TempDir dir;
  Store store(dir.path());
  std::vector<GraphDocument> docs{first_document()};
  store.save(docs.back());
  const std::vector<std::vector<GraphEdit>> batches = {
      {SetScore{kCve1, ScoreField::EScore, 10.0, {}}},
      {AddEdge{kCve1, "CWE-79", 0.3}},
      {SetScore{kCve1, ScoreField::Weight, 0.5, kCve2}, SetScore{kCve2, ScoreField::IScore, 1.0, {}}},
      {RemoveEdge{kCve1, kCve2}},
      {RemoveNode{kCve1}}};
  for (const auto& b : batches) {
    docs.push_back(next_version(docs.back(), b));
    store.save(docs.back());
  }
  CHECK(store.latest_version("gstore") == 6);
  check_same(store.load("gstore"), docs.back());
  for (std::uint64_t v = 1; v <= 6; ++v) {
    const auto loaded = store.load("gstore", v);
    CHECK(loaded.graph == store.load_snapshot("gstore", v));
    check_same(loaded, docs[v - 1]);
  }
}

TEST_CASE("listing graphs") {
  TempDir dir;
  Store store(dir.path());
  CHECK(store.list_graphs().empty());

  auto tagged = base_graph("gbbb");
  tagged.nodes.at(kCve1).layers = {Layer::Crypto};
  store.save(new_document(tagged, std::nullopt, "2026-02-02T00:00:00Z"));
  store.save(first_document("gaaa"));
  auto rows = store.list_graphs();
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].graph_id == "gaaa");
  CHECK(rows[1].graph_id == "gbbb");
  CHECK(rows[1].latest_version == 1);
  CHECK(rows[1].created == "2026-02-02T00:00:00Z");
  CHECK(rows[1].layer_tags == std::set<Layer>{Layer::Crypto});
  CHECK_FALSE(rows[0].error);

  io::write_file_atomic(dir.path() / "graphs" / "gaaa" / "v1.graph", "garbage");
  rows = store.list_graphs();
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].error == ErrorCode::CorruptDocument);
  CHECK_FALSE(rows[1].error);
  CHECK(error_code_of([&] { store.load("gaaa"); }) == ErrorCode::CorruptDocument);
}

TEST_CASE("checksum covers graph, analytics and log") {
  auto doc = first_document();
  const auto base = compute_checksum(doc);
  auto a = doc;
  a.analytics->risk_score += 1;
  CHECK(compute_checksum(a) != base);
  auto b = doc;
  b.edit_log[0].timestamp = "x";
  CHECK(compute_checksum(b) != base);
}
