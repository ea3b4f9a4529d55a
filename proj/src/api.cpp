#include "postural/api.hpp"

#include <charconv>

#include "httplib.h"
#include "postural/io.hpp"
#include "postural/pipeline.hpp"

namespace postural {

namespace fs = std::filesystem;
using nlohmann::json;

ApiResponse problem(int status, std::string_view code, const std::string& message, const json& details) {
  ApiResponse r;
  r.status = status;
  r.body = json{{"code", code}, {"message", message}, {"details", details}}.dump(2) + "\n";
  return r;
}

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotFound:
    case ErrorCode::VersionNotFound:
      return 404;
    case ErrorCode::VersionConflict:
      return 409;
    case ErrorCode::EmptyInput:
    case ErrorCode::UnknownNode:
    case ErrorCode::IllegalEdge:
    case ErrorCode::WouldOrphanAttacker:
    case ErrorCode::EmptyGraph:
    case ErrorCode::NoPath:
    case ErrorCode::CyclicGraph:
    case ErrorCode::CorpusTooSmall:
      return 422;
    case ErrorCode::StorageFull:
      return 507;
    case ErrorCode::ChecksumMismatch:
    case ErrorCode::CorruptDocument:
    case ErrorCode::IoError:
      return 500;
    default:
      return 400;
  }
}

namespace {

ApiResponse json_response(int status, const json& body) {
  ApiResponse r;
  r.status = status;
  r.body = body.dump(2) + "\n";
  return r;
}

ApiResponse from_error(const Error& e) {
  return problem(http_status(e.code()), to_string(e.code()), e.what());
}

std::optional<std::uint64_t> parse_uint(std::string_view s) {
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<std::string> query(const ApiRequest& req, const std::string& key) {
  auto it = req.query.find(key);
  if (it == req.query.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint64_t> version_param(const ApiRequest& req) {
  auto v = query(req, "version");
  if (!v) return std::nullopt;
  auto n = parse_uint(*v);
  if (!n || *n == 0) throw Error(ErrorCode::BadRequest, "version must be a positive integer");
  return n;
}

std::optional<Layer> layer_param(const ApiRequest& req) {
  auto v = query(req, "layer");
  if (!v) return std::nullopt;
  auto l = layer_from_string(*v);
  if (!l) throw Error(ErrorCode::BadRequest, "unknown layer '" + *v + "'");
  return l;
}

json parse_body(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::BadRequest, "request body is not valid JSON (byte " + std::to_string(e.byte) + ")");
  }
}

Constants constants_from(const json& j) {
  Constants c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw Error(ErrorCode::BadRequest, "constants must be an object");
  try {
    if (j.contains("c")) c.c = j.at("c").get<double>();
    if (j.contains("k")) c.k = j.at("k").get<double>();
    if (j.contains("cutoff")) c.cutoff = j.at("cutoff").get<std::size_t>();
    if (j.contains("top_n")) c.top_n = j.at("top_n").get<std::size_t>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::BadRequest, "constants have the wrong type");
  }
  if (c.c < 0 || c.k < 0 || c.cutoff == 0 || c.top_n == 0) {
    throw Error(ErrorCode::BadRequest, "constants need c >= 0, k >= 0, cutoff >= 1, top_n >= 1");
  }
  return c;
}

json layer_summary(const LayerResult& lr) {
  json j = {{"total_nodes", lr.graph.nodes.size()}};
  if (lr.analytics) {
    const auto& a = *lr.analytics;
    j["exploit_score"] = a.exploit_score;
    j["impact_score"] = a.impact_score;
    j["risk_score"] = a.risk_score;
    j["path_count"] = a.path_count;
    j["shortest_path_count"] = a.shortest_path_count;
    j["vertex_cover_size"] = a.vertex_cover_size;
  } else {
    j["analytics"] = nullptr;
  }
  return j;
}

json timings_json(const Timings& t) {
  return {{"score_computation_seconds", t.score_computation_seconds},
          {"risk_analysis_seconds", t.risk_analysis_seconds}};
}

std::string strip_etag(std::string v) {
  if (v.rfind("W/", 0) == 0) v = v.substr(2);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
  return v;
}

std::string etag(std::uint64_t version) { return "\"" + std::to_string(version) + "\""; }

}  // namespace

Service::Service(ServiceConfig config) : config_(std::move(config)) {}

void Service::init_store() {
  auto store = std::make_unique<Store>(config_.store_root);
  std::lock_guard lock(mu_);
  store_ = std::move(store);
  ready_ = true;
}

bool Service::ready() const noexcept { return ready_; }

fs::path Service::resolve(const std::string& ref) const {
  const fs::path p(ref);
  return p.is_absolute() ? p : config_.data_root / p;
}

std::shared_ptr<const EmbeddingModel> Service::model_for(const fs::path& path) {
  {
    std::lock_guard lock(mu_);
    if (auto it = models_.find(path); it != models_.end()) return it->second;
  }
  auto model = std::make_shared<const EmbeddingModel>(load_model(path));
  std::lock_guard lock(mu_);
  return models_.try_emplace(path, std::move(model)).first->second;
}

std::shared_ptr<std::mutex> Service::graph_lock(const std::string& id) {
  std::lock_guard lock(mu_);
  auto& slot = graph_locks_[id];
  if (!slot) slot = std::make_shared<std::mutex>();
  return slot;
}

ApiResponse Service::health() const {
  if (!ready()) return problem(503, "Unavailable", "store is not initialised yet");
  return json_response(200, {{"status", "ok"},
                             {"name", "postural"},
                             {"version", POSTURAL_VERSION},
                             {"schemas", {"attack-graph-v1", "analytics-v1", "change-impact-v1"}}});
}

ApiResponse Service::create_analysis(const ApiRequest& req) {
  if (!ready()) return problem(503, "Unavailable", "store is not initialised yet");
  try {
    const auto body = parse_body(req.body);
    if (!body.is_object()) throw Error(ErrorCode::BadRequest, "request body must be an object");

    PipelineInputs in;
    in.parallel = config_.parallel;
    if (body.contains("threshold")) {
      if (!body["threshold"].is_number()) throw Error(ErrorCode::BadRequest, "threshold must be a number");
      in.build.threshold = body["threshold"].get<double>();
    }
    if (!(in.build.threshold >= 0.0 && in.build.threshold <= 1.0)) {
      throw Error(ErrorCode::BadRequest, "threshold must lie in [0, 1]");
    }
    in.constants = constants_from(body.value("constants", json()));
    in.build.strict_ports = body.value("strict_ports", false);
    if (body.contains("layer") && !body["layer"].is_null()) {
      in.layer = layer_from_string(body["layer"].get<std::string>());
      if (!in.layer) throw Error(ErrorCode::BadRequest, "unknown layer " + body["layer"].dump());
    }

    if (!body.contains("topology")) throw Error(ErrorCode::BadRequest, "topology is required");
    const auto& topo = body["topology"];
    in.topology = topo.is_string() ? load_topology(io::read_file(resolve(topo.get<std::string>())))
                                   : load_topology(topo.dump());

    const auto feeds = body.value("feeds", json::array());
    if (!feeds.is_array()) throw Error(ErrorCode::BadRequest, "feeds must be a list of paths");
    for (const auto& f : feeds) {
      if (!f.is_string()) throw Error(ErrorCode::BadRequest, "feeds must be a list of paths");
      auto parsed = read_feed_file(resolve(f.get<std::string>()).string());
      in.records.insert(in.records.end(), parsed.records.begin(), parsed.records.end());
    }
    if (body.contains("records")) {
      if (!body["records"].is_string()) throw Error(ErrorCode::BadRequest, "records must be a path");
      auto stored = load_record_store(io::read_file(resolve(body["records"].get<std::string>())));
      in.records.insert(in.records.end(), stored.begin(), stored.end());
    }
    if (feeds.empty() && !body.contains("records")) {
      throw Error(ErrorCode::BadRequest, "at least one feed or a record store is required");
    }
    if (body.contains("annotations")) {
      in.annotations = import_annotations(io::read_file(resolve(body["annotations"].get<std::string>())));
    }
    if (!body.contains("model") || !body["model"].is_string()) {
      throw Error(ErrorCode::BadRequest, "model path is required");
    }
    const auto model_path = resolve(body["model"].get<std::string>());
    const auto model = model_for(model_path);
    in.model = model.get();

    const auto result = run_pipeline(in);
    const auto& id = result.graph.graph_id;
    {
      auto lock = graph_lock(id);
      std::lock_guard guard(*lock);
      if (!store_->contains(id)) store_->save(new_document(result.graph, result.analytics, utc_timestamp()));
    }
    {
      std::lock_guard lock(mu_);
      graph_models_[id] = model_path;
    }

    json layers = json::object();
    for (const auto& [layer, lr] : result.layers) layers[std::string(to_string(layer))] = layer_summary(lr);
    ApiResponse r = json_response(200, {{"graph_id", id},
                                        {"version", result.graph.version},
                                        {"analytics", analytics_to_json(result.analytics)},
                                        {"timings", timings_json(result.analytics.timings)},
                                        {"layers", layers},
                                        {"warnings", result.warnings}});
    r.headers["ETag"] = etag(result.graph.version);
    return r;
  } catch (const Error& e) {
    return from_error(e);
  } catch (const json::exception& e) {
    return problem(400, "BadRequest", e.what());
  }
}

ApiResponse Service::list_graphs() const {
  if (!ready()) return problem(503, "Unavailable", "store is not initialised yet");
  json rows = json::array();
  for (const auto& row : store_->list_graphs()) {
    json layers = json::array();
    for (Layer l : row.layer_tags) layers.push_back(to_string(l));
    rows.push_back({{"graph_id", row.graph_id},
                    {"latest_version", row.latest_version},
                    {"created", row.created},
                    {"layer_tags", layers},
                    {"error", row.error ? json(to_string(*row.error)) : json(nullptr)}});
  }
  return json_response(200, {{"graphs", rows}});
}

ApiResponse Service::get_graph(const std::string& id, const ApiRequest& req) const {
  if (!ready()) return problem(503, "Unavailable", "store is not initialised yet");
  try {
    const auto version = version_param(req);
    const auto layer = layer_param(req);
    auto doc = store_->load(id, version);
    const auto graph = layer ? partition(doc.graph, *layer) : doc.graph;
    ApiResponse r;
    r.body = dump_graph(graph);
    r.headers["ETag"] = etag(doc.version);
    return r;
  } catch (const Error& e) {
    return from_error(e);
  }
}

ApiResponse Service::patch_graph(const std::string& id, const ApiRequest& req) {
  if (!ready()) return problem(503, "Unavailable", "store is not initialised yet");
  try {
    const auto body = parse_body(req.body);
    const json& list = body.is_array() ? body : body.value("edits", json());
    if (!list.is_array()) throw Error(ErrorCode::BadRequest, "expected a list of edits");
    std::vector<GraphEdit> edits;
    for (const auto& e : list) edits.push_back(edit_from_json(e));

    auto lock = graph_lock(id);
    std::lock_guard guard(*lock);
    auto doc = store_->load(id);
    if (req.if_match) {
      const auto wanted = parse_uint(strip_etag(*req.if_match));
      if (!wanted) throw Error(ErrorCode::BadRequest, "If-Match must carry a version number");
      if (*wanted != doc.version) {
        return problem(409, "VersionConflict",
                       "graph is at version " + std::to_string(doc.version) + ", not " + std::to_string(*wanted),
                       {{"current_version", doc.version}});
      }
    }

    std::shared_ptr<const EmbeddingModel> model;
    const bool needs_model = std::any_of(edits.begin(), edits.end(), [](const GraphEdit& e) {
      const auto* add = std::get_if<AddCveNode>(&e);
      return add && !(add->resolved_edges && add->resolved_layers);
    });
    if (needs_model) {
      std::optional<fs::path> path;
      if (body.is_object() && body.contains("model")) path = resolve(body["model"].get<std::string>());
      if (!path) {
        std::lock_guard l(mu_);
        if (auto it = graph_models_.find(id); it != graph_models_.end()) path = it->second;
      }
      if (!path) path = config_.default_model;
      if (!path) throw Error(ErrorCode::BadRequest, "adding a CVE node needs a model (request field 'model')");
      model = model_for(*path);
    }
    EditContext ctx;
    ctx.model = model.get();

    const Constants consts = doc.analytics ? doc.analytics->constants : Constants{};
    const AnalyzeOptions options{config_.parallel};
    const auto before = analyze(doc.graph, ScoreFunctions::defaults(), consts, options);

    AttackGraph g = doc.graph;
    EditLogEntry entry;
    entry.version = doc.version + 1;
    entry.timestamp = utc_timestamp();
    for (const auto& e : edits) {
      auto resolved = resolve_edit(g, e, ctx);
      g = apply_edit(g, resolved, ctx);
      entry.edits.push_back(std::move(resolved));
    }
    g.version = entry.version;
    const auto after = analyze(g, ScoreFunctions::defaults(), consts, options);

    GraphDocument next;
    next.graph_id = id;
    next.version = entry.version;
    next.graph = g;
    next.analytics = after;
    next.edit_log = doc.edit_log;
    next.edit_log.push_back(std::move(entry));
    next.checksum = compute_checksum(next);
    store_->save(next);

    auto report = change_impact_to_json(change_impact(before, after));
    ApiResponse r = json_response(200, report);
    r.headers["ETag"] = etag(next.version);
    return r;
  } catch (const Error& e) {
    return from_error(e);
  } catch (const json::exception& e) {
    return problem(400, "BadRequest", e.what());
  }
}

ApiResponse Service::get_paths(const std::string& id, const ApiRequest& req) const {
  if (!ready()) return problem(503, "Unavailable", "store is not initialised yet");
  try {
    const auto sort = query(req, "sort").value_or("risk");
    const auto key = path_key_from_string(sort);
    if (!key) throw Error(ErrorCode::BadRequest, "sort must be risk, exploit or impact");
    std::size_t limit = 10;
    if (auto l = query(req, "limit")) {
      auto n = parse_uint(*l);
      if (!n) throw Error(ErrorCode::BadRequest, "limit must be a non-negative integer");
      limit = static_cast<std::size_t>(*n);
    }
    const auto version = version_param(req);
    const auto layer = layer_param(req);
    auto doc = store_->load(id, version);
    Constants consts = doc.analytics ? doc.analytics->constants : Constants{};
    if (auto c = query(req, "cutoff")) {
      auto n = parse_uint(*c);
      if (!n || *n == 0) throw Error(ErrorCode::BadRequest, "cutoff must be a positive integer");
      consts.cutoff = static_cast<std::size_t>(*n);
    }
    const auto graph = layer ? partition(doc.graph, *layer) : doc.graph;
    const auto scores = compute_edge_scores(graph, ScoreFunctions::defaults(), consts);
    auto paths = enumerate_paths(graph, scores, consts.cutoff, sort_order(*key), config_.parallel);
    if (paths.size() > limit) paths.resize(limit);

    json rows = json::array();
    for (const auto& p : paths) {
      rows.push_back({{"nodes", p.nodes},
                      {"exploit_sum", p.exploit_sum},
                      {"impact_sum", p.impact_sum},
                      {"risk_sum", p.risk_sum}});
    }
    ApiResponse r = json_response(200, {{"graph_id", id}, {"version", doc.version}, {"sort", sort}, {"paths", rows}});
    r.headers["ETag"] = etag(doc.version);
    return r;
  } catch (const Error& e) {
    return from_error(e);
  }
}

namespace {

ApiRequest to_request(const httplib::Request& req) {
  ApiRequest out;
  out.body = req.body;
  for (const auto& [k, v] : req.params) out.query.emplace(k, v);
  if (req.has_header("If-Match")) out.if_match = req.get_header_value("If-Match");
  return out;
}

void send(httplib::Response& res, const ApiResponse& r) {
  res.status = r.status;
  for (const auto& [k, v] : r.headers) res.set_header(k, v);
  res.set_content(r.body, r.status >= 400 ? "application/problem+json" : std::string(kMediaType));
}

}  // namespace

void Service::attach(httplib::Server& server) {
  server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) { send(res, health()); });
  server.Post("/v1/analyses", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, create_analysis(to_request(req)));
  });
  server.Get("/v1/graphs", [this](const httplib::Request&, httplib::Response& res) { send(res, list_graphs()); });
  server.Get(R"(/v1/graphs/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, get_graph(req.matches[1], to_request(req)));
  });
  server.Patch(R"(/v1/graphs/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, patch_graph(req.matches[1], to_request(req)));
  });
  server.Get(R"(/v1/graphs/([A-Za-z0-9_-]+)/paths)", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, get_paths(req.matches[1], to_request(req)));
  });
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    ApiResponse r;
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      r = from_error(e);
    } catch (const std::exception& e) {
      r = problem(500, "Internal", e.what());
    }
    send(res, r);
  });
}

}  // namespace postural
