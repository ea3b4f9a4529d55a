#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "json.hpp"
#include "postural/error.hpp"
#include "postural/semantics.hpp"
#include "postural/store.hpp"

namespace httplib {
class Server;
}

namespace postural {

inline constexpr std::string_view kMediaType = "application/json";

struct ApiResponse {
  int status = 200;
  std::string body;
  std::map<std::string, std::string> headers;
};

struct ApiRequest {
  std::string body;
  std::map<std::string, std::string> query;
  std::optional<std::string> if_match;
};

/// Problem document {code, message, details}.
ApiResponse problem(int status, std::string_view code, const std::string& message,
                    const nlohmann::json& details = nlohmann::json::object());

/// HTTP status for a library error code.
int http_status(ErrorCode code) noexcept;

struct ServiceConfig {
  std::filesystem::path store_root;
  /// Relative feed / topology / model references resolve against this.
  std::filesystem::path data_root = ".";
  /// Used by PATCH when neither the request nor the originating analysis
  /// names a model.
  std::optional<std::filesystem::path> default_model;
  bool parallel = true;
};

/// Endpoint logic, independent of the transport so it can be tested
/// directly. Every method is safe to call concurrently; edits to one graph
/// are serialized.
class Service {
public:
  explicit Service(ServiceConfig config);

  /// Opens the store. Until this succeeds /v1/health answers 503.
  void init_store();
  bool ready() const noexcept;

  ApiResponse health() const;
  ApiResponse create_analysis(const ApiRequest& req);
  ApiResponse list_graphs() const;
  ApiResponse get_graph(const std::string& id, const ApiRequest& req) const;
  ApiResponse patch_graph(const std::string& id, const ApiRequest& req);
  ApiResponse get_paths(const std::string& id, const ApiRequest& req) const;

  /// Registers the v1 routes on `server`.
  void attach(httplib::Server& server);

private:
  std::filesystem::path resolve(const std::string& ref) const;
  std::shared_ptr<const EmbeddingModel> model_for(const std::filesystem::path& path);
  std::shared_ptr<std::mutex> graph_lock(const std::string& id);

  ServiceConfig config_;
  std::unique_ptr<Store> store_;
  std::atomic<bool> ready_{false};
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<std::mutex>> graph_locks_;
  std::map<std::filesystem::path, std::shared_ptr<const EmbeddingModel>> models_;
  std::map<std::string, std::filesystem::path> graph_models_;
};

}  // namespace postural
