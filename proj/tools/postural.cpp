// postural: batch front-end for the attack-graph pipeline and the HTTP service.

#include <pthread.h>
#include <signal.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "httplib.h"
#include "postural/api.hpp"
#include "postural/error.hpp"
#include "postural/io.hpp"
#include "postural/pipeline.hpp"

namespace fs = std::filesystem;
using namespace postural;

namespace {

constexpr int kExitIngest = 2;
constexpr int kExitTraining = 3;
constexpr int kExitAnalysis = 4;
constexpr int kExitServe = 5;
constexpr int kExitUsage = 64;

int fail(int code, const std::string& what) {
  std::cerr << "postural: " << what << "\n";
  return code;
}

int fail(int code, const Error& e) {
  return fail(code, std::string(to_string(e.code())) + ": " + e.what());
}

// ---- ingest ----

struct IngestArgs {
  std::vector<std::string> feeds;
  std::string out;
  std::string format;
};

int run_ingest(const IngestArgs& a) {
  std::optional<FeedFormat> format;
  if (!a.format.empty()) {
    format = feed_format_from_string(a.format);
    if (!format) return fail(kExitUsage, "unknown feed format '" + a.format + "'");
  }
  std::vector<CveRecord> records;
  std::size_t dropped = 0;
  for (const auto& path : a.feeds) {
    try {
      auto parsed = read_feed_file(path, format);
      for (const auto& w : parsed.warnings) std::cerr << "warning: " << path << ": " << w << "\n";
      dropped += parsed.dropped;
      records.insert(records.end(), parsed.records.begin(), parsed.records.end());
    } catch (const Error& e) {
      return fail(kExitIngest, path + ": " + std::string(to_string(e.code())) + ": " + e.what());
    }
  }
  try {
    io::write_file_atomic(a.out, dump_record_store(records));
  } catch (const Error& e) {
    return fail(kExitIngest, e);
  }
  std::cout << "parsed " << records.size() << (records.size() == 1 ? " record" : " records");
  std::cout << " (" << dropped << " dropped)\n";
  return 0;
}

// ---- train-embeddings ----

struct TrainArgs {
  std::string records;
  std::string corpus;
  std::string out;
  std::string arch = "cbow";
  TrainConfig config;
  bool fast = false;
};

int run_train(TrainArgs a) {
  if (a.config.dim == 0 || a.config.window == 0 || a.config.epochs == 0) {
    return fail(kExitUsage, "--dim, --window and --epochs must be positive");
  }
  if (a.arch == "cbow") a.config.architecture = Architecture::CBOW;
  else if (a.arch == "skipgram") a.config.architecture = Architecture::SkipGram;
  else return fail(kExitUsage, "--arch must be cbow or skipgram");
  a.config.deterministic = !a.fast;
  try {
    const auto records = load_record_store(io::read_file(a.records));
    std::vector<std::string> extra;
    if (!a.corpus.empty()) extra = read_corpus_dir(a.corpus);
    const auto corpus = build_corpus(records, extra);
    const auto model = train_embeddings(corpus, a.config);
    for (std::size_t i = 0; i < model.epoch_losses.size(); ++i) {
      std::printf("epoch %zu loss %.6f\n", i + 1, model.epoch_losses[i]);
    }
    save_model(model, a.out);
    std::cout << "vocabulary " << model.size() << " tokens, dim " << model.dim() << "\n";
    return 0;
  } catch (const Error& e) {
    return fail(kExitTraining, e);
  }
}

// ---- analyze ----

struct AnalyzeArgs {
  std::string topology;
  std::string records;
  std::string model;
  std::string annotations;
  std::string out;
  std::string layer;
  double threshold = 0.8;
  Constants constants;
  bool strict_ports = false;
};

void write_pair(const fs::path& dir, const std::string& stem, const AttackGraph& g,
                const std::optional<GraphAnalytics>& a) {
  io::write_file_atomic(dir / (stem + ".graph.json"), dump_graph(g));
  if (a) io::write_file_atomic(dir / (stem + ".analytics.json"), dump_analytics(*a));
}

int run_analyze(const AnalyzeArgs& a) {
  if (!(a.threshold >= 0.0 && a.threshold <= 1.0)) return fail(kExitUsage, "--threshold must lie in [0, 1]");
  if (a.constants.cutoff == 0 || a.constants.top_n == 0) return fail(kExitUsage, "--cutoff and --top-n must be positive");
  PipelineInputs in;
  if (!a.layer.empty()) {
    in.layer = layer_from_string(a.layer);
    if (!in.layer) return fail(kExitUsage, "unknown layer '" + a.layer + "'");
  }
  try {
    in.topology = load_topology(io::read_file(a.topology));
    in.records = load_record_store(io::read_file(a.records));
    if (!a.annotations.empty()) {
      in.annotations = import_annotations(io::read_file(a.annotations));
      for (const auto& r : in.annotations->rejected) {
        std::cerr << "warning: annotation " << r.cve_id << " rejected: " << to_string(r.code) << ": " << r.message << "\n";
      }
    }
    const auto model = load_model(a.model);
    in.model = &model;
    in.build.threshold = a.threshold;
    in.build.strict_ports = a.strict_ports;
    in.constants = a.constants;

    const auto result = run_pipeline(in);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";

    const fs::path dir(a.out);
    fs::create_directories(dir);
    std::string report;
    if (!in.layer) {
      write_pair(dir, "cumulative", result.graph, result.analytics);
      report += render_report(result.analytics);
    }
    for (const auto& [layer, lr] : result.layers) {
      write_pair(dir, std::string(layer_slug(layer)), lr.graph, lr.analytics);
      report += "\n";
      if (lr.analytics) {
        report += render_report(*lr.analytics);
      } else {
        report += "layer " + std::string(to_string(layer)) + ": " + std::to_string(lr.graph.nodes.size()) +
                  " node(s), nothing to score\n";
      }
    }
    io::write_file_atomic(dir / "report.txt", report);
    std::cout << report;
    return 0;
  } catch (const Error& e) {
    return fail(kExitAnalysis, e);
  } catch (const fs::filesystem_error& e) {
    return fail(kExitAnalysis, e.what());
  }
}

// ---- serve ----

struct ServeArgs {
  std::string store;
  std::string listen = "127.0.0.1:8080";
  std::string data_root = ".";
  std::string model;
};

int run_serve(const ServeArgs& a) {
  if (a.store.empty()) return fail(kExitUsage, "--store is required (or set POSTURAL_STORE)");
  const auto colon = a.listen.rfind(':');
  std::string host = colon == std::string::npos ? "127.0.0.1" : a.listen.substr(0, colon);
  if (host.empty()) host = "0.0.0.0";
  int port = 0;
  try {
    port = std::stoi(colon == std::string::npos ? a.listen : a.listen.substr(colon + 1));
  } catch (const std::exception&) {
    return fail(kExitUsage, "--listen must be host:port");
  }

  // Termination signals are taken by a dedicated thread via sigwait.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGINT);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  ServiceConfig config;
  config.store_root = a.store;
  config.data_root = a.data_root;
  if (!a.model.empty()) config.default_model = a.model;
  Service service(config);
  httplib::Server server;
  // SO_REUSEADDR without SO_REUSEPORT: a restart may reuse a port in
  // TIME_WAIT, but a second server cannot share a live one.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  service.attach(server);

  int bound = port;
  if (port == 0) {
    bound = server.bind_to_any_port(host);
    if (bound < 0) return fail(kExitServe, "cannot bind " + host);
  } else if (!server.bind_to_port(host, port)) {
    return fail(kExitServe, "cannot bind " + a.listen);
  }
  try {
    service.init_store();
  } catch (const Error& e) {
    return fail(kExitServe, e);
  }

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  std::cout << "listening on " << host << ":" << bound << std::endl;
  const bool clean = server.listen_after_bind();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  std::cout << "stopped" << std::endl;
  return clean ? 0 : kExitServe;
}

// ---- report ----

struct ReportArgs {
  std::string graph;
  std::string analytics;
  std::string format = "text";
};

int run_report(const ReportArgs& a) {
  if (a.format != "text" && a.format != "doc") return fail(kExitUsage, "--format must be text or doc");
  try {
    const auto graph = load_graph(io::read_file(a.graph));
    GraphAnalytics analytics;
    bool computed = false;
    if (!a.analytics.empty()) {
      analytics = analytics_from_json(nlohmann::json::parse(io::read_file(a.analytics)));
    } else {
      analytics = analyze(graph);
      computed = true;
    }
    if (a.format == "doc") std::cout << dump_analytics(analytics);
    else std::cout << render_report(analytics, computed);
    return 0;
  } catch (const Error& e) {
    return fail(kExitAnalysis, e);
  } catch (const nlohmann::json::exception& e) {
    return fail(kExitAnalysis, e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"postural: attack-graph security posture engine"};
  app.require_subcommand(1);
  app.set_version_flag("--version", POSTURAL_VERSION);

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "parse CVE feeds into a record store");
  ingest_cmd->add_option("--feed", ingest.feeds, "NVD feed file (.json or .json.gz)")->required();
  ingest_cmd->add_option("--out", ingest.out, "record store to write")->required();
  ingest_cmd->add_option("--format", ingest.format, "nvd-json-1.1 or nvd-api-2.0 (sniffed when omitted)");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train-embeddings", "train word vectors on the security corpus");
  train_cmd->add_option("--records", train.records, "record store")->required();
  train_cmd->add_option("--corpus", train.corpus, "directory of extra corpus documents");
  train_cmd->add_option("--dim", train.config.dim, "vector dimension");
  train_cmd->add_option("--window", train.config.window, "context window");
  train_cmd->add_option("--epochs", train.config.epochs, "training epochs");
  train_cmd->add_option("--seed", train.config.seed, "random seed");
  train_cmd->add_option("--lr", train.config.learning_rate, "starting learning rate");
  train_cmd->add_option("--negative", train.config.negative_samples, "negative samples per positive");
  train_cmd->add_option("--min-count", train.config.min_count, "minimum token frequency");
  train_cmd->add_option("--arch", train.arch, "cbow or skipgram");
  train_cmd->add_flag("--fast", train.fast, "parallel lock-free training (not reproducible)");
  train_cmd->add_option("--out", train.out, "model file to write")->required();

  AnalyzeArgs analyze_args;
  auto* analyze_cmd = app.add_subcommand("analyze", "build and score the attack graphs");
  analyze_cmd->add_option("--topology", analyze_args.topology, "topology-v1 file")->required();
  analyze_cmd->add_option("--records", analyze_args.records, "record store")->required();
  analyze_cmd->add_option("--model", analyze_args.model, "embedding model file")->required();
  analyze_cmd->add_option("--annotations", analyze_args.annotations, "annotations-v1 file");
  analyze_cmd->add_option("--threshold", analyze_args.threshold, "similarity threshold for CVE edges");
  analyze_cmd->add_option("--cutoff", analyze_args.constants.cutoff, "maximum path length in edges");
  analyze_cmd->add_option("--top-n", analyze_args.constants.top_n, "top paths and key vulnerabilities");
  analyze_cmd->add_option("--c", analyze_args.constants.c, "EES propagation constant");
  analyze_cmd->add_option("--k", analyze_args.constants.k, "EIS propagation constant");
  analyze_cmd->add_option("--layer", analyze_args.layer, "only this layer");
  analyze_cmd->add_flag("--strict-ports", analyze_args.strict_ports, "match postconditions to preconditions only");
  analyze_cmd->add_option("--out", analyze_args.out, "output directory")->required();

  ServeArgs serve;
  if (const char* env = std::getenv("POSTURAL_STORE")) serve.store = env;
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP API");
  serve_cmd->add_option("--store", serve.store, "store directory (default $POSTURAL_STORE)");
  serve_cmd->add_option("--listen", serve.listen, "host:port, port 0 picks a free port");
  serve_cmd->add_option("--data-root", serve.data_root, "base for relative paths in requests");
  serve_cmd->add_option("--model", serve.model, "model used by edits that add CVE nodes");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "render analytics for a graph document");
  report_cmd->add_option("--graph", report.graph, "attack-graph-v1 file")->required();
  report_cmd->add_option("--analytics", report.analytics, "analytics-v1 file (computed when omitted)");
  report_cmd->add_option("--format", report.format, "text or doc");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  if (*ingest_cmd) return run_ingest(ingest);
  if (*train_cmd) return run_train(train);
  if (*analyze_cmd) return run_analyze(analyze_args);
  if (*serve_cmd) return run_serve(serve);
  if (*report_cmd) return run_report(report);
  return kExitUsage;
}
