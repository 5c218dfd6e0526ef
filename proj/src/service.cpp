#include "counsel/service.hpp"

#include <atomic>
#include <fstream>

#include "counsel/text.hpp"
#include "httplib.h"
#include "json.hpp"

namespace counsel {

namespace {

using json = nlohmann::ordered_json;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

TraceStore::TraceStore(std::filesystem::path file) : file_(std::move(file)) {}

void TraceStore::put(const OrchestrationTrace& trace) {
  std::lock_guard<std::mutex> lock(mu_);
  if (!file_.empty()) {
    std::ofstream f(file_, std::ios::app);
    if (!f) throw Error("io", "cannot append to trace file: " + file_.string());
    f << trace_to_json(trace) << '\n';
    f.flush();
    if (!f) throw Error("io", "failed writing trace file: " + file_.string());
  }
  by_id_[trace.trace_id] = trace;
}

std::optional<OrchestrationTrace> TraceStore::get(const std::string& trace_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  const auto it = by_id_.find(trace_id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::size_t TraceStore::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return by_id_.size();
}

struct ConsultService::Impl {
  AppConfig config;
  std::shared_ptr<ChatBackend> backend;
  std::shared_ptr<const StatuteIndex> index;
  PromptSet prompts;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> draining{false};
  std::atomic<std::uint64_t> anonymous_ids{0};
};

ConsultService::ConsultService(const AppConfig& config,
                               std::shared_ptr<ChatBackend> backend,
                               std::shared_ptr<const StatuteIndex> index)
    : impl_(std::make_unique<Impl>()), traces_(config.trace_path) {
  impl_->config = config;
  impl_->backend = std::move(backend);
  impl_->index = std::move(index);
  impl_->prompts = config.prompts();

  impl_->server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200,
              json{{"status", "ok"}, {"index_doc_count", impl_->index->size()}});
  });

  impl_->server.Get(R"(/trace/([0-9a-f]+))",
                    [this](const httplib::Request& req, httplib::Response& res) {
                      const std::string id = req.matches[1];
                      const auto trace = traces_.get(id);
                      if (!trace) {
                        send_json(res, 404, json{{"error", "unknown trace id: " + id}});
                        return;
                      }
                      res.status = 200;
                      res.set_content(trace_to_json(*trace), "application/json");
                    });

  impl_->server.Post("/consult", [this](const httplib::Request& req,
                                        httplib::Response& res) {
    if (impl_->draining.load()) {
      send_json(res, 503, json{{"error", "service is shutting down"}});
      return;
    }
    const auto body =
        nlohmann::json::parse(req.body, nullptr, /*allow_exceptions=*/false);
    if (body.is_discarded() || !body.is_object() || !body.contains("question") ||
        !body.at("question").is_string() ||
        trim(body.at("question").get<std::string>()).empty()) {
      send_json(res, 400, json{{"error", "body must be a JSON object with a "
                                         "non-empty string \"question\""}});
      return;
    }
    ConsultationQuery query;
    query.text = body.at("question").get<std::string>();
    if (body.contains("id") && body.at("id").is_string() &&
        !body.at("id").get<std::string>().empty()) {
      query.id = body.at("id").get<std::string>();
    } else {
      query.id = "q-" + fnv1a64_hex(query.text + "#" +
                                    std::to_string(impl_->anonymous_ids.fetch_add(1)));
    }
    try {
      const ConsultResult result =
          consult(query, impl_->config.orchestrator, *impl_->backend,
                  *impl_->index, impl_->prompts);
      // Persist before acknowledging; a response must imply a stored trace.
      traces_.put(result.trace);
      json legal_basis = json::array();
      for (const StatuteCitation& c : result.opinion.legal_basis) {
        legal_basis.push_back(json{{"law_name", c.law_name},
                                   {"article_id", c.article_id},
                                   {"text", c.text}});
      }
      send_json(res, 200,
                json{{"response", result.opinion.response},
                     {"legal_basis", std::move(legal_basis)},
                     {"trace_id", result.trace.trace_id}});
    } catch (const ConsultError& e) {
      traces_.put(e.partial_trace);
      send_json(res, 502,
                json{{"error", e.what()},
                     {"cause", e.cause_code},
                     {"trace_id", e.partial_trace.trace_id}});
    } catch (const Error& e) {
      send_json(res, 502, json{{"error", e.what()}, {"cause", e.code()}});
    }
  });
}

ConsultService::~ConsultService() { stop(); }

int ConsultService::start() {
  int port = impl_->config.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(impl_->config.bind_address);
    if (port < 0) return -1;
  } else if (!impl_->server.bind_to_port(impl_->config.bind_address, port)) {
    return -1;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void ConsultService::stop() {
  if (!impl_) return;
  impl_->draining.store(true);
  if (impl_->server.is_running()) impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace counsel
