#include "llmie/server.hpp"

#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "llmie/datamodel.hpp"
#include "llmie/extractors.hpp"

namespace llmie {

namespace {

using json = nlohmann::json;

constexpr const char* kJson = "application/json; charset=utf-8";

constexpr std::string_view kPlaceholderPage = R"(<!DOCTYPE html>
<html lang="en">
<head><meta charset="utf-8"><title>llmie</title></head>
<body>
<h1>llmie server</h1>
<p>The workbench assets were not configured (start with --static DIR). The JSON API is available under /api/.</p>
</body>
</html>
)";

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  res.status = status;
  json body{{"code", code}, {"message", message}};
  res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), kJson);
}

void send_json(httplib::Response& res, const std::string& body) {
  res.status = 200;
  res.set_content(body, kJson);
}

std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
  auto body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    send_error(res, 400, "malformed_body", "request body must be a JSON object");
    return std::nullopt;
  }
  return body;
}

std::optional<std::string> string_field(const json& body, const char* key, httplib::Response& res,
                                        bool required = true) {
  if (!body.contains(key)) {
    if (required) send_error(res, 400, "missing_field", std::string("missing field \"") + key + "\"");
    return std::nullopt;
  }
  if (!body[key].is_string()) {
    send_error(res, 400, "invalid_field", std::string("field \"") + key + "\" must be a string");
    return std::nullopt;
  }
  return body[key].get<std::string>();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// doc_id -> file, rebuilt per request so the directory is the source of truth.
std::map<std::string, std::filesystem::path> index_documents(const std::filesystem::path& dir) {
  std::map<std::string, std::filesystem::path> index;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".llmie") continue;
    try {
      index.emplace(load(entry.path()).doc_id(), entry.path());
    } catch (const Error&) {
      // Unreadable files are not listed.
    }
  }
  return index;
}

FrameExtraction run_frame_extractor(const std::string& kind, const ExtractorConfig& config, const std::string& text) {
  if (kind == "basic") return basic_extract(config, text);
  if (kind == "review") return review_extract(config, text);
  if (kind == "sentence") return sentence_extract(config, text);
  throw ExtractionError("unknown extractor \"" + kind + "\"; expected basic, review or sentence");
}

}  // namespace

WorkbenchServer::WorkbenchServer(ServerOptions options)
    : options_(std::move(options)), http_(std::make_unique<httplib::Server>()) {
  if (options_.engine) options_.engine->set_timeout(options_.request_timeout);
  try {
    guidelines_ = GuidelineStore::load(options_.guidelines_dir);
  } catch (const Error&) {
    guidelines_.reset();
  }
  http_->set_read_timeout(options_.request_timeout);
  http_->set_write_timeout(options_.request_timeout);
  install_routes();
}

WorkbenchServer::~WorkbenchServer() { stop(); }

int WorkbenchServer::bind(const std::string& host, int port) {
  if (port == 0) return http_->bind_to_any_port(host);
  return http_->bind_to_port(host, port) ? port : -1;
}

bool WorkbenchServer::listen() { return http_->listen_after_bind(); }

void WorkbenchServer::stop() {
  if (http_) http_->stop();
}

void WorkbenchServer::wait_until_ready() const { http_->wait_until_ready(); }

std::shared_ptr<WorkbenchServer::Session> WorkbenchServer::find_session(const std::string& id) {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

void WorkbenchServer::install_routes() {
  auto& http = *http_;

  http.Get("/api/docs", [this](const httplib::Request&, httplib::Response& res) {
    json ids = json::array();
    for (const auto& [id, _] : index_documents(options_.docs_dir)) ids.push_back(id);
    send_json(res, ids.dump(-1, ' ', false, json::error_handler_t::replace));
  });

  http.Get(R"(/api/docs/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto id = req.matches[1].str();
    const auto index = index_documents(options_.docs_dir);
    auto it = index.find(id);
    if (it == index.end()) return send_error(res, 404, "unknown_document", "no document with id " + id);
    send_json(res, read_file(it->second));
  });

  http.Post("/api/extract", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req, res);
    if (!body) return;
    auto text = string_field(*body, "text", res);
    if (!text) return;
    auto tmpl = string_field(*body, "template", res);
    if (!tmpl) return;
    std::string extractor = "basic";
    if (body->contains("extractor")) {
      auto k = string_field(*body, "extractor", res);
      if (!k) return;
      extractor = *k;
    }
    std::string doc_id = "workbench";
    if (body->contains("doc_id")) {
      auto id = string_field(*body, "doc_id", res);
      if (!id) return;
      doc_id = *id;
    }
    if (!options_.engine) return send_error(res, 502, "engine_unavailable", "server was started without an engine");

    ExtractorConfig config;
    config.engine = options_.engine;
    try {
      config.prompt = PromptTemplate(*tmpl);
      if (body->contains("config")) {
        const auto& c = (*body)["config"];
        if (!c.is_object()) return send_error(res, 400, "invalid_field", "field \"config\" must be an object");
        config.max_concurrency = c.value("max_concurrency", std::size_t{1});
        config.generation.temperature = c.value("temperature", 0.0);
        config.generation.max_tokens = c.value("max_tokens", 4096);
        config.review_instruction = c.value("review_instruction", std::string(kDefaultReviewInstruction));
        const auto mode = c.value("review_mode", std::string("addition"));
        if (mode != "addition" && mode != "revision")
          return send_error(res, 400, "invalid_field", "review_mode must be addition or revision");
        config.review_mode = mode == "revision" ? ReviewMode::revision : ReviewMode::addition;
      }
    } catch (const json::exception& e) {
      return send_error(res, 400, "invalid_field", e.what());
    } catch (const TemplateError& e) {
      return send_error(res, 400, "template_error", e.what());
    }

    try {
      auto extraction = run_frame_extractor(extractor, config, *text);
      IEDocument doc(doc_id, *text);
      for (auto& f : extraction.frames) doc.add_frame(std::move(f), DuplicatePolicy::allow);
      send_json(res, serialize(doc));
    } catch (const EngineError& e) {
      send_error(res, 502, "engine_error", e.what());
    } catch (const Error& e) {
      send_error(res, 400, "extraction_error", e.what());
    }
  });

  http.Post("/api/editor/session", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req, res);
    if (!body) return;
    auto kind = string_field(*body, "extractor_kind", res);
    if (!kind) return;
    if (!guidelines_) return send_error(res, 502, "guidelines_unavailable", "prompt guidelines could not be loaded");
    if (!guidelines_->contains(*kind))
      return send_error(res, 400, "unknown_extractor_kind", "unknown extractor kind " + *kind);
    if (!options_.engine) return send_error(res, 502, "engine_unavailable", "server was started without an engine");
    auto session = std::make_shared<Session>(new_session(*guidelines_, *kind, options_.engine));
    std::string id;
    {
      std::lock_guard lock(sessions_mutex_);
      id = "s" + std::to_string(next_session_++);
      sessions_.emplace(id, std::move(session));
    }
    send_json(res, json{{"session_id", id}}.dump());
  });

  http.Post(R"(/api/editor/([^/]+)/chat)", [this](const httplib::Request& req, httplib::Response& res) {
    auto session = find_session(req.matches[1].str());
    if (!session) return send_error(res, 404, "unknown_session", "no editor session " + req.matches[1].str());
    auto body = parse_body(req, res);
    if (!body) return;
    auto text = string_field(*body, "text", res);
    if (!text) return;
    if (text->empty()) return send_error(res, 400, "invalid_field", "chat text must not be empty");
    std::lock_guard lock(session->mutex);
    try {
      auto reply = session->chat.chat_turn(*text);
      send_json(res, json{{"reply", reply}}.dump(-1, ' ', false, json::error_handler_t::replace));
    } catch (const EngineError& e) {
      send_error(res, 502, "engine_error", e.what());
    }
  });

  http.Post(R"(/api/editor/([^/]+)/template)", [this](const httplib::Request& req, httplib::Response& res) {
    auto session = find_session(req.matches[1].str());
    if (!session) return send_error(res, 404, "unknown_session", "no editor session " + req.matches[1].str());
    std::lock_guard lock(session->mutex);
    const auto reply = session->chat.last_reply();
    if (reply.empty()) return send_error(res, 422, "no_reply", "the session has no assistant reply yet");
    try {
      const auto tmpl = extract_template(reply);
      send_json(res, json{{"template", tmpl.text()}, {"placeholders", tmpl.placeholders()}}.dump(
                         -1, ' ', false, json::error_handler_t::replace));
    } catch (const TemplateError& e) {
      send_error(res, 422, "template_incomplete", e.what());
    }
  });

  if (options_.static_dir && std::filesystem::is_directory(*options_.static_dir)) {
    http.set_mount_point("/", options_.static_dir->string());
  } else {
    http.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(std::string(kPlaceholderPage), "text/html; charset=utf-8");
    });
  }
}

}  // namespace llmie
