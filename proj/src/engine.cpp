#include "llmie/engine.hpp"

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace llmie {

using json = nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role role_from_string(std::string_view name) {
  if (name == "system") return Role::system;
  if (name == "user") return Role::user;
  if (name == "assistant") return Role::assistant;
  throw Error("unknown chat role: " + std::string(name));
}

std::string_view to_string(EngineKind kind) {
  switch (kind) {
    case EngineKind::openai_compatible: return "openai";
    case EngineKind::ollama: return "ollama";
    case EngineKind::scripted: return "scripted";
  }
  return "scripted";
}

EngineKind engine_kind_from_string(std::string_view name) {
  if (name == "openai" || name == "openai_compatible") return EngineKind::openai_compatible;
  if (name == "ollama") return EngineKind::ollama;
  if (name == "scripted") return EngineKind::scripted;
  throw Error("unknown engine kind: " + std::string(name));
}

EngineError::EngineError(Kind kind, std::string message, int status, std::string body)
    : Error(std::move(message)), kind_(kind), status_(status), body_(std::move(body)) {}

void InspectionLog::append(InspectionRecord record) {
  std::lock_guard lock(mutex_);
  records_.push_back(std::move(record));
}

std::size_t InspectionLog::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::vector<InspectionRecord> InspectionLog::snapshot() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::string apply_stop_sequences(std::string text, const std::vector<std::string>& stops) {
  auto cut = std::string::npos;
  for (const auto& stop : stops) {
    if (stop.empty()) continue;
    cut = std::min(cut, text.find(stop));
  }
  if (cut != std::string::npos) text.resize(cut);
  return text;
}

InferenceEngine::InferenceEngine(EngineDescriptor descriptor) : descriptor_(std::move(descriptor)) {}

std::string InferenceEngine::chat(const std::vector<ChatMessage>& messages, const GenerationConfig& config) {
  if (messages.empty()) throw EngineError(EngineError::Kind::precondition, "chat requires at least one message");
  if (messages.back().role != Role::user)
    throw EngineError(EngineError::Kind::precondition, "last chat message must have role user");
  for (const auto& m : messages) {
    if (m.role != Role::system && m.content.empty())
      throw EngineError(EngineError::Kind::precondition, "user and assistant messages must be non-empty");
  }
  if (!std::isfinite(config.temperature) || config.temperature < 0)
    throw EngineError(EngineError::Kind::precondition, "temperature must be finite and >= 0");
  if (config.max_tokens < 1) throw EngineError(EngineError::Kind::precondition, "max_tokens must be >= 1");

  InspectionRecord record{messages, config, {}, std::nullopt, {}, 0};
  for (int attempt = 0;; ++attempt) {
    record.attempts = attempt + 1;
    try {
      auto text = send(messages, config, record.request_body);
      if (text.empty()) throw EngineError(EngineError::Kind::empty_completion, "backend returned an empty completion");
      text = apply_stop_sequences(std::move(text), config.stop_sequences);
      record.response = text;
      log_.append(std::move(record));
      return text;
    } catch (const EngineError& e) {
      if (e.kind() == EngineError::Kind::transport && attempt < retry_.transport_retries) {
        std::this_thread::sleep_for(retry_.backoff);
        continue;
      }
      record.error = e.what();
      log_.append(std::move(record));
      throw;
    }
  }
}

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

Endpoint parse_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("base URL lacks a scheme: " + url);
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw Error("unsupported URL scheme: " + scheme);
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = url.substr(0, path_start);
  if (ep.origin.size() <= scheme_end + 3) throw Error("base URL lacks a host: " + url);
  if (path_start != std::string::npos) ep.prefix = url.substr(path_start);
  while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  return ep;
}

// Integral temperatures are written as JSON integers ("temperature":0).
json temperature_json(double t) {
  if (t == std::floor(t) && t < 1e9) return static_cast<std::int64_t>(t);
  return t;
}

json messages_json(const std::vector<ChatMessage>& messages) {
  auto arr = json::array();
  for (const auto& m : messages) arr.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return arr;
}

std::string post_json(const EngineDescriptor& descriptor, const std::string& path, const std::string& body,
                      std::chrono::seconds timeout) {
  const auto ep = parse_base_url(descriptor.base_url);
  httplib::Client client(ep.origin);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  if (!descriptor.api_key_env.empty()) {
    if (const char* key = std::getenv(descriptor.api_key_env.c_str()); key && *key)
      headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  auto res = client.Post(ep.prefix + path, headers, body, "application/json");
  if (!res) {
    throw EngineError(EngineError::Kind::transport,
                      "request to " + descriptor.base_url + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 401) {
    throw EngineError(EngineError::Kind::auth, "backend rejected credentials (HTTP 401)", res->status, res->body);
  }
  if (res->status >= 400) {
    throw EngineError(EngineError::Kind::transport, "backend returned HTTP " + std::to_string(res->status),
                      res->status, res->body);
  }
  return res->body;
}

json parse_response(const std::string& body) {
  auto parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded()) throw EngineError(EngineError::Kind::protocol, "response body is not JSON", 200, body);
  return parsed;
}

[[noreturn]] void protocol_error(const std::string& what, const std::string& body) {
  throw EngineError(EngineError::Kind::protocol, "response lacks " + what, 200, body);
}

}  // namespace

OpenAICompatibleEngine::OpenAICompatibleEngine(EngineDescriptor descriptor) : InferenceEngine(std::move(descriptor)) {
  parse_base_url(this->descriptor().base_url);
  if (this->descriptor().model.empty()) throw Error("model must be set for an OpenAI-compatible engine");
}

std::string OpenAICompatibleEngine::build_request(const std::vector<ChatMessage>& messages,
                                                  const GenerationConfig& config) const {
  json body = {{"model", descriptor().model},
               {"messages", messages_json(messages)},
               {"temperature", temperature_json(config.temperature)},
               {"max_tokens", config.max_tokens}};
  if (!config.stop_sequences.empty()) body["stop"] = config.stop_sequences;
  return body.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string OpenAICompatibleEngine::send(const std::vector<ChatMessage>& messages, const GenerationConfig& config,
                                         std::string& request_body) {
  request_body = build_request(messages, config);
  const auto body = post_json(descriptor(), "/chat/completions", request_body, timeout());
  const auto parsed = parse_response(body);
  if (!parsed.is_object() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
      parsed["choices"].empty())
    protocol_error("choices[0]", body);
  const auto& choice = parsed["choices"][0];
  if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object())
    protocol_error("choices[0].message", body);
  const auto& content = choice["message"].value("content", json());
  if (!content.is_string()) protocol_error("choices[0].message.content", body);
  return content.get<std::string>();
}

OllamaEngine::OllamaEngine(EngineDescriptor descriptor) : InferenceEngine(std::move(descriptor)) {
  parse_base_url(this->descriptor().base_url);
  if (this->descriptor().model.empty()) throw Error("model must be set for an Ollama engine");
}

std::string OllamaEngine::build_request(const std::vector<ChatMessage>& messages,
                                        const GenerationConfig& config) const {
  json options = {{"temperature", temperature_json(config.temperature)}, {"num_predict", config.max_tokens}};
  if (!config.stop_sequences.empty()) options["stop"] = config.stop_sequences;
  json body = {{"model", descriptor().model},
               {"messages", messages_json(messages)},
               {"stream", false},
               {"options", options}};
  return body.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string OllamaEngine::send(const std::vector<ChatMessage>& messages, const GenerationConfig& config,
                               std::string& request_body) {
  request_body = build_request(messages, config);
  const auto body = post_json(descriptor(), "/api/chat", request_body, timeout());
  const auto parsed = parse_response(body);
  if (!parsed.is_object() || !parsed.contains("message") || !parsed["message"].is_object())
    protocol_error("message", body);
  const auto& content = parsed["message"].value("content", json());
  if (!content.is_string()) protocol_error("message.content", body);
  return content.get<std::string>();
}

ScriptedEngine::ScriptedEngine(std::vector<ScriptRule> rules)
    : InferenceEngine(EngineDescriptor{EngineKind::scripted, {}, "scripted", {}}), rules_(std::move(rules)) {
  if (rules_.empty()) throw EngineError(EngineError::Kind::precondition, "scripted engine needs at least one rule");
}

std::string ScriptedEngine::send(const std::vector<ChatMessage>& messages, const GenerationConfig&,
                                 std::string& request_body) {
  ++calls_;
  std::string joined;
  for (const auto& m : messages) {
    joined += m.content;
    joined += '\n';
  }
  request_body.clear();
  for (const auto& rule : rules_) {
    if (joined.find(rule.match) != std::string::npos) return rule.response;
  }
  throw EngineError(EngineError::Kind::no_rule_matched, "no scripted rule matched the prompt");
}

std::vector<ScriptRule> load_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open script file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  auto parsed = json::parse(buf.str(), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_array()) throw Error("script file must hold a JSON array: " + path);
  std::vector<ScriptRule> rules;
  for (const auto& item : parsed) {
    if (!item.is_object() || !item.contains("match") || !item["match"].is_string() || !item.contains("response") ||
        !item["response"].is_string())
      throw Error("script rules need string \"match\" and \"response\" fields: " + path);
    rules.push_back({item["match"].get<std::string>(), item["response"].get<std::string>()});
  }
  return rules;
}

std::shared_ptr<InferenceEngine> make_engine(const EngineDescriptor& descriptor, std::vector<ScriptRule> script_rules) {
  switch (descriptor.kind) {
    case EngineKind::openai_compatible: return std::make_shared<OpenAICompatibleEngine>(descriptor);
    case EngineKind::ollama: return std::make_shared<OllamaEngine>(descriptor);
    case EngineKind::scripted: return std::make_shared<ScriptedEngine>(std::move(script_rules));
  }
  throw Error("unknown engine kind");
}

}  // namespace llmie
