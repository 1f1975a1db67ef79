#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "llmie/errors.hpp"

namespace llmie {

enum class Role { system, user, assistant };

std::string_view to_string(Role role);
Role role_from_string(std::string_view name);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct GenerationConfig {
  double temperature = 0.0;
  int max_tokens = 4096;
  std::vector<std::string> stop_sequences;
};

enum class EngineKind { openai_compatible, ollama, scripted };

std::string_view to_string(EngineKind kind);
EngineKind engine_kind_from_string(std::string_view name);

struct EngineDescriptor {
  EngineKind kind = EngineKind::scripted;
  std::string base_url;
  std::string model;
  // Name of the environment variable holding the bearer token; may be empty.
  std::string api_key_env;
};

class EngineError : public Error {
 public:
  enum class Kind {
    precondition,
    transport,
    auth,
    protocol,
    empty_completion,
    no_rule_matched,
  };

  EngineError(Kind kind, std::string message, int status = 0, std::string body = {});

  Kind kind() const { return kind_; }
  // HTTP status for transport/auth errors; 0 when the connection itself failed.
  int status() const { return status_; }
  const std::string& body() const { return body_; }

 private:
  Kind kind_;
  int status_;
  std::string body_;
};

// One chat() call as seen by the caller, successful or not.
struct InspectionRecord {
  std::vector<ChatMessage> messages;
  GenerationConfig config;
  // Wire request body (empty for the scripted engine).
  std::string request_body;
  std::optional<std::string> response;
  std::string error;
  int attempts = 0;
};

// Append-only, thread-safe record of every request and response.
class InspectionLog {
 public:
  void append(InspectionRecord record);
  std::size_t size() const;
  std::vector<InspectionRecord> snapshot() const;

 private:
  mutable std::mutex mutex_;
  std::vector<InspectionRecord> records_;
};

struct RetryPolicy {
  int transport_retries = 1;
  std::chrono::milliseconds backoff{1000};
};

// Uniform front door to all inference backends. chat() validates the
// request, applies retries and stop-sequence cuts, and records the exchange.
class InferenceEngine {
 public:
  explicit InferenceEngine(EngineDescriptor descriptor);
  virtual ~InferenceEngine() = default;

  InferenceEngine(const InferenceEngine&) = delete;
  InferenceEngine& operator=(const InferenceEngine&) = delete;

  std::string chat(const std::vector<ChatMessage>& messages, const GenerationConfig& config = {});

  const EngineDescriptor& descriptor() const { return descriptor_; }
  const InspectionLog& log() const { return log_; }

  void set_retry_policy(RetryPolicy policy) { retry_ = policy; }
  void set_timeout(std::chrono::seconds timeout) { timeout_ = timeout; }

 protected:
  // Performs one backend round trip. request_body is filled before any
  // network I/O so it is logged even when the call fails.
  virtual std::string send(const std::vector<ChatMessage>& messages, const GenerationConfig& config,
                           std::string& request_body) = 0;

  std::chrono::seconds timeout() const { return timeout_; }

 private:
  EngineDescriptor descriptor_;
  InspectionLog log_;
  RetryPolicy retry_;
  std::chrono::seconds timeout_{300};
};

// POST {base_url}/chat/completions (OpenAI, vLLM, llama.cpp server, ...).
class OpenAICompatibleEngine : public InferenceEngine {
 public:
  explicit OpenAICompatibleEngine(EngineDescriptor descriptor);

  // Wire body for a request; exposed for inspection and tests.
  std::string build_request(const std::vector<ChatMessage>& messages, const GenerationConfig& config) const;

 protected:
  std::string send(const std::vector<ChatMessage>& messages, const GenerationConfig& config,
                   std::string& request_body) override;
};

// POST {base_url}/api/chat with streaming disabled.
class OllamaEngine : public InferenceEngine {
 public:
  explicit OllamaEngine(EngineDescriptor descriptor);

  std::string build_request(const std::vector<ChatMessage>& messages, const GenerationConfig& config) const;

 protected:
  std::string send(const std::vector<ChatMessage>& messages, const GenerationConfig& config,
                   std::string& request_body) override;
};

struct ScriptRule {
  std::string match;  // substring; empty matches everything
  std::string response;
};

// Deterministic test double: first rule whose matcher occurs in the
// concatenated message contents wins.
class ScriptedEngine : public InferenceEngine {
 public:
  explicit ScriptedEngine(std::vector<ScriptRule> rules);

  std::size_t call_count() const { return calls_.load(); }

 protected:
  std::string send(const std::vector<ChatMessage>& messages, const GenerationConfig& config,
                   std::string& request_body) override;

 private:
  std::vector<ScriptRule> rules_;
  std::atomic<std::size_t> calls_{0};
};

// Reads a JSON array of {"match": ..., "response": ...} objects.
std::vector<ScriptRule> load_script(const std::string& path);

// Builds an engine from a descriptor. Scripted engines take their rules
// from script_rules.
std::shared_ptr<InferenceEngine> make_engine(const EngineDescriptor& descriptor,
                                             std::vector<ScriptRule> script_rules = {});

// Truncates text at the earliest occurrence of any stop sequence.
std::string apply_stop_sequences(std::string text, const std::vector<std::string>& stops);

}  // namespace llmie
