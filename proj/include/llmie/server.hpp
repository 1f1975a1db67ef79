#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "llmie/engine.hpp"
#include "llmie/prompt_editor.hpp"

namespace httplib {
class Server;
}

namespace llmie {

struct ServerOptions {
  std::filesystem::path docs_dir;
  // Built workbench assets served at "/"; a placeholder page when unset.
  std::optional<std::filesystem::path> static_dir;
  std::filesystem::path guidelines_dir = GuidelineStore::default_directory();
  // Null disables /api/extract and the editor endpoints (502).
  std::shared_ptr<InferenceEngine> engine;
  std::chrono::seconds request_timeout{300};
};

// JSON API behind the workbench:
//   GET  /api/docs                      -> ["doc_id", ...]
//   GET  /api/docs/{id}                 -> .llmie document
//   POST /api/extract                   -> .llmie document
//   POST /api/editor/session            -> {"session_id": ...}
//   POST /api/editor/{session}/chat     -> {"reply": ...}
//   POST /api/editor/{session}/template -> {"template": ..., "placeholders": [...]}
// Errors are {"code": ..., "message": ...} with status 400, 404, 422 or 502.
class WorkbenchServer {
 public:
  explicit WorkbenchServer(ServerOptions options);
  ~WorkbenchServer();

  WorkbenchServer(const WorkbenchServer&) = delete;
  WorkbenchServer& operator=(const WorkbenchServer&) = delete;

  // Binds to port (0 picks a free one); returns the bound port or -1.
  int bind(const std::string& host, int port);
  // Serves until stop() is called.
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Session {
    explicit Session(ChatSession c) : chat(std::move(c)) {}
    std::mutex mutex;
    ChatSession chat;
  };

  void install_routes();
  std::shared_ptr<Session> find_session(const std::string& id);

  ServerOptions options_;
  std::unique_ptr<httplib::Server> http_;
  std::optional<GuidelineStore> guidelines_;
  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::size_t next_session_ = 1;
};

}  // namespace llmie
