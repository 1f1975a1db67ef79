#include "llmie/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "llmie/datamodel.hpp"
#include "llmie/engine.hpp"
#include "llmie/evaluation.hpp"
#include "llmie/extractors.hpp"
#include "llmie/prompt_editor.hpp"
#include "llmie/render.hpp"
#include "llmie/server.hpp"

namespace llmie::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

// Raised for bad flag combinations discovered after parsing.
struct UsageError : Error {
  using Error::Error;
};

struct EngineFlags {
  std::string kind;
  std::string base_url;
  std::string model;
  std::string api_key_env;
  std::string script;
};

void add_engine_flags(CLI::App& cmd, EngineFlags& flags, bool required) {
  auto* opt = cmd.add_option("--engine", flags.kind, "Inference backend")
                  ->check(CLI::IsMember({"openai", "ollama", "scripted"}));
  if (required) opt->required();
  cmd.add_option("--base-url", flags.base_url, "Backend base URL");
  cmd.add_option("--model", flags.model, "Model name");
  cmd.add_option("--api-key-env", flags.api_key_env, "Environment variable holding the API key");
  cmd.add_option("--script", flags.script, "Scripted engine rules (JSON) for the scripted backend");
}

std::shared_ptr<InferenceEngine> build_engine(const EngineFlags& flags) {
  EngineDescriptor d;
  d.kind = engine_kind_from_string(flags.kind);
  d.base_url = flags.base_url;
  d.model = flags.model;
  d.api_key_env = flags.api_key_env;
  if (d.kind == EngineKind::scripted) {
    if (flags.script.empty()) throw UsageError("--engine scripted requires --script FILE");
    return make_engine(d, load_script(flags.script));
  }
  if (d.base_url.empty())
    d.base_url = d.kind == EngineKind::ollama ? "http://localhost:11434" : "https://api.openai.com/v1";
  if (d.model.empty()) throw UsageError("--model is required for --engine " + flags.kind);
  try {
    return make_engine(d);
  } catch (const EngineError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned int i = 0; i < length; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::vector<fs::path> list_files(const fs::path& input, const std::string& extension) {
  std::vector<fs::path> files;
  if (fs::is_directory(input)) {
    for (const auto& entry : fs::directory_iterator(input))
      if (entry.is_regular_file() && entry.path().extension() == extension) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(input)) {
    files.push_back(input);
  }
  return files;
}

// ---- extract ---------------------------------------------------------------

struct ExtractFlags {
  EngineFlags engine;
  std::string template_path;
  std::string extractor = "basic";
  std::string input;
  std::string output;
  bool relations = false;
  std::string relation_template;
  std::string relation_mode = "binary";
  std::string filter;
  std::size_t concurrency = 1;
  std::string review_mode = "addition";
  std::size_t context_padding = 200;
};

FrameExtraction run_frames(const std::string& kind, const ExtractorConfig& config, const std::string& text) {
  if (kind == "review") return review_extract(config, text);
  if (kind == "sentence") return sentence_extract(config, text);
  return basic_extract(config, text);
}

bool engine_unreachable(const EngineError& e) {
  return e.kind() == EngineError::Kind::transport && e.status() == 0;
}

int cmd_extract(const ExtractFlags& flags, std::ostream& out, std::ostream& err) {
  const auto started = utc_now();
  auto engine = build_engine(flags.engine);

  ExtractorConfig frame_config;
  frame_config.engine = engine;
  const auto template_text = read_text(flags.template_path);
  frame_config.prompt = PromptTemplate(template_text);
  frame_config.max_concurrency = flags.concurrency;
  frame_config.review_mode = flags.review_mode == "revision" ? ReviewMode::revision : ReviewMode::addition;
  if (!frame_config.prompt.has_placeholder("input")) throw UsageError("--template must contain an {{input}} placeholder");

  std::optional<ExtractorConfig> relation_config;
  std::optional<TypePairFilter> filter;
  std::string relation_template_text;
  if (flags.relations) {
    if (flags.relation_template.empty()) throw UsageError("--relations requires --relation-template FILE");
    relation_template_text = read_text(flags.relation_template);
    relation_config = frame_config;
    relation_config->prompt = PromptTemplate(relation_template_text);
    relation_config->context_padding = flags.context_padding;
    if (!flags.filter.empty()) {
      try {
        filter = TypePairFilter::load(flags.filter);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
    } else if (flags.relation_mode == "multiclass") {
      throw UsageError("--relation-mode multiclass requires --filter FILE");
    }
  }

  const auto inputs = list_files(flags.input, ".txt");
  if (inputs.empty()) throw UsageError("no .txt input found at " + flags.input);
  fs::create_directories(flags.output);

  PossibleTypesFn possible_types = [](const Frame&, const Frame&) {
    return std::vector<std::string>{"Related", std::string(kNoRelation)};
  };
  if (filter) possible_types = *filter;

  ordered_json documents = ordered_json::array();
  std::size_t total_frames = 0, total_relations = 0, total_discarded = 0, total_calls = 0, failures = 0;
  for (const auto& input : inputs) {
    const auto doc_id = input.stem().string();
    ordered_json entry{{"doc_id", doc_id}, {"input", input.string()}};
    try {
      const auto text = read_text(input);
      auto frames = run_frames(flags.extractor, frame_config, text);
      IEDocument doc(doc_id, text);
      for (auto& f : frames.frames) doc.add_frame(std::move(f), DuplicatePolicy::allow);
      std::size_t calls = frames.llm_calls;
      std::vector<std::string> notes = frames.notes;
      if (relation_config) {
        const auto tasks = enumerate_pairs(text, doc.frames(), possible_types, relation_config->context_padding);
        auto rels = flags.relation_mode == "multiclass" ? multiclass_relation_extract(*relation_config, tasks)
                                                        : binary_relation_extract(*relation_config, tasks);
        calls += rels.llm_calls;
        notes.insert(notes.end(), rels.notes.begin(), rels.notes.end());
        for (auto& r : rels.relations) doc.add_relation(std::move(r));
      }
      const auto output = fs::path(flags.output) / (doc_id + ".llmie");
      save(doc, output);
      total_frames += doc.frames().size();
      total_relations += doc.relations().size();
      total_discarded += frames.discarded;
      total_calls += calls;
      entry["output"] = output.string();
      entry["frames"] = doc.frames().size();
      entry["relations"] = doc.relations().size();
      entry["discarded_records"] = frames.discarded;
      entry["llm_calls"] = calls;
      entry["notes"] = notes;
      out << doc_id << ": " << doc.frames().size() << " frames, " << doc.relations().size() << " relations\n";
    } catch (const EngineError& e) {
      if (engine_unreachable(e)) {
        err << "error: inference engine unreachable: " << e.what() << "\n";
        return kExitUnavailable;
      }
      ++failures;
      entry["error"] = e.what();
      err << "error: " << doc_id << ": " << e.what() << "\n";
    } catch (const Error& e) {
      ++failures;
      entry["error"] = e.what();
      err << "error: " << doc_id << ": " << e.what() << "\n";
    }
    documents.push_back(std::move(entry));
  }

  ordered_json manifest{
      {"engine",
       {{"kind", to_string(engine->descriptor().kind)},
        {"base_url", engine->descriptor().base_url},
        {"model", engine->descriptor().model},
        {"api_key_env", engine->descriptor().api_key_env}}},
      {"template", {{"path", flags.template_path}, {"sha256", sha256_hex(template_text)}}},
      {"extractor",
       {{"kind", flags.extractor},
        {"max_concurrency", flags.concurrency},
        {"review_mode", flags.review_mode},
        {"temperature", frame_config.generation.temperature},
        {"max_tokens", frame_config.generation.max_tokens}}},
  };
  if (relation_config) {
    manifest["relations"] = {{"template", {{"path", flags.relation_template}, {"sha256", sha256_hex(relation_template_text)}}},
                             {"mode", flags.relation_mode},
                             {"filter", flags.filter.empty() ? ordered_json(nullptr) : ordered_json(flags.filter)},
                             {"context_padding", flags.context_padding}};
  }
  ordered_json input_list = ordered_json::array();
  for (const auto& p : inputs) input_list.push_back(p.string());
  manifest["inputs"] = std::move(input_list);
  manifest["started_at"] = started;
  manifest["finished_at"] = utc_now();
  manifest["counts"] = {{"documents", inputs.size()},
                        {"failed_documents", failures},
                        {"frames", total_frames},
                        {"relations", total_relations},
                        {"discarded_records", total_discarded},
                        {"llm_calls", total_calls}};
  manifest["documents"] = std::move(documents);
  std::ofstream mf(fs::path(flags.output) / "manifest.json", std::ios::binary | std::ios::trunc);
  mf << manifest.dump(2, ' ', false, ordered_json::error_handler_t::replace) << "\n";
  return failures > 0 ? kExitPartialFailure : kExitOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalFlags {
  std::string gold;
  std::string pred;
  std::string mode = "strict";
  std::vector<std::string> attributes;
  bool relations = false;
  std::string type_attribute = "Type";
  std::string format = "text";
};

std::map<std::string, IEDocument> load_dir(const std::string& dir) {
  std::map<std::string, IEDocument> docs;
  for (const auto& path : list_files(dir, ".llmie")) {
    auto doc = load(path);
    docs.emplace(doc.doc_id(), std::move(doc));
  }
  return docs;
}

int cmd_eval(const EvalFlags& flags, std::ostream& out, std::ostream& err) {
  if (!fs::is_directory(flags.gold)) throw UsageError("--gold must be a directory");
  if (!fs::is_directory(flags.pred)) throw UsageError("--pred must be a directory");
  const auto gold = load_dir(flags.gold);
  const auto pred = load_dir(flags.pred);
  const MatchPolicy policy{match_mode_from_string(flags.mode), flags.type_attribute};

  std::vector<std::string> gold_only, pred_only, shared;
  for (const auto& [id, _] : gold) (pred.contains(id) ? shared : gold_only).push_back(id);
  for (const auto& [id, _] : pred)
    if (!gold.contains(id)) pred_only.push_back(id);
  if (shared.empty()) {
    err << "error: gold and prediction directories share no doc_id\n";
    return kExitNoOverlap;
  }

  MetricsReport ner;
  MetricsReport rel;
  // Matched frames from all documents, flattened so attribute accuracy pools counts.
  std::vector<Frame> matched_pred, matched_gold;
  std::vector<MatchedPair> pooled;
  for (const auto& id : shared) {
    const auto& p = pred.at(id);
    const auto& g = gold.at(id);
    const auto pairs = match_frames(p.frames(), g.frames(), policy);
    MetricsReport doc_report;
    doc_report.true_positives = pairs.size();
    doc_report.false_positives = p.frames().size() - pairs.size();
    doc_report.false_negatives = g.frames().size() - pairs.size();
    ner += doc_report;
    for (const auto& pair : pairs) {
      pooled.push_back({matched_pred.size(), matched_gold.size()});
      matched_pred.push_back(p.frames()[pair.pred]);
      matched_gold.push_back(g.frames()[pair.gold]);
    }
    if (flags.relations) rel += relation_metrics(p, g, policy.mode);
  }
  ner.finalize();
  ner.per_attribute_accuracy = attribute_accuracy(matched_pred, matched_gold, pooled, flags.attributes);

  if (flags.format == "json") {
    ordered_json j{{"mode", flags.mode}, {"documents", shared.size()}, {"ner", to_json(ner)}};
    if (flags.relations) j["relations"] = to_json(rel);
    j["gold_only"] = gold_only;
    j["pred_only"] = pred_only;
    out << j.dump(2) << "\n";
  } else {
    out << "Documents scored: " << shared.size() << " (mode " << flags.mode << ")\n\n";
    out << format_table("Named entity recognition", ner);
    if (flags.relations) out << "\n" << format_table("Relation extraction", rel);
    for (const auto& id : gold_only) out << "unmatched gold doc_id: " << id << "\n";
    for (const auto& id : pred_only) out << "unmatched pred doc_id: " << id << "\n";
  }
  return kExitOk;
}

// ---- chat ------------------------------------------------------------------

struct ChatFlags {
  EngineFlags engine;
  std::string extractor = "basic";
  std::string guidelines;
};

int cmd_chat(const ChatFlags& flags, std::istream& in, std::ostream& out, std::ostream& err) {
  auto engine = build_engine(flags.engine);
  const auto store =
      GuidelineStore::load(flags.guidelines.empty() ? GuidelineStore::default_directory() : fs::path(flags.guidelines));
  if (!store.contains(flags.extractor)) throw UsageError("unknown extractor kind " + flags.extractor);
  auto session = new_session(store, flags.extractor, engine);

  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == "/quit") break;
    if (line.rfind("/save", 0) == 0) {
      auto path = line.substr(5);
      path.erase(0, path.find_first_not_of(" \t"));
      if (path.empty()) {
        out << "error: usage /save FILE\n";
        continue;
      }
      const auto reply = session.last_reply();
      if (reply.empty()) {
        out << "error: no assistant reply to save yet\n";
        continue;
      }
      try {
        const auto tmpl = extract_template(reply);
        std::ofstream file(path, std::ios::binary | std::ios::trunc);
        if (!file) {
          out << "error: cannot write " << path << "\n";
          continue;
        }
        file << tmpl.text();
        std::string names;
        for (const auto& p : tmpl.placeholders()) names += (names.empty() ? "" : ", ") + p;
        out << "saved template to " << path << " (placeholders: " << names << ")\n";
      } catch (const TemplateError& e) {
        out << "error: " << e.what() << "\n";
      }
      continue;
    }
    try {
      const auto reply = session.chat_turn(line);
      out << "assistant> " << reply << "\n";
    } catch (const EngineError& e) {
      err << "error: " << e.what() << "\n";
    }
  }
  return kExitOk;
}

// ---- render / serve --------------------------------------------------------

int cmd_render(const std::string& input, const std::string& output, std::ostream& out) {
  IEDocument doc;
  try {
    doc = load(input);
  } catch (const DocumentError& e) {
    throw UsageError(e.what());
  }
  std::ofstream file(output, std::ios::binary | std::ios::trunc);
  if (!file) throw UsageError("cannot write " + output);
  file << viz_render(doc);
  out << "rendered " << doc.doc_id() << " to " << output << "\n";
  return kExitOk;
}

std::atomic<WorkbenchServer*> g_running_server{nullptr};

extern "C" void handle_interrupt(int) {
  if (auto* server = g_running_server.load()) server->stop();
}

struct ServeFlags {
  EngineFlags engine;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string docs;
  std::string static_dir;
  std::string guidelines;
  int timeout = 300;
};

int cmd_serve(const ServeFlags& flags, std::ostream& out, std::ostream& err) {
  if (!fs::is_directory(flags.docs)) throw UsageError("--docs must be a readable directory");
  ServerOptions options;
  options.docs_dir = flags.docs;
  if (!flags.static_dir.empty()) options.static_dir = fs::path(flags.static_dir);
  if (!flags.guidelines.empty()) options.guidelines_dir = flags.guidelines;
  if (!flags.engine.kind.empty()) options.engine = build_engine(flags.engine);
  options.request_timeout = std::chrono::seconds(flags.timeout);

  WorkbenchServer server(std::move(options));
  const int port = server.bind(flags.host, flags.port);
  if (port < 0) {
    err << "error: cannot bind " << flags.host << ":" << flags.port << "\n";
    return kExitUnavailable;
  }
  out << "serving on http://" << flags.host << ":" << port << "/\n" << std::flush;
  g_running_server = &server;
  std::signal(SIGINT, handle_interrupt);
  std::signal(SIGTERM, handle_interrupt);
  server.listen();
  g_running_server = nullptr;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"LLM-based information extraction toolkit", "llmie"};
  app.require_subcommand(1);

  ExtractFlags extract;
  auto* extract_cmd = app.add_subcommand("extract", "Extract frames (and relations) from text files");
  add_engine_flags(*extract_cmd, extract.engine, true);
  extract_cmd->add_option("--template", extract.template_path, "Frame prompt template")->required();
  extract_cmd->add_option("--extractor", extract.extractor)->check(CLI::IsMember({"basic", "review", "sentence"}));
  extract_cmd->add_option("--input", extract.input, "Text file or directory of .txt files")->required();
  extract_cmd->add_option("--output", extract.output, "Output directory")->required();
  extract_cmd->add_flag("--relations", extract.relations, "Also extract relations");
  extract_cmd->add_option("--relation-template", extract.relation_template);
  extract_cmd->add_option("--relation-mode", extract.relation_mode)->check(CLI::IsMember({"binary", "multiclass"}));
  extract_cmd->add_option("--filter", extract.filter, "Relation pre-filter rules (JSON)");
  extract_cmd->add_option("--concurrency", extract.concurrency)->check(CLI::PositiveNumber);
  extract_cmd->add_option("--review-mode", extract.review_mode)->check(CLI::IsMember({"addition", "revision"}));
  extract_cmd->add_option("--context-padding", extract.context_padding);

  EvalFlags eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score predicted documents against gold documents");
  eval_cmd->add_option("--gold", eval.gold)->required();
  eval_cmd->add_option("--pred", eval.pred)->required();
  eval_cmd->add_option("--mode", eval.mode)->check(CLI::IsMember({"strict", "relaxed", "lenient"}));
  eval_cmd->add_option("--attributes", eval.attributes)->delimiter(',');
  eval_cmd->add_flag("--relations", eval.relations);
  eval_cmd->add_option("--type-attribute", eval.type_attribute);
  eval_cmd->add_option("--format", eval.format)->check(CLI::IsMember({"text", "json"}));

  ChatFlags chat;
  auto* chat_cmd = app.add_subcommand("chat", "Develop a prompt template with the prompt editor");
  add_engine_flags(*chat_cmd, chat.engine, true);
  chat_cmd->add_option("--extractor", chat.extractor, "Extractor kind the template is for");
  chat_cmd->add_option("--guidelines", chat.guidelines, "Guideline directory");

  std::string render_input, render_output;
  auto* render_cmd = app.add_subcommand("render", "Render a document as a standalone HTML page");
  render_cmd->add_option("--input", render_input)->required();
  render_cmd->add_option("--output", render_output)->required();

  ServeFlags serve;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the workbench and its JSON API");
  add_engine_flags(*serve_cmd, serve.engine, false);
  serve_cmd->add_option("--host", serve.host);
  serve_cmd->add_option("--port", serve.port);
  serve_cmd->add_option("--docs", serve.docs)->required();
  serve_cmd->add_option("--static", serve.static_dir, "Built workbench assets");
  serve_cmd->add_option("--guidelines", serve.guidelines, "Guideline directory");
  serve_cmd->add_option("--timeout", serve.timeout, "Request timeout in seconds")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*extract_cmd) return cmd_extract(extract, out, err);
    if (*eval_cmd) return cmd_eval(eval, out, err);
    if (*chat_cmd) return cmd_chat(chat, in, out, err);
    if (*render_cmd) return cmd_render(render_input, render_output, out);
    if (*serve_cmd) return cmd_serve(serve, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const EngineError& e) {
    err << "error: " << e.what() << "\n";
    return engine_unreachable(e) ? kExitUnavailable : kExitPartialFailure;
  } catch (const TemplateError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitPartialFailure;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitPartialFailure;
  }
  return kExitUsage;
}

}  // namespace llmie::cli
