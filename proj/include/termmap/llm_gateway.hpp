#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "termmap/vector_index.hpp"

namespace termmap {

struct FewShotPair {
  std::string informal;
  std::string formal;

  bool operator==(const FewShotPair&) const = default;
};

/// Canonical prompt structure. Backends decide how to render it; see
/// render_prompt() for the flat-text form used by completion endpoints.
struct Prompt {
  std::string system_text;
  std::vector<FewShotPair> few_shot;
  std::string user_text;
  std::optional<std::vector<std::string>> retrieved_terms;

  bool operator==(const Prompt&) const = default;
};

/// Tylenol, Advil, Motrin, Aleve with their generic names, in that order.
const std::vector<FewShotPair>& default_few_shot();

Prompt build_simple_prompt(std::string_view informal_name);

/// With zero hits this returns exactly build_simple_prompt(informal_name).
Prompt build_rag_prompt(std::string_view informal_name,
                        const std::vector<VectorHit>& hits);

/// Flat text: instructions, blank line, few-shot pairs, optional related
/// terms block, then the query ("Informal name: X\nResponse:").
std::string render_prompt(const Prompt& prompt);

struct GenerationParams {
  int max_tokens = 64;
  double temperature = 0.0;
  std::vector<std::string> stop{"\n"};

  bool operator==(const GenerationParams&) const = default;
};

/// What a backend hands back for one completion.
struct Completion {
  std::string text;
  std::string id;
  std::string object = "text_completion";
  std::int64_t created = 0;
  std::string model;
  std::string finish_reason;
  std::optional<int> prompt_tokens;
  std::optional<int> completion_tokens;
};

struct ReplyMeta {
  std::string id;
  std::string object = "text_completion";
  std::string model;
  std::int64_t created = 0;
  std::string finish_reason;
  int prompt_tokens = -1;
  int completion_tokens = -1;
  int total_tokens = -1;
  /// False when the backend omitted token usage; counts are then -1.
  bool usage_reported = true;

  bool operator==(const ReplyMeta&) const = default;
};

struct LlmReply {
  std::string reply;
  std::string raw_text;
  ReplyMeta meta;

  bool operator==(const LlmReply&) const = default;
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;

  /// Throws BackendUnavailable on timeout or transport failure.
  virtual Completion complete(const Prompt& prompt, const GenerationParams& params) = 0;

  virtual bool reachable() const = 0;
};

/// Deterministic backend for tests: answers from a table keyed by substrings
/// of the prompt's user_text (first matching entry wins).
class StubBackend final : public GenerationBackend {
 public:
  StubBackend() = default;
  explicit StubBackend(std::vector<std::pair<std::string, std::string>> replies);
  StubBackend(std::initializer_list<std::pair<std::string, std::string>> replies)
      : StubBackend(std::vector<std::pair<std::string, std::string>>(replies)) {}

  void add_reply(std::string key, std::string reply);
  void set_fallback(std::optional<std::string> reply);
  /// Fixes the reported token usage instead of counting words.
  void set_token_counts(int prompt_tokens, int completion_tokens);
  void set_reachable(bool reachable) noexcept { reachable_ = reachable; }
  void set_created(std::int64_t created) noexcept { created_ = created; }
  void set_model(std::string model);

  std::size_t call_count() const noexcept { return calls_.load(); }
  void reset_call_count() noexcept { calls_ = 0; }

  Completion complete(const Prompt& prompt, const GenerationParams& params) override;
  bool reachable() const override { return reachable_; }

 private:
  mutable std::mutex mu_;
  std::vector<std::pair<std::string, std::string>> replies_;
  std::optional<std::string> fallback_;
  std::optional<std::pair<int, int>> token_counts_;
  std::string model_ = "stub";
  std::int64_t created_ = 0;
  std::atomic<bool> reachable_{true};
  std::atomic<std::size_t> calls_{0};
};

struct RemoteCompletionConfig {
  std::string base_url;  // e.g. "http://127.0.0.1:8080"
  std::string completions_path = "/v1/completions";
  std::string health_path = "/health";
  std::string model;
  std::chrono::milliseconds timeout{120000};
  std::size_t max_in_flight = 1;
};

/// OpenAI-style text completion client (llama.cpp server and compatible).
/// Request: {"model", "prompt", "max_tokens", "temperature", "stop"} with the
/// prompt rendered by render_prompt().
class RemoteCompletionBackend final : public GenerationBackend {
 public:
  explicit RemoteCompletionBackend(RemoteCompletionConfig config);

  Completion complete(const Prompt& prompt, const GenerationParams& params) override;
  bool reachable() const override;

  const RemoteCompletionConfig& config() const noexcept { return config_; }

 private:
  RemoteCompletionConfig config_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
};

/// First non-empty line, with surrounding whitespace, a leading "Response:"
/// label and surrounding quotes removed. Throws EmptyGeneration when nothing
/// is left.
std::string parse_reply(std::string_view raw_text);

/// Runs the backend and parses its answer. Throws EmptyGeneration for blank
/// output.
LlmReply generate(const Prompt& prompt, GenerationBackend& backend,
                  const GenerationParams& params = {});

}  // namespace termmap
