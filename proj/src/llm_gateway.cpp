#include "termmap/llm_gateway.hpp"

#include <cstdio>

#include <httplib.h>
#include <json.hpp>

#include "http_util.hpp"
#include "termmap/error.hpp"
#include "termmap/text.hpp"

namespace termmap {

namespace {

constexpr std::string_view kRole =
    "You are an assistant that suggests formal RxNorm names for a medication. "
    "You will be given the name of a medication";
constexpr std::string_view kRelatedTerms =
    ", along with some possibly related RxNorm terms. If you do not think "
    "these terms are related, ignore them when making your suggestion.";
constexpr std::string_view kRespondOnly =
    "Respond only with the formal name of the medication, without any extra "
    "explanation.";
constexpr std::string_view kRelatedHeader = "Possibly related RxNorm terms:";

std::string single_line(std::string_view s) {
  std::string out(trim(s));
  for (auto& c : out) {
    if (c == '\n' || c == '\r' || c == '\t') c = ' ';
  }
  return out;
}

std::string user_text_for(std::string_view name) {
  return "Informal name: " + single_line(name) + "\nResponse:";
}

void require_name(std::string_view name) {
  if (trim(name).empty()) {
    throw Error(ErrorCode::InvalidInput, "informal name must not be empty");
  }
}

std::size_t count_words(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    const bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

const std::vector<FewShotPair>& default_few_shot() {
  static const std::vector<FewShotPair> pairs = {
      {"Tylenol", "Acetaminophen"},
      {"Advil", "Ibuprofen"},
      {"Motrin", "Ibuprofen"},
      {"Aleve", "Naproxen"},
  };
  return pairs;
}

Prompt build_simple_prompt(std::string_view informal_name) {
  require_name(informal_name);
  Prompt p;
  p.system_text = std::string(kRole) + ".\n\n" + std::string(kRespondOnly);
  p.few_shot = default_few_shot();
  p.user_text = user_text_for(informal_name);
  return p;
}

Prompt build_rag_prompt(std::string_view informal_name,
                        const std::vector<VectorHit>& hits) {
  if (hits.empty()) return build_simple_prompt(informal_name);
  require_name(informal_name);
  Prompt p;
  p.system_text = std::string(kRole) + std::string(kRelatedTerms) + "\n\n" +
                  std::string(kRespondOnly);
  p.few_shot = default_few_shot();
  p.user_text = user_text_for(informal_name);
  std::vector<std::string> terms;
  terms.reserve(hits.size());
  for (const auto& h : hits) terms.push_back(single_line(h.concept_name));
  p.retrieved_terms = std::move(terms);
  return p;
}

std::string render_prompt(const Prompt& prompt) {
  std::string out = prompt.system_text;
  out += "\n\n";
  for (const auto& pair : prompt.few_shot) {
    out += "Informal name: " + pair.informal + "\nResponse: " + pair.formal + "\n\n";
  }
  if (prompt.retrieved_terms) {
    out += kRelatedHeader;
    out += '\n';
    for (const auto& term : *prompt.retrieved_terms) out += "- " + term + "\n";
    out += '\n';
  }
  out += prompt.user_text;
  return out;
}

// ---- stub backend ---------------------------------------------------------

StubBackend::StubBackend(std::vector<std::pair<std::string, std::string>> replies)
    : replies_(std::move(replies)) {}

void StubBackend::add_reply(std::string key, std::string reply) {
  std::lock_guard lock(mu_);
  replies_.emplace_back(std::move(key), std::move(reply));
}

void StubBackend::set_fallback(std::optional<std::string> reply) {
  std::lock_guard lock(mu_);
  fallback_ = std::move(reply);
}

void StubBackend::set_token_counts(int prompt_tokens, int completion_tokens) {
  std::lock_guard lock(mu_);
  token_counts_ = {prompt_tokens, completion_tokens};
}

void StubBackend::set_model(std::string model) {
  std::lock_guard lock(mu_);
  model_ = std::move(model);
}

Completion StubBackend::complete(const Prompt& prompt, const GenerationParams&) {
  ++calls_;
  if (!reachable_) {
    throw Error(ErrorCode::BackendUnavailable, "stub backend is marked unreachable");
  }
  const std::string rendered = render_prompt(prompt);
  std::lock_guard lock(mu_);
  Completion c;
  for (const auto& [key, reply] : replies_) {
    if (prompt.user_text.find(key) != std::string::npos) {
      c.text = reply;
      break;
    }
  }
  if (c.text.empty() && fallback_) c.text = *fallback_;
  c.id = "cmpl-" + hex64(fnv1a64(rendered));
  c.created = created_;
  c.model = model_;
  c.finish_reason = "stop";
  if (token_counts_) {
    c.prompt_tokens = token_counts_->first;
    c.completion_tokens = token_counts_->second;
  } else {
    c.prompt_tokens = static_cast<int>(count_words(rendered));
    c.completion_tokens = static_cast<int>(count_words(c.text));
  }
  return c;
}

// ---- remote backend -------------------------------------------------------

RemoteCompletionBackend::RemoteCompletionBackend(RemoteCompletionConfig config)
    : config_(std::move(config)) {
  if (config_.base_url.empty()) {
    throw Error(ErrorCode::InvalidInput, "generation endpoint base URL is not set");
  }
  detail::split_url(config_.base_url, ErrorCode::InvalidInput);
  if (config_.max_in_flight == 0) config_.max_in_flight = 1;
  slots_ = std::make_unique<std::counting_semaphore<>>(
      static_cast<std::ptrdiff_t>(config_.max_in_flight));
}

Completion RemoteCompletionBackend::complete(const Prompt& prompt,
                                             const GenerationParams& params) {
  const auto url = detail::split_url(
      detail::join_url(config_.base_url, config_.completions_path),
      ErrorCode::BackendUnavailable);
  nlohmann::json body = {
      {"prompt", render_prompt(prompt)},
      {"max_tokens", params.max_tokens},
      {"temperature", params.temperature},
      {"stop", params.stop},
  };
  if (!config_.model.empty()) body["model"] = config_.model;

  httplib::Result res;
  {
    detail::SlotGuard slot(*slots_);
    httplib::Client client(url.origin);
    const auto secs = config_.timeout.count() / 1000;
    const auto usecs = (config_.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    res = client.Post(url.path, body.dump(), "application/json");
  }
  if (!res) {
    throw Error(ErrorCode::BackendUnavailable,
                "generation endpoint " + config_.base_url +
                    " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::BackendUnavailable,
                "generation endpoint returned HTTP " + std::to_string(res->status));
  }

  Completion c;
  try {
    const auto j = nlohmann::json::parse(res->body);
    const auto& choice = j.at("choices").at(0);
    c.text = choice.value("text", "");
    if (auto fr = choice.find("finish_reason"); fr != choice.end() && fr->is_string()) {
      c.finish_reason = fr->get<std::string>();
    }
    c.id = j.value("id", "");
    c.object = j.value("object", "text_completion");
    c.created = j.value("created", std::int64_t{0});
    c.model = j.value("model", config_.model);
    if (auto it = j.find("usage"); it != j.end() && it->is_object()) {
      if (it->contains("prompt_tokens")) c.prompt_tokens = (*it)["prompt_tokens"].get<int>();
      if (it->contains("completion_tokens")) {
        c.completion_tokens = (*it)["completion_tokens"].get<int>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BackendUnavailable,
                std::string("malformed completion response: ") + e.what());
  }
  return c;
}

bool RemoteCompletionBackend::reachable() const {
  try {
    const auto url = detail::split_url(
        detail::join_url(config_.base_url, config_.health_path),
        ErrorCode::BackendUnavailable);
    httplib::Client client(url.origin);
    client.set_connection_timeout(2, 0);
    client.set_read_timeout(2, 0);
    auto res = client.Get(url.path);
    return res && res->status < 500;
  } catch (...) {
    return false;
  }
}

// ---- parsing --------------------------------------------------------------

std::string parse_reply(std::string_view raw_text) {
  std::size_t pos = 0;
  while (pos <= raw_text.size()) {
    auto end = raw_text.find('\n', pos);
    if (end == std::string_view::npos) end = raw_text.size();
    std::string_view line = trim(raw_text.substr(pos, end - pos));
    pos = end + 1;

    constexpr std::string_view kLabel = "response:";
    if (line.size() >= kLabel.size() &&
        to_lower_ascii(line.substr(0, kLabel.size())) == kLabel) {
      line = trim(line.substr(kLabel.size()));
    }
    while (line.size() >= 2 && ((line.front() == '"' && line.back() == '"') ||
                                (line.front() == '\'' && line.back() == '\''))) {
      line = trim(line.substr(1, line.size() - 2));
    }
    if (!line.empty()) return std::string(line);
  }
  throw Error(ErrorCode::EmptyGeneration, "generation produced no usable text");
}

LlmReply generate(const Prompt& prompt, GenerationBackend& backend,
                  const GenerationParams& params) {
  Completion c = backend.complete(prompt, params);
  LlmReply out;
  out.raw_text = c.text;
  out.reply = parse_reply(c.text);
  out.meta.id = std::move(c.id);
  out.meta.object = std::move(c.object);
  out.meta.model = std::move(c.model);
  out.meta.created = c.created;
  out.meta.finish_reason = std::move(c.finish_reason);
  out.meta.usage_reported = c.prompt_tokens.has_value() && c.completion_tokens.has_value();
  out.meta.prompt_tokens = c.prompt_tokens.value_or(-1);
  out.meta.completion_tokens = c.completion_tokens.value_or(-1);
  if (out.meta.usage_reported) {
    out.meta.total_tokens = out.meta.prompt_tokens + out.meta.completion_tokens;
  }
  return out;
}

}  // namespace termmap
