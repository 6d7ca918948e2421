#include "termret/llm_client.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>

#include "termret/error.hpp"
#include "termret/util.hpp"

namespace termret {

using nlohmann::json;

void ModelConfig::validate() const {
  if (endpoint.empty()) throw Error(ErrorKind::kConfig, "llm endpoint is not set");
  if (model_name.empty()) throw Error(ErrorKind::kConfig, "llm model name is not set");
  if (temperature != 0.0 && !allow_sampling) {
    throw Error(ErrorKind::kConfig, "temperature must be 0 (greedy) unless sampling is explicitly allowed");
  }
  if (parallelism < 1) throw Error(ErrorKind::kConfig, "llm parallelism must be at least 1");
  if (max_output_tokens < 1) throw Error(ErrorKind::kConfig, "max output tokens must be positive");
}

Completion complete(const PromptBundle& prompt, const ModelConfig& cfg) {
  cfg.validate();
  if (prompt.text.empty()) throw Error(ErrorKind::kInvalidArgument, "empty prompt for " + prompt.query_id);
  json request = {{"model", cfg.model_name},
                  {"messages", json::array({{{"role", "user"}, {"content", prompt.text}}})},
                  {"temperature", cfg.temperature},
                  {"max_tokens", cfg.max_output_tokens}};
  std::vector<std::pair<std::string, std::string>> headers;
  if (auto key = api_key_from_env(); !key.empty()) headers.emplace_back("Authorization", "Bearer " + key);

  const auto start = std::chrono::steady_clock::now();
  const HttpReply reply =
      post_json(parse_url(cfg.endpoint), "/chat/completions", request.dump(), headers, cfg.request_timeout, cfg.retry);
  const auto elapsed = std::chrono::steady_clock::now() - start;

  json response;
  try {
    response = json::parse(reply.body);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kHttpError, std::string("completion response is not JSON: ") + e.what());
  }
  const auto choices = response.find("choices");
  if (choices == response.end() || !choices->is_array() || choices->empty()) {
    throw Error(ErrorKind::kContentFilter, "endpoint returned no choices for " + prompt.query_id);
  }
  const json& first = (*choices)[0];
  if (first.value("finish_reason", "") == "content_filter") {
    throw Error(ErrorKind::kContentFilter, "completion for " + prompt.query_id + " was filtered");
  }
  Completion out;
  const auto msg = first.find("message");
  if (msg != first.end() && msg->contains("content") && (*msg)["content"].is_string()) {
    out.text = (*msg)["content"].get<std::string>();
  } else if (first.contains("text") && first["text"].is_string()) {
    out.text = first["text"].get<std::string>();
  } else {
    throw Error(ErrorKind::kContentFilter, "first choice for " + prompt.query_id + " has no content");
  }
  out.latency_ms = std::chrono::duration<double, std::milli>(elapsed).count();
  out.attempts = reply.attempts;
  out.request_id = reply.request_id.empty() ? response.value("id", "") : reply.request_id;
  if (auto u = response.find("usage"); u != response.end() && u->is_object()) {
    out.usage.prompt_tokens = u->value("prompt_tokens", 0L);
    out.usage.completion_tokens = u->value("completion_tokens", 0L);
    out.usage.total_tokens = u->value("total_tokens", 0L);
  }
  return out;
}

std::string prompt_hash(const PromptBundle& prompt) { return sha256_hex(prompt.text); }

std::vector<ResponseRecord> run_batch(std::span<const PromptBundle> prompts, const ModelConfig& cfg,
                                      std::span<const ResponseRecord> previous, BatchStats* stats) {
  if (prompts.empty()) throw Error(ErrorKind::kEmptyBatch, "no prompts to send");
  cfg.validate();
  std::map<std::pair<std::string, std::string>, const ResponseRecord*> done;
  for (const auto& r : previous) {
    if (r.ok()) done[{r.query_id, r.prompt_hash}] = &r;
  }

  std::vector<ResponseRecord> out(prompts.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    out[i].query_id = prompts[i].query_id;
    out[i].prompt_hash = prompt_hash(prompts[i]);
    if (auto it = done.find({out[i].query_id, out[i].prompt_hash}); it != done.end()) {
      out[i] = *it->second;
    } else {
      pending.push_back(i);
    }
  }

  // Each worker writes only its own pre-allocated slot.
  parallel_for(pending.size(), cfg.parallelism, [&](std::size_t p) {
    const std::size_t i = pending[p];
    try {
      Completion c = complete(prompts[i], cfg);
      out[i].raw = std::move(c.text);
      out[i].latency_ms = c.latency_ms;
      out[i].attempts = c.attempts;
      out[i].usage = c.usage;
    } catch (const Error& e) {
      out[i].error = e.what();
    }
  });

  if (stats) {
    stats->requests_issued = pending.size();
    stats->reused = prompts.size() - pending.size();
    stats->failed = static_cast<std::size_t>(std::count_if(out.begin(), out.end(), [](const auto& r) { return !r.ok(); }));
  }
  return out;
}

std::string serialize_responses(std::span<const ResponseRecord> records) {
  std::string out;
  for (const auto& r : records) {
    json obj = {{"query_id", r.query_id},
                {"prompt_hash", r.prompt_hash},
                {"raw", r.raw},
                {"latency_ms", r.latency_ms},
                {"attempts", r.attempts},
                {"usage",
                 {{"prompt_tokens", r.usage.prompt_tokens},
                  {"completion_tokens", r.usage.completion_tokens},
                  {"total_tokens", r.usage.total_tokens}}}};
    obj["error"] = r.error ? json(*r.error) : json(nullptr);
    out += obj.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<ResponseRecord> parse_responses(std::string_view contents) {
  std::vector<ResponseRecord> out;
  std::size_t line_no = 0;
  for (auto line : split(contents, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const json obj = json::parse(line);
      ResponseRecord r;
      r.query_id = obj.at("query_id").get<std::string>();
      r.prompt_hash = obj.at("prompt_hash").get<std::string>();
      r.raw = obj.value("raw", "");
      r.latency_ms = obj.value("latency_ms", 0.0);
      r.attempts = obj.value("attempts", 0);
      if (auto u = obj.find("usage"); u != obj.end() && u->is_object()) {
        r.usage.prompt_tokens = u->value("prompt_tokens", 0L);
        r.usage.completion_tokens = u->value("completion_tokens", 0L);
        r.usage.total_tokens = u->value("total_tokens", 0L);
      }
      if (obj.contains("error") && !obj["error"].is_null()) r.error = obj["error"].get<std::string>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kMalformedLine, "response log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace termret
