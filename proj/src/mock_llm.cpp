#include "termret/mock_llm.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cmath>

#include "termret/error.hpp"
#include "termret/lexical_sim.hpp"
#include "termret/prompting.hpp"
#include "termret/util.hpp"

namespace termret {

using nlohmann::json;

MockMode parse_mock_mode(std::string_view name) {
  if (name == "gold-echo") return MockMode::kGoldEcho;
  if (name == "no-term") return MockMode::kNoTerm;
  if (name == "last-demo-echo") return MockMode::kLastDemoEcho;
  if (name == "first-demo-echo") return MockMode::kFirstDemoEcho;
  if (name == "fixed") return MockMode::kFixed;
  throw Error(ErrorKind::kConfig, "unknown mock mode '" + std::string(name) + "'");
}

std::string mock_completion(const MockLlmOptions& options, std::string_view prompt) {
  switch (options.mode) {
    case MockMode::kNoTerm:
      return "No term";
    case MockMode::kFixed:
      return options.fixed_text;
    case MockMode::kGoldEcho: {
      const auto last_break = prompt.rfind('\n');
      const auto last = last_break == std::string_view::npos ? prompt : prompt.substr(last_break + 1);
      for (const auto& q : options.queries) {
        if (query_line(q) == last) {
          std::string joined;
          for (const auto& t : q.terms) joined += (joined.empty() ? "" : ", ") + t;
          return joined.empty() ? "No term" : joined;
        }
      }
      return "No term";
    }
    case MockMode::kLastDemoEcho:
    case MockMode::kFirstDemoEcho: {
      std::vector<std::string_view> term_lines;
      for (auto line : split(prompt, '\n')) {
        if (line.starts_with("Terms: ")) term_lines.push_back(line.substr(7));
      }
      if (term_lines.empty()) return "No term";
      return std::string(options.mode == MockMode::kLastDemoEcho ? term_lines.back() : term_lines.front());
    }
  }
  return "No term";
}

std::vector<double> mock_embedding(std::string_view text, std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  for (const auto& tok : tokenize(text)) {
    const std::uint64_t h = fnv1a64(tok);
    v[h % dim] += (h >> 32) & 1 ? 1.0 : -1.0;
  }
  v[0] += 0.5;  // keeps the vector nonzero for empty input
  return v;
}

struct MockLlmServer::Impl {
  httplib::Server server;
  MockLlmOptions options;
};

MockLlmServer::MockLlmServer(MockLlmOptions options, int port, std::string prefix)
    : impl_(std::make_unique<Impl>()), prefix_(std::move(prefix)) {
  impl_->options = std::move(options);
  auto& svr = impl_->server;
  svr.Post(prefix_ + "/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
    ++served_;
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      res.status = 400;
      res.set_content(R"({"error":"bad json"})", "application/json");
      return;
    }
    std::string prompt;
    for (const auto& m : body.value("messages", json::array())) {
      if (m.value("role", "") == "user") prompt = m.value("content", "");
    }
    const std::string reply = mock_completion(impl_->options, prompt);
    json out = {{"id", "mock-" + std::to_string(served_.load())},
                {"object", "chat.completion"},
                {"model", body.value("model", "mock")},
                {"choices", json::array({{{"index", 0},
                                          {"message", {{"role", "assistant"}, {"content", reply}}},
                                          {"finish_reason", "stop"}}})},
                {"usage",
                 {{"prompt_tokens", static_cast<long>(tokenize(prompt).size())},
                  {"completion_tokens", static_cast<long>(tokenize(reply).size())},
                  {"total_tokens", static_cast<long>(tokenize(prompt).size() + tokenize(reply).size())}}}};
    res.set_content(out.dump(), "application/json");
  });
  svr.Post(prefix_ + "/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
    ++served_;
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      res.status = 400;
      return;
    }
    json data = json::array();
    std::size_t i = 0;
    for (const auto& text : body.value("input", json::array())) {
      data.push_back({{"object", "embedding"},
                      {"index", i++},
                      {"embedding", mock_embedding(text.get<std::string>(), impl_->options.embedding_dim)}});
    }
    res.set_content(json{{"object", "list"}, {"data", data}}.dump(), "application/json");
  });

  if (port == 0) {
    port_ = svr.bind_to_any_port("127.0.0.1");
  } else {
    port_ = svr.bind_to_port("127.0.0.1", port) ? port : -1;
  }
  if (port_ < 0) throw Error(ErrorKind::kIo, "mock server could not bind port " + std::to_string(port));
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockLlmServer::~MockLlmServer() { stop(); }

std::string MockLlmServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + prefix_; }

void MockLlmServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

void MockLlmServer::wait() {
  if (thread_.joinable()) thread_.join();
}

}  // namespace termret
