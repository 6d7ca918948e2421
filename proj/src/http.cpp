#include "termret/http.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "termret/error.hpp"

namespace termret {
namespace {

bool retryable_status(int status) { return status == 429 || (status >= 500 && status <= 599); }

std::string excerpt(const std::string& body) {
  constexpr std::size_t kMax = 200;
  return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

}  // namespace

HttpTarget parse_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw Error(ErrorKind::kConfig, "endpoint URL needs a scheme: " + std::string(url));
  }
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorKind::kConfig, "unsupported URL scheme: " + std::string(scheme));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  HttpTarget target;
  target.origin = std::string(url.substr(0, path_start));
  if (path_start != std::string_view::npos) {
    std::string path(url.substr(path_start));
    while (!path.empty() && path.back() == '/') path.pop_back();
    target.base_path = path;
  }
  if (target.origin.size() <= scheme_end + 3) {
    throw Error(ErrorKind::kConfig, "endpoint URL has no host: " + std::string(url));
  }
  return target;
}

HttpReply post_json(const HttpTarget& target, const std::string& path, const std::string& body,
                    const std::vector<std::pair<std::string, std::string>>& headers,
                    std::chrono::milliseconds timeout, const RetryPolicy& retry) {
  httplib::Client client(target.origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);

  const std::string full_path = target.base_path + path;
  const int attempts_allowed = 1 + std::max(0, retry.max_retries);
  std::string last_problem;
  for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
    auto res = client.Post(full_path, hdrs, body, "application/json");
    if (!res) {
      if (res.error() == httplib::Error::Read) {
        throw Error(ErrorKind::kTimeout, "no response from " + target.origin + full_path + " within " +
                                             std::to_string(timeout.count()) + " ms");
      }
      last_problem = "transport error: " + httplib::to_string(res.error());
    } else if (res->status >= 200 && res->status < 300) {
      HttpReply reply{res->status, res->body, attempt, res->get_header_value("x-request-id")};
      return reply;
    } else if (!retryable_status(res->status)) {
      throw Error(ErrorKind::kHttpError,
                  "status " + std::to_string(res->status) + " from " + full_path + ": " + excerpt(res->body));
    } else {
      last_problem = "status " + std::to_string(res->status) + ": " + excerpt(res->body);
    }
    if (attempt < attempts_allowed) {
      auto delay = retry.base_delay * (1LL << std::min(attempt - 1, 20));
      std::this_thread::sleep_for(std::min<std::chrono::milliseconds>(delay, retry.max_delay));
    }
  }
  throw Error(ErrorKind::kRetriesExhausted,
              std::to_string(attempts_allowed) + " attempts to " + full_path + " failed; last " + last_problem);
}

std::string api_key_from_env() {
  const char* key = std::getenv("TERMRET_API_KEY");
  return key ? std::string(key) : std::string();
}

}  // namespace termret
