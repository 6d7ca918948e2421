#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace termret {

struct RetryPolicy {
  int max_retries = 3;  // attempts = 1 + max_retries
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{8000};
};

struct HttpTarget {
  std::string origin;     // scheme://host[:port]
  std::string base_path;  // path prefix without trailing slash, may be empty
};

HttpTarget parse_url(std::string_view url);

struct HttpReply {
  int status = 0;
  std::string body;
  int attempts = 0;
  std::string request_id;  // from x-request-id when the server sends one
};

// POSTs a JSON body to base_path + path, retrying 429/5xx and connection
// failures with exponential backoff. Throws HttpError for other non-2xx
// statuses, TimeoutError when a read times out and RetriesExhausted when the
// retry budget runs out.
HttpReply post_json(const HttpTarget& target, const std::string& path, const std::string& body,
                    const std::vector<std::pair<std::string, std::string>>& headers,
                    std::chrono::milliseconds timeout, const RetryPolicy& retry);

// Reads the API key from TERMRET_API_KEY; empty when unset.
std::string api_key_from_env();

}  // namespace termret
