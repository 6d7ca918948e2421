#pragma once

#include <string_view>

namespace termret {

enum class RetrievalMethod { kFastKassim, kCassim, kBm25, kEmbedding, kRandom };

std::string_view to_string(RetrievalMethod method);
// Accepts the names used in configs and dumps; `bge_style_embedding` is an
// alias for `embedding`. Throws ConfigError for anything else.
RetrievalMethod parse_method(std::string_view name);

}  // namespace termret
