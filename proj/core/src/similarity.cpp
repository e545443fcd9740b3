#include "semcom/similarity.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "semcom/error.hpp"

namespace semcom {

double cosine_to_unit_interval(double cosine) {
  cosine = std::clamp(cosine, -1.0, 1.0);
  return (1.0 + cosine) / 2.0;
}

std::vector<double> SimilarityProvider::score_pairs(
    const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& [a, b] : pairs) out.push_back(score(a, b));
  return out;
}

double LexicalSimilarity::score(const std::vector<std::string>& a,
                                const std::vector<std::string>& b) {
  std::map<std::string, double> ca, cb;
  for (const auto& t : a) ca[t] += 1.0;
  for (const auto& t : b) cb[t] += 1.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [tok, v] : ca) {
    na += v * v;
    auto it = cb.find(tok);
    if (it != cb.end()) dot += v * it->second;
  }
  for (const auto& [tok, v] : cb) nb += v * v;
  if (na == 0.0 || nb == 0.0) return cosine_to_unit_interval(0.0);
  return cosine_to_unit_interval(dot / (std::sqrt(na) * std::sqrt(nb)));
}

namespace {

struct ParsedEndpoint {
  std::string host_port;  // scheme://host:port, as cpp-httplib wants it
  std::string path;
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("embedding service endpoint needs a scheme: " + endpoint);
  }
  const auto path_start = endpoint.find('/', scheme_end + 3);
  ParsedEndpoint out;
  if (path_start == std::string::npos) {
    out.host_port = endpoint;
    out.path = "/";
  } else {
    out.host_port = endpoint.substr(0, path_start);
    out.path = endpoint.substr(path_start);
  }
  return out;
}

std::vector<std::vector<double>> fetch_embeddings(const EmbeddingServiceConfig& cfg,
                                                  const std::vector<std::string>& texts) {
  const auto ep = parse_endpoint(cfg.endpoint);
  nlohmann::json body;
  body["texts"] = texts;
  const std::string payload = body.dump();

  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(
          cfg.backoff_seconds * static_cast<double>(1 << (attempt - 1))));
    }
    httplib::Client client(ep.host_port);
    client.set_connection_timeout(std::chrono::duration<double>(cfg.timeout_seconds));
    client.set_read_timeout(std::chrono::duration<double>(cfg.timeout_seconds));
    httplib::Headers headers;
    if (!cfg.auth_token.empty()) {
      headers.emplace("Authorization", "Bearer " + cfg.auth_token);
    }
    auto res = client.Post(ep.path, headers, payload, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    try {
      auto parsed = nlohmann::json::parse(res->body);
      auto embeddings = parsed.at("embeddings").get<std::vector<std::vector<double>>>();
      if (embeddings.size() != texts.size()) {
        throw DataError("embedding service returned " + std::to_string(embeddings.size()) +
                        " vectors for " + std::to_string(texts.size()) + " texts");
      }
      return embeddings;
    } catch (const nlohmann::json::exception& e) {
      last_error = std::string("bad response body: ") + e.what();
    }
  }
  throw IoError("embedding service unreachable (" + cfg.endpoint + "): " + last_error);
}

double embedding_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw DataError("embedding service returned mismatched vector sizes");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

EmbeddingServiceSimilarity::EmbeddingServiceSimilarity(EmbeddingServiceConfig cfg)
    : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty()) throw ConfigError("embedding service endpoint is empty");
  if (cfg_.max_in_flight < 1) throw ConfigError("embedding service needs max_in_flight >= 1");
}

double EmbeddingServiceSimilarity::score(const std::vector<std::string>& a,
                                         const std::vector<std::string>& b) {
  std::string sa, sb;
  for (std::size_t i = 0; i < a.size(); ++i) sa += (i ? " " : "") + a[i];
  for (std::size_t i = 0; i < b.size(); ++i) sb += (i ? " " : "") + b[i];
  const auto embeddings = fetch_embeddings(cfg_, {sa, sb});
  return cosine_to_unit_interval(embedding_cosine(embeddings[0], embeddings[1]));
}

std::vector<double> EmbeddingServiceSimilarity::score_pairs(
    const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& pairs) {
  std::vector<double> out(pairs.size(), 0.0);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;

  const int workers = std::min<int>(cfg_.max_in_flight, static_cast<int>(pairs.size()));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(std::max(workers, 1)));
  for (int w = 0; w < std::max(workers, 1); ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= pairs.size() || failed.load()) return;
        try {
          out[i] = score(pairs[i].first, pairs[i].second);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!failed.exchange(true)) first_error = e.what();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failed.load()) throw IoError(first_error);
  return out;
}

std::unique_ptr<SimilarityProvider> similarity_provider_from_env() {
  const char* endpoint = std::getenv("SEMCOM_EMBED_ENDPOINT");
  if (endpoint != nullptr && endpoint[0] != '\0') {
    EmbeddingServiceConfig cfg;
    cfg.endpoint = endpoint;
    if (const char* token = std::getenv("SEMCOM_EMBED_TOKEN")) cfg.auth_token = token;
    return std::make_unique<EmbeddingServiceSimilarity>(cfg);
  }
  return std::make_unique<LexicalSimilarity>();
}

}  // namespace semcom
