#pragma once

#include <memory>
#include <string>
#include <vector>

namespace semcom {

// Sentence-pair similarity in [0, 1], symmetric in its arguments. Scores are
// (1 + cos)/2 over sentence embeddings; providers differ in where the
// embeddings come from.
class SimilarityProvider {
 public:
  virtual ~SimilarityProvider() = default;
  virtual std::string name() const = 0;
  virtual double score(const std::vector<std::string>& a,
                       const std::vector<std::string>& b) = 0;
  // Bulk interface; the default loops over score().
  virtual std::vector<double> score_pairs(
      const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& pairs);
};

// Offline fallback: unigram-count vectors, cosine mapped to [0, 1].
class LexicalSimilarity : public SimilarityProvider {
 public:
  std::string name() const override { return "lexical"; }
  double score(const std::vector<std::string>& a, const std::vector<std::string>& b) override;
};

struct EmbeddingServiceConfig {
  std::string endpoint;     // e.g. http://127.0.0.1:8089/embed
  std::string auth_token;   // optional bearer token
  int max_in_flight = 4;    // bound on concurrent requests
  int max_retries = 2;
  double backoff_seconds = 0.2;
  double timeout_seconds = 5.0;
};

// Client for an external embedding service speaking
// {"texts": [...]} -> {"embeddings": [[...], ...]}. Throws IoError when the
// service stays unreachable after retries.
class EmbeddingServiceSimilarity : public SimilarityProvider {
 public:
  explicit EmbeddingServiceSimilarity(EmbeddingServiceConfig cfg);
  std::string name() const override { return "embedding-service"; }
  double score(const std::vector<std::string>& a, const std::vector<std::string>& b) override;
  std::vector<double> score_pairs(
      const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& pairs)
      override;

 private:
  EmbeddingServiceConfig cfg_;
};

// Embedding service from SEMCOM_EMBED_ENDPOINT / SEMCOM_EMBED_TOKEN when the
// endpoint variable is set, the lexical provider otherwise.
std::unique_ptr<SimilarityProvider> similarity_provider_from_env();

double cosine_to_unit_interval(double cosine);

}  // namespace semcom
