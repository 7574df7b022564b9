#pragma once

// Token-embedding and log-probability providers behind one interface.

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabembed/serializer.hpp"

namespace tabembed {

using TokenId = std::int64_t;

enum class BackendKind { kHttp, kMockInformative, kRandom };

std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view text);

struct BackendDescriptor {
  BackendKind kind = BackendKind::kMockInformative;
  std::optional<std::string> endpoint;
  std::size_t embedding_dim = 64;
  std::size_t max_input_tokens = 1042;
  std::optional<std::uint64_t> seed;
  // Token ids of the "A" / "B" answer letters for A/B scoring; defaults to the mock tokenizer's ids.
  std::optional<TokenId> answer_a_id;
  std::optional<TokenId> answer_b_id;

  void check() const;
  // Identity used for cache keys; any change in kind, endpoint, dim or seed changes it.
  std::string fingerprint() const;
  nlohmann::json to_json() const;
  static BackendDescriptor from_json(const nlohmann::json& j);
};

struct TokenEmbeddingMatrix {
  std::size_t token_count = 0;
  std::size_t dim = 0;
  std::vector<double> values;  // token_count x dim, row-major
  std::string prompt_hash;

  const double* row(std::size_t t) const { return values.data() + t * dim; }
  bool operator==(const TokenEmbeddingMatrix&) const = default;
};

struct TokenLogprob {
  TokenId token = 0;
  double logprob = 0.0;
};

struct TokenLogprobs {
  std::vector<TokenLogprob> continuation;
  std::map<TokenId, double> candidates;  // next-token logprobs at the final context position
};

// Word/punctuation tokenizer shared by the mock backends: maximal alphanumeric runs
// or single non-space characters.
std::vector<std::string> mock_tokenize(std::string_view text);
TokenId mock_token_id(std::string_view piece);

// Hash of the text a backend sees; random backends also mix in the record id.
std::string prompt_hash(const PromptBundle& bundle, const BackendDescriptor& descriptor);

class Backend {
 public:
  explicit Backend(BackendDescriptor descriptor);
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  const BackendDescriptor& descriptor() const { return descriptor_; }

  // Warns when the prompt exceeds max_input_tokens, then defers truncation to the backend.
  TokenEmbeddingMatrix embed_tokens(const PromptBundle& bundle);
  TokenLogprobs continuation_logprobs(const PromptBundle& bundle, std::string_view continuation,
                                      std::span<const TokenId> candidates);

  virtual TokenId token_id(std::string_view piece) const { return mock_token_id(piece); }
  TokenId answer_a_id() const;
  TokenId answer_b_id() const;

  std::size_t embed_calls() const { return embed_calls_.load(); }
  std::size_t logprob_calls() const { return logprob_calls_.load(); }

 protected:
  virtual TokenEmbeddingMatrix do_embed(const PromptBundle& bundle) = 0;
  virtual TokenLogprobs do_logprobs(const PromptBundle& bundle, std::string_view continuation,
                                    std::span<const TokenId> candidates) = 0;

 private:
  BackendDescriptor descriptor_;
  std::atomic<std::size_t> embed_calls_{0};
  std::atomic<std::size_t> logprob_calls_{0};
};

// Remote inference server. Wire contract:
//   POST {endpoint}/token_embeddings {"text", "layer": "last"} -> {"dim", "tokens", "values": [[...]]}
//   POST {endpoint}/logprobs {"text", "continuation", "candidates": [ids]}
//        -> {"continuation_logprobs": [...], "candidate_logprobs": {id: lp}}
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendDescriptor descriptor);

 protected:
  TokenEmbeddingMatrix do_embed(const PromptBundle& bundle) override;
  TokenLogprobs do_logprobs(const PromptBundle& bundle, std::string_view continuation,
                            std::span<const TokenId> candidates) override;

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;
  std::string host_;
  std::string base_path_;
};

// Deterministic stand-in for a language model. Numbers are parsed back out of the
// serialized record, z-scored against plausible ranges and projected into D dimensions,
// so records with similar values land near each other. Rows accumulate feature
// contributions in prompt order; a text-hash vector at 10% magnitude is added to every row.
class MockInformativeBackend : public Backend {
 public:
  MockInformativeBackend(BackendDescriptor descriptor, std::shared_ptr<const FeatureSchema> schema,
                         SerializationConfig serialization);

 protected:
  TokenEmbeddingMatrix do_embed(const PromptBundle& bundle) override;
  TokenLogprobs do_logprobs(const PromptBundle& bundle, std::string_view continuation,
                            std::span<const TokenId> candidates) override;

 private:
  std::vector<std::pair<std::size_t, double>> feature_scores(const PromptBundle& bundle) const;
  std::shared_ptr<const FeatureSchema> schema_;
  SerializationConfig serialization_;
  std::vector<std::vector<double>> projections_;  // one D-vector per schema feature
  std::vector<double> preference_;               // per-feature weights for the "A" logit
};

// Content-free baseline: one seeded random row per record and hashed uniform logprobs.
class RandomBackend : public Backend {
 public:
  explicit RandomBackend(BackendDescriptor descriptor);

 protected:
  TokenEmbeddingMatrix do_embed(const PromptBundle& bundle) override;
  TokenLogprobs do_logprobs(const PromptBundle& bundle, std::string_view continuation,
                            std::span<const TokenId> candidates) override;
};

// Fixture backend with configured conditionals: per-token probabilities (by token text,
// with a default) and fixed candidate probabilities at the final position.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(std::size_t dim = 4);

  void set_token_prob(std::string token, double p) { token_probs_[std::move(token)] = p; }
  void set_default_token_prob(double p) { default_token_prob_ = p; }
  void set_token_sequence(std::vector<double> probs) { sequence_probs_ = std::move(probs); }
  void set_candidate_prob(TokenId id, double p) { candidate_probs_[id] = p; }

 protected:
  TokenEmbeddingMatrix do_embed(const PromptBundle& bundle) override;
  TokenLogprobs do_logprobs(const PromptBundle& bundle, std::string_view continuation,
                            std::span<const TokenId> candidates) override;

 private:
  std::map<std::string, double> token_probs_;
  double default_token_prob_ = 1.0;
  std::vector<double> sequence_probs_;
  std::map<TokenId, double> candidate_probs_;
};

// Builds the backend a descriptor names. Mock-informative needs the schema and the
// serialization config used to render prompts.
std::unique_ptr<Backend> make_backend(const BackendDescriptor& descriptor,
                                      std::shared_ptr<const FeatureSchema> schema = nullptr,
                                      const SerializationConfig& serialization = {});

}  // namespace tabembed
