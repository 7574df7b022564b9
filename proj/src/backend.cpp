#include "tabembed/backend.hpp"

#include <cctype>
#include <cmath>
#include <random>

#include "httplib.h"

namespace tabembed {

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::kHttp: return "http";
    case BackendKind::kMockInformative: return "mock-informative";
    case BackendKind::kRandom: return "random";
  }
  return "mock-informative";
}

BackendKind backend_kind_from_string(std::string_view text) {
  if (text == "http") return BackendKind::kHttp;
  if (text == "mock-informative" || text == "mock") return BackendKind::kMockInformative;
  if (text == "random") return BackendKind::kRandom;
  fail(ErrorCode::kConfigError, "unknown backend kind '" + std::string(text) + "'");
}

void BackendDescriptor::check() const {
  if (kind == BackendKind::kHttp && (!endpoint || endpoint->empty())) {
    fail(ErrorCode::kConfigError, "http backend requires an endpoint");
  }
  if (embedding_dim == 0) fail(ErrorCode::kConfigError, "embedding_dim must be positive");
}

std::string BackendDescriptor::fingerprint() const {
  std::string fp = std::string(to_string(kind));
  fp += "|" + endpoint.value_or("");
  fp += "|" + std::to_string(embedding_dim);
  fp += "|" + (seed ? std::to_string(*seed) : std::string("-"));
  return fp;
}

nlohmann::json BackendDescriptor::to_json() const {
  nlohmann::json j{{"kind", std::string(to_string(kind))},
                   {"embedding_dim", embedding_dim},
                   {"max_input_tokens", max_input_tokens}};
  if (endpoint) j["endpoint"] = *endpoint;
  if (seed) j["seed"] = *seed;
  if (answer_a_id) j["answer_a_id"] = *answer_a_id;
  if (answer_b_id) j["answer_b_id"] = *answer_b_id;
  return j;
}

BackendDescriptor BackendDescriptor::from_json(const nlohmann::json& j) {
  BackendDescriptor d;
  try {
    d.kind = backend_kind_from_string(j.value("kind", std::string("mock-informative")));
    if (j.contains("endpoint")) d.endpoint = j["endpoint"].get<std::string>();
    d.embedding_dim = j.value("embedding_dim", d.embedding_dim);
    d.max_input_tokens = j.value("max_input_tokens", d.max_input_tokens);
    if (j.contains("seed")) d.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("answer_a_id")) d.answer_a_id = j["answer_a_id"].get<TokenId>();
    if (j.contains("answer_b_id")) d.answer_b_id = j["answer_b_id"].get<TokenId>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfigError, std::string("malformed backend descriptor: ") + e.what());
  }
  return d;
}

std::vector<std::string> mock_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
    } else if (std::isalnum(c)) {
      std::size_t j = i;
      while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
      tokens.emplace_back(text.substr(i, j - i));
      i = j;
    } else {
      tokens.emplace_back(text.substr(i, 1));
      ++i;
    }
  }
  return tokens;
}

TokenId mock_token_id(std::string_view piece) {
  return static_cast<TokenId>(fnv1a64(piece) % 32000ULL) + 3;
}

std::string prompt_hash(const PromptBundle& bundle, const BackendDescriptor& descriptor) {
  std::uint64_t h = fnv1a64(bundle.rendered_text);
  if (descriptor.kind == BackendKind::kRandom) h = fnv1a64(bundle.source_record_id, fnv1a64(std::string_view("\x1f"), h));
  return hex64(h);
}

Backend::Backend(BackendDescriptor descriptor) : descriptor_(std::move(descriptor)) { descriptor_.check(); }

TokenId Backend::answer_a_id() const { return descriptor_.answer_a_id.value_or(token_id("A")); }
TokenId Backend::answer_b_id() const { return descriptor_.answer_b_id.value_or(token_id("B")); }

TokenEmbeddingMatrix Backend::embed_tokens(const PromptBundle& bundle) {
  if (bundle.token_estimate > descriptor_.max_input_tokens) {
    warn("prompt for record '" + bundle.source_record_id + "' has ~" + std::to_string(bundle.token_estimate) +
         " tokens, over the backend limit of " + std::to_string(descriptor_.max_input_tokens) +
         "; the backend may truncate");
  }
  ++embed_calls_;
  TokenEmbeddingMatrix m = do_embed(bundle);
  if (m.token_count == 0) fail(ErrorCode::kBackendProtocolError, "backend returned zero tokens");
  if (m.dim != descriptor_.embedding_dim) {
    fail(ErrorCode::kBackendProtocolError, "backend returned dim " + std::to_string(m.dim) + ", expected " +
                                               std::to_string(descriptor_.embedding_dim));
  }
  if (m.values.size() != m.token_count * m.dim) {
    fail(ErrorCode::kBackendProtocolError, "embedding matrix shape does not match its header");
  }
  for (double v : m.values) {
    if (!std::isfinite(v)) fail(ErrorCode::kNonFiniteValues, "backend returned a non-finite embedding value");
  }
  m.prompt_hash = prompt_hash(bundle, descriptor_);
  return m;
}

TokenLogprobs Backend::continuation_logprobs(const PromptBundle& bundle, std::string_view continuation,
                                             std::span<const TokenId> candidates) {
  ++logprob_calls_;
  TokenLogprobs lp = do_logprobs(bundle, continuation, candidates);
  for (TokenId id : candidates) {
    if (!lp.candidates.contains(id)) {
      fail(ErrorCode::kCandidateMissing, "backend omitted candidate token " + std::to_string(id));
    }
  }
  auto check = [](double v) {
    if (std::isnan(v) || v > 1e-12) fail(ErrorCode::kBackendProtocolError, "log-probability must be <= 0");
  };
  for (auto& t : lp.continuation) {
    check(t.logprob);
    t.logprob = std::min(t.logprob, 0.0);
  }
  for (auto& [id, v] : lp.candidates) {
    check(v);
    v = std::min(v, 0.0);
  }
  return lp;
}

// ---------------------------------------------------------------------------
// HTTP

HttpBackend::HttpBackend(BackendDescriptor descriptor) : Backend(std::move(descriptor)) {
  const std::string& url = *this->descriptor().endpoint;
  auto scheme = url.find("://");
  auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  host_ = url.substr(0, path_start);
  base_path_ = path_start == std::string::npos ? std::string() : url.substr(path_start);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
}

nlohmann::json HttpBackend::post(const std::string& path, const nlohmann::json& body) const {
  httplib::Client client(host_);
  client.set_connection_timeout(10);
  client.set_read_timeout(300);
  auto res = client.Post(base_path_ + path, body.dump(), "application/json");
  if (!res) {
    fail(ErrorCode::kBackendUnreachable,
         "POST " + host_ + base_path_ + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    fail(ErrorCode::kBackendProtocolError, "POST " + path + " returned HTTP " + std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kBackendProtocolError, std::string("response is not JSON: ") + e.what());
  }
}

TokenEmbeddingMatrix HttpBackend::do_embed(const PromptBundle& bundle) {
  const auto j = post("/token_embeddings", {{"text", bundle.rendered_text}, {"layer", "last"}});
  TokenEmbeddingMatrix m;
  try {
    m.dim = j.at("dim").get<std::size_t>();
    m.token_count = j.at("tokens").get<std::size_t>();
    const auto& rows = j.at("values");
    if (!rows.is_array() || rows.size() != m.token_count) {
      fail(ErrorCode::kBackendProtocolError, "values has " + std::to_string(rows.size()) + " rows, header says " +
                                                 std::to_string(m.token_count));
    }
    m.values.reserve(m.token_count * m.dim);
    for (const auto& row : rows) {
      if (!row.is_array() || row.size() != m.dim) fail(ErrorCode::kBackendProtocolError, "ragged embedding row");
      for (const auto& v : row) {
        if (v.is_null()) fail(ErrorCode::kNonFiniteValues, "embedding row contains null");
        m.values.push_back(v.get<double>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kBackendProtocolError, std::string("malformed embedding response: ") + e.what());
  }
  return m;
}

TokenLogprobs HttpBackend::do_logprobs(const PromptBundle& bundle, std::string_view continuation,
                                       std::span<const TokenId> candidates) {
  const auto j = post("/logprobs", {{"text", bundle.rendered_text},
                                    {"continuation", std::string(continuation)},
                                    {"candidates", std::vector<TokenId>(candidates.begin(), candidates.end())}});
  TokenLogprobs out;
  try {
    for (const auto& item : j.at("continuation_logprobs")) {
      if (item.is_number()) {
        out.continuation.push_back({0, item.get<double>()});
      } else {
        out.continuation.push_back({item.at("token").get<TokenId>(), item.at("logprob").get<double>()});
      }
    }
    if (j.contains("candidate_logprobs")) {
      for (const auto& [key, value] : j["candidate_logprobs"].items()) {
        out.candidates[std::stoll(key)] = value.get<double>();
      }
    }
  } catch (const std::exception& e) {
    fail(ErrorCode::kBackendProtocolError, std::string("malformed logprob response: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mock informative

namespace {

std::vector<double> gaussian_vector(std::uint64_t seed, std::size_t dim, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  for (auto& x : v) x = normal(rng) * scale;
  return v;
}

// Uniform in (0, 1] from a hash.
double hashed_unit(std::uint64_t h) { return (static_cast<double>(mix_seed(h, 0) >> 11) + 1.0) / 9007199254740992.0; }

std::string mask_digits(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_number = false;
  for (char c : text) {
    const bool numeric = std::isdigit(static_cast<unsigned char>(c)) || (in_number && (c == '.' || c == '-'));
    if (numeric) {
      if (!in_number) out += '#';
      in_number = true;
    } else {
      in_number = false;
      out += c;
    }
  }
  return out;
}

}  // namespace

MockInformativeBackend::MockInformativeBackend(BackendDescriptor descriptor, std::shared_ptr<const FeatureSchema> schema,
                                               SerializationConfig serialization)
    : Backend(std::move(descriptor)), schema_(std::move(schema)), serialization_(std::move(serialization)) {
  if (!schema_) fail(ErrorCode::kConfigError, "mock-informative backend needs the feature schema");
  const std::uint64_t seed = this->descriptor().seed.value_or(0);
  const std::size_t dim = this->descriptor().embedding_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  std::mt19937_64 pref_rng(mix_seed(seed, 0x5eed));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& def : schema_->features()) {
    projections_.push_back(gaussian_vector(mix_seed(seed, fnv1a64(def.name)), dim, scale));
    preference_.push_back(normal(pref_rng));
  }
}

std::vector<std::pair<std::size_t, double>> MockInformativeBackend::feature_scores(const PromptBundle& bundle) const {
  std::vector<std::pair<std::size_t, double>> out;
  if (bundle.record_text.empty()) return out;
  SerializationConfig cfg = serialization_;
  cfg.format = bundle.format;
  std::map<std::string, std::vector<double>> parsed;
  try {
    parsed = roundtrip_check(bundle.record_text, cfg, *schema_);
  } catch (const Error& e) {
    fail(ErrorCode::kBackendProtocolError, std::string("mock backend cannot read the prompt: ") + e.what());
  }
  for (std::size_t f = 0; f < schema_->features().size(); ++f) {
    const auto& def = schema_->features()[f];
    auto it = parsed.find(def.name);
    if (it == parsed.end() || it->second.empty()) continue;
    double mean = 0.0;
    for (double v : it->second) mean += v;
    mean /= static_cast<double>(it->second.size());
    double z = mean;
    if (def.plausible_range) {
      const double mid = 0.5 * (def.plausible_range->low + def.plausible_range->high);
      const double spread = 0.25 * (def.plausible_range->high - def.plausible_range->low);
      z = (mean - mid) / spread;
    }
    out.emplace_back(f, z);
  }
  return out;
}

TokenEmbeddingMatrix MockInformativeBackend::do_embed(const PromptBundle& bundle) {
  const std::size_t dim = descriptor().embedding_dim;
  const auto scores = feature_scores(bundle);
  const std::uint64_t text_seed = mix_seed(descriptor().seed.value_or(0), fnv1a64(mask_digits(bundle.rendered_text)));
  const auto noise = gaussian_vector(text_seed, dim, 0.1 / std::sqrt(static_cast<double>(dim)));

  TokenEmbeddingMatrix m;
  m.dim = dim;
  m.token_count = scores.size() + 1;
  m.values.reserve(m.token_count * dim);
  std::vector<double> state = noise;
  m.values.insert(m.values.end(), state.begin(), state.end());
  for (const auto& [f, z] : scores) {
    const auto& proj = projections_[f];
    for (std::size_t d = 0; d < dim; ++d) state[d] += z * proj[d];
    m.values.insert(m.values.end(), state.begin(), state.end());
  }
  return m;
}

TokenLogprobs MockInformativeBackend::do_logprobs(const PromptBundle& bundle, std::string_view continuation,
                                                  std::span<const TokenId> candidates) {
  double s = 0.0;
  for (const auto& [f, z] : feature_scores(bundle)) s += preference_[f] * z;
  const double p_a = 0.8 * sigmoid(s);
  const double p_b = 0.8 - p_a;
  const TokenId a = answer_a_id();
  const TokenId b = answer_b_id();
  const std::uint64_t ctx = fnv1a64(bundle.rendered_text);

  TokenLogprobs out;
  for (TokenId id : candidates) {
    if (id == a) {
      out.candidates[id] = std::log(p_a);
    } else if (id == b) {
      out.candidates[id] = std::log(p_b);
    } else {
      out.candidates[id] = std::log(0.2 * hashed_unit(mix_seed(ctx, static_cast<std::uint64_t>(id))) / 1000.0);
    }
  }
  const auto tokens = mock_tokenize(continuation);
  std::uint64_t prefix = ctx;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const TokenId id = token_id(tokens[i]);
    double lp;
    if (i == 0 && id == a) {
      lp = std::log(p_a);
    } else if (i == 0 && id == b) {
      lp = std::log(p_b);
    } else {
      lp = std::log(0.5 + 0.5 * hashed_unit(mix_seed(prefix, static_cast<std::uint64_t>(id))));
    }
    out.continuation.push_back({id, lp});
    prefix = fnv1a64(tokens[i], prefix);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random

RandomBackend::RandomBackend(BackendDescriptor descriptor) : Backend(std::move(descriptor)) {}

TokenEmbeddingMatrix RandomBackend::do_embed(const PromptBundle& bundle) {
  TokenEmbeddingMatrix m;
  m.dim = descriptor().embedding_dim;
  m.token_count = 1;
  m.values = gaussian_vector(mix_seed(descriptor().seed.value_or(0), fnv1a64(bundle.source_record_id)), m.dim, 1.0);
  return m;
}

TokenLogprobs RandomBackend::do_logprobs(const PromptBundle& bundle, std::string_view continuation,
                                         std::span<const TokenId> candidates) {
  const std::uint64_t ctx = fnv1a64(bundle.rendered_text, mix_seed(descriptor().seed.value_or(0), 77));
  TokenLogprobs out;
  for (TokenId id : candidates) out.candidates[id] = std::log(hashed_unit(mix_seed(ctx, static_cast<std::uint64_t>(id))));
  // The whole continuation gets log(u) for one hashed uniform u, split evenly over its
  // tokens, so every continuation is equally likely to rank first.
  const auto tokens = mock_tokenize(continuation);
  const double total = std::log(hashed_unit(fnv1a64(continuation, ctx)));
  for (const auto& t : tokens) {
    out.continuation.push_back({token_id(t), total / static_cast<double>(tokens.size())});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scripted

ScriptedBackend::ScriptedBackend(std::size_t dim)
    : Backend(BackendDescriptor{BackendKind::kMockInformative, std::nullopt, dim, 1 << 20, std::nullopt, {}, {}}) {}

TokenEmbeddingMatrix ScriptedBackend::do_embed(const PromptBundle& bundle) {
  TokenEmbeddingMatrix m;
  m.dim = descriptor().embedding_dim;
  const auto tokens = mock_tokenize(bundle.rendered_text);
  m.token_count = std::max<std::size_t>(1, tokens.size());
  for (std::size_t t = 0; t < m.token_count; ++t) {
    const auto row = gaussian_vector(fnv1a64(t < tokens.size() ? tokens[t] : std::string()), m.dim, 1.0);
    m.values.insert(m.values.end(), row.begin(), row.end());
  }
  return m;
}

TokenLogprobs ScriptedBackend::do_logprobs(const PromptBundle&, std::string_view continuation,
                                           std::span<const TokenId> candidates) {
  TokenLogprobs out;
  for (TokenId id : candidates) {
    auto it = candidate_probs_.find(id);
    if (it != candidate_probs_.end()) out.candidates[id] = std::log(it->second);
  }
  const auto tokens = mock_tokenize(continuation);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    double p = default_token_prob_;
    if (!sequence_probs_.empty()) {
      p = sequence_probs_[i % sequence_probs_.size()];
    } else if (auto it = token_probs_.find(tokens[i]); it != token_probs_.end()) {
      p = it->second;
    }
    out.continuation.push_back({token_id(tokens[i]), std::log(p)});
  }
  return out;
}

std::unique_ptr<Backend> make_backend(const BackendDescriptor& descriptor, std::shared_ptr<const FeatureSchema> schema,
                                      const SerializationConfig& serialization) {
  descriptor.check();
  switch (descriptor.kind) {
    case BackendKind::kHttp: return std::make_unique<HttpBackend>(descriptor);
    case BackendKind::kMockInformative:
      return std::make_unique<MockInformativeBackend>(descriptor, std::move(schema), serialization);
    case BackendKind::kRandom: return std::make_unique<RandomBackend>(descriptor);
  }
  fail(ErrorCode::kConfigError, "unsupported backend kind");
}

}  // namespace tabembed
