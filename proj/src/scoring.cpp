#include "tabembed/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace tabembed {

double normalized_ab(double lp_a, double lp_b) {
  const double m = std::max(lp_a, lp_b);
  const double ea = std::exp(lp_a - m);
  const double eb = std::exp(lp_b - m);
  return ea / (ea + eb);
}

BinaryScore ab_probability(const PromptBundle& bundle, Backend& backend) {
  if (bundle.question_type != QuestionType::kBinary) {
    fail(ErrorCode::kInvalidArgument, "A/B probability needs a binary question");
  }
  const TokenId a = backend.answer_a_id();
  const TokenId b = backend.answer_b_id();
  const std::vector<TokenId> candidates{a, b};
  const TokenLogprobs lp = backend.continuation_logprobs(bundle, "", candidates);
  BinaryScore s;
  s.raw_logprob_a = lp.candidates.at(a);
  s.raw_logprob_b = lp.candidates.at(b);
  s.p_yes = normalized_ab(s.raw_logprob_a, s.raw_logprob_b);
  return s;
}

double sequence_loglik(const PromptBundle& bundle, std::string_view answer, Backend& backend) {
  if (answer.empty()) fail(ErrorCode::kInvalidArgument, "answer must be nonempty");
  const TokenLogprobs lp = backend.continuation_logprobs(bundle, answer, {});
  double sum = 0.0;
  for (const auto& t : lp.continuation) sum += t.logprob;
  return sum;
}

BinaryScore sequence_probability(const PromptBundle& bundle, Backend& backend) {
  BinaryScore s;
  s.raw_logprob_a = sequence_loglik(bundle, kAnswerYes, backend);
  s.raw_logprob_b = sequence_loglik(bundle, kAnswerNo, backend);
  s.p_yes = normalized_ab(s.raw_logprob_a, s.raw_logprob_b);
  return s;
}

double perplexity(std::string_view text, Backend& backend) {
  if (text.empty()) fail(ErrorCode::kInvalidArgument, "perplexity of empty text");
  PromptBundle empty;
  const TokenLogprobs lp = backend.continuation_logprobs(empty, text, {});
  if (lp.continuation.empty()) fail(ErrorCode::kBackendProtocolError, "backend returned no tokens for perplexity");
  double sum = 0.0;
  for (const auto& t : lp.continuation) sum += t.logprob;
  return std::exp(-sum / static_cast<double>(lp.continuation.size()));
}

std::vector<std::size_t> rank_by_perplexity(const std::vector<std::string>& candidates, Backend& backend) {
  std::vector<double> ppl;
  ppl.reserve(candidates.size());
  for (const auto& c : candidates) ppl.push_back(perplexity(c, backend));
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ppl[a] < ppl[b]; });
  return order;
}

namespace {

// Nonempty subsets of {0..n-1} with at most max_size members, smaller sets first and
// lexicographic within a size.
std::vector<std::vector<std::size_t>> option_sets(std::size_t n, std::size_t max_size) {
  if (max_size == 0 || max_size > n) max_size = n;
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t size = 1; size <= max_size; ++size) {
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    while (true) {
      out.push_back(idx);
      std::size_t i = size;
      while (i > 0 && idx[i - 1] == n - size + (i - 1)) --i;
      if (i == 0) break;
      ++idx[i - 1];
      for (std::size_t j = i; j < size; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  return out;
}

std::string letters_of(const std::vector<std::size_t>& set) {
  std::string out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (i) out += ", ";
    out += static_cast<char>('A' + set[i]);
  }
  return out;
}

}  // namespace

std::size_t mcqa_candidate_count(std::size_t n_options, std::size_t max_set_size) {
  return option_sets(n_options, max_set_size).size();
}

McqaResult mcqa_self_consistency(const PromptBundle& question, const std::vector<std::string>& options,
                                 const std::set<std::string>& true_set, std::size_t n_shuffles, std::uint64_t seed,
                                 Backend& backend, std::size_t max_set_size) {
  if (options.empty()) fail(ErrorCode::kEmptyOptions, "multiple-choice question has no options");
  if (options.size() > 20) fail(ErrorCode::kInvalidArgument, "at most 20 options are supported");
  if (n_shuffles == 0) fail(ErrorCode::kInvalidArgument, "n_shuffles must be at least 1");
  for (const auto& t : true_set) {
    if (std::find(options.begin(), options.end(), t) == options.end()) {
      fail(ErrorCode::kInvalidArgument, "true option '" + t + "' is not among the options");
    }
  }
  const auto sets = option_sets(options.size(), max_set_size);

  McqaResult result;
  result.n_shuffles = n_shuffles;
  std::mt19937_64 rng(seed);
  for (std::size_t s = 0; s < n_shuffles; ++s) {
    std::vector<std::string> order = options;
    std::shuffle(order.begin(), order.end(), rng);
    PromptBundle prompt = question;
    prompt.rendered_text += "\n";
    for (std::size_t i = 0; i < order.size(); ++i) {
      prompt.rendered_text += "\n" + std::string(1, static_cast<char>('A' + i)) + ". " + order[i];
    }
    prompt.rendered_text += "\nAnswer:";
    prompt.token_estimate = estimate_tokens(prompt.rendered_text);

    std::size_t best = 0;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sets.size(); ++c) {
      const double ll = sequence_loglik(prompt, letters_of(sets[c]), backend);
      if (ll > best_ll) {
        best_ll = ll;
        best = c;
      }
    }
    std::set<std::string> predicted;
    for (auto i : sets[best]) predicted.insert(order[i]);
    result.outcomes.push_back(predicted == true_set ? 1 : 0);
    result.predictions.push_back(std::move(predicted));
  }
  result.exact_match_mean = std::accumulate(result.outcomes.begin(), result.outcomes.end(), 0.0) /
                            static_cast<double>(n_shuffles);
  return result;
}

YesNo decode_yes_no(double p_yes) { return p_yes >= 0.5 ? YesNo::kYes : YesNo::kNo; }

YesNo direct_answer(const PromptBundle& bundle, Backend& backend) {
  return decode_yes_no(ab_probability(bundle, backend).p_yes);
}

void write_score_lines(const std::vector<ScoreLine>& lines, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  for (const auto& l : lines) {
    out << nlohmann::json{{"id", l.id}, {"task", l.task}, {"method", l.method}, {"score", l.score},
                          {"components", l.components}}
               .dump()
        << '\n';
  }
}

std::vector<ScoreLine> read_score_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<ScoreLine> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("task").get<std::string>(), j.at("method").get<std::string>(),
                     j.at("score").get<double>(), j.value("components", nlohmann::json::object())});
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParseFailure, std::string("bad score line: ") + e.what());
    }
  }
  return out;
}

}  // namespace tabembed
