#pragma once

// Probability-based outputs of a language model: normalized A/B probability,
// answer-sequence likelihood, perplexity, multiple-choice self-consistency.

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "tabembed/backend.hpp"

namespace tabembed {

struct BinaryScore {
  double p_yes = 0.5;
  double raw_logprob_a = 0.0;
  double raw_logprob_b = 0.0;
};

// exp(lp_a) / (exp(lp_a) + exp(lp_b)), evaluated with the max subtracted.
double normalized_ab(double lp_a, double lp_b);

inline constexpr std::string_view kAnswerYes = "A. Yes.";
inline constexpr std::string_view kAnswerNo = "B. No.";

BinaryScore ab_probability(const PromptBundle& bundle, Backend& backend);

// Sum over answer tokens of log p(token | prompt, previous answer tokens).
double sequence_loglik(const PromptBundle& bundle, std::string_view answer, Backend& backend);

// Normalized "A. Yes." vs "B. No." sequence likelihoods.
BinaryScore sequence_probability(const PromptBundle& bundle, Backend& backend);

// exp(-mean token log-probability) of `text` scored from an empty context.
double perplexity(std::string_view text, Backend& backend);

// Indices of `candidates` ordered by ascending perplexity (most fluent first; ties keep input order).
std::vector<std::size_t> rank_by_perplexity(const std::vector<std::string>& candidates, Backend& backend);

struct McqaResult {
  std::vector<std::set<std::string>> predictions;  // per shuffle
  std::vector<int> outcomes;                       // per shuffle exact match in {0,1}
  double exact_match_mean = 0.0;
  std::size_t n_shuffles = 0;
};

// For each seeded shuffle, renders the options as lettered choices and picks the option
// set (any nonempty subset up to `max_set_size`, 0 = unbounded) whose letter list has the
// highest sequence likelihood. Ties go to the earlier set (smaller sets first, then lexicographic).
McqaResult mcqa_self_consistency(const PromptBundle& question, const std::vector<std::string>& options,
                                 const std::set<std::string>& true_set, std::size_t n_shuffles, std::uint64_t seed,
                                 Backend& backend, std::size_t max_set_size = 0);

// Number of option sets the MCQA selector chooses from.
std::size_t mcqa_candidate_count(std::size_t n_options, std::size_t max_set_size);

enum class YesNo { kNo = 0, kYes = 1 };

// Yes iff p_yes >= 0.5.
YesNo decode_yes_no(double p_yes);
YesNo direct_answer(const PromptBundle& bundle, Backend& backend);

// One line of a JSON-lines score file.
struct ScoreLine {
  std::string id;
  std::string task;
  std::string method;
  double score = 0.0;
  nlohmann::json components = nlohmann::json::object();
};

void write_score_lines(const std::vector<ScoreLine>& lines, const std::filesystem::path& path);
std::vector<ScoreLine> read_score_lines(const std::filesystem::path& path);

}  // namespace tabembed
