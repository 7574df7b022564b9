#pragma once

// Record-to-text rendering (narrative/JSON/HTML/Markdown) and prompt assembly.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tabembed/tabular.hpp"

namespace tabembed {

enum class SerializationFormat { kNarrative, kJson, kHtml, kMarkdown };

std::string_view to_string(SerializationFormat format);
SerializationFormat serialization_format_from_string(std::string_view text);

struct SerializationConfig {
  SerializationFormat format = SerializationFormat::kNarrative;
  std::string template_id = "generic";
  int decimal_places = 2;
};

// Formats with fixed decimals and strips trailing zeros: 70.00 -> "70", 36.50 -> "36.5".
std::string format_number(double value, int decimal_places);

// Narrative template. Text file syntax, one directive per line:
//   id: <name>
//   header: <text>      optional groups in braces are dropped when a slot inside is unobserved
//   item: <text>        one clause per feature, rendered only when all its slots are observed
//   joiner: <text>      separator between rendered items (default ", ")
//   footer: <text>
// Slots are written `[value:<feature-name>]`. Lines starting with '#' are comments.
class NarrativeTemplate {
 public:
  static NarrativeTemplate parse(std::string_view text);
  static NarrativeTemplate load(const std::string& path);
  // "<label> [value] <unit>" per feature, for schemas without a hand-written template.
  static NarrativeTemplate generic(const FeatureSchema& schema);

  const std::string& id() const { return id_; }
  std::string render(const Record& record, const FeatureSchema& schema, int decimal_places) const;
  // Recovers the numeric values of a rendered narrative by anchoring on the template text.
  std::map<std::string, std::vector<double>> parse_values(std::string_view text, const FeatureSchema& schema) const;
  std::string to_text() const;

 private:
  std::string id_;
  std::string header_;
  std::vector<std::string> items_;
  std::string joiner_ = ", ";
  std::string footer_;
};

// Shipped templates: "diagnosis" (ward deterioration) and "mimic" (24-hour ICU series).
std::string builtin_template_text(std::string_view id);
// Resolves "generic", a builtin id, or "file:<path>". Throws kUnknownTemplate.
NarrativeTemplate resolve_template(const std::string& template_id, const FeatureSchema& schema);

// Features without observations are omitted in every format.
std::string serialize(const Record& record, const FeatureSchema& schema, const SerializationConfig& cfg);

// Test oracle: parses serialized text back into feature -> numeric values (series give
// their rendered unique values). Throws kParseFailure on text the serializer cannot emit.
std::map<std::string, std::vector<double>> roundtrip_check(std::string_view serialized, const SerializationConfig& cfg,
                                                           const FeatureSchema& schema);

enum class QuestionType { kGeneral, kBinary };
enum class ChatTemplate { kPlain, kInstWrapped };

struct FewShotExample {
  std::string serialized_input;
  std::string answer;
  std::optional<std::string> cot_explanation;
};

struct PromptConfig {
  std::optional<std::string> system_instruction;
  std::string question = "What are the diagnoses for this patient?";
  QuestionType question_type = QuestionType::kGeneral;
  std::string target;                       // binary questions
  std::optional<double> prevalence_percent;  // binary questions, in [0, 100]
  bool answer_options = false;               // append lettered "A. Yes" / "B. No" choices
  std::vector<FewShotExample> fewshot;
  ChatTemplate chat_template = ChatTemplate::kPlain;
};

// The four persona instructions (1: medical professional, 2: AI system,
// 3: chain-of-thought, 4: binary question with prevalence). Persona 4 carries
// `{target}` and `{prevalence}` placeholders.
const std::string& system_prompt(int persona);

PromptConfig simple_fewshot_config(std::vector<FewShotExample> examples);
PromptConfig cot_fewshot_config(std::vector<FewShotExample> examples);

struct PromptBundle {
  std::string rendered_text;
  SerializationFormat format = SerializationFormat::kNarrative;
  std::size_t token_estimate = 0;
  std::string source_record_id;
  std::string record_text;
  QuestionType question_type = QuestionType::kGeneral;
  std::string target;
};

inline constexpr std::string_view kInstBegin = "[INST]";
inline constexpr std::string_view kInstEnd = "[/INST]";

std::size_t estimate_tokens(std::string_view text);

// Order: system instruction, few-shot block, serialized record, question.
PromptBundle assemble_prompt(std::string_view serialized, const PromptConfig& pcfg,
                             SerializationFormat format = SerializationFormat::kNarrative,
                             std::string source_record_id = {});

}  // namespace tabembed
