#include "tabembed/serializer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"

namespace tabembed {

namespace {

#include "builtin_templates.inc"

const std::regex& slot_regex() {
  static const std::regex re(R"(\[value:([^\]]+)\])");
  return re;
}

// Unique values in temporal order; the first occurrence keeps its position.
std::vector<double> unique_in_order(const std::vector<SeriesPoint>& points, int decimal_places) {
  std::vector<double> out;
  std::set<std::string> seen;
  for (const auto& p : points) {
    if (seen.insert(format_number(p.value, decimal_places)).second) out.push_back(p.value);
  }
  return out;
}

std::string render_value(const Record& r, const FeatureDef& def, int decimal_places) {
  switch (def.kind) {
    case FeatureKind::kStaticNumeric: return format_number(r.numeric.at(def.name), decimal_places);
    case FeatureKind::kStaticCategorical: return r.categorical.at(def.name);
    case FeatureKind::kTimeseriesNumeric: {
      std::string out;
      for (double v : unique_in_order(r.series.at(def.name), decimal_places)) {
        if (!out.empty()) out += ", ";
        out += format_number(v, decimal_places);
      }
      return out;
    }
  }
  return {};
}

const FeatureDef& slot_feature(const FeatureSchema& schema, const std::string& name) {
  const FeatureDef* def = schema.find(name);
  if (!def) fail(ErrorCode::kUnknownTemplate, "template slot '" + name + "' is not a schema feature");
  return *def;
}

// Fills every slot; returns nullopt when any slot's feature is unobserved.
std::optional<std::string> fill_slots(const std::string& text, const Record& r, const FeatureSchema& schema,
                                      int decimal_places) {
  std::string out;
  auto last = text.cbegin();
  for (auto it = std::sregex_iterator(text.begin(), text.end(), slot_regex()); it != std::sregex_iterator(); ++it) {
    const FeatureDef& def = slot_feature(schema, (*it)[1].str());
    if (!r.observed(def)) return std::nullopt;
    out.append(last, (*it)[0].first);
    out += render_value(r, def, decimal_places);
    last = (*it)[0].second;
  }
  out.append(last, text.cend());
  return out;
}

std::string regex_escape(std::string_view text) {
  static const std::string special = R"(\^$.|?*+()[]{}/)";
  std::string out;
  for (char c : text) {
    if (special.find(c) != std::string::npos) out += '\\';
    out += c;
  }
  return out;
}

constexpr std::string_view kNumberListPattern = R"((-?\d+(?:\.\d+)?(?:, -?\d+(?:\.\d+)?)*))";

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    std::string piece = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    while (!piece.empty() && piece.front() == ' ') piece.erase(piece.begin());
    if (piece.empty()) fail(ErrorCode::kParseFailure, "empty number in list '" + text + "'");
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(piece, &used);
    } catch (const std::exception&) {
      fail(ErrorCode::kParseFailure, "'" + piece + "' is not a number");
    }
    if (used != piece.size()) fail(ErrorCode::kParseFailure, "'" + piece + "' is not a number");
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

// Builds a regex for template text with slots turned into capture groups. Brace groups
// become optional when `optional_groups` is set.
std::string pattern_for(const std::string& text, const FeatureSchema& schema, bool optional_groups,
                        std::vector<std::string>& slot_order) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (optional_groups && text[i] == '{') {
      out += "(?:";
      ++i;
      continue;
    }
    if (optional_groups && text[i] == '}') {
      out += ")?";
      ++i;
      continue;
    }
    if (text.compare(i, 7, "[value:") == 0) {
      auto close = text.find(']', i);
      std::string name = text.substr(i + 7, close - i - 7);
      const FeatureDef& def = slot_feature(schema, name);
      slot_order.push_back(name);
      if (def.kind == FeatureKind::kStaticCategorical) {
        out += "(.+?)";
      } else {
        out += kNumberListPattern;
      }
      i = close + 1;
      continue;
    }
    out += regex_escape(std::string_view(&text[i], 1));
    ++i;
  }
  return out;
}

void collect(const std::smatch& m, const std::vector<std::string>& slots, const FeatureSchema& schema,
             std::map<std::string, std::vector<double>>& out) {
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (!m[s + 1].matched) continue;
    const FeatureDef& def = *schema.find(slots[s]);
    if (def.kind == FeatureKind::kStaticCategorical) continue;
    out[slots[s]] = parse_number_list(m[s + 1].str());
  }
}

std::string table_label(const FeatureDef& def) {
  return def.unit.empty() ? def.label() : def.label() + " (" + def.unit + ")";
}

std::string json_escape(const std::string& s) { return nlohmann::json(s).dump(); }

std::string trim(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

const FeatureDef& feature_by_table_label(const FeatureSchema& schema, const std::string& label) {
  for (const auto& def : schema.features()) {
    if (table_label(def) == label) return def;
  }
  fail(ErrorCode::kParseFailure, "table row '" + label + "' names no schema feature");
}

}  // namespace

std::string_view to_string(SerializationFormat format) {
  switch (format) {
    case SerializationFormat::kNarrative: return "narrative";
    case SerializationFormat::kJson: return "json";
    case SerializationFormat::kHtml: return "html";
    case SerializationFormat::kMarkdown: return "markdown";
  }
  return "narrative";
}

SerializationFormat serialization_format_from_string(std::string_view text) {
  if (text == "narrative") return SerializationFormat::kNarrative;
  if (text == "json") return SerializationFormat::kJson;
  if (text == "html") return SerializationFormat::kHtml;
  if (text == "markdown") return SerializationFormat::kMarkdown;
  fail(ErrorCode::kConfigError, "unknown serialization format '" + std::string(text) + "'");
}

std::string format_number(double value, int decimal_places) {
  if (decimal_places < 0 || decimal_places > 6) {
    fail(ErrorCode::kInvalidArgument, "decimal_places must be in [0, 6]");
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimal_places, value);
  std::string s = buf;
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

NarrativeTemplate NarrativeTemplate::parse(std::string_view text) {
  NarrativeTemplate t;
  bool saw_joiner = false;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto colon = line.find(':');
    if (colon == std::string::npos) fail(ErrorCode::kUnknownTemplate, "template line lacks a directive: " + line);
    std::string key = line.substr(0, colon);
    std::string value = line.substr(colon + 1);
    if (!value.empty() && value.front() == ' ') value.erase(value.begin());
    if (key == "id") {
      t.id_ = trim(value);
    } else if (key == "header") {
      t.header_ = value;
    } else if (key == "item") {
      t.items_.push_back(value);
    } else if (key == "joiner") {
      t.joiner_ = value;
      saw_joiner = true;
    } else if (key == "footer") {
      t.footer_ = value;
    } else {
      fail(ErrorCode::kUnknownTemplate, "unknown template directive '" + key + "'");
    }
  }
  if (!saw_joiner) t.joiner_ = ", ";
  if (t.id_.empty()) fail(ErrorCode::kUnknownTemplate, "template lacks an id");
  return t;
}

NarrativeTemplate NarrativeTemplate::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kUnknownTemplate, "cannot open template file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

NarrativeTemplate NarrativeTemplate::generic(const FeatureSchema& schema) {
  NarrativeTemplate t;
  t.id_ = "generic";
  t.header_ = "Patient record: ";
  t.footer_ = ".";
  for (const auto& def : schema.features()) {
    std::string item = def.label() + " [value:" + def.name + "]";
    if (!def.unit.empty()) item += " " + def.unit;
    t.items_.push_back(std::move(item));
  }
  return t;
}

std::string NarrativeTemplate::render(const Record& record, const FeatureSchema& schema, int decimal_places) const {
  std::string out;
  // Header: literal text with optional brace groups.
  std::size_t i = 0;
  while (i < header_.size()) {
    if (header_[i] == '{') {
      auto close = header_.find('}', i);
      if (close == std::string::npos) fail(ErrorCode::kUnknownTemplate, "unbalanced brace in template header");
      if (auto filled = fill_slots(header_.substr(i + 1, close - i - 1), record, schema, decimal_places)) out += *filled;
      i = close + 1;
    } else {
      auto next = header_.find('{', i);
      std::string literal = header_.substr(i, next == std::string::npos ? std::string::npos : next - i);
      auto filled = fill_slots(literal, record, schema, decimal_places);
      out += filled ? *filled : std::string();
      i = next == std::string::npos ? header_.size() : next;
    }
  }
  bool first = true;
  for (const auto& item : items_) {
    auto filled = fill_slots(item, record, schema, decimal_places);
    if (!filled) continue;
    if (!first) out += joiner_;
    first = false;
    out += *filled;
  }
  out += footer_;
  return out;
}

std::map<std::string, std::vector<double>> NarrativeTemplate::parse_values(std::string_view text_view,
                                                                           const FeatureSchema& schema) const {
  const std::string text(text_view);
  std::map<std::string, std::vector<double>> out;
  std::vector<std::string> header_slots;
  const std::regex header_re(pattern_for(header_, schema, true, header_slots));
  std::smatch m;
  if (!std::regex_search(text.cbegin(), text.cend(), m, header_re, std::regex_constants::match_continuous)) {
    fail(ErrorCode::kParseFailure, "narrative does not start with the '" + id_ + "' template header");
  }
  collect(m, header_slots, schema, out);
  auto pos = text.cbegin() + m.length(0);

  const std::string tail = "(?=" + regex_escape(joiner_) + "|" + regex_escape(footer_) + "$)";
  std::size_t next_item = 0;
  bool first = true;
  while (true) {
    if (std::string(pos, text.cend()) == footer_) break;
    if (!first) {
      if (std::string(pos, text.cend()).rfind(joiner_, 0) != 0) {
        fail(ErrorCode::kParseFailure, "expected item joiner in narrative");
      }
      pos += static_cast<std::ptrdiff_t>(joiner_.size());
    }
    bool matched = false;
    for (; next_item < items_.size(); ++next_item) {
      std::vector<std::string> slots;
      const std::regex item_re(pattern_for(items_[next_item], schema, false, slots) + tail);
      if (std::regex_search(pos, text.cend(), m, item_re, std::regex_constants::match_continuous)) {
        collect(m, slots, schema, out);
        pos += m.length(0);
        ++next_item;
        matched = true;
        break;
      }
    }
    if (!matched) fail(ErrorCode::kParseFailure, "narrative text does not match any remaining template item");
    first = false;
  }
  return out;
}

std::string NarrativeTemplate::to_text() const {
  std::string out = "id: " + id_ + "\nheader: " + header_ + "\n";
  for (const auto& item : items_) out += "item: " + item + "\n";
  out += "joiner: " + joiner_ + "\nfooter: " + footer_ + "\n";
  return out;
}

std::string builtin_template_text(std::string_view id) {
  if (id == "diagnosis") return std::string(kDiagnosisTemplate);
  if (id == "mimic") return std::string(kMimicTemplate);
  fail(ErrorCode::kUnknownTemplate, "no builtin template '" + std::string(id) + "'");
}

NarrativeTemplate resolve_template(const std::string& template_id, const FeatureSchema& schema) {
  if (template_id == "generic") return NarrativeTemplate::generic(schema);
  if (template_id.starts_with("file:")) return NarrativeTemplate::load(template_id.substr(5));
  return NarrativeTemplate::parse(builtin_template_text(template_id));
}

std::string serialize(const Record& record, const FeatureSchema& schema, const SerializationConfig& cfg) {
  if (cfg.decimal_places < 0 || cfg.decimal_places > 6) {
    fail(ErrorCode::kInvalidArgument, "decimal_places must be in [0, 6]");
  }
  const int dp = cfg.decimal_places;
  switch (cfg.format) {
    case SerializationFormat::kNarrative:
      return resolve_template(cfg.template_id, schema).render(record, schema, dp);
    case SerializationFormat::kJson: {
      std::string out = "{";
      bool first = true;
      for (const auto& def : schema.features()) {
        if (!record.observed(def)) continue;
        if (!first) out += ", ";
        first = false;
        out += json_escape(def.name) + ": ";
        switch (def.kind) {
          case FeatureKind::kStaticNumeric: out += format_number(record.numeric.at(def.name), dp); break;
          case FeatureKind::kStaticCategorical: out += json_escape(record.categorical.at(def.name)); break;
          case FeatureKind::kTimeseriesNumeric: out += "[" + render_value(record, def, dp) + "]"; break;
        }
      }
      return out + "}";
    }
    case SerializationFormat::kHtml: {
      std::string out = "<table><tr><th>feature</th><th>value</th></tr>";
      for (const auto& def : schema.features()) {
        if (!record.observed(def)) continue;
        out += "<tr><td>" + table_label(def) + "</td><td>" + render_value(record, def, dp) + "</td></tr>";
      }
      return out + "</table>";
    }
    case SerializationFormat::kMarkdown: {
      std::string out = "| feature | value |\n| --- | --- |\n";
      for (const auto& def : schema.features()) {
        if (!record.observed(def)) continue;
        out += "| " + table_label(def) + " | " + render_value(record, def, dp) + " |\n";
      }
      return out;
    }
  }
  return {};
}

std::map<std::string, std::vector<double>> roundtrip_check(std::string_view serialized, const SerializationConfig& cfg,
                                                           const FeatureSchema& schema) {
  std::map<std::string, std::vector<double>> out;
  switch (cfg.format) {
    case SerializationFormat::kNarrative:
      return resolve_template(cfg.template_id, schema).parse_values(serialized, schema);
    case SerializationFormat::kJson: {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(serialized);
      } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::kParseFailure, e.what());
      }
      if (!j.is_object()) fail(ErrorCode::kParseFailure, "serialized JSON is not an object");
      for (const auto& [key, value] : j.items()) {
        const FeatureDef* def = schema.find(key);
        if (!def) fail(ErrorCode::kParseFailure, "JSON key '" + key + "' is not a schema feature");
        if (value.is_number()) {
          out[key] = {value.get<double>()};
        } else if (value.is_array()) {
          out[key] = value.get<std::vector<double>>();
        } else if (!value.is_string()) {
          fail(ErrorCode::kParseFailure, "unexpected JSON value for '" + key + "'");
        }
      }
      return out;
    }
    case SerializationFormat::kHtml: {
      const std::string text(serialized);
      const std::string head = "<table><tr><th>feature</th><th>value</th></tr>";
      if (!text.starts_with(head) || !text.ends_with("</table>")) fail(ErrorCode::kParseFailure, "not a feature table");
      static const std::regex row_re("<tr><td>(.*?)</td><td>(.*?)</td></tr>");
      std::size_t consumed = head.size();
      for (auto it = std::sregex_iterator(text.begin() + static_cast<std::ptrdiff_t>(head.size()), text.end(), row_re);
           it != std::sregex_iterator(); ++it) {
        if (static_cast<std::size_t>(it->position(0)) + head.size() != consumed) {
          fail(ErrorCode::kParseFailure, "unexpected content between table rows");
        }
        consumed += static_cast<std::size_t>(it->length(0));
        const FeatureDef& def = feature_by_table_label(schema, (*it)[1].str());
        if (def.kind != FeatureKind::kStaticCategorical) out[def.name] = parse_number_list((*it)[2].str());
      }
      if (consumed + std::string("</table>").size() != text.size()) fail(ErrorCode::kParseFailure, "trailing content");
      return out;
    }
    case SerializationFormat::kMarkdown: {
      std::istringstream in{std::string(serialized)};
      std::string line;
      int lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (lineno <= 2) {
          const char* expected = lineno == 1 ? "| feature | value |" : "| --- | --- |";
          if (line != expected) fail(ErrorCode::kParseFailure, "missing markdown table header");
          continue;
        }
        if (line.size() < 4 || !line.starts_with("| ") || !line.ends_with(" |")) {
          fail(ErrorCode::kParseFailure, "malformed markdown row: " + line);
        }
        std::string body = line.substr(2, line.size() - 4);
        auto sep = body.rfind(" | ");
        if (sep == std::string::npos) fail(ErrorCode::kParseFailure, "malformed markdown row: " + line);
        const FeatureDef& def = feature_by_table_label(schema, body.substr(0, sep));
        if (def.kind != FeatureKind::kStaticCategorical) out[def.name] = parse_number_list(body.substr(sep + 3));
      }
      if (lineno < 2) fail(ErrorCode::kParseFailure, "missing markdown table header");
      return out;
    }
  }
  return out;
}

const std::string& system_prompt(int persona) {
  static const std::vector<std::string> prompts = {
      "As a healthcare provider, please assess the patient's condition provided below and outline the likely causes "
      "or diagnoses for their clinical worsening. List only the diagnoses and keep your response brief.",
      "You are an AI with medical expertise. Create an embedding for the probable problems or diagnoses that are "
      "causing clinical deterioration, based on the patient's condition detailed below, to aid in training a "
      "diagnostic prediction machine learning classifier. Be brief in your description.",
      "As a medical expert, please examine the patient's condition by first identifying any abnormal values. Next, "
      "critically analyze these values to assess their impact, and clearly state your final diagnosis regarding what "
      "might be causing the clinical deterioration. Keep your summary brief.",
      "You are a medical doctor. Based on the patient’s condition, determine the likelihood that diagnosis "
      "{target} is causing their clinical deterioration. Be aware that diagnosis {target} occurs in {prevalence}% of "
      "similar cases.",
  };
  if (persona < 1 || persona > 4) fail(ErrorCode::kInvalidArgument, "persona must be 1..4");
  return prompts[static_cast<std::size_t>(persona - 1)];
}

PromptConfig simple_fewshot_config(std::vector<FewShotExample> examples) {
  PromptConfig cfg;
  cfg.system_instruction = system_prompt(1);
  cfg.fewshot = std::move(examples);
  return cfg;
}

PromptConfig cot_fewshot_config(std::vector<FewShotExample> examples) {
  PromptConfig cfg;
  cfg.system_instruction = system_prompt(3);
  cfg.fewshot = std::move(examples);
  return cfg;
}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

namespace {

void replace_all(std::string& s, std::string_view from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

std::string render_instruction(std::string text, const PromptConfig& p) {
  if (text.find("{prevalence}") != std::string::npos && !p.prevalence_percent) {
    // Drop the sentence that carries the prevalence slot.
    auto slot = text.find("{prevalence}");
    auto begin = text.rfind(". ", slot);
    begin = begin == std::string::npos ? 0 : begin + 1;
    auto end = text.find('.', slot);
    end = end == std::string::npos ? text.size() : end + 1;
    text.erase(begin, end - begin);
  }
  replace_all(text, "{target}", p.target.empty() ? std::string("X") : p.target);
  if (p.prevalence_percent) replace_all(text, "{prevalence}", format_number(*p.prevalence_percent, 2));
  return text;
}

}  // namespace

PromptBundle assemble_prompt(std::string_view serialized, const PromptConfig& p, SerializationFormat format,
                             std::string source_record_id) {
  if (serialized.empty()) fail(ErrorCode::kInvalidArgument, "serialized record is empty");
  if (p.prevalence_percent && (*p.prevalence_percent < 0.0 || *p.prevalence_percent > 100.0)) {
    fail(ErrorCode::kInvalidArgument, "prevalence percent must lie in [0, 100]");
  }
  for (const auto& ex : p.fewshot) {
    if (ex.answer.empty()) fail(ErrorCode::kInvalidArgument, "few-shot answer must be nonempty");
  }

  std::string question;
  const bool carries_prevalence =
      p.system_instruction && p.system_instruction->find("{prevalence}") != std::string::npos;
  if (p.question_type == QuestionType::kBinary) {
    if (p.target.empty()) fail(ErrorCode::kInvalidArgument, "binary question requires a target name");
    question = "Does this patient have " + p.target + "?";
    if (p.prevalence_percent && !carries_prevalence) {
      question += " Be aware that " + p.target + " occurs in " + format_number(*p.prevalence_percent, 2) +
                  "% of similar cases.";
    }
    if (p.answer_options) question += "\nA. Yes\nB. No";
  } else {
    question = p.question;
  }
  if (question.empty()) fail(ErrorCode::kEmptyQuestion, "prompt question is empty");

  std::vector<std::string> user_parts;
  for (const auto& ex : p.fewshot) {
    std::string block = "Input: " + ex.serialized_input;
    if (ex.cot_explanation) block += "\nExplanation: " + *ex.cot_explanation;
    block += "\nAnswer: " + ex.answer;
    user_parts.push_back(std::move(block));
  }
  user_parts.emplace_back(serialized);
  user_parts.push_back(question);

  std::string user;
  for (std::size_t i = 0; i < user_parts.size(); ++i) {
    if (i) user += "\n\n";
    user += user_parts[i];
  }

  std::string text;
  if (p.system_instruction) text = render_instruction(*p.system_instruction, p) + "\n\n";
  if (p.chat_template == ChatTemplate::kInstWrapped) {
    text += std::string(kInstBegin) + " " + user + " " + std::string(kInstEnd);
  } else {
    text += user;
  }

  PromptBundle bundle;
  bundle.rendered_text = std::move(text);
  bundle.format = format;
  bundle.token_estimate = std::max<std::size_t>(1, estimate_tokens(bundle.rendered_text));
  bundle.source_record_id = std::move(source_record_id);
  bundle.record_text = std::string(serialized);
  bundle.question_type = p.question_type;
  bundle.target = p.target;
  return bundle;
}

}  // namespace tabembed
