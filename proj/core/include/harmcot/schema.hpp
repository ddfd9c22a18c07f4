#pragma once

// Domain types for the harmful-meme reasoning pipeline: the five-category
// harm taxonomy, dataset records, and the four-section reasoning document
// (QUESTION / CAPTION / REASONING / JUDGEMENT) with its tokenizer, serializer
// and total parser.

#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace harmcot {

using Token = std::string;
using TokenSeq = std::vector<std::string>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Taxonomy
// ---------------------------------------------------------------------------

// Order is fixed and load-bearing: reward vectors, metric tables and the
// REASONING section all index categories in this order.
enum class HarmCategory : int {
    Discrimination = 0,
    Offensive = 1,
    Violence = 2,
    Vulgar = 3,
    Antagonism = 4,
};

inline constexpr std::size_t kNumCategories = 5;

constexpr std::array<HarmCategory, kNumCategories> all_categories() {
    return {HarmCategory::Discrimination, HarmCategory::Offensive, HarmCategory::Violence,
            HarmCategory::Vulgar, HarmCategory::Antagonism};
}

const std::string& category_name(HarmCategory c);
std::optional<HarmCategory> category_from_name(const std::string& name);

enum class BinaryLabel { Harmful, Nonharmful };

const std::string& label_name(BinaryLabel l);  // "harmful" / "nonharmful"
std::optional<BinaryLabel> label_from_name(const std::string& name);

enum class Split { Train, Test, Unassigned };

const std::string& split_name(Split s);
std::optional<Split> split_from_name(const std::string& name);

// ---------------------------------------------------------------------------
// Records and annotations
// ---------------------------------------------------------------------------

struct GoldVerdict {
    bool applicable = false;
    std::string rationale;  // meaningful only when applicable
};

// Gold chain-of-thought: caption, one verdict per category, final judgement.
struct CoTAnnotation {
    std::string caption;
    std::array<GoldVerdict, kNumCategories> verdicts{};
    BinaryLabel judgement = BinaryLabel::Nonharmful;

    bool any_applicable() const;
};

// Throws ValidationError unless judgement == Harmful iff some verdict applies.
void validate_annotation(const CoTAnnotation& ann);

struct MemeRecord {
    std::string id;
    TokenSeq image_tokens;  // symbolic stand-in for pixel content
    std::string text;
    BinaryLabel label = BinaryLabel::Nonharmful;
    std::set<HarmCategory> subcategories;  // empty iff label == Nonharmful
    std::optional<CoTAnnotation> cot;
    Split split = Split::Unassigned;
};

// Throws ValidationError naming the record id on any invariant violation.
void validate_record(const MemeRecord& rec);

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

struct PromptSpec {
    std::string template_id;
    TokenSeq rendered_tokens;
};

// Deterministic; throws ConfigError for an unregistered template_id.
PromptSpec render_prompt(const MemeRecord& rec, const std::string& template_id);
std::vector<std::string> prompt_template_ids();

// ---------------------------------------------------------------------------
// Reasoning document
// ---------------------------------------------------------------------------

// Section header tokens, in document order.
extern const std::array<std::string, 4> kSectionHeaders;  // QUESTION CAPTION REASONING JUDGEMENT

// Fixed QUESTION section body shared by every document.
const std::string& question_rubric();

enum class ParsedVerdict { Applicable, NotApplicable, Missing };
enum class ParsedJudgement { Harmful, Nonharmful, Unparseable };

struct ParsedResponse {
    TokenSeq raw_tokens;
    std::optional<std::string> caption;
    std::array<ParsedVerdict, kNumCategories> verdicts{ParsedVerdict::Missing, ParsedVerdict::Missing,
                                                       ParsedVerdict::Missing, ParsedVerdict::Missing,
                                                       ParsedVerdict::Missing};
    ParsedJudgement judgement = ParsedJudgement::Unparseable;
    std::array<bool, 4> sections_present{};  // header tokens seen, document order
};

// Emits the four-section document. Requires a valid annotation.
std::string serialize_cot(const CoTAnnotation& ann);

// Whitespace tokenizer that splits '.', ':' and ',' into standalone tokens.
// Internal apostrophes ("image's") are preserved.
TokenSeq tokenize(const std::string& text);

// Joins tokens with single spaces. Not the inverse of tokenize at the string
// level; parse-level round trips are what the format guarantees.
std::string detokenize(const TokenSeq& tokens);

// Total: any token sequence yields a ParsedResponse, never a throw.
//
// Verdicts come from scanning the REASONING region (the whole sequence when
// no REASONING header is present) for a category name followed by an
// optional ':' and then "Applicable" or "Not applicable" (case-insensitive).
// A category whose marked occurrences contradict each other is Missing.
// The judgement is the case-insensitive sentence "the image's label is
// harmful|nonharmful"; absent or contradictory sentences give Unparseable.
// Known limit: free text that itself embeds a "<category> : <marker>"
// pattern defeats the scan.
ParsedResponse parse_response(const TokenSeq& tokens);

// Four headers present, caption found, every verdict marked, judgement parsed.
bool well_formed(const ParsedResponse& resp);

}  // namespace harmcot
