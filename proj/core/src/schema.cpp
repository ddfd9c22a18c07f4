#include "harmcot/schema.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace harmcot {

namespace {

bool iequals(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    }
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Taxonomy names
// ---------------------------------------------------------------------------

const std::string& category_name(HarmCategory c) {
    static const std::array<std::string, kNumCategories> names = {
        "Discrimination", "Offensive", "Violence", "Vulgar", "Antagonism"};
    return names[static_cast<std::size_t>(c)];
}

std::optional<HarmCategory> category_from_name(const std::string& name) {
    for (HarmCategory c : all_categories()) {
        if (iequals(name, category_name(c))) return c;
    }
    return std::nullopt;
}

const std::string& label_name(BinaryLabel l) {
    static const std::string harmful = "harmful";
    static const std::string nonharmful = "nonharmful";
    return l == BinaryLabel::Harmful ? harmful : nonharmful;
}

std::optional<BinaryLabel> label_from_name(const std::string& name) {
    if (iequals(name, "harmful")) return BinaryLabel::Harmful;
    if (iequals(name, "nonharmful")) return BinaryLabel::Nonharmful;
    return std::nullopt;
}

const std::string& split_name(Split s) {
    static const std::array<std::string, 3> names = {"train", "test", "unassigned"};
    return names[static_cast<std::size_t>(s)];
}

std::optional<Split> split_from_name(const std::string& name) {
    if (iequals(name, "train")) return Split::Train;
    if (iequals(name, "test")) return Split::Test;
    if (iequals(name, "unassigned")) return Split::Unassigned;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

bool CoTAnnotation::any_applicable() const {
    return std::any_of(verdicts.begin(), verdicts.end(),
                       [](const GoldVerdict& v) { return v.applicable; });
}

void validate_annotation(const CoTAnnotation& ann) {
    const bool any = ann.any_applicable();
    if (any != (ann.judgement == BinaryLabel::Harmful)) {
        throw ValidationError("annotation judgement '" + label_name(ann.judgement) +
                              "' contradicts its verdicts");
    }
    auto contains_header = [](const std::string& text) {
        for (const Token& tok : tokenize(text)) {
            for (const std::string& h : kSectionHeaders) {
                if (tok == h) return true;
            }
        }
        return false;
    };
    if (contains_header(ann.caption)) {
        throw ValidationError("annotation caption contains a section header token");
    }
    for (const GoldVerdict& v : ann.verdicts) {
        if (v.applicable && contains_header(v.rationale)) {
            throw ValidationError("annotation rationale contains a section header token");
        }
    }
}

void validate_record(const MemeRecord& rec) {
    if (rec.id.empty()) throw ValidationError("record has empty id");
    if (rec.label == BinaryLabel::Nonharmful && !rec.subcategories.empty()) {
        throw ValidationError("record '" + rec.id + "': nonharmful with nonempty subcategories");
    }
    if (rec.cot) {
        try {
            validate_annotation(*rec.cot);
        } catch (const ValidationError& e) {
            throw ValidationError("record '" + rec.id + "': " + e.what());
        }
        if (rec.cot->judgement != rec.label) {
            throw ValidationError("record '" + rec.id + "': cot judgement disagrees with label");
        }
    }
}

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

namespace {

PromptSpec render_default(const MemeRecord& rec) {
    PromptSpec spec;
    spec.template_id = "default";
    spec.rendered_tokens = {"judge", "this", "meme", ":"};
    spec.rendered_tokens.insert(spec.rendered_tokens.end(), rec.image_tokens.begin(),
                                rec.image_tokens.end());
    for (const Token& t : tokenize(rec.text)) spec.rendered_tokens.push_back(t);
    return spec;
}

PromptSpec render_content_only(const MemeRecord& rec) {
    PromptSpec spec;
    spec.template_id = "content-only";
    spec.rendered_tokens = rec.image_tokens;
    for (const Token& t : tokenize(rec.text)) spec.rendered_tokens.push_back(t);
    if (spec.rendered_tokens.empty()) spec.rendered_tokens = {"meme"};
    return spec;
}

}  // namespace

std::vector<std::string> prompt_template_ids() { return {"default", "content-only"}; }

PromptSpec render_prompt(const MemeRecord& rec, const std::string& template_id) {
    if (template_id == "default") return render_default(rec);
    if (template_id == "content-only") return render_content_only(rec);
    throw ConfigError("unknown prompt template '" + template_id + "'");
}

// ---------------------------------------------------------------------------
// Document format
// ---------------------------------------------------------------------------

const std::array<std::string, 4> kSectionHeaders = {"QUESTION", "CAPTION", "REASONING",
                                                    "JUDGEMENT"};

const std::string& question_rubric() {
    // One fixed rubric per document; a compact stand-in for the annotation
    // instructions, kept inside the generation vocabulary.
    static const std::string rubric =
        "judge the meme against five aspects : "
        "Discrimination Offensive Violence Vulgar Antagonism .";
    return rubric;
}

std::string serialize_cot(const CoTAnnotation& ann) {
    validate_annotation(ann);
    std::ostringstream out;
    out << "QUESTION\n" << question_rubric() << "\n";
    out << "CAPTION\n" << ann.caption << "\n";
    out << "REASONING\n";
    for (HarmCategory c : all_categories()) {
        const GoldVerdict& v = ann.verdicts[static_cast<std::size_t>(c)];
        if (v.applicable) {
            out << category_name(c) << " Applicable";
            if (!v.rationale.empty()) out << " " << v.rationale;
            out << " .\n";
        } else {
            out << category_name(c) << " Not applicable.\n";
        }
    }
    out << "JUDGEMENT\n";
    out << "The image's label is " << label_name(ann.judgement) << ".";
    return out.str();
}

TokenSeq tokenize(const std::string& text) {
    TokenSeq tokens;
    std::size_t i = 0;
    const std::size_t n = text.size();
    auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    auto is_punct = [](char c) { return c == '.' || c == ':' || c == ','; };
    while (i < n) {
        while (i < n && is_space(text[i])) ++i;
        if (i >= n) break;
        if (is_punct(text[i])) {
            tokens.push_back(std::string(1, text[i]));
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < n && !is_space(text[i]) && !is_punct(text[i])) ++i;
        tokens.push_back(text.substr(start, i - start));
    }
    return tokens;
}

std::string detokenize(const TokenSeq& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

namespace {

bool is_header(const Token& tok) {
    return std::find(kSectionHeaders.begin(), kSectionHeaders.end(), tok) != kSectionHeaders.end();
}

// Case-insensitive judgement sentence scan over tokens. Returns counts of
// harmful/nonharmful matches of "the image's label is X".
void scan_judgement(const TokenSeq& toks, int& harmful, int& nonharmful) {
    static const std::array<std::string, 4> stem = {"the", "image's", "label", "is"};
    for (std::size_t i = 0; i + stem.size() < toks.size(); ++i) {
        bool ok = true;
        for (std::size_t j = 0; j < stem.size(); ++j) {
            if (!iequals(toks[i + j], stem[j])) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        const Token& word = toks[i + stem.size()];
        if (iequals(word, "harmful"))
            ++harmful;
        else if (iequals(word, "nonharmful"))
            ++nonharmful;
    }
}

}  // namespace

ParsedResponse parse_response(const TokenSeq& tokens) {
    ParsedResponse resp;
    resp.raw_tokens = tokens;

    // Section header positions (first occurrence each).
    std::array<std::optional<std::size_t>, 4> header_pos;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        for (std::size_t h = 0; h < kSectionHeaders.size(); ++h) {
            if (tokens[i] == kSectionHeaders[h]) {
                resp.sections_present[h] = true;
                if (!header_pos[h]) header_pos[h] = i;
            }
        }
    }

    // Caption: body of the CAPTION section, up to the next header token.
    if (header_pos[1]) {
        std::size_t begin = *header_pos[1] + 1;
        std::size_t end = begin;
        while (end < tokens.size() && !is_header(tokens[end])) ++end;
        TokenSeq body(tokens.begin() + static_cast<std::ptrdiff_t>(begin),
                      tokens.begin() + static_cast<std::ptrdiff_t>(end));
        resp.caption = detokenize(body);
    }

    // Verdict scan region: the REASONING section when present, else the whole
    // sequence (generated output does not always keep its headers).
    std::size_t scan_begin = 0;
    std::size_t scan_end = tokens.size();
    if (header_pos[2]) {
        scan_begin = *header_pos[2] + 1;
        scan_end = scan_begin;
        while (scan_end < tokens.size() && !is_header(tokens[scan_end])) ++scan_end;
    }

    for (HarmCategory c : all_categories()) {
        const std::string& name = category_name(c);
        int applicable = 0;
        int not_applicable = 0;
        for (std::size_t i = scan_begin; i < scan_end; ++i) {
            if (!iequals(tokens[i], name)) continue;
            std::size_t j = i + 1;
            while (j < scan_end && tokens[j] == ":") ++j;
            if (j >= scan_end) continue;
            if (iequals(tokens[j], "applicable")) {
                ++applicable;
            } else if (iequals(tokens[j], "not") && j + 1 < scan_end &&
                       iequals(tokens[j + 1], "applicable")) {
                ++not_applicable;
            }
        }
        ParsedVerdict v = ParsedVerdict::Missing;
        if (applicable > 0 && not_applicable == 0) v = ParsedVerdict::Applicable;
        if (not_applicable > 0 && applicable == 0) v = ParsedVerdict::NotApplicable;
        resp.verdicts[static_cast<std::size_t>(c)] = v;
    }

    int harmful = 0;
    int nonharmful = 0;
    scan_judgement(tokens, harmful, nonharmful);
    if (harmful > 0 && nonharmful == 0)
        resp.judgement = ParsedJudgement::Harmful;
    else if (nonharmful > 0 && harmful == 0)
        resp.judgement = ParsedJudgement::Nonharmful;
    else
        resp.judgement = ParsedJudgement::Unparseable;

    return resp;
}

bool well_formed(const ParsedResponse& resp) {
    if (!resp.caption) return false;
    if (resp.judgement == ParsedJudgement::Unparseable) return false;
    for (ParsedVerdict v : resp.verdicts) {
        if (v == ParsedVerdict::Missing) return false;
    }
    return resp.sections_present[0] && resp.sections_present[1] && resp.sections_present[2] &&
           resp.sections_present[3];
}

}  // namespace harmcot
