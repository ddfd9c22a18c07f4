#include "harmcot/dataset.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "harmcot/rng.hpp"

namespace harmcot {

using nlohmann::json;

namespace {

json verdicts_to_json(const CoTAnnotation& ann) {
    json out = json::object();
    for (HarmCategory c : all_categories()) {
        const GoldVerdict& v = ann.verdicts[static_cast<std::size_t>(c)];
        json entry = json::object();
        entry["applicable"] = v.applicable;
        if (v.applicable) entry["rationale"] = v.rationale;
        out[category_name(c)] = entry;
    }
    return out;
}

json record_to_json(const MemeRecord& rec) {
    json j = json::object();
    j["id"] = rec.id;
    j["image_tokens"] = rec.image_tokens;
    j["text"] = rec.text;
    j["label"] = label_name(rec.label);
    json subs = json::array();
    for (HarmCategory c : all_categories()) {
        if (rec.subcategories.count(c)) subs.push_back(category_name(c));
    }
    j["subcategories"] = subs;
    if (rec.cot) {
        json cot = json::object();
        cot["caption"] = rec.cot->caption;
        cot["verdicts"] = verdicts_to_json(*rec.cot);
        cot["judgement"] = label_name(rec.cot->judgement);
        j["cot"] = cot;
    }
    if (rec.split != Split::Unassigned) j["split"] = split_name(rec.split);
    return j;
}

const json& require_field(const json& j, const char* field, std::size_t line) {
    auto it = j.find(field);
    if (it == j.end()) {
        throw IoError("line " + std::to_string(line) + ": missing field '" + field + "'");
    }
    return *it;
}

MemeRecord record_from_json(const json& j, std::size_t line) {
    MemeRecord rec;
    rec.id = require_field(j, "id", line).get<std::string>();
    for (const auto& t : require_field(j, "image_tokens", line)) {
        rec.image_tokens.push_back(t.get<std::string>());
    }
    rec.text = require_field(j, "text", line).get<std::string>();
    const std::string label = require_field(j, "label", line).get<std::string>();
    auto parsed_label = label_from_name(label);
    if (!parsed_label) {
        throw IoError("line " + std::to_string(line) + ": field 'label' has unknown value '" +
                      label + "'");
    }
    rec.label = *parsed_label;
    for (const auto& s : require_field(j, "subcategories", line)) {
        auto cat = category_from_name(s.get<std::string>());
        if (!cat) {
            throw IoError("line " + std::to_string(line) +
                          ": field 'subcategories' has unknown category '" + s.get<std::string>() +
                          "'");
        }
        rec.subcategories.insert(*cat);
    }
    if (j.contains("cot") && !j["cot"].is_null()) {
        const json& cj = j["cot"];
        CoTAnnotation ann;
        ann.caption = require_field(cj, "caption", line).get<std::string>();
        const json& verdicts = require_field(cj, "verdicts", line);
        for (HarmCategory c : all_categories()) {
            auto it = verdicts.find(category_name(c));
            if (it == verdicts.end()) {
                throw IoError("line " + std::to_string(line) + ": field 'verdicts' missing '" +
                              category_name(c) + "'");
            }
            GoldVerdict v;
            v.applicable = require_field(*it, "applicable", line).get<bool>();
            if (v.applicable && it->contains("rationale")) {
                v.rationale = (*it)["rationale"].get<std::string>();
            }
            ann.verdicts[static_cast<std::size_t>(c)] = v;
        }
        const std::string judgement = require_field(cj, "judgement", line).get<std::string>();
        auto parsed_judgement = label_from_name(judgement);
        if (!parsed_judgement) {
            throw IoError("line " + std::to_string(line) +
                          ": field 'judgement' has unknown value '" + judgement + "'");
        }
        ann.judgement = *parsed_judgement;
        rec.cot = std::move(ann);
    }
    if (j.contains("split") && !j["split"].is_null()) {
        const std::string split = j["split"].get<std::string>();
        auto parsed_split = split_from_name(split);
        if (!parsed_split) {
            throw IoError("line " + std::to_string(line) + ": field 'split' has unknown value '" +
                          split + "'");
        }
        rec.split = *parsed_split;
    }
    return rec;
}

}  // namespace

std::vector<MemeRecord> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file '" + path + "'");
    std::vector<MemeRecord> records;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw IoError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        MemeRecord rec = record_from_json(j, line_no);
        validate_record(rec);
        if (!seen_ids.insert(rec.id).second) {
            throw ValidationError("duplicate record id '" + rec.id + "' at line " +
                                  std::to_string(line_no));
        }
        records.push_back(std::move(rec));
    }
    return records;
}

void save_dataset(const std::vector<MemeRecord>& records, const std::string& path) {
    std::set<std::string> seen_ids;
    for (const MemeRecord& rec : records) {
        validate_record(rec);
        if (!seen_ids.insert(rec.id).second) {
            throw ValidationError("duplicate record id '" + rec.id + "'");
        }
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write dataset file '" + path + "'");
    for (const MemeRecord& rec : records) {
        out << record_to_json(rec).dump() << "\n";
    }
    if (!out) throw IoError("write failure on '" + path + "'");
}

std::vector<std::size_t> stratified_train_counts(const std::vector<std::size_t>& class_sizes,
                                                 double train_ratio) {
    std::vector<std::size_t> counts;
    counts.reserve(class_sizes.size());
    for (std::size_t n : class_sizes) {
        counts.push_back(
            static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_ratio + 0.5)));
    }
    return counts;
}

std::pair<std::vector<MemeRecord>, std::vector<MemeRecord>> stratified_split(
    const std::vector<MemeRecord>& records, double train_ratio, std::uint64_t seed) {
    if (records.empty()) throw ValidationError("stratified_split: empty dataset");
    if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
        throw ValidationError("stratified_split: train_ratio must be in (0, 1)");
    }

    // Classes are the two binary labels, in fixed order.
    std::array<std::vector<std::size_t>, 2> class_indices;
    for (std::size_t i = 0; i < records.size(); ++i) {
        class_indices[records[i].label == BinaryLabel::Harmful ? 0 : 1].push_back(i);
    }

    std::vector<bool> in_train(records.size(), false);
    for (std::size_t cls = 0; cls < class_indices.size(); ++cls) {
        auto& indices = class_indices[cls];
        const std::size_t n_train =
            stratified_train_counts({indices.size()}, train_ratio).front();
        Rng rng(derive_seed(seed, cls));
        shuffle(indices, rng);
        for (std::size_t i = 0; i < n_train; ++i) in_train[indices[i]] = true;
    }

    std::vector<MemeRecord> train;
    std::vector<MemeRecord> test;
    for (std::size_t i = 0; i < records.size(); ++i) {
        MemeRecord rec = records[i];
        rec.split = in_train[i] ? Split::Train : Split::Test;
        (in_train[i] ? train : test).push_back(std::move(rec));
    }
    return {std::move(train), std::move(test)};
}

}  // namespace harmcot
