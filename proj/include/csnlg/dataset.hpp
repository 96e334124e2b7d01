#pragma once

// Dataset records on disk: one JSON object per instance, either as JSON
// lines or a single JSON array. Token lists are space-separated strings.
//
// Fields: da (DA string), text, delex_text, lemmas, tags, delex_tags,
// signature, matches. Raw corpora carry only da/text (+ per-token lemmas and
// tags); `prepare` fills the rest.

#include <string>
#include <vector>

#include <json.hpp>

#include "csnlg/delex.hpp"

namespace csnlg {

namespace detail {

inline Instance instance_from_json(const nlohmann::json& j, const Registry* reg) {
    Instance inst;
    if (!j.contains("da") || !j.contains("text"))
        throw DataError("instance record needs 'da' and 'text' fields");
    inst.da_string = j.at("da").get<std::string>();
    inst.da = reg ? parse_da(inst.da_string, *reg) : parse_da(inst.da_string);
    inst.text = tokenize(j.at("text").get<std::string>());
    auto toks = [&j](const char* key) {
        return j.contains(key) ? tokenize(j.at(key).get<std::string>()) : std::vector<std::string>{};
    };
    inst.delex_text = toks("delex_text");
    inst.lemmas = toks("lemmas");
    inst.tags = toks("tags");
    inst.delex_tags = toks("delex_tags");
    if (j.contains("signature")) inst.signature = j.at("signature").get<std::string>();
    if (j.contains("matches")) {
        for (const auto& m : j.at("matches")) {
            Instance::Match match;
            match.slot = m.at("slot").get<std::string>();
            match.value = m.at("value").get<std::string>();
            match.form.form = m.at("form").get<std::string>();
            match.form.lemma = m.value("lemma", match.form.form);
            match.form.tag = parse_tag(m.at("tag").get<std::string>());
            match.pos = m.at("pos").get<std::size_t>();
            match.len = m.at("len").get<std::size_t>();
            match.delex_pos = m.at("delex_pos").get<std::size_t>();
            inst.matches.push_back(std::move(match));
        }
    }
    return inst;
}

inline nlohmann::json instance_to_json(const Instance& inst) {
    nlohmann::json j;
    j["da"] = inst.da_string;
    j["text"] = join(inst.text);
    if (!inst.delex_text.empty()) j["delex_text"] = join(inst.delex_text);
    if (!inst.lemmas.empty()) j["lemmas"] = join(inst.lemmas);
    if (!inst.tags.empty()) j["tags"] = join(inst.tags);
    if (!inst.delex_tags.empty()) j["delex_tags"] = join(inst.delex_tags);
    if (!inst.signature.empty()) j["signature"] = inst.signature;
    if (!inst.matches.empty()) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& m : inst.matches) {
            arr.push_back({{"slot", m.slot},
                           {"value", m.value},
                           {"form", m.form.form},
                           {"lemma", m.form.lemma},
                           {"tag", m.form.tag.str()},
                           {"pos", m.pos},
                           {"len", m.len},
                           {"delex_pos", m.delex_pos}});
        }
        j["matches"] = std::move(arr);
    }
    return j;
}

}  // namespace detail

inline std::vector<Instance> parse_dataset(const std::string& content, const Registry* reg = nullptr) {
    std::vector<Instance> out;
    std::size_t first = content.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return out;
    try {
        if (content[first] == '[') {
            auto arr = nlohmann::json::parse(content);
            for (const auto& j : arr) out.push_back(detail::instance_from_json(j, reg));
        } else {
            std::size_t lineno = 0;
            for (const auto& line : split(content, '\n')) {
                ++lineno;
                if (trim(line).empty()) continue;
                try {
                    out.push_back(detail::instance_from_json(nlohmann::json::parse(line), reg));
                } catch (const std::exception& e) {
                    throw DataError("line " + std::to_string(lineno) + ": " + e.what());
                }
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("dataset parse error: ") + e.what());
    }
    return out;
}

inline std::vector<Instance> load_dataset(const std::string& path, const Registry* reg = nullptr) {
    try {
        return parse_dataset(read_file(path), reg);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

inline std::string serialize_dataset(const std::vector<Instance>& instances) {
    std::string out;
    for (const auto& inst : instances) {
        out += detail::instance_to_json(inst).dump();
        out += '\n';
    }
    return out;
}

inline void save_dataset(const std::string& path, const std::vector<Instance>& instances) {
    write_file(path, serialize_dataset(instances));
}

}  // namespace csnlg
