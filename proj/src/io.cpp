#include "coreg/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "coreg/error.hpp"
#include "coreg/format.hpp"

namespace coreg {

using nlohmann::json;

namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line) + ": ";
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

} // namespace

Schema read_schema(const std::filesystem::path& path) {
    auto in = open_in(path);
    Schema s;
    try {
        const json j = json::parse(in);
        s.relation_labels = j.value("relations", std::vector<std::string>{});
        s.negative_relation = j.value("negative_relation", std::string{});
        s.entity_types = j.value("entity_types", std::vector<std::string>{});
        s.tag_types = j.value("tag_types", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": invalid schema: " + e.what());
    }
    if (!s.negative_relation.empty()) s.relation_index(s.negative_relation);
    return s;
}

void write_schema(const std::filesystem::path& path, const Schema& s) {
    json j;
    j["relations"] = s.relation_labels;
    j["negative_relation"] = s.negative_relation;
    j["entity_types"] = s.entity_types;
    j["tag_types"] = s.tag_types;
    open_out(path) << j.dump(2) << '\n';
}

std::vector<TaggingInstance> read_conll(const std::filesystem::path& path, const TagSet& tags) {
    auto in = open_in(path);
    std::vector<TaggingInstance> out;
    TaggingInstance current;
    std::string line;
    std::size_t line_no = 0;
    auto flush = [&] {
        if (!current.tokens.empty()) {
            current.id = std::to_string(out.size());
            out.push_back(std::move(current));
        }
        current = TaggingInstance{};
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream cols(line);
        std::vector<std::string> fields;
        for (std::string f; cols >> f;) fields.push_back(f);
        if (fields.empty()) {
            flush();
            continue;
        }
        if (fields[0] == "-DOCSTART-") continue;
        if (fields.size() < 2) throw DataError(where(path, line_no) + "expected token and tag columns");
        if (!tags.contains(fields.back())) {
            throw DataError(where(path, line_no) + "malformed tag '" + fields.back() + "'");
        }
        current.tokens.push_back(fields.front());
        current.tags.push_back(tags.index_of(fields.back()));
    }
    flush();
    return out;
}

void write_conll(const std::filesystem::path& path, std::span<const TaggingInstance> sentences,
                 const TagSet& tags) {
    auto out = open_out(path);
    for (std::size_t s = 0; s < sentences.size(); ++s) {
        if (s) out << '\n';
        const auto& inst = sentences[s];
        for (std::size_t i = 0; i < inst.tokens.size(); ++i) {
            out << inst.tokens[i] << ' ' << tags.name(static_cast<std::size_t>(inst.tags[i])) << '\n';
        }
    }
}

std::vector<SentenceInstance> read_relation_jsonl(const std::filesystem::path& path,
                                                  const Schema& schema) {
    auto in = open_in(path);
    std::vector<SentenceInstance> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        SentenceInstance inst;
        try {
            const json j = json::parse(line);
            inst.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                                       : std::to_string(out.size());
            inst.tokens = j.at("tokens").get<std::vector<std::string>>();
            inst.subj = {j.at("subj_start").get<std::size_t>(), j.at("subj_end").get<std::size_t>(),
                         j.at("subj_type").get<std::string>()};
            inst.obj = {j.at("obj_start").get<std::size_t>(), j.at("obj_end").get<std::size_t>(),
                        j.at("obj_type").get<std::string>()};
            inst.label = schema.relation_index(j.at("relation").get<std::string>());
            if (j.contains("true_relation")) {
                inst.true_label = schema.relation_index(j["true_relation"].get<std::string>());
            }
            // Validates spans (range and overlap).
            entity_mask(inst);
        } catch (const json::exception& e) {
            throw DataError(where(path, line_no) + e.what());
        } catch (const DataError& e) {
            throw DataError(where(path, line_no) + e.what());
        }
        out.push_back(std::move(inst));
    }
    return out;
}

void write_relation_jsonl(const std::filesystem::path& path,
                          std::span<const SentenceInstance> instances, const Schema& schema) {
    auto out = open_out(path);
    for (const auto& inst : instances) {
        json j;
        j["id"] = inst.id;
        j["tokens"] = inst.tokens;
        j["subj_start"] = inst.subj.start;
        j["subj_end"] = inst.subj.end;
        j["subj_type"] = inst.subj.type;
        j["obj_start"] = inst.obj.start;
        j["obj_end"] = inst.obj.end;
        j["obj_type"] = inst.obj.type;
        j["relation"] = schema.relation_labels.at(static_cast<std::size_t>(inst.label));
        if (inst.true_label >= 0) {
            j["true_relation"] = schema.relation_labels.at(static_cast<std::size_t>(inst.true_label));
        }
        out << j.dump() << '\n';
    }
}

Dataset read_feature_csv(const std::filesystem::path& path, std::size_t num_classes) {
    auto in = open_in(path);
    Dataset d;
    d.task = TaskKind::synthetic;
    d.num_classes = num_classes;
    for (std::size_t c = 0; c < num_classes; ++c) d.class_names.push_back("c" + std::to_string(c));
    std::string line;
    if (!std::getline(in, line) || line.rfind("id,label,true_label", 0) != 0) {
        throw DataError(path.string() + ": expected header id,label,true_label,x0,...");
    }
    d.num_features = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) - 2;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() != d.num_features + 3) throw DataError(where(path, line_no) + "wrong column count");
        Example e;
        try {
            e.id = std::stoull(cells[0]);
            e.label = std::stoi(cells[1]);
            e.true_label = std::stoi(cells[2]);
            for (std::size_t f = 0; f < d.num_features; ++f) e.features.push_back(std::stod(cells[3 + f]));
        } catch (const std::exception&) {
            throw DataError(where(path, line_no) + "malformed number");
        }
        e.group = e.id;
        if (e.label < 0 || static_cast<std::size_t>(e.label) >= num_classes) {
            throw DataError(where(path, line_no) + "label out of range");
        }
        d.examples.push_back(std::move(e));
    }
    return d;
}

void write_feature_csv(const std::filesystem::path& path, const Dataset& data) {
    auto out = open_out(path);
    out << "id,label,true_label";
    for (std::size_t f = 0; f < data.num_features; ++f) out << ",x" << f;
    out << '\n';
    for (const auto& e : data.examples) {
        out << e.id << ',' << e.label << ',' << e.true_label;
        for (double v : e.features) out << ',' << fmt_double(v);
        out << '\n';
    }
}

} // namespace coreg
