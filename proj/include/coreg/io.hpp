#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "coreg/dataset.hpp"
#include "coreg/text.hpp"

namespace coreg {

/// Schema file (JSON):
///   {"relations": [...], "negative_relation": "no_relation",
///    "entity_types": [...], "tag_types": ["PER", ...]}
Schema read_schema(const std::filesystem::path& path);
void write_schema(const std::filesystem::path& path, const Schema& schema);

/// CoNLL column file: one token per line, first column is the token, last
/// column the BIO tag; blank lines separate sentences; -DOCSTART- lines are
/// skipped.
std::vector<TaggingInstance> read_conll(const std::filesystem::path& path, const TagSet& tags);
void write_conll(const std::filesystem::path& path, std::span<const TaggingInstance> sentences,
                 const TagSet& tags);

/// Line-delimited JSON relation records:
///   {"id": "...", "tokens": [...], "subj_start": 0, "subj_end": 1, "subj_type": "PERSON",
///    "obj_start": 3, "obj_end": 3, "obj_type": "ORGANIZATION", "relation": "org:founded_by"}
/// An optional "true_relation" carries the hidden ground-truth label.
std::vector<SentenceInstance> read_relation_jsonl(const std::filesystem::path& path,
                                                  const Schema& schema);
void write_relation_jsonl(const std::filesystem::path& path,
                          std::span<const SentenceInstance> instances, const Schema& schema);

/// Dense feature table: header "id,label,true_label,x0,...,x{F-1}".
Dataset read_feature_csv(const std::filesystem::path& path, std::size_t num_classes);
void write_feature_csv(const std::filesystem::path& path, const Dataset& data);

} // namespace coreg
