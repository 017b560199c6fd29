#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coreg/metrics.hpp"
#include "coreg/model.hpp"
#include "coreg/text.hpp"

namespace coreg {

enum class TaskKind { relation, tagging, synthetic };

std::string to_string(TaskKind task);
TaskKind parse_task(const std::string& name);

/// Label inventories shared by readers and metrics.
struct Schema {
    std::vector<std::string> relation_labels;
    std::string negative_relation;
    std::vector<std::string> entity_types;  // relation subject/object types
    std::vector<std::string> tag_types;     // BIO entity types for tagging

    int relation_index(const std::string& label) const;  // throws DataError
    int negative_index() const;                          // -1 when unset
    TagSet tag_set() const { return TagSet(tag_types); }
};

/// One classification unit: a sentence (relation, synthetic) or a token (tagging).
struct Example {
    std::size_t id = 0;
    std::vector<double> features;
    int label = 0;
    int true_label = -1;     // -1 when unknown
    std::size_t group = 0;   // sentence index for tagging
};

/// Featurized dataset. Tagging examples of one sentence are contiguous and in
/// token order.
struct Dataset {
    TaskKind task = TaskKind::synthetic;
    std::size_t num_features = 0;
    std::size_t num_classes = 0;
    std::vector<std::string> class_names;
    int negative_class = -1;
    TagSet tags;
    std::vector<Example> examples;

    std::size_t size() const { return examples.size(); }
    bool empty() const { return examples.empty(); }
    std::vector<int> labels() const;
    bool has_true_labels() const;
    std::vector<int> true_labels() const;  // throws when any is unknown

    /// Same metadata, selected examples in the given order.
    Dataset subset(std::span<const std::size_t> indices) const;
    /// Copy with every label replaced by its true label.
    Dataset with_true_labels() const;
};

Dataset concat(const Dataset& a, const Dataset& b);

void validate_dataset(const Dataset& data);

Dataset make_relation_dataset(std::span<const SentenceInstance> instances, const Vocab& vocab,
                              const Schema& schema, std::size_t first_id = 0);

Dataset make_tagging_dataset(std::span<const TaggingInstance> instances, const Vocab& vocab,
                             const TagSet& tags, std::size_t window, std::size_t first_id = 0);

std::vector<int> predict_labels(const MlpModel& model, const Dataset& data);

/// Task metric: relation and synthetic data use positive-class micro F1
/// (synthetic has no negative class, so this is accuracy); tagging uses span F1
/// decoded per sentence.
F1Report task_f1(const Dataset& data, std::span<const int> gold, std::span<const int> pred);

F1Report evaluate(const MlpModel& model, const Dataset& data);

} // namespace coreg
