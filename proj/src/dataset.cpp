#include "coreg/dataset.hpp"

#include <algorithm>

#include "coreg/error.hpp"
#include "coreg/numeric.hpp"

namespace coreg {

std::string to_string(TaskKind task) {
    switch (task) {
    case TaskKind::relation: return "relation";
    case TaskKind::tagging: return "tagging";
    case TaskKind::synthetic: return "synthetic";
    }
    return "unknown";
}

TaskKind parse_task(const std::string& name) {
    if (name == "relation") return TaskKind::relation;
    if (name == "tagging") return TaskKind::tagging;
    if (name == "synthetic") return TaskKind::synthetic;
    throw ConfigError("unknown task '" + name + "'");
}

int Schema::relation_index(const std::string& label) const {
    auto it = std::find(relation_labels.begin(), relation_labels.end(), label);
    if (it == relation_labels.end()) throw DataError("unknown relation label '" + label + "'");
    return static_cast<int>(it - relation_labels.begin());
}

int Schema::negative_index() const {
    if (negative_relation.empty()) return -1;
    return relation_index(negative_relation);
}

std::vector<int> Dataset::labels() const {
    std::vector<int> out;
    out.reserve(examples.size());
    for (const auto& e : examples) out.push_back(e.label);
    return out;
}

bool Dataset::has_true_labels() const {
    return !examples.empty() &&
           std::all_of(examples.begin(), examples.end(), [](const Example& e) { return e.true_label >= 0; });
}

std::vector<int> Dataset::true_labels() const {
    std::vector<int> out;
    out.reserve(examples.size());
    for (const auto& e : examples) {
        if (e.true_label < 0) throw DataError("dataset has no ground-truth label for example " + std::to_string(e.id));
        out.push_back(e.true_label);
    }
    return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out = *this;
    out.examples.clear();
    out.examples.reserve(indices.size());
    for (std::size_t i : indices) out.examples.push_back(examples.at(i));
    return out;
}

Dataset Dataset::with_true_labels() const {
    Dataset out = *this;
    for (auto& e : out.examples) {
        if (e.true_label < 0) throw DataError("dataset has no ground-truth labels");
        e.label = e.true_label;
    }
    return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.task != b.task || a.num_features != b.num_features || a.num_classes != b.num_classes) {
        throw DataError("concat: incompatible datasets");
    }
    Dataset out = a;
    // Keep tagging groups distinct across the two halves.
    std::size_t group_shift = 0;
    for (const auto& e : a.examples) group_shift = std::max(group_shift, e.group + 1);
    for (auto e : b.examples) {
        e.group += group_shift;
        out.examples.push_back(std::move(e));
    }
    return out;
}

void validate_dataset(const Dataset& data) {
    if (data.num_classes < 2) throw DataError("dataset needs at least 2 classes");
    for (const auto& e : data.examples) {
        if (e.features.size() != data.num_features) {
            throw DataError("example " + std::to_string(e.id) + " has wrong feature length");
        }
        if (e.label < 0 || static_cast<std::size_t>(e.label) >= data.num_classes) {
            throw DataError("example " + std::to_string(e.id) + " has label out of range");
        }
        if (e.true_label >= static_cast<int>(data.num_classes)) {
            throw DataError("example " + std::to_string(e.id) + " has true label out of range");
        }
    }
}

Dataset make_relation_dataset(std::span<const SentenceInstance> instances, const Vocab& vocab,
                              const Schema& schema, std::size_t first_id) {
    Dataset data;
    data.task = TaskKind::relation;
    data.num_features = vocab.size();
    data.num_classes = schema.relation_labels.size();
    data.class_names = schema.relation_labels;
    data.negative_class = schema.negative_index();
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& inst = instances[i];
        Example e;
        e.id = first_id + i;
        e.features = featurize_sentence(entity_mask(inst), vocab);
        e.label = inst.label;
        e.true_label = inst.true_label;
        e.group = i;
        data.examples.push_back(std::move(e));
    }
    validate_dataset(data);
    return data;
}

Dataset make_tagging_dataset(std::span<const TaggingInstance> instances, const Vocab& vocab,
                             const TagSet& tags, std::size_t window, std::size_t first_id) {
    Dataset data;
    data.task = TaskKind::tagging;
    data.num_features = (2 * window + 1) * vocab.size();
    data.num_classes = tags.size();
    data.class_names = tags.names();
    data.tags = tags;
    std::size_t id = first_id;
    for (std::size_t s = 0; s < instances.size(); ++s) {
        const auto& inst = instances[s];
        if (inst.tags.size() != inst.tokens.size()) throw DataError("tag/token length mismatch");
        for (std::size_t pos = 0; pos < inst.tokens.size(); ++pos) {
            Example e;
            e.id = id++;
            e.features = featurize_token_window(inst, pos, window, vocab);
            e.label = inst.tags[pos];
            e.true_label = inst.true_tags.empty() ? -1 : inst.true_tags[pos];
            e.group = s;
            data.examples.push_back(std::move(e));
        }
    }
    validate_dataset(data);
    return data;
}

std::vector<int> predict_labels(const MlpModel& model, const Dataset& data) {
    std::vector<int> out;
    out.reserve(data.size());
    for (const auto& e : data.examples) {
        const auto logits = predict_logits(model, e.features);
        out.push_back(static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin()));
    }
    return out;
}

F1Report task_f1(const Dataset& data, std::span<const int> gold, std::span<const int> pred) {
    if (gold.size() != data.size() || pred.size() != data.size()) {
        throw DataError("task_f1: label count does not match dataset");
    }
    if (data.task != TaskKind::tagging) return relation_micro_f1(gold, pred, data.negative_class);

    std::vector<std::vector<Span>> gold_spans, pred_spans;
    std::size_t i = 0;
    while (i < data.size()) {
        std::size_t j = i;
        while (j < data.size() && data.examples[j].group == data.examples[i].group) ++j;
        gold_spans.push_back(bio_decode(gold.subspan(i, j - i), data.tags));
        pred_spans.push_back(bio_decode(pred.subspan(i, j - i), data.tags));
        i = j;
    }
    return span_f1(gold_spans, pred_spans);
}

F1Report evaluate(const MlpModel& model, const Dataset& data) {
    const auto gold = data.labels();
    const auto pred = predict_labels(model, data);
    return task_f1(data, gold, pred);
}

} // namespace coreg
