#include "coreg/text.hpp"

#include "coreg/error.hpp"

namespace coreg {

Vocab::Vocab() {
    add(kPadToken);
    add(kUnkToken);
}

std::size_t Vocab::add(const std::string& token) {
    auto [it, inserted] = index_.try_emplace(token, tokens_.size());
    if (inserted) tokens_.push_back(token);
    return it->second;
}

std::size_t Vocab::index_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? unk_index() : it->second;
}

bool Vocab::contains(const std::string& token) const { return index_.contains(token); }

std::string subject_mask_token(const std::string& type) { return "[SUBJ-" + type + "]"; }
std::string object_mask_token(const std::string& type) { return "[OBJ-" + type + "]"; }

namespace {

void check_span(const EntitySpan& span, std::size_t length, const char* which) {
    if (span.start > span.end || span.end >= length) {
        throw DataError(std::string(which) + " span [" + std::to_string(span.start) + "," +
                        std::to_string(span.end) + "] out of range for " +
                        std::to_string(length) + " tokens");
    }
}

} // namespace

std::vector<std::string> entity_mask(const SentenceInstance& instance) {
    const auto& s = instance.subj;
    const auto& o = instance.obj;
    check_span(s, instance.tokens.size(), "subject");
    check_span(o, instance.tokens.size(), "object");
    if (s.start <= o.end && o.start <= s.end) throw DataError("subject and object spans overlap");

    std::vector<std::string> out;
    out.reserve(instance.tokens.size());
    for (std::size_t i = 0; i < instance.tokens.size(); ++i) {
        if (i == s.start) {
            out.push_back(subject_mask_token(s.type));
            i = s.end;
        } else if (i == o.start) {
            out.push_back(object_mask_token(o.type));
            i = o.end;
        } else {
            out.push_back(instance.tokens[i]);
        }
    }
    return out;
}

Vocab build_relation_vocab(std::span<const SentenceInstance> corpus,
                           std::span<const std::string> entity_types) {
    Vocab vocab;
    for (const auto& type : entity_types) {
        vocab.add(subject_mask_token(type));
        vocab.add(object_mask_token(type));
    }
    for (const auto& inst : corpus) {
        for (const auto& tok : entity_mask(inst)) vocab.add(tok);
    }
    return vocab;
}

Vocab build_tagging_vocab(std::span<const TaggingInstance> corpus) {
    Vocab vocab;
    for (const auto& inst : corpus) {
        for (const auto& tok : inst.tokens) vocab.add(tok);
    }
    return vocab;
}

std::vector<double> featurize_sentence(std::span<const std::string> tokens, const Vocab& vocab) {
    if (tokens.empty()) throw DataError("featurize_sentence: empty token list");
    std::vector<double> features(vocab.size(), 0.0);
    const double unit = 1.0 / static_cast<double>(tokens.size());
    for (const auto& tok : tokens) features[vocab.index_of(tok)] += unit;
    return features;
}

std::vector<double> featurize_token_window(const TaggingInstance& instance, std::size_t position,
                                           std::size_t window, const Vocab& vocab) {
    const std::size_t n = instance.tokens.size();
    if (position >= n) throw DataError("featurize_token_window: position out of range");
    const std::size_t v = vocab.size();
    std::vector<double> features((2 * window + 1) * v, 0.0);
    for (std::size_t slot = 0; slot < 2 * window + 1; ++slot) {
        // position + slot - window, computed without unsigned underflow
        const bool inside = position + slot >= window && position + slot - window < n;
        const std::size_t idx =
            inside ? vocab.index_of(instance.tokens[position + slot - window]) : vocab.pad_index();
        features[slot * v + idx] = 1.0;
    }
    return features;
}

} // namespace coreg
