#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace coreg {

inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnkToken = "<unk>";

/// Token vocabulary. Index 0 is PAD and index 1 is UNK; entity-mask tokens are
/// registered by the caller before any corpus tokens.
class Vocab {
public:
    Vocab();

    std::size_t add(const std::string& token);
    std::size_t index_of(const std::string& token) const;
    bool contains(const std::string& token) const;
    const std::string& token(std::size_t index) const { return tokens_.at(index); }
    std::size_t size() const { return tokens_.size(); }

    std::size_t pad_index() const { return 0; }
    std::size_t unk_index() const { return 1; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Inclusive token span tagged with an entity type.
struct EntitySpan {
    std::size_t start = 0;
    std::size_t end = 0;
    std::string type;
};

/// Sentence-level relation instance: a subject/object entity pair in a sentence.
struct SentenceInstance {
    std::string id;
    std::vector<std::string> tokens;
    EntitySpan subj;
    EntitySpan obj;
    int label = 0;
    int true_label = -1;  // hidden ground truth for noise experiments, -1 when unknown
};

/// Token-level tagging instance; tags index the BIO tag set.
struct TaggingInstance {
    std::string id;
    std::vector<std::string> tokens;
    std::vector<int> tags;
    std::vector<int> true_tags;  // empty when unknown
};

std::string subject_mask_token(const std::string& type);
std::string object_mask_token(const std::string& type);

/// Replaces the subject and object spans with single type placeholders,
/// e.g. "Bill Gates founded Microsoft" -> "[SUBJ-PERSON] founded [OBJ-ORGANIZATION]".
std::vector<std::string> entity_mask(const SentenceInstance& instance);

/// Vocabulary over masked relation sentences plus mask tokens for every entity type.
Vocab build_relation_vocab(std::span<const SentenceInstance> corpus,
                           std::span<const std::string> entity_types);

Vocab build_tagging_vocab(std::span<const TaggingInstance> corpus);

/// Normalized bag of tokens (count / length); unknown tokens count toward UNK.
std::vector<double> featurize_sentence(std::span<const std::string> tokens, const Vocab& vocab);

/// Concatenated one-hot vectors over the window [position-window, position+window],
/// PAD outside the sentence. Length (2*window+1)*|V|.
std::vector<double> featurize_token_window(const TaggingInstance& instance, std::size_t position,
                                           std::size_t window, const Vocab& vocab);

} // namespace coreg
