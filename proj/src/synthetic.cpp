#include "coreg/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "coreg/error.hpp"

namespace coreg {

namespace {

Dataset gaussian_split(const GaussianMixtureSpec& spec, std::size_t count, std::size_t first_id,
                       const std::vector<std::vector<double>>& means, Rng& rng) {
    Dataset d;
    d.task = TaskKind::synthetic;
    d.num_features = spec.num_features;
    d.num_classes = spec.num_classes;
    for (std::size_t c = 0; c < spec.num_classes; ++c) d.class_names.push_back("c" + std::to_string(c));
    for (std::size_t i = 0; i < count; ++i) {
        Example e;
        e.id = first_id + i;
        e.group = e.id;
        e.label = static_cast<int>(rng.below(spec.num_classes));
        e.true_label = e.label;
        const auto& mu = means[static_cast<std::size_t>(e.label)];
        e.features.resize(spec.num_features);
        for (std::size_t f = 0; f < spec.num_features; ++f) e.features[f] = mu[f] + spec.stddev * rng.normal();
        d.examples.push_back(std::move(e));
    }
    return d;
}

} // namespace

SyntheticSplits make_gaussian_mixture(const GaussianMixtureSpec& spec, std::uint64_t seed) {
    if (spec.num_classes < 2) throw ConfigError("gaussian mixture needs at least 2 classes");
    if (spec.num_features < 2) throw ConfigError("gaussian mixture needs at least 2 features");
    if (!(spec.stddev > 0.0)) throw ConfigError("gaussian mixture stddev must be positive");
    std::vector<std::vector<double>> means(spec.num_classes, std::vector<double>(spec.num_features, 0.0));
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) /
                             static_cast<double>(spec.num_classes);
        means[c][0] = spec.separation * std::cos(angle);
        means[c][1] = spec.separation * std::sin(angle);
    }
    Rng train_rng = derive_stream(seed, "synthetic.train");
    Rng dev_rng = derive_stream(seed, "synthetic.dev");
    Rng test_rng = derive_stream(seed, "synthetic.test");
    SyntheticSplits out;
    out.train = gaussian_split(spec, spec.num_train, 0, means, train_rng);
    out.dev = gaussian_split(spec, spec.num_dev, spec.num_train, means, dev_rng);
    out.test = gaussian_split(spec, spec.num_test, spec.num_train + spec.num_dev, means, test_rng);
    return out;
}

namespace {

struct ToyLexicon {
    std::vector<std::string> per_first{"alice", "bob", "carol", "dave", "erin", "frank"};
    std::vector<std::string> per_last{"smith", "jones", "brown", "lee", "khan", "garcia"};
    std::vector<std::string> org_head{"acme", "globex", "initech", "umbrella", "hooli", "vandelay"};
    std::vector<std::string> org_tail{"corp", "inc", "labs", "group"};
    std::vector<std::string> loc_head{"paris", "lagos", "lima", "oslo", "delhi", "quito"};
    std::vector<std::string> loc_tail{"city", "port"};
    std::vector<std::string> context{"the", "a", "of", "and", "said", "met", "visited", "joined",
                                     "left", "in", "at", "from", "with", "today", "yesterday",
                                     "reported", "works", "for", "near", "mr"};
};

const ToyLexicon& lexicon() {
    static const ToyLexicon lex;
    return lex;
}

const std::string& pick(const std::vector<std::string>& words, Rng& rng) {
    return words[rng.below(words.size())];
}

TaggingInstance draw_sentence(const TaggingToySpec& spec, const TagSet& tags, std::size_t id, Rng& rng) {
    const auto& lex = lexicon();
    TaggingInstance inst;
    inst.id = "toy-" + std::to_string(id);
    const std::size_t target =
        spec.min_length + rng.below(spec.max_length - spec.min_length + 1);
    const std::size_t mentions = 1 + rng.below(2);
    std::size_t placed = 0;
    auto push = [&](const std::string& tok, const std::string& tag) {
        inst.tokens.push_back(tok);
        inst.tags.push_back(tags.index_of(tag));
    };
    while (inst.tokens.size() < target || placed < mentions) {
        const bool place_entity = placed < mentions && rng.uniform() < 0.35;
        if (!place_entity) {
            push(pick(lex.context, rng), "O");
            continue;
        }
        ++placed;
        switch (rng.below(3)) {
        case 0:
            if (rng.uniform() < 0.4) push("mr", "O");
            push(pick(lex.per_first, rng), "B-PER");
            if (rng.uniform() < 0.6) push(pick(lex.per_last, rng), "I-PER");
            break;
        case 1:
            push(pick(lex.org_head, rng), "B-ORG");
            if (rng.uniform() < 0.5) push(pick(lex.org_tail, rng), "I-ORG");
            break;
        default:
            if (rng.uniform() < 0.5) push(rng.uniform() < 0.5 ? "in" : "from", "O");
            push(pick(lex.loc_head, rng), "B-LOC");
            if (rng.uniform() < 0.3) push(pick(lex.loc_tail, rng), "I-LOC");
            break;
        }
    }
    inst.true_tags = inst.tags;
    return inst;
}

// Late mentions can push a draw past max_length; those draws are rejected.
TaggingInstance toy_sentence(const TaggingToySpec& spec, const TagSet& tags, std::size_t id, Rng& rng) {
    for (;;) {
        auto inst = draw_sentence(spec, tags, id, rng);
        if (inst.tokens.size() <= spec.max_length) return inst;
    }
}

} // namespace

const std::vector<std::string>& tagging_toy_tokens() {
    static const std::vector<std::string> tokens = [] {
        const auto& lex = lexicon();
        std::vector<std::string> all;
        for (const auto* group : {&lex.per_first, &lex.per_last, &lex.org_head, &lex.org_tail,
                                  &lex.loc_head, &lex.loc_tail, &lex.context}) {
            all.insert(all.end(), group->begin(), group->end());
        }
        return all;
    }();
    return tokens;
}

TaggingToyCorpus make_tagging_toy(const TaggingToySpec& spec, std::uint64_t seed) {
    if (spec.min_length == 0 || spec.max_length < spec.min_length || spec.max_length < 3) {
        throw ConfigError("tagging toy: invalid sentence length range");
    }
    TaggingToyCorpus corpus;
    corpus.entity_types = {"PER", "ORG", "LOC"};
    const TagSet tags(corpus.entity_types);
    Rng train_rng = derive_stream(seed, "synthetic.train");
    Rng dev_rng = derive_stream(seed, "synthetic.dev");
    Rng test_rng = derive_stream(seed, "synthetic.test");
    for (std::size_t i = 0; i < spec.num_train; ++i) corpus.train.push_back(toy_sentence(spec, tags, i, train_rng));
    for (std::size_t i = 0; i < spec.num_dev; ++i) {
        corpus.dev.push_back(toy_sentence(spec, tags, spec.num_train + i, dev_rng));
    }
    for (std::size_t i = 0; i < spec.num_test; ++i) {
        corpus.test.push_back(toy_sentence(spec, tags, spec.num_train + spec.num_dev + i, test_rng));
    }
    return corpus;
}

} // namespace coreg
