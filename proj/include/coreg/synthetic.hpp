#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "coreg/dataset.hpp"
#include "coreg/text.hpp"

namespace coreg {

/// Isotropic Gaussian mixture: one component per class, means evenly spaced
/// on a circle of radius `separation` in the first two dimensions. Remaining
/// dimensions are class-independent nuisance noise, which gives small MLPs
/// enough room to memorize flipped labels.
struct GaussianMixtureSpec {
    std::size_t num_classes = 4;
    std::size_t num_features = 20;
    std::size_t num_train = 2000;
    std::size_t num_dev = 500;
    std::size_t num_test = 500;
    double separation = 2.0;
    double stddev = 1.0;
};

struct SyntheticSplits {
    Dataset train;
    Dataset dev;
    Dataset test;
};

/// Ids run consecutively over train, dev, then test. Labels are clean and double
/// as true labels.
SyntheticSplits make_gaussian_mixture(const GaussianMixtureSpec& spec, std::uint64_t seed);

/// Templated tagging corpus over a 50-token vocabulary with three entity types
/// (PER, ORG, LOC).
struct TaggingToySpec {
    std::size_t num_train = 400;
    std::size_t num_dev = 100;
    std::size_t num_test = 100;
    std::size_t min_length = 5;
    std::size_t max_length = 10;
};

struct TaggingToyCorpus {
    std::vector<TaggingInstance> train;
    std::vector<TaggingInstance> dev;
    std::vector<TaggingInstance> test;
    std::vector<std::string> entity_types;
};

TaggingToyCorpus make_tagging_toy(const TaggingToySpec& spec, std::uint64_t seed);

/// Token inventory of the toy corpus (exactly 50 entries).
const std::vector<std::string>& tagging_toy_tokens();

} // namespace coreg
