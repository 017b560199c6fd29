#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace coreg {

/// Typed entity span with inclusive token bounds.
struct Span {
    std::string type;
    std::size_t start = 0;
    std::size_t end = 0;

    friend auto operator<=>(const Span&, const Span&) = default;
};

/// BIO tag inventory: index 0 is "O", then B-X, I-X for each entity type in order.
class TagSet {
public:
    TagSet() : TagSet(std::vector<std::string>{}) {}
    explicit TagSet(std::vector<std::string> entity_types);

    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t index) const { return names_.at(index); }
    int index_of(const std::string& tag) const;  // throws DataError on unknown tags
    bool contains(const std::string& tag) const { return index_.contains(tag); }
    const std::vector<std::string>& entity_types() const { return types_; }
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> types_;
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
};

/// Decodes BIO tags into maximal spans. B-X opens a span; I-X continues an open
/// span of type X and otherwise opens a new one; O closes.
std::vector<Span> bio_decode(std::span<const std::string> tags);
std::vector<Span> bio_decode(std::span<const int> tags, const TagSet& tag_set);

/// Writes spans back as a BIO sequence of the given length.
std::vector<std::string> bio_encode(std::span<const Span> spans, std::size_t length);

struct F1Report {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    static F1Report from_counts(std::size_t tp, std::size_t fp, std::size_t fn);
};

/// Exact-match span F1, micro-averaged over sentences.
F1Report span_f1(std::span<const std::vector<Span>> gold, std::span<const std::vector<Span>> pred);

/// Micro F1 over every class except `negative_class` (pass -1 when all classes
/// count, in which case F1 equals accuracy).
F1Report relation_micro_f1(std::span<const int> gold, std::span<const int> pred,
                           int negative_class);

double accuracy(std::span<const int> gold, std::span<const int> pred);

inline constexpr const char* kF1CsvHeader = "tp,fp,fn,precision,recall,f1";
std::string to_csv_row(const F1Report& report);

/// Area under the ROC curve of `scores` for the positive flags, rank-based
/// with midpoint ties. Returns 0.5 when either class is absent.
double auroc(std::span<const double> scores, const std::vector<bool>& positive);

} // namespace coreg
