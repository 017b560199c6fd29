#include "coreg/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <optional>

#include "coreg/error.hpp"
#include "coreg/format.hpp"

namespace coreg {

TagSet::TagSet(std::vector<std::string> entity_types) : types_(std::move(entity_types)) {
    names_.push_back("O");
    for (const auto& t : types_) {
        names_.push_back("B-" + t);
        names_.push_back("I-" + t);
    }
    for (std::size_t i = 0; i < names_.size(); ++i) index_.emplace(names_[i], static_cast<int>(i));
}

int TagSet::index_of(const std::string& tag) const {
    auto it = index_.find(tag);
    if (it == index_.end()) throw DataError("unknown tag '" + tag + "'");
    return it->second;
}

std::vector<Span> bio_decode(std::span<const std::string> tags) {
    std::vector<Span> spans;
    std::optional<Span> open;
    auto close = [&] {
        if (open) spans.push_back(*open);
        open.reset();
    };
    for (std::size_t i = 0; i < tags.size(); ++i) {
        const std::string& tag = tags[i];
        if (tag == "O") {
            close();
            continue;
        }
        if (tag.size() < 3 || tag[1] != '-' || (tag[0] != 'B' && tag[0] != 'I')) {
            throw DataError("unknown tag symbol '" + tag + "'");
        }
        std::string type = tag.substr(2);
        if (tag[0] == 'I' && open && open->type == type) {
            open->end = i;
            continue;
        }
        close();
        open = Span{std::move(type), i, i};
    }
    close();
    return spans;
}

std::vector<Span> bio_decode(std::span<const int> tags, const TagSet& tag_set) {
    std::vector<std::string> names;
    names.reserve(tags.size());
    for (int t : tags) {
        if (t < 0 || static_cast<std::size_t>(t) >= tag_set.size()) {
            throw DataError("tag index " + std::to_string(t) + " outside tag set");
        }
        names.push_back(tag_set.name(static_cast<std::size_t>(t)));
    }
    return bio_decode(names);
}

std::vector<std::string> bio_encode(std::span<const Span> spans, std::size_t length) {
    std::vector<std::string> tags(length, "O");
    for (const auto& s : spans) {
        if (s.start > s.end || s.end >= length) throw DataError("bio_encode: span out of range");
        tags[s.start] = "B-" + s.type;
        for (std::size_t i = s.start + 1; i <= s.end; ++i) tags[i] = "I-" + s.type;
    }
    return tags;
}

F1Report F1Report::from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    F1Report r;
    r.tp = tp;
    r.fp = fp;
    r.fn = fn;
    r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    r.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    const double pr = r.precision + r.recall;
    r.f1 = pr > 0.0 ? 2.0 * r.precision * r.recall / pr : 0.0;
    return r;
}

F1Report span_f1(std::span<const std::vector<Span>> gold, std::span<const std::vector<Span>> pred) {
    if (gold.size() != pred.size()) throw DataError("span_f1: sentence count mismatch");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t s = 0; s < gold.size(); ++s) {
        std::vector<Span> g = gold[s];
        std::sort(g.begin(), g.end());
        std::vector<bool> used(g.size(), false);
        for (const auto& p : pred[s]) {
            auto [lo, hi] = std::equal_range(g.begin(), g.end(), p);
            bool matched = false;
            for (auto it = lo; it != hi; ++it) {
                auto k = static_cast<std::size_t>(it - g.begin());
                if (!used[k]) {
                    used[k] = true;
                    matched = true;
                    break;
                }
            }
            matched ? ++tp : ++fp;
        }
        fn += static_cast<std::size_t>(std::count(used.begin(), used.end(), false));
    }
    return F1Report::from_counts(tp, fp, fn);
}

F1Report relation_micro_f1(std::span<const int> gold, std::span<const int> pred,
                           int negative_class) {
    if (gold.size() != pred.size()) throw DataError("relation_micro_f1: length mismatch");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const bool gold_pos = gold[i] != negative_class;
        const bool pred_pos = pred[i] != negative_class;
        if (pred_pos && gold[i] == pred[i]) {
            ++tp;
        } else {
            if (pred_pos) ++fp;
            if (gold_pos) ++fn;
        }
    }
    return F1Report::from_counts(tp, fp, fn);
}

double accuracy(std::span<const int> gold, std::span<const int> pred) {
    if (gold.size() != pred.size()) throw DataError("accuracy: length mismatch");
    if (gold.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) hits += gold[i] == pred[i];
    return static_cast<double>(hits) / static_cast<double>(gold.size());
}

std::string to_csv_row(const F1Report& r) {
    return std::to_string(r.tp) + "," + std::to_string(r.fp) + "," + std::to_string(r.fn) + "," +
           fmt_double(r.precision) + "," + fmt_double(r.recall) + "," + fmt_double(r.f1);
}

double auroc(std::span<const double> scores, const std::vector<bool>& positive) {
    if (scores.size() != positive.size()) throw Error("auroc: length mismatch");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Midranks (1-based) for tied groups.
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (positive[i]) {
            pos_rank_sum += rank[i];
            ++n_pos;
        }
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return 0.5;
    const double np = static_cast<double>(n_pos);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

} // namespace coreg
