#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ccaudit::lm {

inline constexpr std::size_t kMaxOrder = 5;
inline constexpr std::string_view kUnk = "<unk>";
inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";
inline constexpr double kMinDiscount = 1e-3;
inline constexpr double kMaxDiscount = 0.999;

using WordId = std::uint32_t;
using Sentence = std::vector<std::string>;

// exp(-(1/N) * sum ln p); N counts every scored position including </s>.
struct PerplexityScore {
    double value = 0.0;
    double log_prob = 0.0;  // natural log, summed
    std::size_t token_count = 0;
};

/// Interpolated Kneser-Ney n-gram model with one absolute discount per level.
///
/// The highest level keeps raw counts; every lower level k keeps continuation
/// counts N1+(. g), the number of distinct words seen before the k-gram g.
/// For a context h of length k-1 at level k:
///
///     p_k(w|h) = (max(c(hw) - D_k, 0) + D_k * T(h) * p_{k-1}(w|h')) / C(h)
///
/// where C(h) sums the level's counts over w, T(h) counts the distinct w, and
/// h' drops the oldest word. Contexts with C(h) = 0 defer to p_{k-1}; below
/// level 1 sits the uniform distribution 1/|V|. D_k = n1 / (n1 + 2 n2) from the
/// level's count-of-counts, clamped to [kMinDiscount, kMaxDiscount] so every
/// vocabulary word keeps positive mass.
///
/// The predictable vocabulary holds the kept words, `</s>` and `<unk>`; `<s>`
/// only ever appears in contexts.
class NGramModel {
public:
    static NGramModel train(std::span<const Sentence> corpus, std::size_t order, std::size_t min_count);
    // Order-1 model with no counts: every vocabulary word gets 1/|V|.
    static NGramModel uniform(std::span<const std::string> words);

    std::size_t order() const noexcept { return order_; }
    std::size_t min_count() const noexcept { return min_count_; }
    const std::vector<std::string>& vocab() const noexcept { return vocab_; }
    std::size_t vocab_size() const noexcept { return vocab_.size(); }
    double discount(std::size_t level) const { return discounts_.at(level - 1); }

    // Id of a predictable word, `<s>` included as a context symbol.
    std::optional<WordId> find(std::string_view word) const;
    // Word id with `<unk>` substitution.
    WordId map_word(std::string_view word) const;
    WordId bos() const noexcept { return bos_; }
    WordId eos() const noexcept { return eos_; }
    WordId unk() const noexcept { return unk_; }

    // Context has length order-1, oldest first, and is not `<unk>`-mapped
    // by this call.
    double prob(std::string_view word, std::span<const std::string> context) const;
    double prob_ids(WordId word, std::span<const WordId> context) const;

    // Level k (1-based) count of the k-gram `gram` (oldest first); 0 if unseen.
    std::uint64_t count(std::span<const WordId> gram) const;
    // Every stored k-gram of a level with its count, sorted by ids.
    std::vector<std::pair<std::vector<WordId>, std::uint64_t>> level_entries(std::size_t level) const;
    // Contexts (length order-1) observed at the highest level.
    std::vector<std::vector<WordId>> observed_contexts() const;

    PerplexityScore perplexity(std::span<const std::string> tokens) const;
    // Each segment is padded as its own sentence; the score pools all positions.
    PerplexityScore perplexity_segments(std::span<const Sentence> segments) const;

    std::string to_json() const;
    static NGramModel from_json(std::string_view json);
    void save(const std::string& path) const;
    static NGramModel load(const std::string& path);

private:
    struct Key {
        std::array<WordId, kMaxOrder> ids{};
        std::uint8_t len = 0;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept;
    };
    struct ContextStats {
        std::uint64_t total = 0;
        std::uint64_t types = 0;
    };
    struct Level {
        std::unordered_map<Key, std::uint64_t, KeyHash> counts;
        std::unordered_map<Key, ContextStats, KeyHash> contexts;
    };

    static Key make_key(std::span<const WordId> ids);
    void set_vocab(std::vector<std::string> words);
    void finalize(bool recompute_discounts);
    void add_sentence_logprob(std::span<const std::string> tokens, PerplexityScore& score) const;

    std::size_t order_ = 1;
    std::size_t min_count_ = 1;
    std::vector<std::string> vocab_;  // sorted; ids are positions, bos_ == vocab_.size()
    std::unordered_map<std::string, WordId> ids_;
    WordId bos_ = 0, eos_ = 0, unk_ = 0;
    std::vector<Level> levels_;       // levels_[k-1] holds k-grams
    std::vector<double> discounts_;
};

// Splits text on newlines and tokenizes each line with the shared tokenizer;
// empty lines are dropped.
std::vector<Sentence> sentences_from_text(std::string_view text);

// Training corpus from every regular file in a directory, files in name order.
std::vector<Sentence> load_corpus_dir(const std::string& dir);

} // namespace ccaudit::lm
