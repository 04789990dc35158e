#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ccaudit::lexicon {

inline constexpr std::size_t kMaxPatternTokens = 5;

using Pattern = std::vector<std::string>;

// A named list of lowercased token sequences.
struct Lexicon {
    std::string name;
    std::vector<Pattern> patterns;     // unique, in first-seen order
    std::size_t duplicates_removed = 0;
    std::string source_sha256;         // empty unless loaded from a file
};

// Builds a lexicon from phrases; each phrase is tokenized with the shared
// tokenizer. Blank phrases are skipped, duplicates dropped and counted.
Lexicon make_lexicon(std::string name, std::span<const std::string> phrases);

// One phrase per line, `#` starts a comment line.
Lexicon parse_lexicon(std::istream& in, std::string name);
Lexicon load_lexicon(const std::string& path, std::string name);

std::string sha256_hex(std::string_view bytes);

enum class CountMode {
    Total,     // every occurrence at every start position
    Distinct,  // number of different patterns seen at least once
};

std::string_view to_string(CountMode mode);

// Lexicon name -> hit count.
using HitCounts = std::map<std::string, std::uint64_t>;

/// Aho-Corasick automaton over token ids. Patterns shared by several lexicons
/// are stored once and credited to each of them.
class Matcher {
public:
    static Matcher compile(std::span<const Lexicon> lexicons);

    HitCounts count_hits(std::string_view text, CountMode mode = CountMode::Total) const;
    HitCounts count_tokens(std::span<const std::string> tokens, CountMode mode = CountMode::Total) const;

    const std::vector<std::string>& lexicon_names() const noexcept { return names_; }
    std::size_t pattern_count() const noexcept { return pattern_lexicons_.size(); }
    std::size_t state_count() const noexcept { return nodes_.size(); }

private:
    static constexpr std::uint32_t kNone = UINT32_MAX;

    struct Node {
        std::uint32_t fail = 0;
        std::uint32_t output = kNone;   // next terminal state along the fail chain
        std::uint32_t pattern = kNone;  // pattern ending exactly here
    };

    struct StringHash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
    };

    std::uint32_t child(std::uint32_t state, std::uint32_t token) const;
    std::uint32_t token_id(std::string_view token) const;

    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t, StringHash, std::equal_to<>> token_ids_;
    std::unordered_map<std::uint64_t, std::uint32_t> edges_;  // (state << 32 | token) -> state
    std::vector<Node> nodes_;
    std::vector<std::vector<std::uint32_t>> pattern_lexicons_;
};

// True iff the lexicon's count reaches threshold (threshold >= 1).
bool flag(const HitCounts& counts, std::string_view lexicon, std::uint64_t threshold);

} // namespace ccaudit::lexicon
