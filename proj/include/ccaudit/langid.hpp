#pragma once

#include "ccaudit/wet.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ccaudit::langid {

inline constexpr std::size_t kDefaultProfileSize = 300;
inline constexpr std::size_t kMaxGramLength = 5;
// Documents with fewer normalized code points are not language-identified.
inline constexpr std::size_t kMinDocumentChars = 20;

// Rank-ordered character n-gram profile (most frequent first).
struct LangProfile {
    std::string lang;
    std::vector<std::string> ranked_ngrams;

    bool operator==(const LangProfile&) const = default;
};

// Ranked 1..5-grams of already-normalized text, ties broken lexicographically.
std::vector<std::string> ranked_ngrams(std::u32string_view normalized, std::size_t k);

LangProfile build_profile(std::string_view training_text, std::string lang,
                          std::size_t k = kDefaultProfileSize);

struct Identification {
    std::string lang;
    std::uint64_t distance = 0;

    bool operator==(const Identification&) const = default;
};

/// Cavnar-Trenkle out-of-place classifier over a fixed profile set.
/// The document profile is truncated to `k` grams and a gram missing from a
/// language profile costs `k`.
class Identifier {
public:
    explicit Identifier(std::vector<LangProfile> profiles, std::size_t k = kDefaultProfileSize);

    Identification identify(std::string_view text) const;
    Identification identify_normalized(std::u32string_view normalized) const;

    // Distance from a document profile to one language, for diagnostics.
    std::uint64_t distance(std::span<const std::string> doc_ranked, std::string_view lang) const;

    bool has_language(std::string_view lang) const;
    std::vector<std::string> languages() const;
    std::size_t profile_size() const noexcept { return k_; }

private:
    struct Entry {
        std::string lang;
        std::unordered_map<std::string, std::uint32_t> rank;
    };
    std::uint64_t distance_to(std::span<const std::string> doc_ranked, const Entry& entry) const;

    std::vector<Entry> entries_;  // sorted by language code
    std::size_t k_;
};

Identification identify(std::string_view text, std::span<const LangProfile> profiles,
                        std::size_t k = kDefaultProfileSize);

struct FilterResult {
    std::vector<wet::Document> retained;
    std::size_t dropped_short = 0;
    std::size_t dropped_language = 0;
};

inline constexpr std::uint64_t kNoDistanceLimit = UINT64_MAX;

enum class Verdict { Keep, TooShort, WrongLanguage };

// Single-document decision used by filter_language and the audit pipeline.
Verdict classify_document(const Identifier& identifier, std::string_view text, std::string_view target,
                          std::uint64_t max_distance);

FilterResult filter_language(std::span<const wet::Document> docs, std::string_view target,
                             const Identifier& identifier, std::uint64_t max_distance = kNoDistanceLimit);

// Profile file: `lang:<code>` then one gram per line in rank order.
void write_profile(const LangProfile& profile, std::ostream& out);
LangProfile read_profile(std::istream& in);
void save_profile(const LangProfile& profile, const std::string& path);
LangProfile load_profile(const std::string& path);

// Public-domain sample text compiled into the library, keyed by language code.
std::span<const std::pair<std::string_view, std::string_view>> bundled_training_texts();
std::vector<LangProfile> bundled_profiles(std::size_t k = kDefaultProfileSize);

} // namespace ccaudit::langid
