#include "ccaudit/langid.hpp"

#include "ccaudit/error.hpp"
#include "ccaudit/text.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

namespace ccaudit::langid {

std::vector<std::string> ranked_ngrams(std::u32string_view normalized, std::size_t k) {
    if (k == 0) return {};
    std::unordered_map<std::u32string_view, std::uint32_t> counts;
    counts.reserve(normalized.size() * 2);
    for (std::size_t i = 0; i < normalized.size(); ++i) {
        const std::size_t max_len = std::min(kMaxGramLength, normalized.size() - i);
        for (std::size_t len = 1; len <= max_len; ++len) ++counts[normalized.substr(i, len)];
    }

    std::vector<std::pair<std::u32string_view, std::uint32_t>> ordered(counts.begin(), counts.end());
    const auto by_rank = [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    };
    const std::size_t keep = std::min(k, ordered.size());
    std::partial_sort(ordered.begin(), ordered.begin() + static_cast<std::ptrdiff_t>(keep), ordered.end(), by_rank);

    std::vector<std::string> out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) out.push_back(text::from_code_points(ordered[i].first));
    return out;
}

LangProfile build_profile(std::string_view training_text, std::string lang, std::size_t k) {
    const auto normalized = text::normalize_for_langid(training_text);
    if (normalized.empty()) throw Error(Errc::EmptyTraining, "no usable text for language '" + lang + "'");
    return {std::move(lang), ranked_ngrams(normalized, k)};
}

Identifier::Identifier(std::vector<LangProfile> profiles, std::size_t k) : k_(k) {
    std::sort(profiles.begin(), profiles.end(),
              [](const LangProfile& a, const LangProfile& b) { return a.lang < b.lang; });
    entries_.reserve(profiles.size());
    for (auto& p : profiles) {
        Entry e{std::move(p.lang), {}};
        e.rank.reserve(p.ranked_ngrams.size());
        for (std::size_t i = 0; i < p.ranked_ngrams.size(); ++i) {
            e.rank.emplace(std::move(p.ranked_ngrams[i]), static_cast<std::uint32_t>(i));
        }
        entries_.push_back(std::move(e));
    }
}

std::uint64_t Identifier::distance_to(std::span<const std::string> doc_ranked, const Entry& entry) const {
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < doc_ranked.size(); ++i) {
        const auto it = entry.rank.find(doc_ranked[i]);
        if (it == entry.rank.end()) {
            total += k_;
        } else {
            const std::uint64_t r = it->second;
            total += r > i ? r - i : i - r;
        }
    }
    return total;
}

std::uint64_t Identifier::distance(std::span<const std::string> doc_ranked, std::string_view lang) const {
    for (const auto& e : entries_) {
        if (e.lang == lang) return distance_to(doc_ranked, e);
    }
    throw Error(Errc::NoProfiles, "no profile for language '" + std::string(lang) + "'");
}

Identification Identifier::identify_normalized(std::u32string_view normalized) const {
    if (entries_.empty()) throw Error(Errc::NoProfiles, "identify needs at least one profile");
    if (normalized.empty()) throw Error(Errc::EmptyText, "nothing to identify");
    const auto doc = ranked_ngrams(normalized, k_);
    Identification best{entries_.front().lang, distance_to(doc, entries_.front())};
    // entries_ is sorted by code, so strict < keeps the lexicographically first on ties.
    for (std::size_t i = 1; i < entries_.size(); ++i) {
        const auto d = distance_to(doc, entries_[i]);
        if (d < best.distance) best = {entries_[i].lang, d};
    }
    return best;
}

Identification Identifier::identify(std::string_view text) const {
    return identify_normalized(text::normalize_for_langid(text));
}

bool Identifier::has_language(std::string_view lang) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.lang == lang; });
}

std::vector<std::string> Identifier::languages() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.lang);
    return out;
}

Identification identify(std::string_view text, std::span<const LangProfile> profiles, std::size_t k) {
    if (profiles.empty()) throw Error(Errc::NoProfiles, "identify needs at least one profile");
    return Identifier({profiles.begin(), profiles.end()}, k).identify(text);
}

Verdict classify_document(const Identifier& identifier, std::string_view text, std::string_view target,
                          std::uint64_t max_distance) {
    const auto normalized = text::normalize_for_langid(text);
    if (normalized.size() < kMinDocumentChars) return Verdict::TooShort;
    const auto id = identifier.identify_normalized(normalized);
    return id.lang == target && id.distance <= max_distance ? Verdict::Keep : Verdict::WrongLanguage;
}

FilterResult filter_language(std::span<const wet::Document> docs, std::string_view target,
                             const Identifier& identifier, std::uint64_t max_distance) {
    if (!identifier.has_language(target)) {
        throw Error(Errc::NoProfiles, "profiles do not include target language '" + std::string(target) + "'");
    }
    FilterResult result;
    for (const auto& doc : docs) {
        switch (classify_document(identifier, doc.text, target, max_distance)) {
        case Verdict::Keep: result.retained.push_back(doc); break;
        case Verdict::TooShort: ++result.dropped_short; break;
        case Verdict::WrongLanguage: ++result.dropped_language; break;
        }
    }
    return result;
}

void write_profile(const LangProfile& profile, std::ostream& out) {
    out << "lang:" << profile.lang << '\n';
    for (const auto& g : profile.ranked_ngrams) out << g << '\n';
}

LangProfile read_profile(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || !line.starts_with("lang:") || line.size() == 5) {
        throw Error(Errc::BadFormat, "profile must start with 'lang:<code>'");
    }
    LangProfile profile{line.substr(5), {}};
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (!seen.insert(line).second) throw Error(Errc::BadFormat, "duplicate n-gram in profile");
        profile.ranked_ngrams.push_back(line);
    }
    return profile;
}

void save_profile(const LangProfile& profile, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write profile '" + path + "'");
    write_profile(profile, out);
}

LangProfile load_profile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open profile '" + path + "'");
    return read_profile(in);
}

std::vector<LangProfile> bundled_profiles(std::size_t k) {
    std::vector<LangProfile> out;
    for (const auto& [lang, sample] : bundled_training_texts()) out.push_back(build_profile(sample, std::string(lang), k));
    return out;
}

} // namespace ccaudit::langid
