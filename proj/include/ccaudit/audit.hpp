#pragma once

#include "ccaudit/analytics.hpp"
#include "ccaudit/classifier.hpp"
#include "ccaudit/langid.hpp"
#include "ccaudit/lexicon.hpp"
#include "ccaudit/ngram_lm.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ccaudit::audit {

struct NamedPath {
    std::string name;
    std::string path;

    bool operator==(const NamedPath&) const = default;
};

struct AuditConfig {
    // Either explicit shards, or a manifest sampled with rate and seed.
    std::vector<std::string> shards;
    std::optional<std::string> manifest;
    std::optional<double> rate;
    std::optional<std::uint64_t> seed;

    std::string target_lang = "en";
    std::uint64_t max_distance = langid::kNoDistanceLimit;
    std::string profiles_dir;  // empty: bundled en/fr/de/es profiles

    std::vector<NamedPath> lexicons;
    std::optional<std::string> classifier_path;
    std::optional<std::string> lm_path;
    std::vector<NamedPath> external_scores;

    lexicon::CountMode count_mode = lexicon::CountMode::Total;
    bool strict = false;
    std::size_t workers = 0;  // 0: hardware concurrency
    std::string output_path;

    // Throws Error(InvalidConfig). Does not touch the filesystem.
    void validate() const;
};

struct ShardError {
    std::string shard;
    std::uint64_t offset = 0;
    std::string message;
};

struct ShardStats {
    std::uint64_t records_read = 0;
    std::uint64_t skipped_non_conversion = 0;
    std::uint64_t dropped_short = 0;
    std::uint64_t dropped_language = 0;
    std::uint64_t retained = 0;
    std::uint64_t decode_replacements = 0;

    ShardStats& operator+=(const ShardStats& other);
};

struct RunSummary {
    ShardStats totals;
    std::map<std::string, std::uint64_t> replacements_per_shard;
    std::vector<ShardError> errors;
    std::map<std::string, std::uint64_t> unmatched_external;  // metric -> scores with no record
    std::vector<std::string> shards;                          // shards actually processed

    // retained + skipped + dropped == read
    bool balanced() const;
    nlohmann::ordered_json to_json() const;
};

/// Immutable detector set shared by all workers.
class Detectors {
public:
    Detectors(langid::Identifier identifier, std::string target_lang, std::uint64_t max_distance,
              std::vector<lexicon::Lexicon> lexicons, lexicon::CountMode mode);

    void set_classifier(classifier::TextClassifier classifier);
    void set_language_model(lm::NGramModel model);

    // nullopt when the document is dropped (counted in stats).
    std::optional<analytics::AuditRecord> score(const wet::Document& doc, ShardStats& stats) const;

    const std::vector<lexicon::Lexicon>& lexicons() const noexcept { return lexicons_; }
    const langid::Identifier& identifier() const noexcept { return identifier_; }
    const std::optional<classifier::TextClassifier>& text_classifier() const noexcept { return classifier_; }
    const std::optional<lm::NGramModel>& language_model() const noexcept { return lm_; }
    const std::string& target_lang() const noexcept { return target_lang_; }
    std::uint64_t max_distance() const noexcept { return max_distance_; }
    lexicon::CountMode count_mode() const noexcept { return mode_; }

private:
    langid::Identifier identifier_;
    std::string target_lang_;
    std::uint64_t max_distance_;
    std::vector<lexicon::Lexicon> lexicons_;
    std::optional<lexicon::Matcher> matcher_;
    lexicon::CountMode mode_;
    std::optional<classifier::TextClassifier> classifier_;
    std::optional<lm::NGramModel> lm_;
};

// Loads every detector named by the config.
Detectors load_detectors(const AuditConfig& config);

// Runs one shard to completion. Parse errors propagate; records produced
// before the error are kept in `out`, and `error_offset` (when given) is set
// to the byte offset of the record that failed.
void audit_stream(std::istream& in, const Detectors& detectors, std::vector<analytics::AuditRecord>& out,
                  ShardStats& stats, std::uint64_t* error_offset = nullptr);

// `record_id<TAB>score` lines.
std::map<std::string, double> parse_scores(std::istream& in);
std::map<std::string, double> load_scores(const std::string& path);

struct MergeResult {
    std::uint64_t matched = 0;
    std::uint64_t unmatched = 0;  // score ids with no record
};

// Adds ext.<name> to each record the scores cover; the rest are left as-is.
MergeResult merge_external_scores(std::vector<analytics::AuditRecord>& records,
                                  const std::map<std::string, double>& scores, const std::string& name);
MergeResult merge_external_scores_file(const std::string& audit_path, const std::string& scores_path,
                                       const std::string& name, const std::string& out_path);

// Shards the config resolves to: explicit list or the sampled manifest.
std::vector<std::string> resolve_shards(const AuditConfig& config);

// Run metadata written next to the audit file as <out>.meta.json.
nlohmann::ordered_json run_metadata(const AuditConfig& config, const Detectors& detectors,
                                    const RunSummary& summary);
std::string metadata_path(const std::string& audit_path);

/// Full run: resolve shards, fan out one worker per shard, sort the merged
/// records by record_id, merge external scores, write the audit file and its
/// metadata. The output depends only on the config and input bytes.
RunSummary run_audit(const AuditConfig& config);

} // namespace ccaudit::audit
