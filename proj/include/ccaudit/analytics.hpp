#pragma once

#include "ccaudit/lexicon.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ccaudit::analytics {

// Lower perplexity means closer to the reference corpus, i.e. higher quality.
enum class Bucket { High, Middle, Low };

std::string_view to_string(Bucket bucket);
std::optional<Bucket> parse_bucket(std::string_view name);

// Every per-document metric. Absent metrics stay absent; they are never 0.
struct AuditRecord {
    std::string record_id;
    std::string url;
    std::uint64_t token_count = 0;
    lexicon::HitCounts hits;
    std::optional<double> classifier_prob;
    std::map<std::string, std::optional<double>> external_scores;
    std::optional<double> perplexity;
    std::optional<Bucket> bucket;

    bool operator==(const AuditRecord&) const = default;
};

// One JSON object per line with keys in the order
// record_id, url, token_count, hits.<lexicon>, classifier_prob, ext.<name>, perplexity, bucket.
std::string to_json_line(const AuditRecord& record);
AuditRecord from_json_line(std::string_view line);

std::vector<AuditRecord> read_audit_file(const std::string& path);
void write_audit_file(std::span<const AuditRecord> records, const std::string& path);

// Canonical order: record_id, then the serialized line for exact ties.
void sort_records(std::vector<AuditRecord>& records);

/// Splits the records that have a perplexity into terciles: ascending
/// perplexity (ties by record_id), the first third is High quality. With
/// N = 3q + r the first r buckets get one extra record. Records without a
/// perplexity are left unassigned.
void assign_buckets(std::vector<AuditRecord>& records);

struct MetricSpec {
    enum class Kind { Lexicon, Classifier, External };

    Kind kind = Kind::Lexicon;
    std::string name;        // lexicon or external metric name; unused for Classifier
    double threshold = 1.0;  // hit count for lexicons, probability otherwise
    std::string label;

    bool matches(const AuditRecord& record) const;

    static MetricSpec lexicon(std::string name, std::uint64_t threshold);
    static MetricSpec classifier(double threshold);
    static MetricSpec external(std::string name, double threshold);
};

enum Column : std::size_t { Entire = 0, High = 1, Middle = 2, Low = 3 };
inline constexpr std::array<std::string_view, 4> kColumnNames = {"entire", "high", "middle", "low"};

struct BucketTable {
    std::vector<MetricSpec> rows;
    std::array<std::uint64_t, 4> denominators{};
    std::vector<std::array<std::uint64_t, 4>> flagged;

    // flagged / denominator, or nullopt for an empty column.
    std::optional<double> rate(std::size_t row, Column column) const;
};

// Rows are evaluated per column; the Entire column covers every record, the
// bucket columns only records with an assigned bucket.
BucketTable bucket_rates(std::span<const AuditRecord> records, std::span<const MetricSpec> specs);

// Two-pass Pearson r. nullopt when either series is constant.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// Resolves a metric for one record: token_count, perplexity, classifier_prob,
// hits.<lexicon>, ext.<name>, or any of those followed by `>=<t>` for a 0/1
// indicator. nullopt when the record lacks it.
std::optional<double> metric_value(const AuditRecord& record, std::string_view metric);

struct CorrelationMatrix {
    std::vector<std::string> names;
    std::vector<std::vector<std::optional<double>>> r;
    std::vector<std::vector<std::size_t>> used;      // rows with both metrics present
    std::vector<std::vector<std::size_t>> excluded;  // rows dropped for a missing metric
};

/// Pairwise Pearson matrix. Each cell uses the rows where both metrics are
/// present. Records are put in canonical order first so the result does not
/// depend on input order.
CorrelationMatrix correlation_matrix(std::span<const AuditRecord> records, std::span<const std::string> metrics);

} // namespace ccaudit::analytics
