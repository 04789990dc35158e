#pragma once

#include "ccaudit/analytics.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace ccaudit::report {

struct ReportOptions {
    std::vector<std::uint64_t> thresholds{1, 3, 10};
    double classifier_threshold = 0.5;
    double external_threshold = 0.5;
};

struct Report {
    analytics::BucketTable table;
    analytics::CorrelationMatrix correlation;
    nlohmann::ordered_json metadata;
    std::vector<analytics::AuditRecord> records;  // with buckets assigned
};

// Table rows: every lexicon (name order) at every threshold, then the
// classifier, then each external metric, for whichever the records carry.
std::vector<analytics::MetricSpec> default_specs(const std::vector<analytics::AuditRecord>& records,
                                                 const ReportOptions& options);

// Correlation metrics: raw hit counts, the lexicon flags at each threshold,
// classifier probability, external scores, perplexity.
std::vector<std::string> default_metrics(const std::vector<analytics::AuditRecord>& records,
                                         const ReportOptions& options);

/// Assigns terciles (when at least 3 records have a perplexity), then builds
/// the bucket table and the correlation matrix. `audit_metadata` is embedded
/// as-is (null when the audit carried none).
Report build_report(std::vector<analytics::AuditRecord> records, const ReportOptions& options,
                    nlohmann::ordered_json audit_metadata);

nlohmann::ordered_json to_json(const Report& report);
std::string bucket_table_csv(const analytics::BucketTable& table);
std::string correlation_csv(const analytics::CorrelationMatrix& matrix);

// Writes report.json and, when csv_dir is non-empty, bucket_rates.csv and
// correlations.csv inside it.
void write_report(const Report& report, const std::string& json_path, const std::string& csv_dir);

} // namespace ccaudit::report
