#include "ccaudit/report.hpp"

#include "ccaudit/error.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace ccaudit::report {

using analytics::AuditRecord;
using analytics::MetricSpec;

namespace {

std::string number(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    return out + "\"";
}

std::set<std::string> lexicon_names(const std::vector<AuditRecord>& records) {
    std::set<std::string> out;
    for (const auto& r : records) {
        for (const auto& [name, c] : r.hits) out.insert(name);
    }
    return out;
}

std::set<std::string> external_names(const std::vector<AuditRecord>& records) {
    std::set<std::string> out;
    for (const auto& r : records) {
        for (const auto& [name, s] : r.external_scores) out.insert(name);
    }
    return out;
}

bool any_classifier(const std::vector<AuditRecord>& records) {
    for (const auto& r : records) {
        if (r.classifier_prob) return true;
    }
    return false;
}

bool any_perplexity(const std::vector<AuditRecord>& records) {
    for (const auto& r : records) {
        if (r.perplexity) return true;
    }
    return false;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write '" + path + "'");
    out << content;
}

// Ordered column layout in outputs: the three reported columns, middle last.
constexpr analytics::Column kOutputColumns[] = {analytics::Entire, analytics::High, analytics::Low,
                                                 analytics::Middle};

} // namespace

std::vector<MetricSpec> default_specs(const std::vector<AuditRecord>& records, const ReportOptions& options) {
    std::vector<MetricSpec> specs;
    for (const auto& name : lexicon_names(records)) {
        for (auto t : options.thresholds) specs.push_back(MetricSpec::lexicon(name, t));
    }
    if (any_classifier(records)) specs.push_back(MetricSpec::classifier(options.classifier_threshold));
    for (const auto& name : external_names(records)) {
        specs.push_back(MetricSpec::external(name, options.external_threshold));
    }
    return specs;
}

std::vector<std::string> default_metrics(const std::vector<AuditRecord>& records, const ReportOptions& options) {
    std::vector<std::string> metrics;
    const auto lexicons = lexicon_names(records);
    for (const auto& name : lexicons) metrics.push_back("hits." + name);
    for (const auto& name : lexicons) {
        for (auto t : options.thresholds) metrics.push_back("hits." + name + ">=" + std::to_string(t));
    }
    if (any_classifier(records)) metrics.emplace_back("classifier_prob");
    for (const auto& name : external_names(records)) metrics.push_back("ext." + name);
    if (any_perplexity(records)) metrics.emplace_back("perplexity");
    return metrics;
}

Report build_report(std::vector<AuditRecord> records, const ReportOptions& options,
                    nlohmann::ordered_json audit_metadata) {
    for (auto t : options.thresholds) {
        if (t == 0) throw Error(Errc::InvalidConfig, "thresholds must be positive");
    }
    Report report;
    std::size_t with_perplexity = 0;
    for (const auto& r : records) with_perplexity += r.perplexity.has_value();
    if (with_perplexity >= 3) {
        analytics::assign_buckets(records);
    } else {
        for (auto& r : records) r.bucket.reset();
    }

    const auto specs = default_specs(records, options);
    report.table = analytics::bucket_rates(records, specs);
    const auto metrics = default_metrics(records, options);
    report.correlation = analytics::correlation_matrix(records, metrics);

    nlohmann::ordered_json meta;
    meta["records"] = records.size();
    meta["bucketed_records"] = with_perplexity >= 3 ? with_perplexity : 0;
    meta["bucket_rule"] = "ascending perplexity terciles; remainder to high then middle; ties by record_id";
    meta["perplexity_normalization"] = "per-token";
    meta["thresholds"] = options.thresholds;
    meta["classifier_threshold"] = options.classifier_threshold;
    meta["external_threshold"] = options.external_threshold;
    meta["correlation"] = "pearson, two-pass, pairwise exclusion of absent metrics";
    meta["audit"] = std::move(audit_metadata);
    report.metadata = std::move(meta);
    report.records = std::move(records);
    return report;
}

nlohmann::ordered_json to_json(const Report& report) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["format"] = "ccaudit.report";
    j["version"] = 1;
    j["metadata"] = report.metadata;

    const auto& t = report.table;
    ordered_json table;
    auto columns = ordered_json::array();
    ordered_json denominators;
    for (auto c : kOutputColumns) {
        columns.push_back(analytics::kColumnNames[c]);
        denominators[std::string(analytics::kColumnNames[c])] = t.denominators[c];
    }
    table["columns"] = std::move(columns);
    table["optional_columns"] = {"middle"};
    table["denominators"] = std::move(denominators);
    auto rows = ordered_json::array();
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& spec = t.rows[i];
        ordered_json row;
        row["label"] = spec.label;
        row["kind"] = spec.kind == MetricSpec::Kind::Lexicon      ? "lexicon"
                      : spec.kind == MetricSpec::Kind::Classifier ? "classifier"
                                                                  : "external";
        row["metric"] = spec.name;
        row["threshold"] = spec.threshold;
        ordered_json flagged, rate;
        for (auto c : kOutputColumns) {
            const std::string name(analytics::kColumnNames[c]);
            flagged[name] = t.flagged[i][c];
            const auto r = t.rate(i, c);
            rate[name] = r ? ordered_json(*r) : ordered_json(nullptr);
        }
        row["flagged"] = std::move(flagged);
        row["rate"] = std::move(rate);
        rows.push_back(std::move(row));
    }
    table["rows"] = std::move(rows);
    j["bucket_table"] = std::move(table);

    const auto& m = report.correlation;
    ordered_json corr;
    corr["metrics"] = m.names;
    auto r = ordered_json::array();
    for (const auto& row : m.r) {
        auto out = ordered_json::array();
        for (const auto& v : row) out.push_back(v ? ordered_json(*v) : ordered_json(nullptr));
        r.push_back(std::move(out));
    }
    corr["r"] = std::move(r);
    corr["n"] = m.used;
    corr["excluded"] = m.excluded;
    j["correlation"] = std::move(corr);
    return j;
}

std::string bucket_table_csv(const analytics::BucketTable& table) {
    std::ostringstream out;
    out << "metric";
    for (auto c : kOutputColumns) out << ',' << analytics::kColumnNames[c];
    out << '\n';
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        out << csv_field(table.rows[i].label);
        for (auto c : kOutputColumns) {
            out << ',';
            if (const auto r = table.rate(i, c)) out << number(*r);
        }
        out << '\n';
    }
    out << "documents";
    for (auto c : kOutputColumns) out << ',' << table.denominators[c];
    out << '\n';
    return out.str();
}

std::string correlation_csv(const analytics::CorrelationMatrix& matrix) {
    std::ostringstream out;
    out << "metric";
    for (const auto& n : matrix.names) out << ',' << csv_field(n);
    out << '\n';
    for (std::size_t i = 0; i < matrix.names.size(); ++i) {
        out << csv_field(matrix.names[i]);
        for (const auto& v : matrix.r[i]) {
            out << ',';
            if (v) out << number(*v);
        }
        out << '\n';
    }
    return out.str();
}

void write_report(const Report& report, const std::string& json_path, const std::string& csv_dir) {
    write_file(json_path, to_json(report).dump(2) + "\n");
    if (csv_dir.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(csv_dir, ec);
    if (ec) throw Error(Errc::IoError, "cannot create '" + csv_dir + "': " + ec.message());
    write_file((std::filesystem::path(csv_dir) / "bucket_rates.csv").string(), bucket_table_csv(report.table));
    write_file((std::filesystem::path(csv_dir) / "correlations.csv").string(), correlation_csv(report.correlation));
}

} // namespace ccaudit::report
