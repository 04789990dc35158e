#include "ccaudit/analytics.hpp"

#include "ccaudit/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

namespace ccaudit::analytics {

namespace {

constexpr std::string_view kHitsPrefix = "hits.";
constexpr std::string_view kExtPrefix = "ext.";

std::string format_threshold(double t) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, t);
    return std::string(buf, ptr);
}

std::optional<double> optional_number(const nlohmann::json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<double>();
}

} // namespace

std::string_view to_string(Bucket bucket) {
    switch (bucket) {
    case Bucket::High: return "high";
    case Bucket::Middle: return "middle";
    case Bucket::Low: return "low";
    }
    return "?";
}

std::optional<Bucket> parse_bucket(std::string_view name) {
    if (name == "high") return Bucket::High;
    if (name == "middle") return Bucket::Middle;
    if (name == "low") return Bucket::Low;
    return std::nullopt;
}

std::string to_json_line(const AuditRecord& r) {
    nlohmann::ordered_json j;
    j["record_id"] = r.record_id;
    j["url"] = r.url;
    j["token_count"] = r.token_count;
    for (const auto& [name, count] : r.hits) j[std::string(kHitsPrefix) + name] = count;
    j["classifier_prob"] = r.classifier_prob ? nlohmann::ordered_json(*r.classifier_prob) : nullptr;
    for (const auto& [name, score] : r.external_scores) {
        j[std::string(kExtPrefix) + name] = score ? nlohmann::ordered_json(*score) : nullptr;
    }
    j["perplexity"] = r.perplexity ? nlohmann::ordered_json(*r.perplexity) : nullptr;
    j["bucket"] = r.bucket ? nlohmann::ordered_json(std::string(to_string(*r.bucket))) : nullptr;
    return j.dump();
}

AuditRecord from_json_line(std::string_view line) {
    try {
        const auto j = nlohmann::json::parse(line);
        if (!j.is_object()) throw Error(Errc::BadFormat, "audit line is not a JSON object");
        AuditRecord r;
        r.record_id = j.at("record_id").get<std::string>();
        r.url = j.at("url").get<std::string>();
        r.token_count = j.at("token_count").get<std::uint64_t>();
        r.classifier_prob = optional_number(j, "classifier_prob");
        r.perplexity = optional_number(j, "perplexity");
        if (const auto b = j.find("bucket"); b != j.end() && !b->is_null()) {
            r.bucket = parse_bucket(b->get<std::string>());
            if (!r.bucket) throw Error(Errc::BadFormat, "unknown bucket '" + b->get<std::string>() + "'");
        }
        for (const auto& [key, value] : j.items()) {
            if (key.starts_with(kHitsPrefix)) {
                r.hits[key.substr(kHitsPrefix.size())] = value.get<std::uint64_t>();
            } else if (key.starts_with(kExtPrefix)) {
                r.external_scores[key.substr(kExtPrefix.size())] =
                    value.is_null() ? std::nullopt : std::optional<double>(value.get<double>());
            }
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::BadFormat, std::string("audit line: ") + e.what());
    }
}

std::vector<AuditRecord> read_audit_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open audit file '" + path + "'");
    std::vector<AuditRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(from_json_line(line));
        } catch (const Error& e) {
            throw Error(Errc::BadFormat, path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_audit_file(std::span<const AuditRecord> records, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write audit file '" + path + "'");
    for (const auto& r : records) out << to_json_line(r) << '\n';
    if (!out) throw Error(Errc::IoError, "write failed for '" + path + "'");
}

void sort_records(std::vector<AuditRecord>& records) {
    std::vector<std::pair<std::string, std::size_t>> keys;
    keys.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) keys.emplace_back(records[i].record_id, i);
    std::sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return to_json_line(records[a.second]) < to_json_line(records[b.second]);
    });
    std::vector<AuditRecord> sorted;
    sorted.reserve(records.size());
    for (const auto& [id, i] : keys) sorted.push_back(std::move(records[i]));
    records = std::move(sorted);
}

void assign_buckets(std::vector<AuditRecord>& records) {
    std::vector<std::size_t> scored;
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].bucket.reset();
        if (records[i].perplexity) scored.push_back(i);
    }
    if (scored.size() < 3) {
        throw Error(Errc::TooFewRecords, "tercile bucketing needs at least 3 records with a perplexity, got " +
                                             std::to_string(scored.size()));
    }
    std::sort(scored.begin(), scored.end(), [&](std::size_t a, std::size_t b) {
        const auto& ra = records[a];
        const auto& rb = records[b];
        if (*ra.perplexity != *rb.perplexity) return *ra.perplexity < *rb.perplexity;
        if (ra.record_id != rb.record_id) return ra.record_id < rb.record_id;
        return a < b;
    });
    const std::size_t n = scored.size();
    const std::size_t q = n / 3, r = n % 3;
    const std::size_t high_end = q + (r >= 1 ? 1 : 0);
    const std::size_t middle_end = high_end + q + (r >= 2 ? 1 : 0);
    for (std::size_t pos = 0; pos < n; ++pos) {
        records[scored[pos]].bucket = pos < high_end ? Bucket::High : pos < middle_end ? Bucket::Middle : Bucket::Low;
    }
}

bool MetricSpec::matches(const AuditRecord& record) const {
    switch (kind) {
    case Kind::Lexicon: {
        const auto it = record.hits.find(name);
        return it != record.hits.end() && static_cast<double>(it->second) >= threshold;
    }
    case Kind::Classifier:
        return record.classifier_prob && *record.classifier_prob >= threshold;
    case Kind::External: {
        const auto it = record.external_scores.find(name);
        return it != record.external_scores.end() && it->second && *it->second >= threshold;
    }
    }
    return false;
}

MetricSpec MetricSpec::lexicon(std::string name, std::uint64_t threshold) {
    auto label = std::to_string(threshold) + "+ " + name + " n-grams";
    return {Kind::Lexicon, std::move(name), static_cast<double>(threshold), std::move(label)};
}

MetricSpec MetricSpec::classifier(double threshold) {
    return {Kind::Classifier, "classifier_prob", threshold, "Hate speech (word-ngram-lr)"};
}

MetricSpec MetricSpec::external(std::string name, double threshold) {
    auto label = name + " (external, >= " + format_threshold(threshold) + ")";
    return {Kind::External, std::move(name), threshold, std::move(label)};
}

std::optional<double> BucketTable::rate(std::size_t row, Column column) const {
    if (denominators[column] == 0) return std::nullopt;
    return static_cast<double>(flagged.at(row)[column]) / static_cast<double>(denominators[column]);
}

BucketTable bucket_rates(std::span<const AuditRecord> records, std::span<const MetricSpec> specs) {
    for (const auto& spec : specs) {
        if (records.empty()) break;
        const bool known = std::any_of(records.begin(), records.end(), [&](const AuditRecord& r) {
            switch (spec.kind) {
            case MetricSpec::Kind::Lexicon: return r.hits.contains(spec.name);
            case MetricSpec::Kind::Classifier: return r.classifier_prob.has_value();
            case MetricSpec::Kind::External: return r.external_scores.contains(spec.name);
            }
            return false;
        });
        if (!known) throw Error(Errc::UnknownMetric, "no record carries metric for row '" + spec.label + "'");
    }

    BucketTable table;
    table.rows.assign(specs.begin(), specs.end());
    table.flagged.assign(specs.size(), {});
    for (const auto& r : records) {
        std::array<bool, 4> in{true, false, false, false};
        if (r.bucket) in[static_cast<std::size_t>(*r.bucket) + 1] = true;
        for (std::size_t c = 0; c < 4; ++c) table.denominators[c] += in[c];
        for (std::size_t s = 0; s < specs.size(); ++s) {
            if (!specs[s].matches(r)) continue;
            for (std::size_t c = 0; c < 4; ++c) table.flagged[s][c] += in[c];
        }
    }
    return table;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw Error(Errc::LengthMismatch, std::to_string(x.size()) + " vs " + std::to_string(y.size()) + " values");
    }
    if (x.size() < 2) throw Error(Errc::TooShort, "pearson needs at least 2 points");
    const auto constant = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
    };
    if (constant(x) || constant(y)) return std::nullopt;

    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

std::optional<double> metric_value(const AuditRecord& record, std::string_view metric) {
    if (const auto ge = metric.find(">="); ge != std::string_view::npos) {
        const auto threshold_text = metric.substr(ge + 2);
        double threshold = 0.0;
        const auto [ptr, ec] =
            std::from_chars(threshold_text.data(), threshold_text.data() + threshold_text.size(), threshold);
        if (ec != std::errc{} || ptr != threshold_text.data() + threshold_text.size()) {
            throw Error(Errc::UnknownMetric, "bad threshold in metric '" + std::string(metric) + "'");
        }
        const auto base = metric_value(record, metric.substr(0, ge));
        if (!base) return std::nullopt;
        return *base >= threshold ? 1.0 : 0.0;
    }
    if (metric == "token_count") return static_cast<double>(record.token_count);
    if (metric == "perplexity") return record.perplexity;
    if (metric == "classifier_prob") return record.classifier_prob;
    if (metric.starts_with(kHitsPrefix)) {
        const auto it = record.hits.find(std::string(metric.substr(kHitsPrefix.size())));
        if (it == record.hits.end()) return std::nullopt;
        return static_cast<double>(it->second);
    }
    if (metric.starts_with(kExtPrefix)) {
        const auto it = record.external_scores.find(std::string(metric.substr(kExtPrefix.size())));
        if (it == record.external_scores.end()) return std::nullopt;
        return it->second;
    }
    throw Error(Errc::UnknownMetric, "unknown metric '" + std::string(metric) + "'");
}

CorrelationMatrix correlation_matrix(std::span<const AuditRecord> records, std::span<const std::string> metrics) {
    std::vector<AuditRecord> canonical(records.begin(), records.end());
    sort_records(canonical);

    const std::size_t m = metrics.size();
    std::vector<std::vector<std::optional<double>>> columns(m);
    for (std::size_t i = 0; i < m; ++i) {
        columns[i].reserve(canonical.size());
        bool any = false;
        for (const auto& r : canonical) {
            columns[i].push_back(metric_value(r, metrics[i]));
            any = any || columns[i].back().has_value();
        }
        if (!any && !canonical.empty()) {
            throw Error(Errc::UnknownMetric, "no record carries metric '" + metrics[i] + "'");
        }
    }

    CorrelationMatrix out;
    out.names.assign(metrics.begin(), metrics.end());
    out.r.assign(m, std::vector<std::optional<double>>(m));
    out.used.assign(m, std::vector<std::size_t>(m, 0));
    out.excluded.assign(m, std::vector<std::size_t>(m, 0));
    std::vector<double> x, y;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            x.clear();
            y.clear();
            for (std::size_t k = 0; k < canonical.size(); ++k) {
                if (columns[i][k] && columns[j][k]) {
                    x.push_back(*columns[i][k]);
                    y.push_back(*columns[j][k]);
                }
            }
            std::optional<double> r;
            if (x.size() >= 2) r = pearson(x, y);
            if (i == j && r) r = 1.0;
            out.r[i][j] = out.r[j][i] = r;
            out.used[i][j] = out.used[j][i] = x.size();
            out.excluded[i][j] = out.excluded[j][i] = canonical.size() - x.size();
        }
    }
    return out;
}

} // namespace ccaudit::analytics
