#include "ccaudit/audit.hpp"

#include "ccaudit/error.hpp"
#include "ccaudit/text.hpp"
#include "ccaudit/wet.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace ccaudit::audit {

namespace fs = std::filesystem;

namespace {

bool valid_metric_name(std::string_view name) {
    return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    });
}

std::string file_sha256(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return lexicon::sha256_hex(buf.str());
}

std::vector<langid::LangProfile> load_profiles_dir(const std::string& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw Error(Errc::IoError, "profile directory '" + dir + "' not found");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".profile") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<langid::LangProfile> out;
    for (const auto& f : files) out.push_back(langid::load_profile(f.string()));
    if (out.empty()) throw Error(Errc::NoProfiles, "no *.profile files in '" + dir + "'");
    return out;
}

struct ShardResult {
    std::vector<analytics::AuditRecord> records;
    ShardStats stats;
    std::optional<ShardError> error;
};

ShardResult run_shard(const std::string& path, const Detectors& detectors) {
    ShardResult result;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        result.error = ShardError{path, 0, std::string(errc_name(Errc::IoError)) + ": cannot open shard"};
        return result;
    }
    std::uint64_t offset = 0;
    try {
        audit_stream(in, detectors, result.records, result.stats, &offset);
    } catch (const std::exception& e) {
        result.error = ShardError{path, offset, e.what()};
    }
    return result;
}

} // namespace

ShardStats& ShardStats::operator+=(const ShardStats& o) {
    records_read += o.records_read;
    skipped_non_conversion += o.skipped_non_conversion;
    dropped_short += o.dropped_short;
    dropped_language += o.dropped_language;
    retained += o.retained;
    decode_replacements += o.decode_replacements;
    return *this;
}

bool RunSummary::balanced() const {
    return totals.retained + totals.skipped_non_conversion + totals.dropped_short + totals.dropped_language ==
           totals.records_read;
}

nlohmann::ordered_json RunSummary::to_json() const {
    nlohmann::ordered_json j;
    j["records_read"] = totals.records_read;
    j["skipped_non_conversion"] = totals.skipped_non_conversion;
    j["dropped_short"] = totals.dropped_short;
    j["dropped_wrong_language"] = totals.dropped_language;
    j["retained"] = totals.retained;
    j["decode_replacements"] = totals.decode_replacements;
    j["replacements_per_shard"] = replacements_per_shard;
    auto errs = nlohmann::ordered_json::array();
    for (const auto& e : errors) errs.push_back({{"shard", e.shard}, {"offset", e.offset}, {"message", e.message}});
    j["shard_errors"] = std::move(errs);
    j["unmatched_external"] = unmatched_external;
    return j;
}

void AuditConfig::validate() const {
    if (output_path.empty()) throw Error(Errc::InvalidConfig, "an output path is required");
    if (manifest && !shards.empty()) throw Error(Errc::InvalidConfig, "give either shards or a manifest, not both");
    if (manifest.has_value() != rate.has_value() || manifest.has_value() != seed.has_value()) {
        throw Error(Errc::InvalidConfig, "rate and seed are required with a manifest and only then");
    }
    if (rate && !(*rate >= 0.0 && *rate <= 1.0)) throw Error(Errc::RateOutOfRange, "rate must lie in [0, 1]");
    if (lexicons.empty() && !classifier_path && !lm_path && external_scores.empty()) {
        throw Error(Errc::InvalidConfig, "configure at least one detector (lexicon, classifier, lm or ext)");
    }
    if (target_lang.empty()) throw Error(Errc::InvalidConfig, "target language must not be empty");
    std::set<std::string> names;
    for (const auto& l : lexicons) {
        if (!valid_metric_name(l.name)) throw Error(Errc::InvalidConfig, "bad lexicon name '" + l.name + "'");
        if (!names.insert(l.name).second) throw Error(Errc::InvalidConfig, "duplicate lexicon '" + l.name + "'");
    }
    names.clear();
    for (const auto& e : external_scores) {
        if (!valid_metric_name(e.name)) throw Error(Errc::InvalidConfig, "bad external metric name '" + e.name + "'");
        if (!names.insert(e.name).second) {
            throw Error(Errc::DuplicateMetricName, "external metric '" + e.name + "' given twice");
        }
    }
}

Detectors::Detectors(langid::Identifier identifier, std::string target_lang, std::uint64_t max_distance,
                     std::vector<lexicon::Lexicon> lexicons, lexicon::CountMode mode)
    : identifier_(std::move(identifier)),
      target_lang_(std::move(target_lang)),
      max_distance_(max_distance),
      lexicons_(std::move(lexicons)),
      mode_(mode) {
    if (!identifier_.has_language(target_lang_)) {
        throw Error(Errc::NoProfiles, "no language profile for target '" + target_lang_ + "'");
    }
    if (!lexicons_.empty()) matcher_ = lexicon::Matcher::compile(lexicons_);
}

void Detectors::set_classifier(classifier::TextClassifier c) { classifier_ = std::move(c); }

void Detectors::set_language_model(lm::NGramModel model) { lm_ = std::move(model); }

std::optional<analytics::AuditRecord> Detectors::score(const wet::Document& doc, ShardStats& stats) const {
    stats.decode_replacements += doc.replacements;
    switch (langid::classify_document(identifier_, doc.text, target_lang_, max_distance_)) {
    case langid::Verdict::TooShort: ++stats.dropped_short; return std::nullopt;
    case langid::Verdict::WrongLanguage: ++stats.dropped_language; return std::nullopt;
    case langid::Verdict::Keep: break;
    }
    ++stats.retained;

    analytics::AuditRecord r;
    r.record_id = doc.record_id;
    r.url = doc.url;
    const auto tokens = text::tokenize(doc.text);
    r.token_count = tokens.size();
    if (matcher_) r.hits = matcher_->count_tokens(tokens, mode_);
    if (classifier_) r.classifier_prob = classifier_->predict_proba_tokens(tokens);
    if (lm_ && !tokens.empty()) r.perplexity = lm_->perplexity(tokens).value;
    return r;
}

Detectors load_detectors(const AuditConfig& config) {
    auto profiles = config.profiles_dir.empty() ? langid::bundled_profiles() : load_profiles_dir(config.profiles_dir);
    std::vector<lexicon::Lexicon> lexicons;
    for (const auto& l : config.lexicons) lexicons.push_back(lexicon::load_lexicon(l.path, l.name));
    Detectors d(langid::Identifier(std::move(profiles)), config.target_lang, config.max_distance,
                std::move(lexicons), config.count_mode);
    if (config.classifier_path) d.set_classifier(classifier::load_classifier(*config.classifier_path));
    if (config.lm_path) d.set_language_model(lm::NGramModel::load(*config.lm_path));
    return d;
}

void audit_stream(std::istream& in, const Detectors& detectors, std::vector<analytics::AuditRecord>& out,
                  ShardStats& stats, std::uint64_t* error_offset) {
    wet::WetReader reader(in);
    try {
        while (auto record = reader.next()) {
            ++stats.records_read;
            const auto doc = wet::record_to_document(*record);
            if (!doc) {
                ++stats.skipped_non_conversion;
                continue;
            }
            if (auto scored = detectors.score(*doc, stats)) out.push_back(std::move(*scored));
        }
    } catch (const Error& e) {
        if (error_offset) *error_offset = reader.record_offset();
        throw Error(e.code(), std::string(e.what()) + " [offset " + std::to_string(reader.record_offset()) + "]");
    }
}

std::map<std::string, double> parse_scores(std::istream& in) {
    std::map<std::string, double> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        const auto where = "scores line " + std::to_string(lineno);
        if (tab == std::string::npos || tab == 0) throw Error(Errc::MalformedScores, where + ": expected id<TAB>score");
        const std::string value = line.substr(tab + 1);
        std::size_t used = 0;
        double score = 0.0;
        try {
            score = std::stod(value, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != value.size() || !std::isfinite(score)) {
            throw Error(Errc::MalformedScores, where + ": score '" + value + "' is not a finite number");
        }
        if (!out.emplace(line.substr(0, tab), score).second) {
            throw Error(Errc::MalformedScores, where + ": duplicate id '" + line.substr(0, tab) + "'");
        }
    }
    return out;
}

std::map<std::string, double> load_scores(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open scores file '" + path + "'");
    return parse_scores(in);
}

MergeResult merge_external_scores(std::vector<analytics::AuditRecord>& records,
                                  const std::map<std::string, double>& scores, const std::string& name) {
    if (!valid_metric_name(name)) throw Error(Errc::InvalidConfig, "bad external metric name '" + name + "'");
    for (const auto& r : records) {
        if (r.external_scores.contains(name)) {
            throw Error(Errc::DuplicateMetricName, "records already carry ext." + name);
        }
    }
    MergeResult result;
    std::set<std::string> matched_ids;
    for (auto& r : records) {
        // Records without a score stay untouched: absent, not zero.
        const auto it = scores.find(r.record_id);
        if (it != scores.end()) {
            r.external_scores[name] = it->second;
            matched_ids.insert(r.record_id);
        }
    }
    result.matched = matched_ids.size();
    result.unmatched = scores.size() - matched_ids.size();
    return result;
}

MergeResult merge_external_scores_file(const std::string& audit_path, const std::string& scores_path,
                                       const std::string& name, const std::string& out_path) {
    auto records = analytics::read_audit_file(audit_path);
    const auto scores = load_scores(scores_path);
    const auto result = merge_external_scores(records, scores, name);
    analytics::write_audit_file(records, out_path);
    return result;
}

std::vector<std::string> resolve_shards(const AuditConfig& config) {
    if (!config.manifest) return config.shards;
    const auto manifest = wet::load_manifest(*config.manifest);
    const auto sampled = wet::sample_shards(manifest, *config.rate, *config.seed);
    const fs::path base = fs::path(*config.manifest).parent_path();
    std::vector<std::string> out;
    for (const auto& id : sampled.shard_ids) {
        const fs::path p(id);
        out.push_back(p.is_relative() && !base.empty() ? (base / p).string() : id);
    }
    return out;
}

std::string metadata_path(const std::string& audit_path) { return audit_path + ".meta.json"; }

nlohmann::ordered_json run_metadata(const AuditConfig& config, const Detectors& detectors,
                                    const RunSummary& summary) {
    nlohmann::ordered_json j;
    j["format"] = "ccaudit.audit-meta";
    j["version"] = 1;
    j["tokenizer"] = text::kTokenizerVersion;
    j["counting_mode"] = lexicon::to_string(config.count_mode);

    auto lexicons = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < detectors.lexicons().size(); ++i) {
        const auto& lex = detectors.lexicons()[i];
        lexicons.push_back({{"name", lex.name},
                            {"path", config.lexicons.at(i).path},
                            {"sha256", lex.source_sha256},
                            {"patterns", lex.patterns.size()},
                            {"duplicates_removed", lex.duplicates_removed}});
    }
    j["lexicons"] = std::move(lexicons);

    j["langid"] = {{"method", "cavnar-trenkle out-of-place"},
                   {"ngram_lengths", "1-5"},
                   {"profile_size", detectors.identifier().profile_size()},
                   {"profiles", config.profiles_dir.empty() ? std::string("bundled") : config.profiles_dir},
                   {"languages", detectors.identifier().languages()},
                   {"target", config.target_lang},
                   {"max_distance", config.max_distance == langid::kNoDistanceLimit
                                        ? nlohmann::ordered_json(nullptr)
                                        : nlohmann::ordered_json(config.max_distance)},
                   {"min_chars", langid::kMinDocumentChars}};

    if (const auto& lm = detectors.language_model(); lm && config.lm_path) {
        j["lm"] = {{"path", *config.lm_path},
                   {"sha256", file_sha256(*config.lm_path)},
                   {"smoothing", "interpolated-kneser-ney"},
                   {"order", lm->order()},
                   {"min_count", lm->min_count()},
                   {"vocab_size", lm->vocab_size()},
                   {"perplexity_normalization", "per-token, natural log, one padded sequence per document"}};
    } else {
        j["lm"] = nullptr;
    }
    if (config.classifier_path) {
        j["classifier"] = {{"path", *config.classifier_path},
                           {"sha256", file_sha256(*config.classifier_path)},
                           {"label", classifier::kModelLabel}};
    } else {
        j["classifier"] = nullptr;
    }
    auto ext = nlohmann::ordered_json::array();
    for (const auto& e : config.external_scores) {
        ext.push_back({{"name", e.name}, {"path", e.path}, {"sha256", file_sha256(e.path)}});
    }
    j["external"] = std::move(ext);
    if (config.manifest) {
        j["sampling"] = {{"manifest", *config.manifest}, {"rate", *config.rate}, {"seed", *config.seed}};
    } else {
        j["sampling"] = nullptr;
    }
    j["shards"] = summary.shards;
    j["summary"] = summary.to_json();
    return j;
}

RunSummary run_audit(const AuditConfig& config) {
    config.validate();
    const Detectors detectors = load_detectors(config);
    std::vector<std::pair<std::string, std::map<std::string, double>>> external;
    for (const auto& e : config.external_scores) external.emplace_back(e.name, load_scores(e.path));

    RunSummary summary;
    summary.shards = resolve_shards(config);
    const auto& shards = summary.shards;

    std::vector<ShardResult> results(shards.size());
    std::size_t workers = config.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.workers;
    workers = std::min(workers, std::max<std::size_t>(shards.size(), 1));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    const auto work = [&] {
        for (std::size_t i = next++; i < shards.size() && !abort; i = next++) {
            results[i] = run_shard(shards[i], detectors);
            if (results[i].error && config.strict) abort = true;
        }
    };
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
        work();
    }

    std::vector<analytics::AuditRecord> records;
    for (std::size_t i = 0; i < shards.size(); ++i) {
        auto& r = results[i];
        if (r.error) {
            if (config.strict) throw Error(Errc::BadFormat, "shard '" + r.error->shard + "': " + r.error->message);
            summary.errors.push_back(*r.error);
        }
        summary.totals += r.stats;
        summary.replacements_per_shard[shards[i]] = r.stats.decode_replacements;
        std::move(r.records.begin(), r.records.end(), std::back_inserter(records));
    }
    analytics::sort_records(records);
    for (const auto& [name, scores] : external) {
        summary.unmatched_external[name] = merge_external_scores(records, scores, name).unmatched;
    }

    analytics::write_audit_file(records, config.output_path);
    const auto meta = run_metadata(config, detectors, summary);
    std::ofstream meta_out(metadata_path(config.output_path), std::ios::binary | std::ios::trunc);
    if (!meta_out) throw Error(Errc::IoError, "cannot write metadata for '" + config.output_path + "'");
    meta_out << meta.dump(2) << '\n';
    return summary;
}

} // namespace ccaudit::audit
