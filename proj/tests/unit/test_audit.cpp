#include "ccaudit/audit.hpp"
#include "ccaudit/error.hpp"
#include "ccaudit/ngram_lm.hpp"
#include "ccaudit/text.hpp"
#include "ccaudit/wet.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

using namespace ccaudit;
using namespace ccaudit::audit;
namespace fs = std::filesystem;

namespace {

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::IoError;
}

// 1000 documents plus filler, written as four shards with trained detectors.
struct Fixture {
    testing::TempDir dir;
    testing::SyntheticCorpus corpus;
    testing::CorpusFiles files;
    std::string lm_path;
    std::string classifier_path;

    Fixture() {
        const auto data = testing::repo_data_dir();
        const auto sexual = lexicon::load_lexicon(data + "/lexicons/demo_sexual.txt", "sexual");
        const auto hate = lexicon::load_lexicon(data + "/lexicons/demo_hate.txt", "hate");
        testing::CorpusPlan plan;
        plan.seed = 99;
        plan.base_tokens = 80;
        plan.foreign_docs = 12;
        plan.short_docs = 9;
        const std::size_t sizes[3] = {334, 333, 333};
        for (std::size_t c = 0; c < 3; ++c) {
            plan.classes[c] = {sizes[c], {30, 10, 3}, {60, 20, 5}, 25, 40};
        }
        corpus = testing::make_corpus(plan, sexual, hate);
        files = testing::write_corpus(corpus, dir.file("corpus"), 4, data);

        std::vector<lm::Sentence> sentences;
        for (const auto& s : corpus.lm_sentences) sentences.push_back(text::tokenize(s));
        lm_path = dir.file("model.lm.json");
        lm::NGramModel::train(sentences, 3, 1).save(lm_path);
        classifier_path = dir.file("model.clf.json");
        classifier::save_classifier(
            classifier::fit_classifier(corpus.classifier_training, {1, 3}, 1, classifier::TrainOptions{}),
            classifier_path);
    }

    AuditConfig config(const std::string& out, std::size_t workers) const {
        AuditConfig c;
        c.shards = files.shards;
        c.lexicons = {{"sexual", files.sexual_lexicon}, {"hate", files.hate_lexicon}};
        c.lm_path = lm_path;
        c.classifier_path = classifier_path;
        c.external_scores = {{"delimit", files.external_scores}};
        c.workers = workers;
        c.output_path = out;
        return c;
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

} // namespace

TEST_CASE("config validation") {
    AuditConfig c;
    c.output_path = "out.jsonl";
    c.lexicons = {{"hate", "h.txt"}};
    CHECK_NOTHROW(c.validate());

    auto bad = c;
    bad.output_path.clear();
    CHECK(code_of([&] { bad.validate(); }) == Errc::InvalidConfig);
    bad = c;
    bad.lexicons.clear();
    CHECK(code_of([&] { bad.validate(); }) == Errc::InvalidConfig);
    bad = c;
    bad.manifest = "m.txt";
    CHECK(code_of([&] { bad.validate(); }) == Errc::InvalidConfig);
    bad.rate = 0.5;
    bad.seed = 1;
    CHECK_NOTHROW(bad.validate());
    bad.shards = {"a.wet"};
    CHECK(code_of([&] { bad.validate(); }) == Errc::InvalidConfig);
    bad.shards.clear();
    bad.rate = 1.5;
    CHECK(code_of([&] { bad.validate(); }) == Errc::RateOutOfRange);
    bad = c;
    bad.lexicons.push_back({"hate", "other.txt"});
    CHECK(code_of([&] { bad.validate(); }) == Errc::InvalidConfig);
    bad = c;
    bad.lexicons = {{"bad name", "x"}};
    CHECK(code_of([&] { bad.validate(); }) == Errc::InvalidConfig);
    bad = c;
    bad.external_scores = {{"d", "a.tsv"}, {"d", "b.tsv"}};
    CHECK(code_of([&] { bad.validate(); }) == Errc::DuplicateMetricName);
}

TEST_CASE("an empty shard list writes an empty audit file") {
    testing::TempDir dir;
    AuditConfig c;
    c.lexicons = {{"hate", testing::repo_data_dir() + "/lexicons/demo_hate.txt"}};
    c.output_path = dir.file("audit.jsonl");
    const auto summary = run_audit(c);
    CHECK(summary.totals.records_read == 0);
    CHECK(summary.totals.retained == 0);
    CHECK(summary.errors.empty());
    CHECK(summary.balanced());
    CHECK(fs::exists(c.output_path));
    CHECK(fs::file_size(c.output_path) == 0);
    CHECK(fs::exists(metadata_path(c.output_path)));
}

TEST_CASE("audit output matches the planted ground truth") {
    const auto& f = fixture();
    testing::TempDir dir;
    const auto summary = run_audit(f.config(dir.file("audit.jsonl"), 2));
    const auto records = analytics::read_audit_file(dir.file("audit.jsonl"));

    std::size_t planted = 0, filler = 0;
    std::map<std::string, const testing::PlantedDoc*> by_id;
    for (const auto& d : f.corpus.docs) {
        if (d.filler) {
            ++filler;
        } else {
            ++planted;
            by_id[d.record_id] = &d;
        }
    }
    CHECK(records.size() == planted);
    CHECK(summary.totals.retained == planted);
    CHECK(summary.totals.dropped_short + summary.totals.dropped_language == filler);
    CHECK(summary.totals.records_read == f.corpus.docs.size() + f.files.shards.size());
    CHECK(summary.totals.skipped_non_conversion == f.files.shards.size());
    CHECK(summary.balanced());
    // Dropped filler documents have scores too, which then match nothing.
    CHECK(summary.unmatched_external.at("delimit") == f.corpus.external_unmatched + filler);

    CHECK(std::is_sorted(records.begin(), records.end(),
                         [](const auto& a, const auto& b) { return a.record_id < b.record_id; }));
    std::size_t classifier_agree = 0;
    for (const auto& r : records) {
        const auto it = by_id.find(r.record_id);
        REQUIRE(it != by_id.end());
        const auto& d = *it->second;
        CHECK(r.url == d.url);
        CHECK(r.hits.at("sexual") == d.sexual_hits);
        CHECK(r.hits.at("hate") == d.hate_hits);
        CHECK(r.token_count == text::tokenize(d.text).size());
        REQUIRE(r.perplexity.has_value());
        CHECK(*r.perplexity > 1.0);
        REQUIRE(r.classifier_prob.has_value());
        classifier_agree += (*r.classifier_prob >= 0.5) == d.classifier_marker;
        const auto& ext = r.external_scores.at("delimit");
        REQUIRE(ext.has_value());
        CHECK((*ext > 0.5) == d.external_flag);
        CHECK_FALSE(r.bucket.has_value());
    }
    CHECK(classifier_agree == records.size());
}

TEST_CASE("worker count does not change the output bytes") {
    const auto& f = fixture();
    testing::TempDir dir;
    std::string first;
    for (std::size_t workers : {1, 8, 3}) {
        const auto out = dir.file("audit-" + std::to_string(workers) + ".jsonl");
        run_audit(f.config(out, workers));
        const auto bytes = testing::read_file(out);
        if (first.empty()) first = bytes;
        CHECK(bytes == first);
    }
    // Running again over the same inputs is idempotent.
    run_audit(f.config(dir.file("audit-1.jsonl"), 1));
    CHECK(testing::read_file(dir.file("audit-1.jsonl")) == first);

    // Shard order in the list does not matter either.
    auto c = f.config(dir.file("reversed.jsonl"), 4);
    std::reverse(c.shards.begin(), c.shards.end());
    run_audit(c);
    CHECK(testing::read_file(dir.file("reversed.jsonl")) == first);
}

TEST_CASE("a corrupt shard is isolated unless strict") {
    const auto& f = fixture();
    testing::TempDir dir;
    // Truncate a plain shard in the middle of a later record.
    const auto& source = f.files.shards[0];
    auto bytes = testing::read_file(source);
    const auto records = wet::parse_all(bytes);
    REQUIRE(records.size() > 10);
    const auto cut_at = wet::serialize_wet(std::span(records).first(6)).size();
    const auto broken = dir.file("broken.warc.wet");
    testing::write_file(broken, bytes.substr(0, cut_at) + "WARC/1.0\r\nContent-Length: 9999\r\n\r\nshort");

    auto c = f.config(dir.file("audit.jsonl"), 2);
    c.shards = {broken, f.files.shards[1]};
    const auto summary = run_audit(c);
    REQUIRE(summary.errors.size() == 1);
    CHECK(summary.errors[0].shard == broken);
    CHECK(summary.errors[0].offset == cut_at);
    CHECK(summary.errors[0].message.find("BadContentLength") != std::string::npos);
    // The five documents before the damage are kept, and the healthy shard in full.
    CHECK(summary.totals.records_read == 6 + wet::parse_all(testing::read_file(f.files.shards[1])).size());
    CHECK(summary.balanced());
    const auto meta = nlohmann::json::parse(testing::read_file(metadata_path(c.output_path)));
    CHECK(meta["summary"]["shard_errors"][0]["offset"] == cut_at);

    c.strict = true;
    CHECK(code_of([&] { run_audit(c); }) == Errc::BadFormat);

    c.strict = false;
    c.shards = {dir.file("missing.warc.wet")};
    const auto missing = run_audit(c);
    REQUIRE(missing.errors.size() == 1);
    CHECK(missing.errors[0].message.find("IoError") != std::string::npos);
}

TEST_CASE("metadata records the detectors and run summary") {
    const auto& f = fixture();
    testing::TempDir dir;
    auto c = f.config(dir.file("audit.jsonl"), 1);
    c.count_mode = lexicon::CountMode::Distinct;
    const auto summary = run_audit(c);
    const auto meta = nlohmann::json::parse(testing::read_file(metadata_path(c.output_path)));
    CHECK(meta["counting_mode"] == "distinct");
    CHECK(meta["tokenizer"] == text::kTokenizerVersion);
    REQUIRE(meta["lexicons"].size() == 2);
    CHECK(meta["lexicons"][0]["name"] == "sexual");
    CHECK(meta["lexicons"][0]["sha256"] == lexicon::sha256_hex(testing::read_file(f.files.sexual_lexicon)));
    CHECK(meta["lm"]["order"] == 3);
    CHECK(meta["lm"]["smoothing"] == "interpolated-kneser-ney");
    CHECK(meta["classifier"]["sha256"] == lexicon::sha256_hex(testing::read_file(f.classifier_path)));
    CHECK(meta["external"][0]["name"] == "delimit");
    CHECK(meta["langid"]["target"] == "en");
    CHECK(meta["langid"]["max_distance"].is_null());
    CHECK(meta["sampling"].is_null());
    CHECK(meta["summary"]["retained"] == summary.totals.retained);
    CHECK(meta["shards"].size() == f.files.shards.size());
}

TEST_CASE("manifest sampling resolves shard paths") {
    const auto& f = fixture();
    testing::TempDir dir;
    std::string manifest = "# shards\n";
    for (const auto& s : f.files.shards) manifest += fs::relative(s, f.dir.file("corpus")).string() + "\n";
    const auto manifest_path = (fs::path(f.dir.file("corpus")) / "manifest.txt").string();
    testing::write_file(manifest_path, manifest);

    auto c = f.config(dir.file("audit.jsonl"), 2);
    c.shards.clear();
    c.manifest = manifest_path;
    c.rate = 0.5;
    c.seed = 11;
    const auto resolved = resolve_shards(c);
    REQUIRE(resolved.size() == 2);
    for (const auto& p : resolved) {
        CHECK(std::find(f.files.shards.begin(), f.files.shards.end(), p) != f.files.shards.end());
    }
    CHECK(resolve_shards(c) == resolved);
    const auto summary = run_audit(c);
    CHECK(summary.shards == resolved);
    const auto meta = nlohmann::json::parse(testing::read_file(metadata_path(c.output_path)));
    CHECK(meta["sampling"]["rate"] == 0.5);
    CHECK(meta["sampling"]["seed"] == 11);
    c.rate = 0.0;
    CHECK(resolve_shards(c).empty());
}

TEST_CASE("external score merging") {
    std::vector<analytics::AuditRecord> records(10);
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].record_id = "r" + std::to_string(i);
        records[i].perplexity = 10.0 + static_cast<double>(i);
        records[i].hits["hate"] = i % 3;
    }

    SUBCASE("all records scored") {
        std::map<std::string, double> scores;
        for (const auto& r : records) scores[r.record_id] = 0.1;
        scores["stray"] = 0.9;
        const auto m = merge_external_scores(records, scores, "d");
        CHECK(m.matched == 10);
        CHECK(m.unmatched == 1);
        for (const auto& r : records) CHECK(r.external_scores.at("d") == 0.1);
    }
    SUBCASE("empty score file leaves the metric absent everywhere") {
        const auto before = records;
        const auto m = merge_external_scores(records, {}, "d");
        CHECK(m.matched == 0);
        CHECK(m.unmatched == 0);
        CHECK(records == before);
        CHECK(code_of([&] {
                  analytics::bucket_rates(records, std::vector{analytics::MetricSpec::external("d", 0.5)});
              }) == Errc::UnknownMetric);
    }
    SUBCASE("half coverage is excluded pairwise in correlations") {
        std::map<std::string, double> scores;
        for (std::size_t i = 0; i < records.size(); i += 2) scores[records[i].record_id] = static_cast<double>(i);
        merge_external_scores(records, scores, "d");
        for (std::size_t i = 0; i < records.size(); ++i) CHECK(records[i].external_scores.contains("d") == (i % 2 == 0));
        const auto m = analytics::correlation_matrix(records, std::vector<std::string>{"perplexity", "ext.d", "hits.hate"});
        CHECK(m.used[0][1] == 5);
        CHECK(m.excluded[0][1] == 5);
        CHECK(m.used[0][2] == 10);
        CHECK(std::abs(*m.r[0][1] - 1.0) < 1e-12);
        analytics::assign_buckets(records);
        const auto t = analytics::bucket_rates(records, std::vector{analytics::MetricSpec::external("d", 0.5)});
        CHECK(t.flagged[0][analytics::Entire] == 4);
    }
    SUBCASE("merging a name twice is refused") {
        merge_external_scores(records, {{"r1", 0.5}}, "d");
        CHECK(code_of([&] { merge_external_scores(records, {{"r1", 0.5}}, "d"); }) == Errc::DuplicateMetricName);
    }
}

TEST_CASE("score files are validated") {
    const auto parse = [](std::string s) {
        std::istringstream in(s);
        return parse_scores(in);
    };
    const auto ok = parse("a\t0.5\r\n\nb\t1e-3\n");
    CHECK(ok.size() == 2);
    CHECK(ok.at("b") == 1e-3);
    for (const char* bad : {"a 0.5\n", "\t0.5\n", "a\tnope\n", "a\t0.5x\n", "a\tnan\n", "a\tinf\n", "a\t1\na\t2\n", "a\t\n"}) {
        CAPTURE(bad);
        CHECK(code_of([&] { parse(bad); }) == Errc::MalformedScores);
    }
    CHECK(code_of([] { load_scores("/nonexistent/scores.tsv"); }) == Errc::IoError);
}

TEST_CASE("scores merge into an existing audit file") {
    testing::TempDir dir;
    std::vector<analytics::AuditRecord> records(3);
    for (std::size_t i = 0; i < 3; ++i) records[i].record_id = "id" + std::to_string(i);
    analytics::write_audit_file(records, dir.file("a.jsonl"));
    testing::write_file(dir.file("s.tsv"), "id1\t0.75\nzzz\t0.1\n");
    const auto m = merge_external_scores_file(dir.file("a.jsonl"), dir.file("s.tsv"), "ext1", dir.file("b.jsonl"));
    CHECK(m.matched == 1);
    CHECK(m.unmatched == 1);
    const auto merged = analytics::read_audit_file(dir.file("b.jsonl"));
    CHECK(merged[1].external_scores.at("ext1") == 0.75);
    CHECK_FALSE(merged[0].external_scores.contains("ext1"));
}
