#include "synthetic.hpp"

#include "ccaudit/langid.hpp"
#include "ccaudit/text.hpp"
#include "ccaudit/wet.hpp"
#include "temp_dir.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <set>
#include <stdexcept>

namespace ccaudit::testing {

namespace {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}
    std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
    double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
    std::mt19937_64& engine() { return rng_; }

    std::string uuid() {
        char buf[64];
        const auto a = rng_(), b = rng_();
        std::snprintf(buf, sizeof buf, "<urn:uuid:%08llx-%04llx-4%03llx-8%03llx-%012llx>",
                      static_cast<unsigned long long>(a >> 32), static_cast<unsigned long long>((a >> 16) & 0xffff),
                      static_cast<unsigned long long>(a & 0xfff), static_cast<unsigned long long>(b >> 52),
                      static_cast<unsigned long long>(b & 0xffffffffffffull));
        return buf;
    }

private:
    std::mt19937_64 rng_;
};

struct Pools {
    std::vector<std::vector<std::string>> sentences;  // tokenized reference sentences
    std::vector<std::string> vocab;                   // reference vocabulary
    std::vector<std::string> outside;
    std::vector<std::string> glue;
    std::vector<std::string> french;
};

const Pools& pools() {
    static const Pools p = [] {
        Pools out;
        std::set<std::string> vocab;
        for (const auto& s : reference_sentences()) {
            out.sentences.push_back(text::tokenize(s));
            vocab.insert(out.sentences.back().begin(), out.sentences.back().end());
        }
        out.vocab.assign(vocab.begin(), vocab.end());
        for (const auto& w : outside_words()) {
            if (!vocab.count(w)) out.outside.push_back(w);
        }
        static const char* const glue[] = {"because", "although", "whose",  "whom",  "perhaps", "quite",
                                           "rather",  "those",    "would",  "upon",  "itself",  "nothing",
                                           "whether", "unless",   "while",  "yet",   "my",      "your",
                                           "his",     "her",      "we",     "it",    "was",     "an",
                                           "not",     "but",      "or",     "if",    "what",    "when"};
        for (const char* w : glue) {
            if (!vocab.count(w)) out.glue.emplace_back(w);
        }
        for (const auto& [lang, body] : langid::bundled_training_texts()) {
            if (lang == "fr") out.french = text::tokenize(body);
        }
        return out;
    }();
    return p;
}

std::vector<std::string> base_tokens(Gen& g, analytics::Bucket quality, std::size_t n) {
    const auto& p = pools();
    std::vector<std::string> out;
    if (quality == analytics::Bucket::Low) {
        // Unseen content words glued with unseen function words: English to
        // the language identifier, all <unk> to the reference model.
        while (out.size() < n) {
            out.push_back(g.unit() < 0.45 ? p.glue[g.below(p.glue.size())] : p.outside[g.below(p.outside.size())]);
        }
        return out;
    }
    while (out.size() < n) {
        const auto& s = p.sentences[g.below(p.sentences.size())];
        out.insert(out.end(), s.begin(), s.end());
    }
    if (quality == analytics::Bucket::Middle) {
        for (auto& t : out) {
            if (g.unit() < 0.4) t = p.vocab[g.below(p.vocab.size())];
        }
    }
    return out;
}

std::string phrase(Gen& g, const lexicon::Lexicon& lex) {
    const auto& pattern = lex.patterns[g.below(lex.patterns.size())];
    std::string s;
    for (const auto& t : pattern) {
        if (!s.empty()) s += ' ';
        s += t;
    }
    return s;
}

std::uint64_t hits_for_band(Gen& g, int band) {
    switch (band) {
    case 10: return 10 + g.below(5);
    case 3: return 3 + g.below(7);
    case 1: return 1 + g.below(2);
    default: return 0;
    }
}

// Band of each document in a class: the first at_least_10 get 10+, and so on.
std::vector<int> bands(Gen& g, std::size_t n, const HitPlan& plan) {
    if (!(plan.at_least_1 >= plan.at_least_3 && plan.at_least_3 >= plan.at_least_10 && plan.at_least_1 <= n)) {
        throw std::invalid_argument("inconsistent hit plan");
    }
    std::vector<int> out(n, 0);
    std::fill(out.begin(), out.begin() + static_cast<long>(plan.at_least_10), 10);
    std::fill(out.begin() + static_cast<long>(plan.at_least_10), out.begin() + static_cast<long>(plan.at_least_3), 3);
    std::fill(out.begin() + static_cast<long>(plan.at_least_3), out.begin() + static_cast<long>(plan.at_least_1), 1);
    std::shuffle(out.begin(), out.end(), g.engine());
    return out;
}

std::vector<bool> chosen(Gen& g, std::size_t n, std::size_t k) {
    std::vector<bool> out(n, false);
    std::fill(out.begin(), out.begin() + static_cast<long>(k), true);
    std::shuffle(out.begin(), out.end(), g.engine());
    return out;
}

std::string marker_run() {
    std::string s;
    for (std::size_t i = 0; i < kMarkerRun; ++i) {
        if (i) s += ' ';
        s += kMarker;
    }
    return s;
}

std::string assemble(Gen& g, std::vector<std::string> chunks, const std::vector<std::string>& inserts) {
    for (const auto& ins : inserts) chunks.insert(chunks.begin() + static_cast<long>(g.below(chunks.size() + 1)), ins);
    std::string out;
    for (const auto& c : chunks) {
        if (!out.empty()) out += ' ';
        out += c;
    }
    return out;
}

PlantedDoc make_doc(Gen& g, analytics::Bucket quality, std::size_t base, int sexual_band, int hate_band,
                    bool marker, const lexicon::Lexicon& sexual, const lexicon::Lexicon& hate) {
    PlantedDoc d;
    d.quality = quality;
    d.sexual_hits = hits_for_band(g, sexual_band);
    d.hate_hits = hits_for_band(g, hate_band);
    d.classifier_marker = marker;
    std::vector<std::string> inserts;
    for (std::uint64_t i = 0; i < d.sexual_hits; ++i) inserts.push_back(phrase(g, sexual));
    for (std::uint64_t i = 0; i < d.hate_hits; ++i) inserts.push_back(phrase(g, hate));
    if (marker) inserts.push_back(marker_run());
    std::shuffle(inserts.begin(), inserts.end(), g.engine());
    d.text = assemble(g, base_tokens(g, quality, base), inserts);
    return d;
}

} // namespace

CorpusPlan table_plan(std::uint64_t seed) {
    CorpusPlan p;
    p.classes[0] = {3334, {60, 14, 3}, {632, 206, 39}, 116, 192};
    p.classes[1] = {3333, {44, 18, 4}, {573, 157, 20}, 116, 143};
    p.classes[2] = {3333, {132, 104, 66}, {573, 275, 57}, 170, 189};
    p.base_tokens = 160;
    p.foreign_docs = 40;
    p.short_docs = 25;
    p.seed = seed;
    return p;
}

CorpusPlan coupled_plan(std::uint64_t seed) {
    CorpusPlan p;
    p.classes[0] = {1000, {10, 4, 1}, {150, 50, 10}, 0, 0};
    p.classes[1] = {1000, {30, 15, 5}, {150, 50, 10}, 0, 0};
    p.classes[2] = {1000, {120, 80, 40}, {150, 50, 10}, 0, 0};
    p.base_tokens = 80;
    p.seed = seed;
    return p;
}

SyntheticCorpus make_corpus(const CorpusPlan& plan, const lexicon::Lexicon& sexual, const lexicon::Lexicon& hate) {
    Gen g(plan.seed);
    SyntheticCorpus out;

    for (std::size_t c = 0; c < 3; ++c) {
        const auto& cp = plan.classes[c];
        const auto quality = static_cast<analytics::Bucket>(c);
        const auto sb = bands(g, cp.docs, cp.sexual);
        const auto hb = bands(g, cp.docs, cp.hate);
        const auto cl = chosen(g, cp.docs, cp.classifier);
        const auto ex = chosen(g, cp.docs, cp.external);
        for (std::size_t i = 0; i < cp.docs; ++i) {
            auto d = make_doc(g, quality, plan.base_tokens, sb[i], hb[i], cl[i], sexual, hate);
            d.external_flag = ex[i];
            out.docs.push_back(std::move(d));
        }
    }
    const auto& french = pools().french;
    for (std::size_t i = 0; i < plan.foreign_docs; ++i) {
        PlantedDoc d;
        d.filler = true;
        const std::size_t start = g.below(french.size() - 60);
        d.text = assemble(g, {french.begin() + static_cast<long>(start), french.begin() + static_cast<long>(start + 60)}, {});
        out.docs.push_back(std::move(d));
    }
    static const std::vector<std::string> fragments = {"ok", "thanks!", "see you", "home | about", "more...", "yes"};
    for (std::size_t i = 0; i < plan.short_docs; ++i) {
        PlantedDoc d;
        d.filler = true;
        d.text = fragments[g.below(fragments.size())];
        out.docs.push_back(std::move(d));
    }

    std::shuffle(out.docs.begin(), out.docs.end(), g.engine());
    std::set<std::string> ids;
    for (std::size_t i = 0; i < out.docs.size(); ++i) {
        auto& d = out.docs[i];
        do d.record_id = g.uuid();
        while (!ids.insert(d.record_id).second);
        d.url = "http://site" + std::to_string(g.below(5000)) + ".example.org/page/" + std::to_string(i);
    }

    // Reference corpus for the language model: the prose, every lexicon
    // phrase and the marker run, so none of them fall back to <unk>.
    for (const auto& s : reference_sentences()) out.lm_sentences.push_back(s);
    for (const auto* lex : {&sexual, &hate}) {
        for (const auto& pattern : lex->patterns) {
            std::string line;
            for (const auto& t : pattern) line += (line.empty() ? "" : " ") + t;
            out.lm_sentences.push_back(line);
        }
    }
    out.lm_sentences.push_back(marker_run());

    // Classifier training data: short documents of every kind, labeled by the marker.
    for (std::size_t i = 0; i < 300; ++i) {
        const auto quality = static_cast<analytics::Bucket>(i % 3);
        const bool marker = (i / 3) % 2 == 0;
        const int sband = g.below(4) == 0 ? 1 : 0;
        const int hband = g.below(3) == 0 ? 3 : 0;
        auto d = make_doc(g, quality, 60, sband, hband, marker, sexual, hate);
        out.classifier_training.push_back({marker ? 1 : 0, d.text});
    }

    char buf[32];
    for (const auto& d : out.docs) {
        const double score = d.external_flag ? 0.6 + 0.39 * g.unit() : 0.45 * g.unit();
        std::snprintf(buf, sizeof buf, "%.6f", score);
        out.external_scores_tsv += d.record_id + "\t" + buf + "\n";
    }
    for (std::size_t i = 0; i < 3; ++i) {
        out.external_scores_tsv += g.uuid() + "\t0.5\n";
        ++out.external_unmatched;
    }
    return out;
}

CorpusFiles write_corpus(const SyntheticCorpus& corpus, const std::string& dir, std::size_t shard_count,
                         const std::string& data_dir) {
    namespace fs = std::filesystem;
    CorpusFiles files;
    fs::create_directories(dir);

    for (std::size_t s = 0; s < shard_count; ++s) {
        std::vector<wet::RawRecord> records;
        wet::RawRecord info;
        const std::string body = "software: synthetic\r\nisPartOf: test-crawl\r\n";
        info.headers = {{"WARC-Type", "warcinfo"},
                        {"WARC-Record-ID", "<urn:uuid:info-" + std::to_string(s) + ">"},
                        {"Content-Length", std::to_string(body.size())}};
        info.payload = body;
        records.push_back(std::move(info));
        for (std::size_t i = s; i < corpus.docs.size(); i += shard_count) {
            const auto& d = corpus.docs[i];
            records.push_back(wet::make_conversion_record(d.record_id, d.url, d.text));
        }
        auto bytes = wet::serialize_wet(records);
        char name[48];
        const bool gz = s % 3 == 2;
        std::snprintf(name, sizeof name, "shard-%02zu.warc.wet%s", s, gz ? ".gz" : "");
        if (gz) bytes = wet::gzip_compress(bytes);
        files.shards.push_back((fs::path(dir) / name).string());
        write_file(files.shards.back(), bytes);
    }

    files.sexual_lexicon = (fs::path(data_dir) / "lexicons" / "demo_sexual.txt").string();
    files.hate_lexicon = (fs::path(data_dir) / "lexicons" / "demo_hate.txt").string();

    files.lm_corpus_dir = (fs::path(dir) / "reference").string();
    fs::create_directories(files.lm_corpus_dir);
    std::string lm_text;
    for (const auto& s : corpus.lm_sentences) lm_text += s + "\n";
    write_file((fs::path(files.lm_corpus_dir) / "reference.txt").string(), lm_text);

    files.classifier_data = (fs::path(dir) / "classifier.tsv").string();
    std::string tsv;
    for (const auto& ex : corpus.classifier_training) tsv += std::to_string(ex.label) + "\t" + ex.text + "\n";
    write_file(files.classifier_data, tsv);

    files.external_scores = (fs::path(dir) / "external.tsv").string();
    write_file(files.external_scores, corpus.external_scores_tsv);
    return files;
}

std::string repo_data_dir() { return CCAUDIT_DATA_DIR; }

} // namespace ccaudit::testing
