#include "ccaudit/ngram_lm.hpp"

#include "ccaudit/error.hpp"
#include "ccaudit/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace ccaudit::lm {

namespace {

constexpr std::string_view kFormat = "ccaudit.kn-lm";
constexpr int kFormatVersion = 1;

double clamp_discount(std::uint64_t n1, std::uint64_t n2) {
    if (n1 + 2 * n2 == 0) return kMinDiscount;
    const double d = static_cast<double>(n1) / static_cast<double>(n1 + 2 * n2);
    return std::clamp(d, kMinDiscount, kMaxDiscount);
}

} // namespace

std::size_t NGramModel::KeyHash::operator()(const Key& k) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull ^ k.len;
    for (std::uint8_t i = 0; i < k.len; ++i) {
        h ^= k.ids[i];
        h *= 0x100000001b3ull;
        h ^= h >> 29;
    }
    return static_cast<std::size_t>(h);
}

NGramModel::Key NGramModel::make_key(std::span<const WordId> ids) {
    Key k;
    k.len = static_cast<std::uint8_t>(ids.size());
    std::copy(ids.begin(), ids.end(), k.ids.begin());
    return k;
}

void NGramModel::set_vocab(std::vector<std::string> words) {
    words.emplace_back(kEos);
    words.emplace_back(kUnk);
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    vocab_ = std::move(words);
    ids_.clear();
    for (std::size_t i = 0; i < vocab_.size(); ++i) ids_.emplace(vocab_[i], static_cast<WordId>(i));
    bos_ = static_cast<WordId>(vocab_.size());
    eos_ = ids_.at(std::string(kEos));
    unk_ = ids_.at(std::string(kUnk));
}

void NGramModel::finalize(bool recompute_discounts) {
    if (recompute_discounts) discounts_.assign(order_, kMinDiscount);
    for (std::size_t k = 1; k <= order_; ++k) {
        auto& level = levels_[k - 1];
        level.contexts.clear();
        std::uint64_t n1 = 0, n2 = 0;
        for (const auto& [key, c] : level.counts) {
            Key ctx = key;
            ctx.len = static_cast<std::uint8_t>(key.len - 1);
            ctx.ids[ctx.len] = 0;
            auto& stats = level.contexts[ctx];
            stats.total += c;
            stats.types += 1;
            n1 += c == 1;
            n2 += c == 2;
        }
        if (recompute_discounts) discounts_[k - 1] = clamp_discount(n1, n2);
    }
}

NGramModel NGramModel::train(std::span<const Sentence> corpus, std::size_t order, std::size_t min_count) {
    if (order == 0) throw Error(Errc::OrderZero, "model order must be at least 1");
    if (order > kMaxOrder) throw Error(Errc::InvalidConfig, "model order is limited to 5");
    const bool any = std::any_of(corpus.begin(), corpus.end(), [](const Sentence& s) { return !s.empty(); });
    if (!any) throw Error(Errc::EmptyCorpus, "training corpus has no tokens");

    std::map<std::string, std::uint64_t> freq;
    for (const auto& s : corpus) {
        for (const auto& t : s) ++freq[t];
    }
    std::vector<std::string> kept;
    for (const auto& [w, c] : freq) {
        if (c >= min_count) kept.push_back(w);
    }

    NGramModel m;
    m.order_ = order;
    m.min_count_ = min_count;
    m.set_vocab(std::move(kept));
    m.levels_.resize(order);

    auto& top = m.levels_[order - 1].counts;
    std::vector<WordId> ids;
    for (const auto& s : corpus) {
        if (s.empty()) continue;
        ids.assign(order - 1, m.bos_);
        for (const auto& t : s) ids.push_back(m.map_word(t));
        ids.push_back(m.eos_);
        for (std::size_t i = order - 1; i < ids.size(); ++i) {
            ++top[make_key(std::span(ids).subspan(i + 1 - order, order))];
        }
    }
    // Continuation counts: distinct left extensions of each lower-order gram.
    for (std::size_t k = order - 1; k >= 1; --k) {
        auto& lower = m.levels_[k - 1].counts;
        for (const auto& [key, c] : m.levels_[k].counts) {
            ++lower[make_key(std::span(key.ids).subspan(1, k))];
        }
    }
    m.finalize(true);
    return m;
}

NGramModel NGramModel::uniform(std::span<const std::string> words) {
    NGramModel m;
    m.order_ = 1;
    m.min_count_ = 0;
    m.set_vocab({words.begin(), words.end()});
    m.levels_.resize(1);
    m.finalize(true);
    return m;
}

std::optional<WordId> NGramModel::find(std::string_view word) const {
    if (word == kBos) return bos_;
    const auto it = ids_.find(std::string(word));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

WordId NGramModel::map_word(std::string_view word) const {
    return find(word).value_or(unk_);
}

double NGramModel::prob_ids(WordId word, std::span<const WordId> context) const {
    if (context.size() != order_ - 1) {
        throw Error(Errc::DimensionMismatch, "context must hold order-1 = " + std::to_string(order_ - 1) + " words");
    }
    if (word >= vocab_.size()) throw Error(Errc::InvalidConfig, "word id outside predictable vocabulary");

    double p = 1.0 / static_cast<double>(vocab_.size());
    Key gram;
    for (std::size_t k = 1; k <= order_; ++k) {
        const auto& level = levels_[k - 1];
        const auto ctx_ids = context.subspan(context.size() - (k - 1));
        Key ctx = make_key(ctx_ids);
        const auto stats = level.contexts.find(ctx);
        if (stats == level.contexts.end() || stats->second.total == 0) continue;

        gram = ctx;
        gram.ids[gram.len++] = word;
        const auto hit = level.counts.find(gram);
        const double c = hit == level.counts.end() ? 0.0 : static_cast<double>(hit->second);
        const double d = discounts_[k - 1];
        p = (std::max(c - d, 0.0) + d * static_cast<double>(stats->second.types) * p) /
            static_cast<double>(stats->second.total);
    }
    return p;
}

double NGramModel::prob(std::string_view word, std::span<const std::string> context) const {
    std::vector<WordId> ctx;
    ctx.reserve(context.size());
    for (const auto& w : context) ctx.push_back(map_word(w));
    return prob_ids(map_word(word), ctx);
}

std::uint64_t NGramModel::count(std::span<const WordId> gram) const {
    if (gram.empty() || gram.size() > order_) return 0;
    const auto& level = levels_[gram.size() - 1];
    const auto it = level.counts.find(make_key(gram));
    return it == level.counts.end() ? 0 : it->second;
}

std::vector<std::pair<std::vector<WordId>, std::uint64_t>> NGramModel::level_entries(std::size_t level) const {
    std::vector<std::pair<std::vector<WordId>, std::uint64_t>> out;
    for (const auto& [key, c] : levels_.at(level - 1).counts) {
        out.emplace_back(std::vector<WordId>(key.ids.begin(), key.ids.begin() + key.len), c);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::vector<WordId>> NGramModel::observed_contexts() const {
    std::vector<std::vector<WordId>> out;
    for (const auto& [key, stats] : levels_.back().contexts) {
        out.emplace_back(key.ids.begin(), key.ids.begin() + key.len);
    }
    std::sort(out.begin(), out.end());
    return out;
}

void NGramModel::add_sentence_logprob(std::span<const std::string> tokens, PerplexityScore& score) const {
    std::vector<WordId> ids(order_ - 1, bos_);
    ids.reserve(tokens.size() + order_);
    for (const auto& t : tokens) ids.push_back(map_word(t));
    ids.push_back(eos_);
    for (std::size_t i = order_ - 1; i < ids.size(); ++i) {
        const double p = prob_ids(ids[i], std::span(ids).subspan(i + 1 - order_, order_ - 1));
        score.log_prob += std::log(p);
        ++score.token_count;
    }
}

PerplexityScore NGramModel::perplexity(std::span<const std::string> tokens) const {
    if (tokens.empty()) throw Error(Errc::EmptyDocument, "cannot score an empty document");
    PerplexityScore score;
    add_sentence_logprob(tokens, score);
    score.value = std::exp(-score.log_prob / static_cast<double>(score.token_count));
    return score;
}

PerplexityScore NGramModel::perplexity_segments(std::span<const Sentence> segments) const {
    PerplexityScore score;
    for (const auto& s : segments) {
        if (!s.empty()) add_sentence_logprob(s, score);
    }
    if (score.token_count == 0) throw Error(Errc::EmptyDocument, "cannot score an empty document");
    score.value = std::exp(-score.log_prob / static_cast<double>(score.token_count));
    return score;
}

std::string NGramModel::to_json() const {
    nlohmann::ordered_json j;
    j["format"] = kFormat;
    j["version"] = kFormatVersion;
    j["smoothing"] = "interpolated-kneser-ney";
    j["order"] = order_;
    j["min_count"] = min_count_;
    j["vocab"] = vocab_;
    j["discounts"] = discounts_;
    auto levels = nlohmann::ordered_json::array();
    for (std::size_t k = 1; k <= order_; ++k) {
        auto entries = nlohmann::ordered_json::array();
        for (const auto& [ids, c] : level_entries(k)) {
            auto row = nlohmann::ordered_json(ids);
            row.push_back(c);
            entries.push_back(std::move(row));
        }
        levels.push_back({{"order", k}, {"kind", k == order_ ? "count" : "continuation"}, {"entries", entries}});
    }
    j["levels"] = std::move(levels);
    return j.dump();
}

NGramModel NGramModel::from_json(std::string_view json) {
    try {
        const auto j = nlohmann::json::parse(json);
        if (j.at("format").get<std::string>() != kFormat || j.at("version").get<int>() != kFormatVersion) {
            throw Error(Errc::BadFormat, "not a version 1 language model");
        }
        NGramModel m;
        m.order_ = j.at("order").get<std::size_t>();
        if (m.order_ == 0 || m.order_ > kMaxOrder) throw Error(Errc::BadFormat, "order out of range");
        m.min_count_ = j.at("min_count").get<std::size_t>();
        auto vocab = j.at("vocab").get<std::vector<std::string>>();
        m.set_vocab(vocab);
        if (m.vocab_ != vocab) throw Error(Errc::BadFormat, "vocab must be sorted, unique, with </s> and <unk>");
        m.discounts_ = j.at("discounts").get<std::vector<double>>();
        if (m.discounts_.size() != m.order_) throw Error(Errc::BadFormat, "one discount per level expected");
        for (double d : m.discounts_) {
            if (!(d >= 0.0 && d <= kMaxDiscount)) throw Error(Errc::BadFormat, "discount outside [0, 0.999]");
        }
        const auto& levels = j.at("levels");
        if (levels.size() != m.order_) throw Error(Errc::BadFormat, "one table per level expected");
        m.levels_.resize(m.order_);
        for (std::size_t k = 1; k <= m.order_; ++k) {
            for (const auto& row : levels.at(k - 1).at("entries")) {
                if (row.size() != k + 1) throw Error(Errc::BadFormat, "n-gram row of wrong length");
                std::vector<WordId> ids;
                for (std::size_t i = 0; i < k; ++i) {
                    const auto id = row.at(i).get<WordId>();
                    if (id > m.bos_) throw Error(Errc::BadFormat, "word id out of range");
                    ids.push_back(id);
                }
                m.levels_[k - 1].counts[make_key(ids)] = row.at(k).get<std::uint64_t>();
            }
        }
        m.finalize(false);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::BadFormat, std::string("language model: ") + e.what());
    }
}

void NGramModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write model '" + path + "'");
    out << to_json() << '\n';
}

NGramModel NGramModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open model '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

std::vector<Sentence> sentences_from_text(std::string_view text) {
    std::vector<Sentence> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto tokens = text::tokenize(text.substr(start, end - start));
        if (!tokens.empty()) out.push_back(std::move(tokens));
        start = end + 1;
    }
    return out;
}

std::vector<Sentence> load_corpus_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw Error(Errc::IoError, "not a directory: '" + dir + "'");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Sentence> corpus;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in) throw Error(Errc::IoError, "cannot read '" + f.string() + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        const auto decoded = text::decode_utf8(buf.str());
        auto sentences = sentences_from_text(decoded.text);
        std::move(sentences.begin(), sentences.end(), std::back_inserter(corpus));
    }
    return corpus;
}

} // namespace ccaudit::lm
