#include "ccaudit/lexicon.hpp"

#include "ccaudit/error.hpp"
#include "ccaudit/text.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <deque>
#include <fstream>
#include <iomanip>
#include <istream>
#include <set>
#include <sstream>

namespace ccaudit::lexicon {

namespace {

std::string join(const Pattern& p) {
    std::string out;
    for (const auto& t : p) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

} // namespace

Lexicon make_lexicon(std::string name, std::span<const std::string> phrases) {
    Lexicon lex{std::move(name), {}, 0, {}};
    std::set<Pattern> seen;
    for (const auto& phrase : phrases) {
        auto tokens = text::tokenize(phrase);
        if (tokens.empty()) continue;
        if (tokens.size() > kMaxPatternTokens) {
            throw Error(Errc::InvariantViolation, "lexicon '" + lex.name + "': phrase '" + phrase + "' has " +
                                                      std::to_string(tokens.size()) + " tokens (max 5)");
        }
        if (!seen.insert(tokens).second) {
            ++lex.duplicates_removed;
            continue;
        }
        lex.patterns.push_back(std::move(tokens));
    }
    if (lex.patterns.empty()) throw Error(Errc::EmptyLexicon, "lexicon '" + lex.name + "' has no patterns");
    return lex;
}

Lexicon parse_lexicon(std::istream& in, std::string name) {
    std::vector<std::string> phrases;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        phrases.push_back(line);
    }
    return make_lexicon(std::move(name), phrases);
}

Lexicon load_lexicon(const std::string& path, std::string name) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open lexicon '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = std::move(buf).str();
    std::istringstream lines(bytes);
    auto lex = parse_lexicon(lines, std::move(name));
    lex.source_sha256 = sha256_hex(bytes);
    return lex;
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(Errc::IoError, "sha256 failed");
    }
    std::ostringstream out;
    out << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i) out << std::setw(2) << static_cast<int>(digest[i]);
    return out.str();
}

std::string_view to_string(CountMode mode) {
    return mode == CountMode::Total ? "total" : "distinct";
}

std::uint32_t Matcher::child(std::uint32_t state, std::uint32_t token) const {
    const auto it = edges_.find((static_cast<std::uint64_t>(state) << 32) | token);
    return it == edges_.end() ? kNone : it->second;
}

std::uint32_t Matcher::token_id(std::string_view token) const {
    const auto it = token_ids_.find(token);
    return it == token_ids_.end() ? kNone : it->second;
}

Matcher Matcher::compile(std::span<const Lexicon> lexicons) {
    if (lexicons.empty()) throw Error(Errc::EmptyLexicon, "compile needs at least one lexicon");
    Matcher m;
    m.nodes_.emplace_back();
    std::map<std::string, std::uint32_t> pattern_index;

    for (std::uint32_t li = 0; li < lexicons.size(); ++li) {
        const auto& lex = lexicons[li];
        if (std::find(m.names_.begin(), m.names_.end(), lex.name) != m.names_.end()) {
            throw Error(Errc::InvariantViolation, "duplicate lexicon name '" + lex.name + "'");
        }
        if (lex.patterns.empty()) throw Error(Errc::EmptyLexicon, "lexicon '" + lex.name + "' has no patterns");
        m.names_.push_back(lex.name);

        for (const auto& pattern : lex.patterns) {
            if (pattern.empty()) throw Error(Errc::InvariantViolation, "empty pattern in '" + lex.name + "'");
            const auto [it, fresh] =
                pattern_index.emplace(join(pattern), static_cast<std::uint32_t>(m.pattern_lexicons_.size()));
            if (fresh) m.pattern_lexicons_.emplace_back();
            auto& owners = m.pattern_lexicons_[it->second];
            if (owners.empty() || owners.back() != li) owners.push_back(li);
            if (!fresh) continue;

            std::uint32_t state = 0;
            for (const auto& token : pattern) {
                const auto [tok, added] =
                    m.token_ids_.emplace(token, static_cast<std::uint32_t>(m.token_ids_.size()));
                (void)added;
                const std::uint64_t key = (static_cast<std::uint64_t>(state) << 32) | tok->second;
                auto edge = m.edges_.find(key);
                if (edge == m.edges_.end()) {
                    edge = m.edges_.emplace(key, static_cast<std::uint32_t>(m.nodes_.size())).first;
                    m.nodes_.emplace_back();
                }
                state = edge->second;
            }
            m.nodes_[state].pattern = it->second;
        }
    }

    // Breadth-first failure links; children grouped by parent for the walk.
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> children(m.nodes_.size());
    for (const auto& [key, to] : m.edges_) {
        children[key >> 32].emplace_back(static_cast<std::uint32_t>(key & 0xFFFFFFFFu), to);
    }
    std::deque<std::uint32_t> queue;
    for (const auto& [tok, to] : children[0]) {
        m.nodes_[to].fail = 0;
        queue.push_back(to);
    }
    while (!queue.empty()) {
        const std::uint32_t s = queue.front();
        queue.pop_front();
        for (const auto& [tok, to] : children[s]) {
            std::uint32_t f = m.nodes_[s].fail;
            std::uint32_t next = m.child(f, tok);
            while (next == kNone && f != 0) {
                f = m.nodes_[f].fail;
                next = m.child(f, tok);
            }
            m.nodes_[to].fail = next == kNone ? 0 : next;
            const auto& fail_node = m.nodes_[m.nodes_[to].fail];
            m.nodes_[to].output = fail_node.pattern != kNone ? m.nodes_[to].fail : fail_node.output;
            queue.push_back(to);
        }
    }
    return m;
}

HitCounts Matcher::count_tokens(std::span<const std::string> tokens, CountMode mode) const {
    std::vector<std::uint64_t> per_lexicon(names_.size(), 0);
    std::vector<std::uint32_t> seen_patterns;

    std::uint32_t state = 0;
    for (const auto& token : tokens) {
        const std::uint32_t tok = token_id(token);
        if (tok == kNone) {
            state = 0;
            continue;
        }
        std::uint32_t next = child(state, tok);
        while (next == kNone && state != 0) {
            state = nodes_[state].fail;
            next = child(state, tok);
        }
        state = next == kNone ? 0 : next;

        for (std::uint32_t t = nodes_[state].pattern != kNone ? state : nodes_[state].output; t != kNone;
             t = nodes_[t].output) {
            const std::uint32_t p = nodes_[t].pattern;
            if (mode == CountMode::Distinct) {
                seen_patterns.push_back(p);
            } else {
                for (std::uint32_t li : pattern_lexicons_[p]) ++per_lexicon[li];
            }
        }
    }

    if (mode == CountMode::Distinct) {
        std::sort(seen_patterns.begin(), seen_patterns.end());
        seen_patterns.erase(std::unique(seen_patterns.begin(), seen_patterns.end()), seen_patterns.end());
        for (std::uint32_t p : seen_patterns) {
            for (std::uint32_t li : pattern_lexicons_[p]) ++per_lexicon[li];
        }
    }

    HitCounts out;
    for (std::size_t i = 0; i < names_.size(); ++i) out.emplace(names_[i], per_lexicon[i]);
    return out;
}

HitCounts Matcher::count_hits(std::string_view text, CountMode mode) const {
    const auto tokens = text::tokenize(text);
    return count_tokens(tokens, mode);
}

bool flag(const HitCounts& counts, std::string_view lexicon, std::uint64_t threshold) {
    if (threshold == 0) throw Error(Errc::InvalidConfig, "flag threshold must be positive");
    const auto it = counts.find(std::string(lexicon));
    if (it == counts.end()) throw Error(Errc::UnknownLexicon, "no counts for lexicon '" + std::string(lexicon) + "'");
    return it->second >= threshold;
}

} // namespace ccaudit::lexicon
