#include "ccaudit/classifier.hpp"

#include "ccaudit/error.hpp"
#include "ccaudit/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>

namespace ccaudit::classifier {

namespace {

constexpr std::string_view kFormat = "ccaudit.logreg";
constexpr int kFormatVersion = 1;

double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

void check_shapes(const LogisticModel& model, std::span<const SparseVector> xs, std::span<const int> ys) {
    if (xs.size() != ys.size()) {
        throw Error(Errc::DimensionMismatch, std::to_string(xs.size()) + " vectors but " +
                                                 std::to_string(ys.size()) + " labels");
    }
    for (const auto& x : xs) {
        if (!x.entries.empty() && x.entries.back().first >= model.weights.size()) {
            throw Error(Errc::DimensionMismatch, "feature index " + std::to_string(x.entries.back().first) +
                                                     " outside model of size " +
                                                     std::to_string(model.weights.size()));
        }
    }
}

} // namespace

double SparseVector::norm() const {
    double sum = 0.0;
    for (const auto& [i, v] : entries) sum += v * v;
    return std::sqrt(sum);
}

std::vector<std::string> word_ngrams(std::span<const std::string> tokens, NgramRange range) {
    std::vector<std::string> out;
    for (std::size_t start = 0; start < tokens.size(); ++start) {
        std::string gram;
        for (std::size_t n = 1; n <= range.max && start + n <= tokens.size(); ++n) {
            if (n > 1) gram.push_back(' ');
            gram += tokens[start + n - 1];
            if (n >= range.min) out.push_back(gram);
        }
    }
    return out;
}

Vectorizer Vectorizer::fit(std::span<const std::string> corpus, NgramRange range, std::size_t min_df) {
    if (corpus.empty()) throw Error(Errc::EmptyCorpus, "cannot fit a vectorizer on an empty corpus");
    if (range.min == 0 || range.min > range.max) throw Error(Errc::InvalidConfig, "bad n-gram range");

    std::map<std::string, std::size_t> df;
    for (const auto& doc : corpus) {
        const auto tokens = text::tokenize(doc);
        auto grams = word_ngrams(tokens, range);
        std::sort(grams.begin(), grams.end());
        grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
        for (auto& g : grams) ++df[std::move(g)];
    }

    std::vector<std::string> terms;
    std::vector<double> idf;
    const auto n = static_cast<double>(corpus.size());
    for (const auto& [term, count] : df) {
        if (count < min_df) continue;
        terms.push_back(term);
        idf.push_back(std::log(n / static_cast<double>(count)));
    }
    if (terms.empty()) {
        throw Error(Errc::EmptyVocabulary, "min_df=" + std::to_string(min_df) + " excludes every n-gram");
    }
    return from_parts(std::move(terms), std::move(idf), range, min_df);
}

Vectorizer Vectorizer::from_parts(std::vector<std::string> terms, std::vector<double> idf, NgramRange range,
                                  std::size_t min_df) {
    if (terms.size() != idf.size()) throw Error(Errc::DimensionMismatch, "terms and idf differ in length");
    Vectorizer v;
    v.range_ = range;
    v.min_df_ = min_df;
    v.index_.reserve(terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (!(idf[i] >= 0.0) || !std::isfinite(idf[i])) throw Error(Errc::BadFormat, "idf must be finite and >= 0");
        if (i > 0 && !(terms[i - 1] < terms[i])) throw Error(Errc::BadFormat, "terms must be strictly sorted");
        v.index_.emplace(terms[i], static_cast<std::uint32_t>(i));
    }
    v.terms_ = std::move(terms);
    v.idf_ = std::move(idf);
    return v;
}

std::optional<std::uint32_t> Vectorizer::column(std::string_view term) const {
    const auto it = index_.find(std::string(term));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

SparseVector Vectorizer::transform_tokens(std::span<const std::string> tokens) const {
    std::map<std::uint32_t, double> tf;
    for (const auto& g : word_ngrams(tokens, range_)) {
        const auto it = index_.find(g);
        if (it != index_.end()) tf[it->second] += 1.0;
    }
    SparseVector out;
    out.entries.reserve(tf.size());
    for (const auto& [col, count] : tf) out.entries.emplace_back(col, count * idf_[col]);
    const double norm = out.norm();
    if (norm > 0.0) {
        for (auto& [col, v] : out.entries) v /= norm;
    }
    return out;
}

SparseVector Vectorizer::transform(std::string_view text) const {
    const auto tokens = text::tokenize(text);
    return transform_tokens(tokens);
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double decision_value(const LogisticModel& model, const SparseVector& x) {
    double z = model.bias;
    for (const auto& [i, v] : x.entries) {
        if (i >= model.weights.size()) {
            throw Error(Errc::DimensionMismatch, "feature index " + std::to_string(i) + " outside model of size " +
                                                     std::to_string(model.weights.size()));
        }
        z += model.weights[i] * v;
    }
    return z;
}

double predict_proba(const LogisticModel& model, const SparseVector& x) {
    return sigmoid(decision_value(model, x));
}

double objective(const LogisticModel& model, std::span<const SparseVector> xs, std::span<const int> ys) {
    check_shapes(model, xs, ys);
    double loss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double z = decision_value(model, xs[i]);
        loss += ys[i] == 1 ? softplus(-z) : softplus(z);
    }
    loss /= static_cast<double>(xs.size());
    double sq = 0.0;
    for (double w : model.weights) sq += w * w;
    return loss + 0.5 * model.l2_penalty * sq;
}

Gradient gradient(const LogisticModel& model, std::span<const SparseVector> xs, std::span<const int> ys) {
    check_shapes(model, xs, ys);
    Gradient g{std::vector<double>(model.weights.size(), 0.0), 0.0};
    const double inv_n = 1.0 / static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double residual = (sigmoid(decision_value(model, xs[i])) - ys[i]) * inv_n;
        g.bias += residual;
        for (const auto& [j, v] : xs[i].entries) g.weights[j] += residual * v;
    }
    for (std::size_t j = 0; j < g.weights.size(); ++j) g.weights[j] += model.l2_penalty * model.weights[j];
    return g;
}

LogisticModel train(std::span<const SparseVector> xs, std::span<const int> ys, std::size_t dim,
                    const TrainOptions& options, std::vector<double>* loss_history) {
    if (xs.empty()) throw Error(Errc::EmptyCorpus, "no training examples");
    bool has_pos = false, has_neg = false;
    for (int y : ys) {
        if (y != 0 && y != 1) throw Error(Errc::BadFormat, "labels must be 0 or 1");
        (y == 1 ? has_pos : has_neg) = true;
    }
    LogisticModel model{std::vector<double>(dim, 0.0), 0.0, options.l2_penalty};
    check_shapes(model, xs, ys);
    if (!(has_pos && has_neg)) throw Error(Errc::SingleClass, "training labels contain a single class");
    if (!(options.l2_penalty >= 0.0)) throw Error(Errc::InvalidConfig, "l2 penalty must be >= 0");
    if (!(options.learning_rate > 0.0)) throw Error(Errc::InvalidConfig, "learning rate must be > 0");

    double lr = options.learning_rate;
    double loss = objective(model, xs, ys);
    if (loss_history) loss_history->assign(1, loss);

    LogisticModel candidate = model;
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        const Gradient g = gradient(model, xs, ys);
        bool accepted = false;
        while (lr > 1e-12) {
            for (std::size_t j = 0; j < dim; ++j) candidate.weights[j] = model.weights[j] - lr * g.weights[j];
            candidate.bias = model.bias - lr * g.bias;
            const double next = objective(candidate, xs, ys);
            if (next <= loss) {
                std::swap(model, candidate);
                loss = next;
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        if (loss_history) loss_history->push_back(loss);
        if (!accepted) break;  // no descent step left at machine precision
    }
    return model;
}

std::vector<LabeledText> parse_training_data(std::istream& in) {
    std::vector<LabeledText> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        const std::string label = line.substr(0, tab);
        if (tab == std::string::npos || (label != "0" && label != "1")) {
            throw Error(Errc::BadFormat, "training data line " + std::to_string(lineno) +
                                             ": expected '0|1<TAB>text'");
        }
        out.push_back({label == "1" ? 1 : 0, line.substr(tab + 1)});
    }
    return out;
}

std::vector<LabeledText> load_training_data(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open training data '" + path + "'");
    return parse_training_data(in);
}

double TextClassifier::predict_proba_tokens(std::span<const std::string> tokens) const {
    return classifier::predict_proba(model, vectorizer.transform_tokens(tokens));
}

double TextClassifier::predict_proba(std::string_view text) const {
    return classifier::predict_proba(model, vectorizer.transform(text));
}

TextClassifier fit_classifier(std::span<const LabeledText> data, NgramRange range, std::size_t min_df,
                              const TrainOptions& options) {
    std::vector<std::string> docs;
    std::vector<int> labels;
    docs.reserve(data.size());
    for (const auto& d : data) {
        docs.push_back(d.text);
        labels.push_back(d.label);
    }
    auto vectorizer = Vectorizer::fit(docs, range, min_df);
    std::vector<SparseVector> xs;
    xs.reserve(docs.size());
    for (const auto& d : docs) xs.push_back(vectorizer.transform(d));
    auto model = train(xs, labels, vectorizer.size(), options);
    return {std::move(vectorizer), std::move(model), options};
}

std::string to_json(const TextClassifier& c) {
    nlohmann::ordered_json j;
    j["format"] = kFormat;
    j["version"] = kFormatVersion;
    j["label"] = kModelLabel;
    j["ngram_range"] = {c.vectorizer.ngram_range().min, c.vectorizer.ngram_range().max};
    j["min_df"] = c.vectorizer.min_df();
    j["train"] = {{"l2_penalty", c.options.l2_penalty},
                  {"epochs", c.options.epochs},
                  {"learning_rate", c.options.learning_rate},
                  {"seed", c.options.seed}};
    j["terms"] = c.vectorizer.terms();
    j["idf"] = c.vectorizer.idf();
    j["weights"] = c.model.weights;
    j["bias"] = c.model.bias;
    j["l2_penalty"] = c.model.l2_penalty;
    return j.dump();
}

TextClassifier classifier_from_json(std::string_view json) {
    try {
        const auto j = nlohmann::json::parse(json);
        if (j.at("format").get<std::string>() != kFormat || j.at("version").get<int>() != kFormatVersion) {
            throw Error(Errc::BadFormat, "not a version 1 classifier model");
        }
        const auto range = j.at("ngram_range");
        TextClassifier c{Vectorizer::from_parts(j.at("terms").get<std::vector<std::string>>(),
                                                j.at("idf").get<std::vector<double>>(),
                                                {range.at(0).get<std::size_t>(), range.at(1).get<std::size_t>()},
                                                j.at("min_df").get<std::size_t>()),
                         {j.at("weights").get<std::vector<double>>(), j.at("bias").get<double>(),
                          j.at("l2_penalty").get<double>()},
                         {}};
        const auto& t = j.at("train");
        c.options = {t.at("l2_penalty").get<double>(), t.at("epochs").get<std::size_t>(),
                     t.at("learning_rate").get<double>(), t.at("seed").get<std::uint64_t>()};
        if (c.model.weights.size() != c.vectorizer.size()) {
            throw Error(Errc::DimensionMismatch, "weight vector does not match vocabulary size");
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::BadFormat, std::string("classifier model: ") + e.what());
    }
}

void save_classifier(const TextClassifier& classifier, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write model '" + path + "'");
    out << to_json(classifier) << '\n';
}

TextClassifier load_classifier(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open model '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return classifier_from_json(buf.str());
}

} // namespace ccaudit::classifier
