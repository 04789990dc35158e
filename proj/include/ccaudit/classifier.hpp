#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ccaudit::classifier {

// Reported name of the scorer; it is a word n-gram model, not a POS-feature replica.
inline constexpr std::string_view kModelLabel = "word-ngram-lr";

// Strictly increasing column indices. Entries are the structural pattern:
// an in-vocabulary n-gram is stored even when its idf (and so its value) is 0.
struct SparseVector {
    std::vector<std::pair<std::uint32_t, double>> entries;

    double norm() const;
    bool empty() const noexcept { return entries.empty(); }
    bool operator==(const SparseVector&) const = default;
};

struct NgramRange {
    std::size_t min = 1;
    std::size_t max = 3;

    bool operator==(const NgramRange&) const = default;
};

// Space-joined word n-grams of every length in range, in text order.
std::vector<std::string> word_ngrams(std::span<const std::string> tokens, NgramRange range);

class Vectorizer {
public:
    /// Vocabulary is every n-gram with document frequency >= min_df, columns in
    /// lexicographic order; idf(t) = ln(N / df(t)).
    static Vectorizer fit(std::span<const std::string> corpus, NgramRange range = {}, std::size_t min_df = 1);
    static Vectorizer from_parts(std::vector<std::string> terms, std::vector<double> idf, NgramRange range,
                                 std::size_t min_df);

    // Raw-count tf times idf, L2-normalized unless the norm is zero.
    SparseVector transform(std::string_view text) const;
    SparseVector transform_tokens(std::span<const std::string> tokens) const;

    std::size_t size() const noexcept { return terms_.size(); }
    const std::vector<std::string>& terms() const noexcept { return terms_; }
    const std::vector<double>& idf() const noexcept { return idf_; }
    std::optional<std::uint32_t> column(std::string_view term) const;
    NgramRange ngram_range() const noexcept { return range_; }
    std::size_t min_df() const noexcept { return min_df_; }

private:
    std::vector<std::string> terms_;
    std::vector<double> idf_;
    std::unordered_map<std::string, std::uint32_t> index_;
    NgramRange range_;
    std::size_t min_df_ = 1;
};

struct LogisticModel {
    std::vector<double> weights;
    double bias = 0.0;
    double l2_penalty = 0.0;
};

struct TrainOptions {
    double l2_penalty = 1e-4;
    std::size_t epochs = 200;
    double learning_rate = 1.0;
    // Recorded for reproducibility; full-batch descent from zero does not draw from it.
    std::uint64_t seed = 0;
};

double decision_value(const LogisticModel& model, const SparseVector& x);
double predict_proba(const LogisticModel& model, const SparseVector& x);
double sigmoid(double z);

// Mean logistic loss plus (l2/2)*||w||^2; the bias is not penalized.
double objective(const LogisticModel& model, std::span<const SparseVector> xs, std::span<const int> ys);

struct Gradient {
    std::vector<double> weights;
    double bias = 0.0;
};
Gradient gradient(const LogisticModel& model, std::span<const SparseVector> xs, std::span<const int> ys);

/// Deterministic full-batch gradient descent from zero. A step that would
/// raise the objective is retried with half the learning rate, so the
/// objective never increases across epochs.
LogisticModel train(std::span<const SparseVector> xs, std::span<const int> ys, std::size_t dim,
                    const TrainOptions& options, std::vector<double>* loss_history = nullptr);

struct LabeledText {
    int label;
    std::string text;
};

// `label<TAB>text` lines with labels 0 or 1.
std::vector<LabeledText> parse_training_data(std::istream& in);
std::vector<LabeledText> load_training_data(const std::string& path);

// Vectorizer plus model, the unit that is saved and loaded.
struct TextClassifier {
    Vectorizer vectorizer;
    LogisticModel model;
    TrainOptions options;

    double predict_proba(std::string_view text) const;
    double predict_proba_tokens(std::span<const std::string> tokens) const;
};

TextClassifier fit_classifier(std::span<const LabeledText> data, NgramRange range, std::size_t min_df,
                              const TrainOptions& options);

std::string to_json(const TextClassifier& classifier);
TextClassifier classifier_from_json(std::string_view json);
void save_classifier(const TextClassifier& classifier, const std::string& path);
TextClassifier load_classifier(const std::string& path);

} // namespace ccaudit::classifier
