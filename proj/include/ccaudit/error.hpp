#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ccaudit {

enum class Errc {
    // corpus-io
    MalformedHeader,
    BadContentLength,
    NotWarc,
    InvariantViolation,
    RateOutOfRange,
    // langid
    EmptyTraining,
    EmptyText,
    NoProfiles,
    // lexicon
    EmptyLexicon,
    UnknownLexicon,
    // classifier / lm
    EmptyCorpus,
    EmptyVocabulary,
    SingleClass,
    DimensionMismatch,
    OrderZero,
    EmptyDocument,
    // analytics
    TooFewRecords,
    UnknownMetric,
    LengthMismatch,
    TooShort,
    // pipeline
    DuplicateMetricName,
    MalformedScores,
    InvalidConfig,
    // shared
    IoError,
    BadFormat,
};

std::string_view errc_name(Errc code) noexcept;

// Every error raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace ccaudit
