#include "ccaudit/error.hpp"

namespace ccaudit {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::BadContentLength: return "BadContentLength";
    case Errc::NotWarc: return "NotWarc";
    case Errc::InvariantViolation: return "InvariantViolation";
    case Errc::RateOutOfRange: return "RateOutOfRange";
    case Errc::EmptyTraining: return "EmptyTraining";
    case Errc::EmptyText: return "EmptyText";
    case Errc::NoProfiles: return "NoProfiles";
    case Errc::EmptyLexicon: return "EmptyLexicon";
    case Errc::UnknownLexicon: return "UnknownLexicon";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::EmptyVocabulary: return "EmptyVocabulary";
    case Errc::SingleClass: return "SingleClass";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::OrderZero: return "OrderZero";
    case Errc::EmptyDocument: return "EmptyDocument";
    case Errc::TooFewRecords: return "TooFewRecords";
    case Errc::UnknownMetric: return "UnknownMetric";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::TooShort: return "TooShort";
    case Errc::DuplicateMetricName: return "DuplicateMetricName";
    case Errc::MalformedScores: return "MalformedScores";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::IoError: return "IoError";
    case Errc::BadFormat: return "BadFormat";
    }
    return "Unknown";
}

} // namespace ccaudit
