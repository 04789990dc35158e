#include "ccaudit/text.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

namespace ccaudit::text {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

bool is_mark(UChar32 c) {
    const auto type = u_charType(c);
    return type == U_NON_SPACING_MARK || type == U_COMBINING_SPACING_MARK ||
           type == U_ENCLOSING_MARK;
}

template <typename Fn>
void for_each_code_point(std::string_view utf8, Fn&& fn) {
    const auto* s = reinterpret_cast<const std::uint8_t*>(utf8.data());
    const auto length = static_cast<std::int32_t>(utf8.size());
    std::int32_t i = 0;
    while (i < length) {
        UChar32 c;
        U8_NEXT(s, i, length, c);
        fn(c < 0 ? kReplacement : static_cast<char32_t>(c));
    }
}

} // namespace

void append_utf8(std::string& out, char32_t cp) {
    std::uint8_t buf[U8_MAX_LENGTH];
    std::int32_t n = 0;
    UBool error = false;
    U8_APPEND(buf, n, U8_MAX_LENGTH, static_cast<UChar32>(cp), error);
    if (error) {
        n = 0;
        U8_APPEND_UNSAFE(buf, n, static_cast<UChar32>(kReplacement));
    }
    out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
}

DecodeResult decode_utf8(std::span<const std::uint8_t> bytes) {
    DecodeResult result{{}, 0};
    result.text.reserve(bytes.size());
    const auto length = static_cast<std::int32_t>(bytes.size());
    std::int32_t i = 0;
    while (i < length) {
        const std::int32_t start = i;
        UChar32 c;
        U8_NEXT(bytes.data(), i, length, c);
        if (c < 0) {
            append_utf8(result.text, kReplacement);
            ++result.replacements;
        } else {
            result.text.append(reinterpret_cast<const char*>(bytes.data()) + start,
                               static_cast<std::size_t>(i - start));
        }
    }
    return result;
}

DecodeResult decode_utf8(std::string_view bytes) {
    return decode_utf8(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::u32string to_code_points(std::string_view utf8) {
    std::u32string out;
    out.reserve(utf8.size());
    for_each_code_point(utf8, [&](char32_t c) { out.push_back(c); });
    return out;
}

std::string from_code_points(std::u32string_view cps) {
    std::string out;
    out.reserve(cps.size());
    for (char32_t c : cps) append_utf8(out, c);
    return out;
}

std::string to_lower(std::string_view utf8) {
    std::string out;
    out.reserve(utf8.size());
    for_each_code_point(utf8, [&](char32_t c) {
        append_utf8(out, static_cast<char32_t>(u_tolower(static_cast<UChar32>(c))));
    });
    return out;
}

std::string to_upper(std::string_view utf8) {
    std::string out;
    out.reserve(utf8.size());
    for_each_code_point(utf8, [&](char32_t c) {
        append_utf8(out, static_cast<char32_t>(u_toupper(static_cast<UChar32>(c))));
    });
    return out;
}

std::vector<std::string> tokenize(std::string_view utf8) {
    std::vector<std::string> tokens;
    std::string current;
    for_each_code_point(utf8, [&](char32_t c) {
        const auto cp = static_cast<UChar32>(c);
        if (u_isalnum(cp)) {
            append_utf8(current, static_cast<char32_t>(u_tolower(cp)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    });
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::u32string normalize_for_langid(std::string_view utf8) {
    std::u32string out;
    out.reserve(utf8.size());
    bool pending_space = false;
    for_each_code_point(utf8, [&](char32_t c) {
        const auto cp = static_cast<UChar32>(c);
        if (u_isalnum(cp) || (is_mark(cp) && !out.empty() && !pending_space)) {
            if (pending_space && !out.empty()) out.push_back(U' ');
            pending_space = false;
            out.push_back(static_cast<char32_t>(u_tolower(cp)));
        } else {
            pending_space = true;
        }
    });
    return out;
}

} // namespace ccaudit::text
