#include "ccaudit/wet.hpp"

#include "ccaudit/error.hpp"
#include "ccaudit/text.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace ccaudit::wet {

namespace {

constexpr std::size_t kChunk = 64 * 1024;
constexpr std::size_t kMaxLineBytes = 1 << 20;
constexpr std::string_view kVersionLine = "WARC/1.0";

std::string ascii_fold(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && ascii_fold(a) == ascii_fold(b);
}

std::string_view trim(std::string_view s) {
    const auto is_ws = [](char c) { return c == ' ' || c == '\t'; };
    while (!s.empty() && is_ws(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_ws(s.back())) s.remove_suffix(1);
    return s;
}

std::optional<std::uint64_t> parse_length(std::string_view s) {
    if (s.empty()) return std::nullopt;
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

std::string at_offset(std::uint64_t offset) {
    return " (record at byte " + std::to_string(offset) + ")";
}

} // namespace

const std::string* RawRecord::find(std::string_view name) const {
    for (const auto& h : headers) {
        if (iequals(h.name, name)) return &h.value;
    }
    return nullptr;
}

void validate(const RawRecord& record) {
    std::set<std::string> seen;
    for (const auto& h : record.headers) {
        if (h.name.empty()) throw Error(Errc::InvariantViolation, "empty header name");
        if (!seen.insert(ascii_fold(h.name)).second) {
            throw Error(Errc::InvariantViolation, "duplicate header '" + h.name + "'");
        }
    }
    const std::string* length = record.find("Content-Length");
    if (length == nullptr) throw Error(Errc::InvariantViolation, "missing Content-Length");
    const auto parsed = parse_length(*length);
    if (!parsed || *parsed != record.payload.size()) {
        throw Error(Errc::InvariantViolation,
                    "Content-Length '" + *length + "' disagrees with payload of " +
                        std::to_string(record.payload.size()) + " bytes");
    }
}

std::optional<Document> record_to_document(const RawRecord& record) {
    const std::string* type = record.find("WARC-Type");
    if (type == nullptr || *type != "conversion") return std::nullopt;

    Document doc;
    if (const auto* id = record.find("WARC-Record-ID")) doc.record_id = *id;
    if (const auto* uri = record.find("WARC-Target-URI")) doc.url = *uri;
    auto decoded = text::decode_utf8(record.payload);
    doc.text = std::move(decoded.text);
    doc.replacements = decoded.replacements;
    doc.byte_len = record.payload.size();
    return doc;
}

// Byte source with transparent whole-file gzip decoding.
class WetReader::Source {
public:
    explicit Source(std::istream& in) : in_(in) {
        fill_raw();
        gzip_ = raw_end_ - raw_pos_ >= 2 && static_cast<unsigned char>(raw_[raw_pos_]) == 0x1F &&
                static_cast<unsigned char>(raw_[raw_pos_ + 1]) == 0x8B;
        if (gzip_) {
            zs_ = {};
            if (inflateInit2(&zs_, 15 + 16) != Z_OK) throw Error(Errc::IoError, "inflateInit2 failed");
            zlib_ready_ = true;
        }
    }

    ~Source() {
        if (zlib_ready_) inflateEnd(&zs_);
    }

    Source(const Source&) = delete;
    Source& operator=(const Source&) = delete;

    // Returns the next decoded byte or -1 at end of stream.
    int get() {
        if (pos_ == end_ && !refill()) return -1;
        ++consumed_;
        return static_cast<unsigned char>(buf_[pos_++]);
    }

    // Appends up to n bytes to out; returns how many were appended.
    std::size_t read(std::string& out, std::size_t n) {
        std::size_t done = 0;
        while (done < n) {
            if (pos_ == end_ && !refill()) break;
            const std::size_t take = std::min(n - done, end_ - pos_);
            out.append(buf_.data() + pos_, take);
            pos_ += take;
            done += take;
        }
        consumed_ += done;
        return done;
    }

    std::uint64_t consumed() const { return consumed_; }

private:
    void fill_raw() {
        raw_pos_ = 0;
        raw_end_ = 0;
        if (!in_) return;
        in_.read(raw_.data(), static_cast<std::streamsize>(raw_.size()));
        raw_end_ = static_cast<std::size_t>(in_.gcount());
        if (in_.bad()) throw Error(Errc::IoError, "read failed");
    }

    bool refill() {
        pos_ = 0;
        end_ = 0;
        if (!gzip_) {
            if (raw_pos_ == raw_end_) fill_raw();
            if (raw_pos_ == raw_end_) return false;
            std::copy(raw_.begin() + static_cast<std::ptrdiff_t>(raw_pos_),
                      raw_.begin() + static_cast<std::ptrdiff_t>(raw_end_), buf_.begin());
            end_ = raw_end_ - raw_pos_;
            raw_pos_ = raw_end_;
            return true;
        }
        while (end_ == 0) {
            if (raw_pos_ == raw_end_) {
                fill_raw();
                if (raw_pos_ == raw_end_) {
                    if (in_member_) throw Error(Errc::IoError, "truncated gzip stream");
                    return false;
                }
            }
            zs_.next_in = reinterpret_cast<Bytef*>(raw_.data() + raw_pos_);
            zs_.avail_in = static_cast<uInt>(raw_end_ - raw_pos_);
            zs_.next_out = reinterpret_cast<Bytef*>(buf_.data());
            zs_.avail_out = static_cast<uInt>(buf_.size());
            in_member_ = true;
            const int rc = inflate(&zs_, Z_NO_FLUSH);
            raw_pos_ = raw_end_ - zs_.avail_in;
            end_ = buf_.size() - zs_.avail_out;
            if (rc == Z_STREAM_END) {
                in_member_ = false;
                // Concatenated members continue the same logical stream.
                inflateReset(&zs_);
            } else if (rc != Z_OK && rc != Z_BUF_ERROR) {
                throw Error(Errc::IoError, std::string("gzip: ") + (zs_.msg ? zs_.msg : "inflate failed"));
            }
        }
        return true;
    }

    std::istream& in_;
    std::array<char, kChunk> raw_{};
    std::size_t raw_pos_ = 0;
    std::size_t raw_end_ = 0;
    std::array<char, kChunk> buf_{};
    std::size_t pos_ = 0;
    std::size_t end_ = 0;
    std::uint64_t consumed_ = 0;
    bool gzip_ = false;
    bool zlib_ready_ = false;
    bool in_member_ = false;
    z_stream zs_{};
};

WetReader::WetReader(std::istream& in) : source_(std::make_unique<Source>(in)) {}

WetReader::~WetReader() = default;

// Reads one line without its terminator (LF or CRLF). False at end of stream
// with nothing read.
bool WetReader::read_line(std::string& line) {
    line.clear();
    int c;
    bool any = false;
    while ((c = source_->get()) != -1) {
        any = true;
        if (c == '\n') break;
        line.push_back(static_cast<char>(c));
        if (line.size() > kMaxLineBytes) {
            throw Error(Errc::MalformedHeader, "header line exceeds 1 MiB" + at_offset(record_offset_));
        }
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return any;
}

std::optional<RawRecord> WetReader::next() {
    std::string line;
    do {
        record_offset_ = source_->consumed();
        if (!read_line(line)) return std::nullopt;
    } while (line.empty());

    if (line != kVersionLine) {
        throw Error(Errc::NotWarc, "expected 'WARC/1.0', got '" + line.substr(0, 64) + "'" +
                                       at_offset(record_offset_));
    }

    RawRecord record;
    std::set<std::string> seen;
    for (;;) {
        if (!read_line(line)) {
            throw Error(Errc::MalformedHeader, "stream ended inside header block" + at_offset(record_offset_));
        }
        if (line.empty()) break;
        const auto colon = line.find(':');
        const std::string_view name = colon == std::string::npos ? std::string_view{}
                                                                  : std::string_view(line).substr(0, colon);
        if (name.empty() || name.find_first_of(" \t") != std::string_view::npos) {
            throw Error(Errc::MalformedHeader, "not a 'Name: value' line: '" + line.substr(0, 64) + "'" +
                                                   at_offset(record_offset_));
        }
        if (!seen.insert(ascii_fold(name)).second) {
            throw Error(Errc::MalformedHeader, "duplicate header '" + std::string(name) + "'" +
                                                   at_offset(record_offset_));
        }
        record.headers.push_back({std::string(name), std::string(trim(std::string_view(line).substr(colon + 1)))});
    }

    const std::string* length_text = record.find("Content-Length");
    if (length_text == nullptr) {
        throw Error(Errc::BadContentLength, "missing Content-Length" + at_offset(record_offset_));
    }
    const auto length = parse_length(*length_text);
    if (!length) {
        throw Error(Errc::BadContentLength, "non-integer Content-Length '" + *length_text + "'" +
                                                at_offset(record_offset_));
    }
    record.payload.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(*length, 64u << 20)));
    const std::size_t got = source_->read(record.payload, *length);
    if (got != *length) {
        throw Error(Errc::BadContentLength, "payload truncated: expected " + std::to_string(*length) +
                                                " bytes, got " + std::to_string(got) + at_offset(record_offset_));
    }
    peak_buffered_ = std::max(peak_buffered_, record.payload.capacity() + line.capacity());
    return record;
}

std::vector<RawRecord> parse_all(std::istream& in) {
    WetReader reader(in);
    std::vector<RawRecord> out;
    while (auto record = reader.next()) out.push_back(std::move(*record));
    return out;
}

std::vector<RawRecord> parse_all(std::string_view bytes) {
    std::istringstream in{std::string(bytes)};
    return parse_all(in);
}

void serialize_wet(std::span<const RawRecord> records, std::ostream& out) {
    for (const auto& record : records) {
        validate(record);
        out << kVersionLine << "\r\n";
        for (const auto& h : record.headers) out << h.name << ": " << h.value << "\r\n";
        out << "\r\n";
        out.write(record.payload.data(), static_cast<std::streamsize>(record.payload.size()));
        out << "\r\n\r\n";
    }
}

std::string serialize_wet(std::span<const RawRecord> records) {
    std::ostringstream out;
    serialize_wet(records, out);
    return std::move(out).str();
}

std::string gzip_compress(std::string_view bytes) {
    z_stream zs{};
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
        throw Error(Errc::IoError, "deflateInit2 failed");
    }
    std::string out;
    out.resize(deflateBound(&zs, static_cast<uLong>(bytes.size())) + 32);
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
    zs.avail_in = static_cast<uInt>(bytes.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    const std::size_t produced = out.size() - zs.avail_out;
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw Error(Errc::IoError, "deflate failed");
    out.resize(produced);
    return out;
}

RawRecord make_conversion_record(std::string record_id, std::string url, std::string payload) {
    RawRecord r;
    r.headers = {{"WARC-Type", "conversion"},
                 {"WARC-Target-URI", std::move(url)},
                 {"WARC-Record-ID", std::move(record_id)},
                 {"Content-Length", std::to_string(payload.size())}};
    r.payload = std::move(payload);
    return r;
}

ShardManifest parse_manifest(std::istream& in) {
    ShardManifest manifest;
    std::set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        const auto entry = trim(line.ends_with('\r') ? std::string_view(line).substr(0, line.size() - 1)
                                                     : std::string_view(line));
        if (entry.empty() || entry.front() == '#') continue;
        if (!seen.emplace(entry).second) {
            throw Error(Errc::InvariantViolation, "duplicate shard '" + std::string(entry) + "' in manifest");
        }
        manifest.shard_ids.emplace_back(entry);
    }
    return manifest;
}

ShardManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open manifest '" + path + "'");
    return parse_manifest(in);
}

std::size_t sample_size(std::size_t n, double rate) {
    const double exact = rate * static_cast<double>(n);
    return std::min(n, static_cast<std::size_t>(std::floor(exact + 1e-9)));
}

namespace {

// Unbiased draw from [0, bound) by rejection; std distributions are not
// portable across standard libraries.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

} // namespace

ShardManifest sample_shards(const ShardManifest& manifest, double rate, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate <= 1.0)) {
        throw Error(Errc::RateOutOfRange, "rate must lie in [0, 1], got " + std::to_string(rate));
    }
    const std::size_t n = manifest.shard_ids.size();
    const std::size_t take = sample_size(n, rate);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(bounded(rng, n - i));
        std::swap(order[i], order[j]);
    }
    order.resize(take);
    std::sort(order.begin(), order.end());

    ShardManifest out;
    out.shard_ids.reserve(take);
    for (std::size_t idx : order) out.shard_ids.push_back(manifest.shard_ids[idx]);
    return out;
}

} // namespace ccaudit::wet
