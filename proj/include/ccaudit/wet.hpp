#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ccaudit::wet {

struct Header {
    std::string name;
    std::string value;

    bool operator==(const Header&) const = default;
};

// One WARC record as read off the wire. The payload is raw bytes.
struct RawRecord {
    std::vector<Header> headers;
    std::string payload;

    // Case-insensitive header lookup.
    const std::string* find(std::string_view name) const;

    bool operator==(const RawRecord&) const = default;
};

// Throws Error(InvariantViolation) unless header names are unique (ASCII
// case-folded) and Content-Length matches the payload size.
void validate(const RawRecord& record);

// A web page extracted from a `conversion` record.
struct Document {
    std::string record_id;
    std::string url;
    std::string text;              // valid UTF-8
    std::uint64_t byte_len = 0;    // payload length before decoding
    std::size_t replacements = 0;  // U+FFFD inserted while decoding

    bool operator==(const Document&) const = default;
};

// nullopt means Skip: only `WARC-Type: conversion` records become documents.
std::optional<Document> record_to_document(const RawRecord& record);

/// Streaming reader over a WET file, plain or whole-file gzip (detected from
/// the 0x1F 0x8B magic). Holds at most one record plus fixed-size I/O buffers.
///
/// Errors are raised as ccaudit::Error with MalformedHeader, BadContentLength
/// or NotWarc; I/O and gzip failures raise IoError. After an error the reader
/// is left at an unspecified position and should be discarded.
class WetReader {
public:
    explicit WetReader(std::istream& in);
    ~WetReader();
    WetReader(const WetReader&) = delete;
    WetReader& operator=(const WetReader&) = delete;

    std::optional<RawRecord> next();

    // Uncompressed byte offset where the most recent record (or the failing
    // one) starts.
    std::uint64_t record_offset() const noexcept { return record_offset_; }

    // Largest record payload buffered so far plus the current line buffer.
    std::size_t peak_buffered_bytes() const noexcept { return peak_buffered_; }

private:
    class Source;

    bool read_line(std::string& line);

    std::unique_ptr<Source> source_;
    std::uint64_t record_offset_ = 0;
    std::size_t peak_buffered_ = 0;
};

// Reads every record of a stream. Convenience for small inputs and tests.
std::vector<RawRecord> parse_all(std::istream& in);
std::vector<RawRecord> parse_all(std::string_view bytes);

// Writes records in the canonical CRLF wire form. Validates each record first.
void serialize_wet(std::span<const RawRecord> records, std::ostream& out);
std::string serialize_wet(std::span<const RawRecord> records);

std::string gzip_compress(std::string_view bytes);

// Builds a conversion record with the standard header set.
RawRecord make_conversion_record(std::string record_id, std::string url, std::string payload);

struct ShardManifest {
    std::vector<std::string> shard_ids;

    bool operator==(const ShardManifest&) const = default;
};

// One shard path per line; blank lines and lines starting with `#` are skipped.
ShardManifest parse_manifest(std::istream& in);
ShardManifest load_manifest(const std::string& path);

// Picks floor(rate * N) shards by a seeded Fisher-Yates shuffle and returns
// them in manifest order. Deterministic for a given (manifest, rate, seed).
ShardManifest sample_shards(const ShardManifest& manifest, double rate, std::uint64_t seed);

// floor(rate * n), tolerant of the binary representation of decimal rates
// (0.29 * 100 selects 29, not 28).
std::size_t sample_size(std::size_t n, double rate);

} // namespace ccaudit::wet
