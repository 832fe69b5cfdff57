#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace texmill::archive {

enum class ArchiveErrorKind { Integrity, Bomb, Traversal, NoTexSources };

class ArchiveError : public std::runtime_error {
public:
    ArchiveError(ArchiveErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ArchiveErrorKind kind() const { return kind_; }

private:
    ArchiveErrorKind kind_;
};

enum class FlattenErrorKind { NoMainFile, Cycle, MissingInclude, DepthExceeded };

class FlattenError : public std::runtime_error {
public:
    FlattenError(FlattenErrorKind kind, const std::string& what,
                 std::vector<std::string> cycle = {})
        : std::runtime_error(what), kind_(kind), cycle_(std::move(cycle)) {}
    FlattenErrorKind kind() const { return kind_; }
    const std::vector<std::string>& cycle() const { return cycle_; }

private:
    FlattenErrorKind kind_;
    std::vector<std::string> cycle_;
};

enum class EntryKind { Tex, Style, Other };

struct ArchiveEntry {
    std::string path;  // relative, no parent traversal
    std::uint64_t size = 0;
    EntryKind kind = EntryKind::Other;
};

struct ArchiveLimits {
    std::uint64_t max_decompressed_bytes = 512ULL * 1024 * 1024;
    std::uint64_t max_entries = 10000;
};

/// A validated source archive: every entry enumerated, caps respected.
struct SourceArchive {
    std::string paper_id;
    std::vector<ArchiveEntry> entries;
    std::map<std::string, std::string> data;  // path -> raw bytes
};

struct LatexProject {
    std::string paper_id;
    std::map<std::string, std::string> files;  // path -> decoded text
    std::optional<std::string> main_file;
};

enum class MissingIncludePolicy { Error, Drop };

struct FlattenOptions {
    MissingIncludePolicy missing_policy = MissingIncludePolicy::Drop;
    int max_include_depth = 32;
    // when no file declares a document class, concatenate files in path
    // order instead of failing with NoMainFile
    bool concat_without_root = false;
};

struct FlattenResult {
    std::string text;
    std::optional<std::string> main_file;
    std::uint64_t missing_includes = 0;
    std::uint64_t depth_exceeded = 0;
    std::uint64_t inlined_files = 0;
};

/// Validate a downloaded source blob: gzip-compressed tar, plain tar, or a
/// bare TeX file, detected by magic bytes. Enforces the decompressed-size
/// and entry-count caps while reading, never after.
SourceArchive validate_archive(std::string_view raw, const ArchiveLimits& limits = {},
                               const std::string& paper_id = "");

/// Keep the tex-kind entries, decoding with a lossy byte-to-text fallback
/// (valid UTF-8 kept, otherwise Latin-1 bytes mapped to codepoints).
LatexProject extract_tex_sources(const SourceArchive& archive);

/// Select the main file (document-class declaration; ties: largest, then
/// lexicographically smallest path) and inline \input/\include recursively.
FlattenResult flatten_project(const LatexProject& project, const FlattenOptions& options = {});

/// Streaming gunzip with a hard output cap; throws Integrity/Bomb errors.
std::string gunzip(std::string_view raw, std::uint64_t max_output_bytes);

const char* to_string(ArchiveErrorKind k);
const char* to_string(FlattenErrorKind k);

}  // namespace texmill::archive
