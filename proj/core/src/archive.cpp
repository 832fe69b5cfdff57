#include "texmill/archive.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cstring>

namespace texmill::archive {

namespace {

constexpr size_t kTarBlock = 512;

bool has_gzip_magic(std::string_view raw) {
    return raw.size() >= 2 && static_cast<unsigned char>(raw[0]) == 0x1f &&
           static_cast<unsigned char>(raw[1]) == 0x8b;
}

// Octal field parse; tar pads with NULs and spaces.
std::optional<std::uint64_t> parse_octal(const char* field, size_t len) {
    std::uint64_t v = 0;
    bool seen = false;
    for (size_t i = 0; i < len; ++i) {
        char c = field[i];
        if (c == '\0') break;
        if (c == ' ') {
            if (seen) break;
            continue;
        }
        if (c < '0' || c > '7') return std::nullopt;
        v = v * 8 + static_cast<std::uint64_t>(c - '0');
        seen = true;
    }
    if (!seen) return std::nullopt;
    return v;
}

bool tar_checksum_ok(const char* block) {
    auto stored = parse_octal(block + 148, 8);
    if (!stored) return false;
    std::uint64_t sum = 0;
    for (size_t i = 0; i < kTarBlock; ++i) {
        sum += (i >= 148 && i < 156) ? ' ' : static_cast<unsigned char>(block[i]);
    }
    return sum == *stored;
}

bool is_zero_block(const char* block) {
    for (size_t i = 0; i < kTarBlock; ++i) {
        if (block[i] != '\0') return false;
    }
    return true;
}

bool looks_like_tar(std::string_view data) {
    if (data.size() < kTarBlock) return false;
    if (is_zero_block(data.data())) return false;
    return tar_checksum_ok(data.data());
}

// Text heuristic for bare TeX sources: no NULs, mostly printable bytes.
bool looks_like_text(std::string_view data) {
    if (data.empty()) return false;
    const size_t probe = std::min<size_t>(data.size(), 4096);
    size_t printable = 0;
    for (size_t i = 0; i < probe; ++i) {
        unsigned char c = static_cast<unsigned char>(data[i]);
        if (c == 0) return false;
        if (c >= 0x20 || c == '\n' || c == '\r' || c == '\t' || c >= 0x80) ++printable;
    }
    return printable * 100 >= probe * 85;
}

bool path_is_safe(const std::string& path) {
    if (path.empty() || path[0] == '/') return false;
    size_t i = 0;
    while (i <= path.size()) {
        size_t j = path.find('/', i);
        if (j == std::string::npos) j = path.size();
        std::string_view part(path.data() + i, j - i);
        if (part == "..") return false;
        i = j + 1;
    }
    return true;
}

std::string normalize_entry_path(std::string path) {
    while (path.rfind("./", 0) == 0) path.erase(0, 2);
    return path;
}

bool ends_with_icase(const std::string& s, const std::string& suffix) {
    if (s.size() < suffix.size()) return false;
    return std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(), [](char a, char b) {
        return std::tolower(static_cast<unsigned char>(a)) ==
               std::tolower(static_cast<unsigned char>(b));
    });
}

EntryKind classify_path(const std::string& path) {
    if (ends_with_icase(path, ".tex")) return EntryKind::Tex;
    if (ends_with_icase(path, ".sty") || ends_with_icase(path, ".cls") ||
        ends_with_icase(path, ".bst")) {
        return EntryKind::Style;
    }
    return EntryKind::Other;
}

void parse_tar(std::string_view data, const ArchiveLimits& limits, SourceArchive& out) {
    size_t pos = 0;
    std::uint64_t total_bytes = 0;
    std::string pending_longname;

    while (pos + kTarBlock <= data.size()) {
        const char* block = data.data() + pos;
        if (is_zero_block(block)) break;  // end-of-archive marker
        if (!tar_checksum_ok(block)) {
            throw ArchiveError(ArchiveErrorKind::Integrity, "tar header checksum mismatch");
        }
        auto size = parse_octal(block + 124, 12);
        if (!size) {
            throw ArchiveError(ArchiveErrorKind::Integrity, "tar size field unparsable");
        }
        const char typeflag = block[156];
        const size_t data_begin = pos + kTarBlock;
        const size_t padded = (*size + kTarBlock - 1) / kTarBlock * kTarBlock;
        if (data_begin + *size > data.size()) {
            throw ArchiveError(ArchiveErrorKind::Integrity, "tar entry data truncated");
        }

        std::string name(block, strnlen(block, 100));
        const char* prefix = block + 345;
        size_t prefix_len = strnlen(prefix, 155);
        if (prefix_len > 0) name = std::string(prefix, prefix_len) + "/" + name;
        if (!pending_longname.empty()) {
            name = std::move(pending_longname);
            pending_longname.clear();
        }

        if (typeflag == 'L') {  // GNU long name for the next entry
            pending_longname = std::string(data.data() + data_begin, *size);
            while (!pending_longname.empty() && pending_longname.back() == '\0') {
                pending_longname.pop_back();
            }
        } else if (typeflag == '0' || typeflag == '\0') {
            name = normalize_entry_path(std::move(name));
            if (!path_is_safe(name)) {
                throw ArchiveError(ArchiveErrorKind::Traversal,
                                   "entry path escapes archive root: " + name);
            }
            total_bytes += *size;
            if (total_bytes > limits.max_decompressed_bytes) {
                throw ArchiveError(ArchiveErrorKind::Bomb, "archive contents exceed size cap");
            }
            if (out.entries.size() + 1 > limits.max_entries) {
                throw ArchiveError(ArchiveErrorKind::Bomb, "archive exceeds entry-count cap");
            }
            out.entries.push_back({name, *size, classify_path(name)});
            out.data[name] = std::string(data.data() + data_begin, *size);
        }
        // directories, links, and pax headers are skipped

        pos = data_begin + padded;
    }

    if (out.entries.empty()) {
        throw ArchiveError(ArchiveErrorKind::Integrity, "archive contains no file entries");
    }
}

// Valid UTF-8 kept as-is; anything else decoded as Latin-1 (every byte maps
// to its codepoint), so no content is dropped.
bool is_valid_utf8(std::string_view s) {
    size_t i = 0;
    while (i < s.size()) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        size_t len;
        if (c < 0x80) len = 1;
        else if ((c & 0xe0) == 0xc0) len = 2;
        else if ((c & 0xf0) == 0xe0) len = 3;
        else if ((c & 0xf8) == 0xf0) len = 4;
        else return false;
        if (i + len > s.size()) return false;
        for (size_t k = 1; k < len; ++k) {
            if ((static_cast<unsigned char>(s[i + k]) & 0xc0) != 0x80) return false;
        }
        i += len;
    }
    return true;
}

std::string decode_lossy(const std::string& bytes) {
    if (is_valid_utf8(bytes)) return bytes;
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char c : bytes) {
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back(static_cast<char>(0xc0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3f)));
        }
    }
    return out;
}

bool mentions_documentclass(const std::string& text) {
    // %-comments do not count; escaped percents do not open comments
    size_t i = 0;
    while (i < text.size()) {
        size_t p = text.find("\\documentclass", i);
        size_t q = text.find("\\documentstyle", i);
        if (q != std::string::npos && (p == std::string::npos || q < p)) p = q;
        if (p == std::string::npos) return false;
        size_t line_start = text.rfind('\n', p);
        line_start = (line_start == std::string::npos) ? 0 : line_start + 1;
        bool commented = false;
        for (size_t j = line_start; j < p; ++j) {
            if (text[j] == '%' && (j == line_start || text[j - 1] != '\\')) {
                commented = true;
                break;
            }
        }
        if (!commented) return true;
        i = p + 1;
    }
    return false;
}

}  // namespace

std::string gunzip(std::string_view raw, std::uint64_t max_output_bytes) {
    z_stream strm{};
    if (inflateInit2(&strm, 15 + 32) != Z_OK) {
        throw ArchiveError(ArchiveErrorKind::Integrity, "zlib initialization failed");
    }
    std::string out;
    char buffer[64 * 1024];
    strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(raw.data()));
    strm.avail_in = static_cast<uInt>(raw.size());

    int rc = Z_OK;
    do {
        strm.next_out = reinterpret_cast<Bytef*>(buffer);
        strm.avail_out = sizeof(buffer);
        rc = inflate(&strm, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&strm);
            throw ArchiveError(ArchiveErrorKind::Integrity, "corrupt gzip stream");
        }
        size_t produced = sizeof(buffer) - strm.avail_out;
        if (out.size() + produced > max_output_bytes) {
            inflateEnd(&strm);
            throw ArchiveError(ArchiveErrorKind::Bomb, "decompressed size exceeds cap");
        }
        out.append(buffer, produced);
        if (rc == Z_OK && strm.avail_out == sizeof(buffer) && strm.avail_in == 0) {
            inflateEnd(&strm);
            throw ArchiveError(ArchiveErrorKind::Integrity, "truncated gzip stream");
        }
    } while (rc != Z_STREAM_END);

    inflateEnd(&strm);
    return out;
}

SourceArchive validate_archive(std::string_view raw, const ArchiveLimits& limits,
                               const std::string& paper_id) {
    SourceArchive archive;
    archive.paper_id = paper_id;

    if (raw.empty()) {
        throw ArchiveError(ArchiveErrorKind::Integrity, "empty input");
    }

    std::string decompressed;
    std::string_view payload = raw;
    if (has_gzip_magic(raw)) {
        decompressed = gunzip(raw, limits.max_decompressed_bytes);
        payload = decompressed;
    } else if (raw.size() > limits.max_decompressed_bytes) {
        throw ArchiveError(ArchiveErrorKind::Bomb, "input exceeds size cap");
    }

    if (looks_like_tar(payload)) {
        parse_tar(payload, limits, archive);
        return archive;
    }
    if (looks_like_text(payload)) {
        // bare single-file source wraps into a one-entry archive
        std::string name = "main.tex";
        archive.entries.push_back({name, payload.size(), EntryKind::Tex});
        archive.data[name] = std::string(payload);
        return archive;
    }
    throw ArchiveError(ArchiveErrorKind::Integrity, "unrecognized archive format");
}

LatexProject extract_tex_sources(const SourceArchive& archive) {
    LatexProject project;
    project.paper_id = archive.paper_id;
    for (const auto& entry : archive.entries) {
        if (entry.kind != EntryKind::Tex) continue;
        project.files[entry.path] = decode_lossy(archive.data.at(entry.path));
    }
    if (project.files.empty()) {
        throw ArchiveError(ArchiveErrorKind::NoTexSources, "no .tex entries in archive");
    }
    return project;
}

namespace {

bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

// Resolve an include target against the project file map, completing the
// ".tex" suffix when needed.
std::optional<std::string> resolve_include(const LatexProject& project, std::string target) {
    while (target.rfind("./", 0) == 0) target.erase(0, 2);
    if (project.files.count(target)) return target;
    std::string with_ext = target + ".tex";
    if (project.files.count(with_ext)) return with_ext;
    return std::nullopt;
}

struct Flattener {
    const LatexProject& project;
    const FlattenOptions& options;
    FlattenResult& result;
    std::vector<std::string> stack;

    void flatten_file(const std::string& path, std::string& out, int depth) {
        if (std::find(stack.begin(), stack.end(), path) != stack.end()) {
            std::vector<std::string> cycle(stack.begin(), stack.end());
            cycle.push_back(path);
            std::string desc;
            for (size_t i = 0; i < cycle.size(); ++i) {
                if (i) desc += " -> ";
                desc += cycle[i];
            }
            throw FlattenError(FlattenErrorKind::Cycle, "include cycle: " + desc, cycle);
        }
        stack.push_back(path);
        ++result.inlined_files;
        const std::string& text = project.files.at(path);

        size_t i = 0;
        while (i < text.size()) {
            char c = text[i];
            if (c == '%' && (i == 0 || text[i - 1] != '\\')) {
                size_t eol = text.find('\n', i);
                size_t end = (eol == std::string::npos) ? text.size() : eol;
                out.append(text, i, end - i);
                i = end;
                continue;
            }
            if (c != '\\') {
                out.push_back(c);
                ++i;
                continue;
            }
            size_t j = i + 1;
            while (j < text.size() && is_letter(text[j])) ++j;
            std::string_view name(text.data() + i + 1, j - i - 1);
            if (name != "input" && name != "include") {
                out.append(text, i, j - i);
                i = j;
                continue;
            }
            // braced or bare-word target
            size_t k = j;
            while (k < text.size() && (text[k] == ' ' || text[k] == '\t')) ++k;
            std::string target;
            size_t after;
            if (k < text.size() && text[k] == '{') {
                size_t close = text.find('}', k + 1);
                if (close == std::string::npos) {
                    out.append(text, i, j - i);
                    i = j;
                    continue;
                }
                target = text.substr(k + 1, close - k - 1);
                after = close + 1;
            } else {
                size_t e = k;
                while (e < text.size() &&
                       !std::isspace(static_cast<unsigned char>(text[e])) && text[e] != '%' &&
                       text[e] != '\\' && text[e] != '{' && text[e] != '}') {
                    ++e;
                }
                if (e == k) {
                    out.append(text, i, j - i);
                    i = j;
                    continue;
                }
                target = text.substr(k, e - k);
                after = e;
            }

            auto resolved = resolve_include(project, target);
            if (!resolved) {
                if (options.missing_policy == MissingIncludePolicy::Error) {
                    throw FlattenError(FlattenErrorKind::MissingInclude,
                                       "missing include target: " + target);
                }
                ++result.missing_includes;  // empty inline under drop policy
            } else if (depth >= options.max_include_depth) {
                if (options.missing_policy == MissingIncludePolicy::Error) {
                    throw FlattenError(FlattenErrorKind::DepthExceeded,
                                       "include depth cap exceeded at: " + target);
                }
                ++result.depth_exceeded;
            } else {
                flatten_file(*resolved, out, depth + 1);
            }
            i = after;
        }
        stack.pop_back();
    }
};

}  // namespace

FlattenResult flatten_project(const LatexProject& project, const FlattenOptions& options) {
    if (project.files.empty()) {
        throw FlattenError(FlattenErrorKind::NoMainFile, "project has no files");
    }

    FlattenResult result;

    // main file: declares a document class; ties broken by size then path
    std::optional<std::string> main;
    for (const auto& [path, text] : project.files) {
        if (!mentions_documentclass(text)) continue;
        if (!main) {
            main = path;
            continue;
        }
        const auto& cur = project.files.at(*main);
        if (text.size() > cur.size() || (text.size() == cur.size() && path < *main)) {
            main = path;
        }
    }

    if (!main) {
        if (!options.concat_without_root) {
            throw FlattenError(FlattenErrorKind::NoMainFile,
                               "no file declares a document class");
        }
        std::string out;
        for (const auto& [path, text] : project.files) {
            out += text;
            if (!text.empty() && text.back() != '\n') out += '\n';
            ++result.inlined_files;
        }
        result.text = std::move(out);
        return result;
    }

    result.main_file = *main;
    Flattener flattener{project, options, result, {}};
    std::string out;
    flattener.flatten_file(*main, out, 0);
    result.text = std::move(out);
    return result;
}

const char* to_string(ArchiveErrorKind k) {
    switch (k) {
        case ArchiveErrorKind::Integrity: return "integrity";
        case ArchiveErrorKind::Bomb: return "bomb";
        case ArchiveErrorKind::Traversal: return "traversal";
        case ArchiveErrorKind::NoTexSources: return "no_tex_sources";
    }
    return "?";
}

const char* to_string(FlattenErrorKind k) {
    switch (k) {
        case FlattenErrorKind::NoMainFile: return "no_main_file";
        case FlattenErrorKind::Cycle: return "include_cycle";
        case FlattenErrorKind::MissingInclude: return "missing_include";
        case FlattenErrorKind::DepthExceeded: return "include_depth";
    }
    return "?";
}

}  // namespace texmill::archive
