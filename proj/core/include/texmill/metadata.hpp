#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "texmill/latexnorm.hpp"

namespace texmill::metadata {

struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    bool valid() const;
    bool operator==(const Date&) const = default;
};

std::optional<Date> parse_date(std::string_view iso);

/// One arXiv-style metadata entry.
struct PaperRecord {
    std::string id;
    std::string title;
    std::string abstract;
    std::vector<std::string> categories;
    Date submission_date;
    std::string comments;
    std::optional<std::string> source_path;
};

/// One input line: either a record or a malformed-line marker.
struct MetadataLine {
    std::uint64_t line_no = 0;
    std::optional<PaperRecord> record;
    std::string error;  // set when record is absent
};

/// Line-delimited records, one JSON object per line with fields
/// {id, title, abstract, categories, date, comments}; unknown fields are
/// ignored. Malformed lines (bad JSON, missing/duplicate id, invalid date)
/// become markers; the stream never aborts.
std::vector<MetadataLine> parse_metadata_stream(std::istream& in);

enum class RejectReason { Malformed, Category, Temporal, Withdrawn, Volume, Language };

const char* to_string(RejectReason r);

struct FilterPolicy {
    std::vector<std::string> allowed_categories = {"math",    "cs",      "hep-th", "hep-ph",
                                                   "quant-ph", "stat.ML", "stat.TH"};
    int min_year = 2001;  // strictly after 2000
    std::uint64_t min_body_chars = 2000;
    std::string target_language = "en";
    std::vector<std::string> withdrawal_patterns = {"withdrawn"};
    double language_min_confidence = 0.15;
};

struct LanguageGuess {
    std::string code = "und";
    double confidence = 0.0;
};

struct FilterOutcome {
    bool accepted = false;
    std::vector<RejectReason> reasons;  // all failing rules, canonical order
    LanguageGuess language;
};

/// Category prefix matching: archive names admit their subcategories
/// ("math" admits "math.AG"); entries containing a dot match exactly.
bool category_matches(const std::string& category, const std::string& allowed);

/// Applies all six admission rules and collects every failing reason, so
/// yield reports can attribute losses per rule.
FilterOutcome evaluate_filters(const PaperRecord& record, const latexnorm::CleanDocument& body,
                               const FilterPolicy& policy);

/// Offline stopword-profile language detection over the math-stripped
/// projection of the text. Deterministic; empty projection gives ("und", 0).
LanguageGuess detect_language(std::string_view text);

/// Languages the shipped profile table covers.
std::vector<std::string> profiled_languages();

}  // namespace texmill::metadata
