#include "texmill/metadata.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <unordered_set>

#include <json.hpp>

#include "language_profiles.hpp"

namespace texmill::metadata {

bool Date::valid() const {
    return year > 0 && month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

std::optional<Date> parse_date(std::string_view iso) {
    // strict YYYY-MM-DD
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
    auto digits = [&](size_t from, size_t len) -> std::optional<int> {
        int v = 0;
        for (size_t i = from; i < from + len; ++i) {
            if (!std::isdigit(static_cast<unsigned char>(iso[i]))) return std::nullopt;
            v = v * 10 + (iso[i] - '0');
        }
        return v;
    };
    auto y = digits(0, 4), m = digits(5, 2), d = digits(8, 2);
    if (!y || !m || !d) return std::nullopt;
    Date date{*y, *m, *d};
    if (!date.valid()) return std::nullopt;
    return date;
}

std::vector<MetadataLine> parse_metadata_stream(std::istream& in) {
    std::vector<MetadataLine> out;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        MetadataLine ml;
        ml.line_no = line_no;

        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            ml.error = "invalid json";
            out.push_back(std::move(ml));
            continue;
        }
        if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty()) {
            ml.error = "missing id";
            out.push_back(std::move(ml));
            continue;
        }
        PaperRecord rec;
        rec.id = j["id"].get<std::string>();
        if (!seen_ids.insert(rec.id).second) {
            ml.error = "duplicate id";
            out.push_back(std::move(ml));
            continue;
        }
        if (!j.contains("date") || !j["date"].is_string()) {
            ml.error = "missing date";
            out.push_back(std::move(ml));
            continue;
        }
        auto date = parse_date(j["date"].get<std::string>());
        if (!date) {
            ml.error = "invalid date";
            out.push_back(std::move(ml));
            continue;
        }
        rec.submission_date = *date;
        if (j.contains("title") && j["title"].is_string()) rec.title = j["title"];
        if (j.contains("abstract") && j["abstract"].is_string()) rec.abstract = j["abstract"];
        if (j.contains("comments") && j["comments"].is_string()) rec.comments = j["comments"];
        if (j.contains("categories") && j["categories"].is_array()) {
            for (const auto& c : j["categories"]) {
                if (c.is_string()) rec.categories.push_back(c.get<std::string>());
            }
        }
        if (j.contains("source_path") && j["source_path"].is_string()) {
            rec.source_path = j["source_path"].get<std::string>();
        }
        ml.record = std::move(rec);
        out.push_back(std::move(ml));
    }
    return out;
}

const char* to_string(RejectReason r) {
    switch (r) {
        case RejectReason::Malformed: return "Malformed";
        case RejectReason::Category: return "Category";
        case RejectReason::Temporal: return "Temporal";
        case RejectReason::Withdrawn: return "Withdrawn";
        case RejectReason::Volume: return "Volume";
        case RejectReason::Language: return "Language";
    }
    return "?";
}

bool category_matches(const std::string& category, const std::string& allowed) {
    if (allowed.find('.') != std::string::npos) return category == allowed;
    if (category == allowed) return true;
    return category.size() > allowed.size() && category[allowed.size()] == '.' &&
           category.compare(0, allowed.size(), allowed) == 0;
}

namespace {

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool contains_icase(const std::string& haystack, const std::string& needle) {
    if (needle.empty()) return false;
    return to_lower_ascii(haystack).find(to_lower_ascii(needle)) != std::string::npos;
}

// Word characters: ASCII letters plus any non-ASCII byte, so accented and
// Cyrillic words survive tokenization.
bool is_word_byte(unsigned char c) { return std::isalpha(c) != 0 || c >= 0x80; }

std::vector<std::string> tokenize_words(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (unsigned char c : text) {
        if (is_word_byte(c)) {
            cur.push_back(static_cast<char>(std::isalpha(c) ? std::tolower(c) : c));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

}  // namespace

LanguageGuess detect_language(std::string_view text) {
    const std::string projection = latexnorm::strip_math(text);
    const auto words = tokenize_words(projection);
    if (words.empty()) return {"und", 0.0};

    const auto& profiles = detail::stopword_profiles();
    std::string best_code = "und";
    std::uint64_t best_hits = 0;
    for (const auto& [code, stopwords] : profiles) {
        std::unordered_set<std::string_view> table(stopwords.begin(), stopwords.end());
        std::uint64_t hits = 0;
        for (const auto& w : words) {
            if (table.count(w)) ++hits;
        }
        if (hits > best_hits || (hits == best_hits && hits > 0 && code < best_code)) {
            best_hits = hits;
            best_code = std::string(code);
        }
    }
    if (best_hits == 0) return {"und", 0.0};
    return {best_code, static_cast<double>(best_hits) / static_cast<double>(words.size())};
}

std::vector<std::string> profiled_languages() {
    std::vector<std::string> codes;
    for (const auto& [code, words] : detail::stopword_profiles()) codes.emplace_back(code);
    std::sort(codes.begin(), codes.end());
    return codes;
}

FilterOutcome evaluate_filters(const PaperRecord& record, const latexnorm::CleanDocument& body,
                               const FilterPolicy& policy) {
    FilterOutcome outcome;

    if (record.id.empty() || !record.submission_date.valid()) {
        outcome.reasons.push_back(RejectReason::Malformed);
    }

    bool category_ok = false;
    for (const auto& cat : record.categories) {
        for (const auto& allowed : policy.allowed_categories) {
            if (category_matches(cat, allowed)) {
                category_ok = true;
                break;
            }
        }
        if (category_ok) break;
    }
    if (!category_ok) outcome.reasons.push_back(RejectReason::Category);

    if (record.submission_date.year < policy.min_year) {
        outcome.reasons.push_back(RejectReason::Temporal);
    }

    for (const auto& pattern : policy.withdrawal_patterns) {
        if (contains_icase(record.comments, pattern)) {
            outcome.reasons.push_back(RejectReason::Withdrawn);
            break;
        }
    }

    if (body.char_count < policy.min_body_chars) {
        outcome.reasons.push_back(RejectReason::Volume);
    }

    std::string combined = record.title;
    combined += ' ';
    combined += body.abstract.empty() ? record.abstract : body.abstract;
    combined += ' ';
    combined += body.body;
    outcome.language = detect_language(combined);
    if (outcome.language.code != policy.target_language ||
        outcome.language.confidence < policy.language_min_confidence) {
        outcome.reasons.push_back(RejectReason::Language);
    }

    outcome.accepted = outcome.reasons.empty();
    return outcome;
}

}  // namespace texmill::metadata
