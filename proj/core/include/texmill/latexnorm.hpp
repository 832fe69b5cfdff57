#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace texmill::latexnorm {

struct MacroDef {
    int arity = 0;
    std::string replacement;
};

/// Simple non-conditional macro definitions collected from a document.
struct MacroTable {
    std::map<std::string, MacroDef> definitions;
};

struct ExpandResult {
    std::string text;
    MacroTable table;
    std::uint64_t depth_exceeded = 0;
};

/// Collect \newcommand / \renewcommand / \providecommand / \def definitions
/// with 0..9 positional arguments, remove them from the text, and substitute
/// calls recursively (leftmost-outermost) up to max_depth. A call that would
/// exceed the depth cap is left verbatim and counted.
ExpandResult expand_macros(std::string_view source, int max_depth = 8);

struct NormalizeOptions {
    std::vector<std::string> remove_environments = {
        "figure", "figure*", "table", "table*", "tikzpicture", "thebibliography",
        "filecontents", "filecontents*", "comment"};
    std::vector<std::string> math_environments = {
        "equation", "equation*", "align", "align*", "gather", "gather*",
        "multline", "multline*", "eqnarray", "eqnarray*", "alignat", "alignat*",
        "math", "displaymath"};
    std::vector<std::string> structural_environments = {
        "theorem", "lemma", "proposition", "corollary", "proof", "definition",
        "remark", "example", "claim", "conjecture"};
    std::vector<std::string> verbatim_environments = {"verbatim", "verbatim*", "lstlisting"};
    // citations/refs become "[CIT]"/"[REF]" placeholders; set false to delete
    bool placeholder_refs = true;
};

struct NormalizeResult {
    std::string body;
    std::uint64_t char_count = 0;       // byte length of body
    std::uint64_t math_span_count = 0;
    std::map<std::string, std::uint64_t> removed_counters;
};

/// Strip comments and formatting noise from macro-expanded LaTeX while
/// keeping math and structural environments verbatim. Idempotent.
NormalizeResult normalize_latex(std::string_view source, const NormalizeOptions& options = {});

struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;  // half-open

    bool operator==(const Span&) const = default;
};

struct CurriculumTags {
    std::vector<Span> stage1_spans;  // offsets into CleanDocument::full_text()
    bool stage2_full = true;
};

struct CleanDocument {
    std::string paper_id;
    std::string title;
    std::string abstract;
    std::string body;
    std::uint64_t char_count = 0;
    std::uint64_t math_span_count = 0;
    std::map<std::string, std::uint64_t> removed_counters;
    CurriculumTags curriculum;

    /// Training text: abstract and body joined by one paragraph break.
    std::string full_text() const;
};

/// Stage-1 spans: the abstract plus body sections whose headings stem-match
/// introduction/conclusion. Falls back to the abstract span alone.
CurriculumTags segment_curriculum(const CleanDocument& doc);

/// Math spans ($...$, $$...$$, \(...\), \[...\], math environments) found by
/// the same scanner the normalizer uses; comments are skipped.
std::vector<Span> find_math_spans(std::string_view text);

/// Projection of text with math spans removed; language detection runs on this.
std::string strip_math(std::string_view text);

/// Full per-document cleaning: macro expansion, normalization (of both body
/// and the metadata abstract), and curriculum tagging.
CleanDocument clean_document(const std::string& paper_id, const std::string& title,
                             const std::string& abstract, std::string_view flattened_source,
                             const NormalizeOptions& options = {}, int macro_max_depth = 8);

}  // namespace texmill::latexnorm
