#include "texmill/latexnorm.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

namespace texmill::latexnorm {

namespace {

bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

// True when the character at pos is escaped by an odd run of backslashes.
bool is_escaped(std::string_view t, size_t pos) {
    size_t n = 0;
    while (pos > n && t[pos - 1 - n] == '\\') ++n;
    return (n % 2) == 1;
}

size_t find_unescaped(std::string_view t, char c, size_t from) {
    for (size_t i = from; i < t.size(); ++i) {
        if (t[i] == c && !is_escaped(t, i)) return i;
    }
    return std::string_view::npos;
}

// Matching close brace for the '{' at open, nesting- and escape-aware.
size_t match_brace(std::string_view t, size_t open) {
    int depth = 0;
    for (size_t i = open; i < t.size(); ++i) {
        if (is_escaped(t, i)) continue;
        if (t[i] == '{') ++depth;
        else if (t[i] == '}') {
            if (--depth == 0) return i;
        }
    }
    return std::string_view::npos;
}

size_t match_bracket(std::string_view t, size_t open) {
    int depth = 0;
    for (size_t i = open; i < t.size(); ++i) {
        if (is_escaped(t, i)) continue;
        if (t[i] == '[') ++depth;
        else if (t[i] == ']') {
            if (--depth == 0) return i;
        }
    }
    return std::string_view::npos;
}

size_t skip_spaces(std::string_view t, size_t i) {
    while (i < t.size() && (t[i] == ' ' || t[i] == '\t' || t[i] == '\n' || t[i] == '\r')) ++i;
    return i;
}

// "\begin{env}" starting at pos? Returns env name and the offset just past
// the closing brace.
bool parse_env_marker(std::string_view t, size_t pos, const char* keyword, std::string& env,
                      size_t& after) {
    std::string_view kw(keyword);
    if (t.substr(pos).substr(0, kw.size()) != kw) return false;
    size_t i = skip_spaces(t, pos + kw.size());
    if (i >= t.size() || t[i] != '{') return false;
    size_t close = t.find('}', i + 1);
    if (close == std::string_view::npos) return false;
    env = std::string(t.substr(i + 1, close - i - 1));
    after = close + 1;
    return true;
}

// Position of the matching \end{env}, honoring nested \begin{env} of the
// same name. Returns pair {begin of \end marker, end offset just past it}.
bool find_env_close(std::string_view t, size_t from, const std::string& env, size_t& close_begin,
                    size_t& close_end) {
    int depth = 1;
    size_t i = from;
    while (i < t.size()) {
        size_t p = t.find('\\', i);
        if (p == std::string_view::npos) return false;
        std::string name;
        size_t after = 0;
        if (parse_env_marker(t, p, "\\begin", name, after) && name == env) {
            ++depth;
            i = after;
        } else if (parse_env_marker(t, p, "\\end", name, after) && name == env) {
            if (--depth == 0) {
                close_begin = p;
                close_end = after;
                return true;
            }
            i = after;
        } else {
            i = p + 1;
        }
    }
    return false;
}

const std::unordered_set<std::string> kSectionCommands = {
    "part", "chapter", "chapter*", "section", "section*", "subsection", "subsection*",
    "subsubsection", "subsubsection*", "paragraph", "paragraph*", "subparagraph"};

const std::unordered_set<std::string> kCitationCommands = {
    "cite", "citep", "citet", "citealt", "citealp", "citeauthor", "citeyear",
    "citeyearpar", "parencite", "textcite", "footcite"};

const std::unordered_set<std::string> kRefCommands = {
    "ref", "eqref", "pageref", "autoref", "cref", "Cref", "vref", "nameref"};

const std::unordered_set<std::string> kUnwrapCommands = {
    "textbf", "textit", "emph", "texttt", "textsc", "textsf", "textrm", "textup",
    "textnormal", "textsl", "underline", "mbox", "hbox", "text", "footnote",
    "footnotetext", "url"};

// value = number of required {..} groups to swallow with the command
const std::unordered_map<std::string, int> kPreambleCommands = {
    {"documentclass", 1}, {"documentstyle", 1}, {"usepackage", 1},
    {"RequirePackage", 1}, {"geometry", 1},     {"definecolor", 3},
    {"pagestyle", 1},     {"thispagestyle", 1}, {"hypersetup", 1},
    {"setstretch", 1},    {"linespread", 1},    {"theoremstyle", 1},
    {"numberwithin", 2},  {"DeclareMathOperator", 2}, {"DeclareMathOperator*", 2},
    {"newtheorem", 2},    {"newtheorem*", 2},   {"title", 1},
    {"author", 1},        {"date", 1},          {"thanks", 1},
    {"keywords", 1},      {"email", 1},         {"address", 1},
    {"affiliation", 1},   {"institute", 1},     {"subjclass", 1},
    {"subjclass*", 1},    {"dedicatory", 1},    {"usetikzlibrary", 1},
    {"pgfplotsset", 1},   {"lstset", 1},        {"captionsetup", 1},
    {"bibliographystyle", 1}, {"bibliography", 1}, {"makeatletter", 0},
    {"makeatother", 0}};

const std::unordered_map<std::string, int> kDropWithArgs = {
    {"label", 1},     {"vspace", 1},   {"vspace*", 1},  {"hspace", 1},
    {"hspace*", 1},   {"includegraphics", 1}, {"caption", 1}, {"captionof", 2},
    {"setlength", 2}, {"addtolength", 2}, {"setcounter", 2}, {"addtocounter", 2},
    {"rule", 2},      {"phantom", 1},  {"vphantom", 1}, {"hphantom", 1},
    {"nocite", 1},    {"input", 1},    {"include", 1},  {"includeonly", 1},
    {"graphicspath", 1}, {"markboth", 2}, {"markright", 1}, {"enlargethispage", 1},
    {"stepcounter", 1}};

const std::unordered_set<std::string> kDropBare = {
    "centering", "raggedright", "raggedleft", "noindent", "indent", "clearpage",
    "cleardoublepage", "newpage", "pagebreak", "nopagebreak", "linebreak",
    "nolinebreak", "samepage", "bigskip", "medskip", "smallskip", "vfill", "hfill",
    "hrule", "hline", "toprule", "midrule", "bottomrule", "tableofcontents",
    "listoffigures", "listoftables", "appendix", "frontmatter", "mainmatter",
    "backmatter", "printbibliography", "printindex", "makeindex", "maketitle",
    "small", "footnotesize", "scriptsize", "tiny", "normalsize", "large", "Large",
    "LARGE", "huge", "Huge", "itshape", "bfseries", "scshape", "ttfamily",
    "rmfamily", "sffamily", "mdseries", "upshape", "em", "it", "bf", "rm", "sf",
    "tt", "sc", "sl", "qed", "qedhere", "break", "relax", "protect",
    "ignorespaces", "frenchspacing", "sloppy", "flushbottom", "raggedbottom",
    "onecolumn", "allowbreak", "and", "newline", "smallbreak", "medbreak", "bigbreak",
    "item", "par"};

// Definition commands get a dedicated parse in both the expander (collect)
// and the normalizer (drop leftovers the expander could not handle).
// Value = number of trailing brace groups forming the definition body.
const std::unordered_map<std::string, int> kDefinitionCommands = {
    {"newcommand", 1},    {"newcommand*", 1},    {"renewcommand", 1},
    {"renewcommand*", 1}, {"providecommand", 1}, {"providecommand*", 1},
    {"DeclareRobustCommand", 1}, {"def", 1},     {"edef", 1},
    {"gdef", 1},          {"xdef", 1},           {"newenvironment", 2},
    {"newenvironment*", 2}, {"renewenvironment", 2}};

struct Sets {
    std::unordered_set<std::string> remove_envs;
    std::unordered_set<std::string> math_envs;
    std::unordered_set<std::string> structural_envs;
    std::unordered_set<std::string> verbatim_envs;

    explicit Sets(const NormalizeOptions& o)
        : remove_envs(o.remove_environments.begin(), o.remove_environments.end()),
          math_envs(o.math_environments.begin(), o.math_environments.end()),
          structural_envs(o.structural_environments.begin(), o.structural_environments.end()),
          verbatim_envs(o.verbatim_environments.begin(), o.verbatim_environments.end()) {}
};

std::string env_counter_key(const std::string& env) {
    std::string key = env;
    while (!key.empty() && key.back() == '*') key.pop_back();
    return key;
}

struct Segment {
    std::string text;
    bool protect = false;
};

class Scanner {
public:
    Scanner(const Sets& sets, const NormalizeOptions& options,
            std::map<std::string, std::uint64_t>& counters, std::uint64_t& math_count)
        : sets_(sets), options_(options), counters_(counters), math_count_(math_count) {}

    void scan(std::string_view t) {
        size_t i = 0;
        while (i < t.size()) {
            char c = t[i];
            if (c == '\\') {
                i = handle_backslash(t, i);
            } else if (c == '%') {
                size_t eol = t.find('\n', i);
                ++counters_["comment"];
                i = (eol == std::string_view::npos) ? t.size() : eol;  // newline kept
            } else if (c == '$') {
                i = handle_dollar(t, i);
            } else if (c == '{' || c == '}') {
                ++i;  // grouping braces carry no content
            } else if (c == '~') {
                emit(' ');
                ++i;
            } else {
                emit(c);
                ++i;
            }
        }
        flush_plain();
    }

    std::vector<Segment> take_segments() {
        flush_plain();
        return std::move(segments_);
    }

private:
    void emit(char c) { plain_.push_back(c); }
    void emit(std::string_view s) { plain_.append(s); }

    void flush_plain() {
        if (!plain_.empty()) {
            segments_.push_back({std::move(plain_), false});
            plain_.clear();
        }
    }

    void emit_protected(std::string_view s) {
        flush_plain();
        segments_.push_back({std::string(s), true});
    }

    // Consume any immediately-following [..] and up to max_braces {..} groups.
    size_t consume_groups(std::string_view t, size_t i, int max_braces = 9) {
        for (;;) {
            size_t j = skip_spaces(t, i);
            if (j < t.size() && t[j] == '[') {
                size_t close = match_bracket(t, j);
                if (close == std::string_view::npos) return i;
                i = close + 1;
            } else if (j < t.size() && t[j] == '{' && max_braces > 0) {
                size_t close = match_brace(t, j);
                if (close == std::string_view::npos) return i;
                i = close + 1;
                --max_braces;
            } else {
                return i;
            }
        }
    }

    size_t handle_dollar(std::string_view t, size_t i) {
        const bool display = i + 1 < t.size() && t[i + 1] == '$';
        if (display) {
            size_t p = i + 2;
            while (p + 1 < t.size()) {
                if (t[p] == '$' && t[p + 1] == '$' && !is_escaped(t, p)) {
                    emit_protected(t.substr(i, p + 2 - i));
                    ++math_count_;
                    return p + 2;
                }
                ++p;
            }
        } else {
            size_t close = find_unescaped(t, '$', i + 1);
            if (close != std::string_view::npos) {
                emit_protected(t.substr(i, close + 1 - i));
                ++math_count_;
                return close + 1;
            }
        }
        ++counters_["unbalanced_math"];
        emit(t[i]);
        return i + 1;
    }

    size_t handle_begin(std::string_view t, size_t i, const std::string& env, size_t after) {
        if (sets_.remove_envs.count(env)) {
            size_t cb = 0, ce = 0;
            ++counters_[env_counter_key(env)];
            if (find_env_close(t, after, env, cb, ce)) return ce;
            ++counters_["unbalanced_env"];
            return t.size();
        }
        if (sets_.math_envs.count(env) || sets_.verbatim_envs.count(env)) {
            size_t cb = 0, ce = 0;
            if (find_env_close(t, after, env, cb, ce)) {
                emit_protected(t.substr(i, ce - i));
                if (sets_.math_envs.count(env)) ++math_count_;
                return ce;
            }
            ++counters_["unbalanced_env"];
            emit_protected(t.substr(i));
            if (sets_.math_envs.count(env)) ++math_count_;
            return t.size();
        }
        if (sets_.structural_envs.count(env)) {
            size_t end = after;
            size_t j = skip_spaces(t, after);
            if (j < t.size() && t[j] == '[') {
                size_t close = match_bracket(t, j);
                if (close != std::string_view::npos) end = close + 1;
            }
            emit(t.substr(i, end - i));
            return end;
        }
        if (env == "document") return after;
        // unknown environment: markers and optional arguments dropped, content kept
        ++counters_["environment"];
        return consume_groups(t, after, 0);
    }

    size_t handle_backslash(std::string_view t, size_t i) {
        if (i + 1 >= t.size()) {
            emit(t[i]);
            return i + 1;
        }
        const char next = t[i + 1];
        if (next == '%' || next == '$' || next == '&' || next == '_' || next == '#' ||
            next == '{' || next == '}') {
            emit(t.substr(i, 2));
            return i + 2;
        }
        if (next == '\\') {
            emit(' ');
            size_t j = i + 2;
            if (j < t.size() && t[j] == '[') {  // \\[2mm]
                size_t close = match_bracket(t, j);
                if (close != std::string_view::npos) j = close + 1;
            }
            return j;
        }
        if (next == '(') {
            size_t p = t.find("\\)", i + 2);
            if (p != std::string_view::npos) {
                emit_protected(t.substr(i, p + 2 - i));
                ++math_count_;
                return p + 2;
            }
            ++counters_["unbalanced_math"];
            return i + 2;
        }
        if (next == '[') {
            size_t p = t.find("\\]", i + 2);
            if (p != std::string_view::npos) {
                emit_protected(t.substr(i, p + 2 - i));
                ++math_count_;
                return p + 2;
            }
            ++counters_["unbalanced_math"];
            return i + 2;
        }
        if (!is_letter(next)) {
            if (next == ' ') emit(' ');  // control space
            return i + 2;
        }

        size_t j = i + 1;
        while (j < t.size() && is_letter(t[j])) ++j;
        std::string name(t.substr(i + 1, j - i - 1));
        if (j < t.size() && t[j] == '*') {
            name.push_back('*');
            ++j;
        }

        if (name == "begin") {
            std::string env;
            size_t after = 0;
            if (parse_env_marker(t, i, "\\begin", env, after)) {
                return handle_begin(t, i, env, after);
            }
            emit(t.substr(i, j - i));
            return j;
        }
        if (name == "end") {
            std::string env;
            size_t after = 0;
            if (parse_env_marker(t, i, "\\end", env, after)) {
                if (sets_.structural_envs.count(env)) {
                    emit(t.substr(i, after - i));
                } else if (env != "document") {
                    ++counters_["environment"];
                }
                return after;
            }
            emit(t.substr(i, j - i));
            return j;
        }
        if (name == "verb" || name == "verb*") {
            if (j < t.size()) {
                char delim = t[j];
                size_t close = t.find(delim, j + 1);
                if (close != std::string_view::npos) {
                    emit_protected(t.substr(i, close + 1 - i));
                    return close + 1;
                }
            }
            return j;
        }
        if (auto it = kDefinitionCommands.find(name); it != kDefinitionCommands.end()) {
            ++counters_["preamble"];
            return consume_definition(t, j, it->second);
        }
        if (kSectionCommands.count(name)) {
            size_t end = consume_groups(t, j, 1);
            emit(t.substr(i, end - i));
            return end;
        }
        if (kCitationCommands.count(name)) {
            ++counters_["citation"];
            if (options_.placeholder_refs) emit("[CIT]");
            return consume_groups(t, j, 1);
        }
        if (kRefCommands.count(name)) {
            ++counters_["reference"];
            if (options_.placeholder_refs) emit("[REF]");
            return consume_groups(t, j, 1);
        }
        if (name == "href") {  // keep the link text, drop the target
            size_t k = skip_spaces(t, j);
            if (k < t.size() && t[k] == '{') {
                size_t c1 = match_brace(t, k);
                if (c1 != std::string_view::npos) {
                    size_t k2 = skip_spaces(t, c1 + 1);
                    if (k2 < t.size() && t[k2] == '{') {
                        size_t c2 = match_brace(t, k2);
                        if (c2 != std::string_view::npos) {
                            ++counters_["formatting"];
                            scan(t.substr(k2 + 1, c2 - k2 - 1));
                            return c2 + 1;
                        }
                    }
                }
            }
            return j;
        }
        if (kUnwrapCommands.count(name)) {
            size_t k = skip_spaces(t, j);
            if (k < t.size() && t[k] == '{') {
                size_t close = match_brace(t, k);
                if (close != std::string_view::npos) {
                    ++counters_["formatting"];
                    scan(t.substr(k + 1, close - k - 1));
                    return close + 1;
                }
            }
            ++counters_["formatting"];
            return j;
        }
        if (auto it = kPreambleCommands.find(name); it != kPreambleCommands.end()) {
            ++counters_["preamble"];
            return consume_groups(t, j, it->second);
        }
        if (auto it = kDropWithArgs.find(name); it != kDropWithArgs.end()) {
            ++counters_["formatting"];
            return consume_groups(t, j, it->second);
        }
        if (kDropBare.count(name)) {
            ++counters_["formatting"];
            if (name == "par") emit("\n\n");
            if (name == "item") {
                emit('\n');
                size_t k = skip_spaces(t, j);
                if (k < t.size() && t[k] == '[') {
                    size_t close = match_bracket(t, k);
                    if (close != std::string_view::npos) return close + 1;
                }
            }
            return j;
        }
        // unknown command: kept verbatim, arguments left as plain groups
        emit(t.substr(i, j - i));
        if (j < t.size() && t[j] == '{') emit(' ');
        return j;
    }

    // \def\name{...} / \newcommand{\name}[n]{...} leftovers: swallow the
    // defined token plus option and body groups.
    size_t consume_definition(std::string_view t, size_t i, int body_groups) {
        size_t j = skip_spaces(t, i);
        if (j < t.size() && t[j] == '{') {
            size_t close = match_brace(t, j);
            if (close == std::string_view::npos) return i;
            j = close + 1;
        } else if (j < t.size() && t[j] == '\\') {
            ++j;
            while (j < t.size() && is_letter(t[j])) ++j;
            // \def parameter text (#1#2...) up to the body group
            while (j < t.size() && t[j] != '{' && t[j] != '\n') ++j;
        } else {
            return i;
        }
        return consume_groups(t, j, body_groups);
    }

    const Sets& sets_;
    const NormalizeOptions& options_;
    std::map<std::string, std::uint64_t>& counters_;
    std::uint64_t& math_count_;
    std::vector<Segment> segments_;
    std::string plain_;
};

std::string canonicalize_whitespace(const std::vector<Segment>& segments) {
    std::string out;
    bool at_start = true;
    int newlines = 0;
    bool spaces = false;

    auto separator = [&]() {
        if (at_start) {
            at_start = false;
        } else if (newlines >= 2) {
            out += "\n\n";
        } else if (newlines == 1) {
            out += '\n';
        } else if (spaces) {
            out += ' ';
        }
        newlines = 0;
        spaces = false;
    };

    for (const auto& seg : segments) {
        if (seg.protect) {
            separator();
            out += seg.text;
            continue;
        }
        for (char c : seg.text) {
            if (c == '\n') {
                ++newlines;
                spaces = true;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                spaces = true;
            } else {
                separator();
                out += c;
            }
        }
    }
    return out;
}

// ---- macro expansion ----------------------------------------------------

struct Definition {
    std::string name;
    MacroDef def;
    size_t span_begin = 0;
    size_t span_end = 0;
    bool collectable = false;
};

// Parse a definition starting at the backslash of \newcommand / \def etc.
// Returns true when the syntactic form was recognized (span set); collectable
// marks the subset simple enough to substitute.
bool parse_definition(std::string_view t, size_t pos, Definition& out) {
    size_t i = pos + 1;
    size_t name_end = i;
    while (name_end < t.size() && is_letter(t[name_end])) ++name_end;
    std::string cmd(t.substr(i, name_end - i));
    if (name_end < t.size() && t[name_end] == '*') {
        cmd.push_back('*');
        ++name_end;
    }
    const bool is_newcommand = cmd == "newcommand" || cmd == "newcommand*" ||
                               cmd == "renewcommand" || cmd == "renewcommand*" ||
                               cmd == "providecommand" || cmd == "providecommand*";
    const bool is_def = cmd == "def";
    if (!is_newcommand && !is_def) return false;

    size_t j = skip_spaces(t, name_end);
    std::string macro_name;
    int arity = 0;
    bool simple = true;

    if (is_newcommand) {
        // {\name} or \name
        if (j < t.size() && t[j] == '{') {
            size_t close = match_brace(t, j);
            if (close == std::string_view::npos) return false;
            std::string_view inner = t.substr(j + 1, close - j - 1);
            if (inner.size() < 2 || inner[0] != '\\') return false;
            macro_name = std::string(inner.substr(1));
            j = close + 1;
        } else if (j + 1 < t.size() && t[j] == '\\' && is_letter(t[j + 1])) {
            size_t k = j + 1;
            while (k < t.size() && is_letter(t[k])) ++k;
            macro_name = std::string(t.substr(j + 1, k - j - 1));
            j = k;
        } else {
            return false;
        }
        j = skip_spaces(t, j);
        if (j < t.size() && t[j] == '[') {
            size_t close = match_bracket(t, j);
            if (close == std::string_view::npos) return false;
            std::string_view num = t.substr(j + 1, close - j - 1);
            if (num.size() == 1 && std::isdigit(static_cast<unsigned char>(num[0]))) {
                arity = num[0] - '0';
            } else {
                simple = false;
            }
            j = skip_spaces(t, close + 1);
            if (j < t.size() && t[j] == '[') {
                // optional-default arguments are beyond the simple subset
                size_t close2 = match_bracket(t, j);
                if (close2 == std::string_view::npos) return false;
                simple = false;
                j = skip_spaces(t, close2 + 1);
            }
        }
    } else {  // \def\name<param text>{body}
        if (j + 1 >= t.size() || t[j] != '\\' || !is_letter(t[j + 1])) return false;
        size_t k = j + 1;
        while (k < t.size() && is_letter(t[k])) ++k;
        macro_name = std::string(t.substr(j + 1, k - j - 1));
        j = k;
        // accept only the plain #1#2...#n parameter text
        int expected = 1;
        while (j + 1 < t.size() && t[j] == '#' &&
               std::isdigit(static_cast<unsigned char>(t[j + 1]))) {
            if (t[j + 1] - '0' != expected) {
                simple = false;
            }
            ++expected;
            ++arity;
            j += 2;
        }
        if (j < t.size() && t[j] != '{') simple = false;
    }

    if (j >= t.size() || t[j] != '{') return false;
    size_t body_close = match_brace(t, j);
    if (body_close == std::string_view::npos) return false;

    out.name = macro_name;
    out.def.arity = arity;
    out.def.replacement = std::string(t.substr(j + 1, body_close - j - 1));
    out.span_begin = pos;
    out.span_end = body_close + 1;
    // a replacement that calls the macro being defined is collected anyway;
    // the depth cap stops runaway expansion at substitution time
    out.collectable = simple && arity <= 9;
    return true;
}

class MacroExpander {
public:
    MacroExpander(const MacroTable& table, int max_depth)
        : table_(table), max_depth_(max_depth) {}

    std::string expand(std::string_view t) {
        std::string out;
        expand_into(t, 0, out);
        return out;
    }

    std::uint64_t depth_exceeded() const { return depth_exceeded_; }

private:
    void expand_into(std::string_view t, int depth, std::string& out) {
        size_t i = 0;
        while (i < t.size()) {
            char c = t[i];
            if (c != '\\') {
                out.push_back(c);
                ++i;
                continue;
            }
            if (i + 1 >= t.size() || !is_letter(t[i + 1])) {
                out.append(t.substr(i, std::min<size_t>(2, t.size() - i)));
                i += 2;
                continue;
            }
            size_t j = i + 1;
            while (j < t.size() && is_letter(t[j])) ++j;
            std::string name(t.substr(i + 1, j - i - 1));

            if (name == "begin") {  // leave verbatim-like environments alone
                std::string env;
                size_t after = 0;
                if (parse_env_marker(t, i, "\\begin", env, after) &&
                    (env == "verbatim" || env == "verbatim*" || env == "lstlisting")) {
                    size_t cb = 0, ce = 0;
                    if (find_env_close(t, after, env, cb, ce)) {
                        out.append(t.substr(i, ce - i));
                        i = ce;
                        continue;
                    }
                }
            }

            auto it = table_.definitions.find(name);
            if (it == table_.definitions.end()) {
                out.append(t.substr(i, j - i));
                i = j;
                continue;
            }

            const MacroDef& def = it->second;
            size_t k = j;
            std::vector<std::string> args;
            bool ok = true;
            for (int a = 0; a < def.arity; ++a) {
                size_t g = skip_spaces(t, k);
                if (g < t.size() && t[g] == '{') {
                    size_t close = match_brace(t, g);
                    if (close == std::string_view::npos) {
                        ok = false;
                        break;
                    }
                    args.emplace_back(t.substr(g + 1, close - g - 1));
                    k = close + 1;
                } else {
                    ok = false;
                    break;
                }
            }
            if (!ok) {
                out.append(t.substr(i, j - i));
                i = j;
                continue;
            }
            if (depth >= max_depth_) {
                ++depth_exceeded_;
                out.append(t.substr(i, k - i));
                i = k;
                continue;
            }
            expand_into(instantiate(def.replacement, args), depth + 1, out);
            i = k;
        }
    }

    static std::string instantiate(const std::string& body, const std::vector<std::string>& args) {
        std::string out;
        out.reserve(body.size());
        for (size_t i = 0; i < body.size(); ++i) {
            if (body[i] == '#' && i + 1 < body.size()) {
                char n = body[i + 1];
                if (n == '#') {
                    out.push_back('#');
                    ++i;
                    continue;
                }
                if (std::isdigit(static_cast<unsigned char>(n))) {
                    size_t idx = static_cast<size_t>(n - '0');
                    if (idx >= 1 && idx <= args.size()) out += args[idx - 1];
                    ++i;
                    continue;
                }
            }
            out.push_back(body[i]);
        }
        return out;
    }

    const MacroTable& table_;
    int max_depth_;
    std::uint64_t depth_exceeded_ = 0;
};

}  // namespace

ExpandResult expand_macros(std::string_view source, int max_depth) {
    ExpandResult result;

    // collect definitions (skipping comments), remembering spans to remove
    std::vector<std::pair<size_t, size_t>> spans;
    size_t i = 0;
    while (i < source.size()) {
        char c = source[i];
        if (c == '%' && !is_escaped(source, i)) {
            size_t eol = source.find('\n', i);
            i = (eol == std::string_view::npos) ? source.size() : eol + 1;
            continue;
        }
        if (c == '\\' && i + 1 < source.size() && is_letter(source[i + 1])) {
            Definition d;
            if (parse_definition(source, i, d)) {
                if (d.collectable) {
                    result.table.definitions[d.name] = d.def;
                    spans.emplace_back(d.span_begin, d.span_end);
                }
                i = d.span_end;
                continue;
            }
            size_t j = i + 1;
            while (j < source.size() && is_letter(source[j])) ++j;
            i = j;
            continue;
        }
        ++i;
    }

    std::string without_defs;
    without_defs.reserve(source.size());
    size_t cursor = 0;
    for (const auto& [b, e] : spans) {
        without_defs.append(source.substr(cursor, b - cursor));
        cursor = e;
    }
    without_defs.append(source.substr(cursor));

    MacroExpander expander(result.table, max_depth);
    result.text = expander.expand(without_defs);
    result.depth_exceeded = expander.depth_exceeded();
    return result;
}

NormalizeResult normalize_latex(std::string_view source, const NormalizeOptions& options) {
    NormalizeResult result;
    Sets sets(options);

    // keep only the document body when a document environment is present
    std::string_view work = source;
    size_t doc_begin = source.find("\\begin{document}");
    if (doc_begin != std::string_view::npos) {
        size_t content = doc_begin + 16;
        size_t doc_end = source.find("\\end{document}", content);
        work = source.substr(content, doc_end == std::string_view::npos
                                          ? std::string_view::npos
                                          : doc_end - content);
        ++result.removed_counters["preamble"];
    }

    Scanner scanner(sets, options, result.removed_counters, result.math_span_count);
    scanner.scan(work);
    result.body = canonicalize_whitespace(scanner.take_segments());
    result.char_count = result.body.size();
    return result;
}

std::vector<Span> find_math_spans(std::string_view text) {
    static const NormalizeOptions defaults;
    std::unordered_set<std::string> math_envs(defaults.math_environments.begin(),
                                              defaults.math_environments.end());
    std::vector<Span> spans;
    size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (c == '%' && !is_escaped(text, i)) {
            size_t eol = text.find('\n', i);
            i = (eol == std::string_view::npos) ? text.size() : eol + 1;
            continue;
        }
        if (c == '$' && !is_escaped(text, i)) {
            if (i + 1 < text.size() && text[i + 1] == '$') {
                size_t p = i + 2;
                bool closed = false;
                while (p + 1 < text.size()) {
                    if (text[p] == '$' && text[p + 1] == '$' && !is_escaped(text, p)) {
                        spans.push_back({i, p + 2});
                        i = p + 2;
                        closed = true;
                        break;
                    }
                    ++p;
                }
                if (closed) continue;
                ++i;
                continue;
            }
            size_t close = find_unescaped(text, '$', i + 1);
            if (close != std::string_view::npos) {
                spans.push_back({i, close + 1});
                i = close + 1;
                continue;
            }
            ++i;
            continue;
        }
        if (c == '\\' && i + 1 < text.size()) {
            char next = text[i + 1];
            if (next == '(') {
                size_t p = text.find("\\)", i + 2);
                if (p != std::string_view::npos) {
                    spans.push_back({i, p + 2});
                    i = p + 2;
                    continue;
                }
            } else if (next == '[') {
                size_t p = text.find("\\]", i + 2);
                if (p != std::string_view::npos) {
                    spans.push_back({i, p + 2});
                    i = p + 2;
                    continue;
                }
            } else if (is_letter(next)) {
                std::string env;
                size_t after = 0;
                if (parse_env_marker(text, i, "\\begin", env, after) && math_envs.count(env)) {
                    size_t cb = 0, ce = 0;
                    if (find_env_close(text, after, env, cb, ce)) {
                        spans.push_back({i, ce});
                        i = ce;
                        continue;
                    }
                    spans.push_back({i, text.size()});
                    break;
                }
                size_t j = i + 1;
                while (j < text.size() && is_letter(text[j])) ++j;
                i = j;
                continue;
            }
            i += 2;
            continue;
        }
        ++i;
    }
    return spans;
}

std::string strip_math(std::string_view text) {
    auto spans = find_math_spans(text);
    std::string out;
    out.reserve(text.size());
    size_t cursor = 0;
    for (const auto& s : spans) {
        out.append(text.substr(cursor, s.begin - cursor));
        out.push_back(' ');  // keep word boundaries where math sat
        cursor = s.end;
    }
    out.append(text.substr(cursor));
    return out;
}

std::string CleanDocument::full_text() const {
    if (abstract.empty()) return body;
    if (body.empty()) return abstract;
    return abstract + "\n\n" + body;
}

CurriculumTags segment_curriculum(const CleanDocument& doc) {
    CurriculumTags tags;
    tags.stage2_full = true;

    const std::string& body = doc.body;
    const size_t body_offset = doc.abstract.empty() ? 0 : doc.abstract.size() + 2;

    if (!doc.abstract.empty()) {
        tags.stage1_spans.push_back({0, doc.abstract.size()});
    }

    struct Heading {
        size_t pos;
        std::string title;
    };
    std::vector<Heading> headings;
    static const std::vector<std::string> kHeads = {"\\section", "\\chapter"};
    size_t i = 0;
    while (i < body.size()) {
        size_t best = std::string::npos;
        size_t best_len = 0;
        for (const auto& h : kHeads) {
            size_t p = body.find(h, i);
            if (p != std::string::npos && (best == std::string::npos || p < best)) {
                best = p;
                best_len = h.size();
            }
        }
        if (best == std::string::npos) break;
        size_t j = best + best_len;
        if (j < body.size() && body[j] == '*') ++j;
        while (j < body.size() && (body[j] == ' ' || body[j] == '\t')) ++j;
        if (j >= body.size() || body[j] != '{') {
            i = best + best_len;  // e.g. \sectioning... is not a heading
            continue;
        }
        size_t close = match_brace(body, j);
        if (close == std::string::npos) {
            i = best + best_len;
            continue;
        }
        headings.push_back({best, std::string(body.substr(j + 1, close - j - 1))});
        i = close + 1;
    }

    auto matches_stage1 = [](std::string title) {
        std::transform(title.begin(), title.end(), title.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        return title.find("introduc") != std::string::npos ||
               title.find("conclu") != std::string::npos;
    };

    for (size_t h = 0; h < headings.size(); ++h) {
        if (!matches_stage1(headings[h].title)) continue;
        size_t end = (h + 1 < headings.size()) ? headings[h + 1].pos : body.size();
        tags.stage1_spans.push_back({body_offset + headings[h].pos, body_offset + end});
    }
    return tags;
}

CleanDocument clean_document(const std::string& paper_id, const std::string& title,
                             const std::string& abstract, std::string_view flattened_source,
                             const NormalizeOptions& options, int macro_max_depth) {
    CleanDocument doc;
    doc.paper_id = paper_id;

    auto expanded = expand_macros(flattened_source, macro_max_depth);
    auto norm = normalize_latex(expanded.text, options);
    auto title_norm = normalize_latex(title, options);
    auto abstract_norm = normalize_latex(abstract, options);

    doc.title = title_norm.body;
    doc.abstract = abstract_norm.body;
    doc.body = std::move(norm.body);
    doc.char_count = norm.char_count;
    doc.math_span_count = norm.math_span_count + abstract_norm.math_span_count;
    doc.removed_counters = std::move(norm.removed_counters);
    if (expanded.depth_exceeded > 0) {
        doc.removed_counters["depth_exceeded"] += expanded.depth_exceeded;
    }
    doc.curriculum = segment_curriculum(doc);
    return doc;
}

}  // namespace texmill::latexnorm
