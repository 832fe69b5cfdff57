#include "texmill/tokenlab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <json.hpp>

namespace texmill::tokenlab {

namespace {

bool is_ascii_letter(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }
bool is_word_char(unsigned char c) { return is_ascii_letter(static_cast<char>(c)) || c >= 0x80; }
bool is_ws(unsigned char c) { return std::isspace(c) != 0; }

size_t codepoint_len(std::string_view s, size_t i) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    size_t len = 1;
    if ((c & 0xe0) == 0xc0) len = 2;
    else if ((c & 0xf0) == 0xe0) len = 3;
    else if ((c & 0xf8) == 0xf0) len = 4;
    if (i + len > s.size()) len = 1;
    return len;
}

std::vector<std::string> split_symbols(std::string_view pretoken) {
    std::vector<std::string> symbols;
    size_t i = 0;
    while (i < pretoken.size()) {
        size_t len = codepoint_len(pretoken, i);
        symbols.emplace_back(pretoken.substr(i, len));
        i += len;
    }
    return symbols;
}

std::string byte_token(unsigned char b) {
    static const char* kHex = "0123456789ABCDEF";
    std::string t = "<0x";
    t.push_back(kHex[b >> 4]);
    t.push_back(kHex[b & 0xf]);
    t.push_back('>');
    return t;
}

int byte_token_value(const std::string& token) {
    if (token.size() != 6 || token.rfind("<0x", 0) != 0 || token[5] != '>') return -1;
    auto hex = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        return -1;
    };
    int hi = hex(token[3]), lo = hex(token[4]);
    if (hi < 0 || lo < 0) return -1;
    return hi * 16 + lo;
}

// Per-pass encoding state; memoizes pre-token segmentations since corpus
// text repeats words heavily.
struct EncodeContext {
    const TokenizerModel& model;
    // pre-token -> (final symbols, symbol lengths) after all merges
    std::map<std::string, std::vector<std::string>, std::less<>> memo;

    explicit EncodeContext(const TokenizerModel& m) : model(m) {}

    // Applies merges strictly in rank order, one left-to-right pass per
    // merge; identical to replaying the merge list step by step.
    std::vector<std::string> merge_symbols(std::string_view pretoken) {
        std::vector<std::string> symbols = split_symbols(pretoken);
        for (const auto& [left, right] : model.merges) {
            if (symbols.size() < 2) break;
            bool any = false;
            for (size_t i = 0; i + 1 < symbols.size(); ++i) {
                if (symbols[i] == left && symbols[i + 1] == right) {
                    any = true;
                    break;
                }
            }
            if (!any) continue;
            std::vector<std::string> merged;
            merged.reserve(symbols.size());
            size_t i = 0;
            while (i < symbols.size()) {
                if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
                    merged.push_back(left + right);
                    i += 2;
                } else {
                    merged.push_back(std::move(symbols[i]));
                    ++i;
                }
            }
            symbols = std::move(merged);
        }
        return symbols;
    }

    void encode_pretoken(std::string_view pretoken, size_t base_offset,
                         std::vector<TokenSpan>& out) {
        auto it = memo.find(pretoken);
        if (it == memo.end()) {
            it = memo.emplace(std::string(pretoken), merge_symbols(pretoken)).first;
        }
        const std::vector<std::string>& symbols = it->second;
        std::vector<std::pair<size_t, size_t>> spans;
        spans.reserve(symbols.size());
        size_t off = base_offset;
        for (const auto& s : symbols) {
            spans.emplace_back(off, off + s.size());
            off += s.size();
        }

        for (size_t i = 0; i < symbols.size(); ++i) {
            int id = model.token_id(symbols[i]);
            if (id >= 0) {
                out.push_back({id, spans[i].first, spans[i].second});
                continue;
            }
            if (model.byte_fallback) {
                bool all_bytes_known = true;
                std::vector<TokenSpan> bytes;
                for (size_t b = 0; b < symbols[i].size(); ++b) {
                    int bid = model.token_id(
                        byte_token(static_cast<unsigned char>(symbols[i][b])));
                    if (bid < 0) {
                        all_bytes_known = false;
                        break;
                    }
                    bytes.push_back({bid, spans[i].first + b, spans[i].first + b + 1});
                }
                if (all_bytes_known) {
                    out.insert(out.end(), bytes.begin(), bytes.end());
                    continue;
                }
            }
            if (model.specials.unk_id >= 0 &&
                model.specials.unk_id < model.vocab_size()) {
                out.push_back({model.specials.unk_id, spans[i].first, spans[i].second});
                continue;
            }
            throw UnencodableInput("encode: symbol '" + symbols[i] +
                                   "' not in vocab and no unk defined");
        }
    }
};

}  // namespace

int TokenizerModel::token_id(const std::string& token) const {
    auto it = vocab.find(token);
    return it == vocab.end() ? -1 : it->second;
}

std::vector<std::string> pretokenize(std::string_view text) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        size_t j = i;
        if (is_ws(c)) {
            while (j < text.size() && is_ws(static_cast<unsigned char>(text[j]))) ++j;
        } else if (c == '\\' && i + 1 < text.size() && is_ascii_letter(text[i + 1])) {
            j = i + 1;
            while (j < text.size() && is_ascii_letter(text[j])) ++j;
        } else if (is_word_char(c)) {
            while (j < text.size() && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
        } else if (is_ascii_digit(static_cast<char>(c))) {
            while (j < text.size() && is_ascii_digit(text[j])) ++j;
        } else {
            j = i + codepoint_len(text, i);
        }
        out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

TokenizerModel train_bpe(const std::vector<std::string>& corpus, int target_vocab,
                         bool byte_fallback) {
    // unique pre-tokens with multiplicities
    std::map<std::string, std::uint64_t> pretoken_counts;
    for (const auto& doc : corpus) {
        for (auto& p : pretokenize(doc)) ++pretoken_counts[p];
    }

    std::vector<std::vector<std::string>> sequences;
    std::vector<std::uint64_t> weights;
    std::set<std::string> alphabet;
    for (const auto& [pretoken, count] : pretoken_counts) {
        auto symbols = split_symbols(pretoken);
        for (const auto& s : symbols) alphabet.insert(s);
        sequences.push_back(std::move(symbols));
        weights.push_back(count);
    }

    if (target_vocab < static_cast<int>(alphabet.size())) {
        throw VocabTooSmall("train_bpe: target vocab " + std::to_string(target_vocab) +
                            " is below alphabet size " + std::to_string(alphabet.size()));
    }

    TokenizerModel model;
    model.byte_fallback = byte_fallback;

    const int max_merges = target_vocab - static_cast<int>(alphabet.size());
    for (int m = 0; m < max_merges; ++m) {
        std::map<std::pair<std::string, std::string>, std::uint64_t> pair_counts;
        for (size_t s = 0; s < sequences.size(); ++s) {
            const auto& seq = sequences[s];
            for (size_t i = 0; i + 1 < seq.size(); ++i) {
                pair_counts[{seq[i], seq[i + 1]}] += weights[s];
            }
        }
        // most frequent pair; ties by lexicographic merged string, then left
        const std::pair<std::string, std::string>* best = nullptr;
        std::uint64_t best_count = 0;
        std::string best_merged;
        for (const auto& [pair, count] : pair_counts) {
            std::string merged = pair.first + pair.second;
            if (count > best_count ||
                (count == best_count && best &&
                 (merged < best_merged || (merged == best_merged && pair.first < best->first)))) {
                best = &pair;
                best_count = count;
                best_merged = std::move(merged);
            }
        }
        if (!best || best_count < 2) break;  // no pair repeats

        model.merges.push_back(*best);
        const auto [left, right] = *best;
        for (auto& seq : sequences) {
            std::vector<std::string> merged;
            merged.reserve(seq.size());
            size_t i = 0;
            while (i < seq.size()) {
                if (i + 1 < seq.size() && seq[i] == left && seq[i + 1] == right) {
                    merged.push_back(left + right);
                    i += 2;
                } else {
                    merged.push_back(std::move(seq[i]));
                    ++i;
                }
            }
            seq = std::move(merged);
        }
    }

    // vocab: specials, optional byte tokens, alphabet, then merge products
    auto add_token = [&](const std::string& t) {
        if (model.vocab.count(t)) return;
        int id = static_cast<int>(model.id_to_token.size());
        model.vocab.emplace(t, id);
        model.id_to_token.push_back(t);
    };
    add_token(model.specials.bos);
    add_token(model.specials.eos);
    add_token(model.specials.unk);
    add_token(model.specials.pad);
    model.specials.bos_id = model.vocab[model.specials.bos];
    model.specials.eos_id = model.vocab[model.specials.eos];
    model.specials.unk_id = model.vocab[model.specials.unk];
    model.specials.pad_id = model.vocab[model.specials.pad];
    if (byte_fallback) {
        for (int b = 0; b < 256; ++b) add_token(byte_token(static_cast<unsigned char>(b)));
    }
    for (const auto& s : alphabet) add_token(s);
    for (const auto& [l, r] : model.merges) add_token(l + r);
    return model;
}

std::vector<TokenSpan> encode_with_offsets(const TokenizerModel& model, std::string_view text) {
    EncodeContext ctx(model);
    std::vector<TokenSpan> out;
    size_t offset = 0;
    for (const auto& pretoken : pretokenize(text)) {
        ctx.encode_pretoken(pretoken, offset, out);
        offset += pretoken.size();
    }
    return out;
}

std::vector<int> encode(const TokenizerModel& model, std::string_view text) {
    std::vector<int> ids;
    for (const auto& span : encode_with_offsets(model, text)) ids.push_back(span.id);
    return ids;
}

std::string decode(const TokenizerModel& model, const std::vector<int>& ids) {
    std::string out;
    for (int id : ids) {
        if (id < 0 || id >= model.vocab_size()) {
            throw UnknownId("decode: id " + std::to_string(id) + " outside vocab");
        }
        if (id == model.specials.bos_id || id == model.specials.eos_id ||
            id == model.specials.pad_id) {
            continue;
        }
        const std::string& token = model.id_to_token[static_cast<size_t>(id)];
        int byte = model.byte_fallback ? byte_token_value(token) : -1;
        if (byte >= 0) {
            out.push_back(static_cast<char>(byte));
        } else {
            out += token;
        }
    }
    return out;
}

TokenStats corpus_token_stats(const TokenizerModel& model, const std::vector<std::string>& docs) {
    TokenStats stats;
    EncodeContext ctx(model);
    for (const auto& doc : docs) {
        ++stats.docs;
        stats.total_bytes += doc.size();
        std::vector<TokenSpan> spans;
        size_t offset = 0;
        for (const auto& pretoken : pretokenize(doc)) {
            ctx.encode_pretoken(pretoken, offset, spans);
            offset += pretoken.size();
        }
        stats.total_tokens += spans.size();
        bool in_word = false;
        for (unsigned char c : doc) {
            if (is_ws(c)) {
                in_word = false;
            } else if (!in_word) {
                ++stats.total_words;
                in_word = true;
            }
        }
    }
    if (stats.docs > 0) {
        stats.mean_tokens_per_doc =
            static_cast<double>(stats.total_tokens) / static_cast<double>(stats.docs);
    }
    if (stats.total_tokens > 0) {
        stats.bytes_per_token =
            static_cast<double>(stats.total_bytes) / static_cast<double>(stats.total_tokens);
    }
    if (stats.total_words > 0) {
        stats.tokens_per_word =
            static_cast<double>(stats.total_tokens) / static_cast<double>(stats.total_words);
    }
    return stats;
}

FragmentationReport fragmentation_stats(const TokenizerModel& model,
                                        const std::vector<std::string>& docs,
                                        std::size_t top_n) {
    FragmentationReport report;
    std::map<std::string, CommandFragmentation> per_command;
    EncodeContext ctx(model);

    for (const auto& doc : docs) {
        std::vector<TokenSpan> spans;
        size_t offset = 0;
        for (const auto& pretoken : pretokenize(doc)) {
            ctx.encode_pretoken(pretoken, offset, spans);
            offset += pretoken.size();
        }
        std::map<std::pair<size_t, size_t>, int> span_set;
        for (const auto& s : spans) span_set[{s.begin, s.end}] = s.id;

        size_t i = 0;
        while (i < doc.size()) {
            if (doc[i] == '\\' && i + 1 < doc.size() && is_ascii_letter(doc[i + 1])) {
                size_t j = i + 1;
                while (j < doc.size() && is_ascii_letter(doc[j])) ++j;
                std::string cmd = doc.substr(i, j - i);
                auto& entry = per_command[cmd];
                entry.command = cmd;
                ++entry.seen;
                ++report.commands_seen;
                if (span_set.count({i, j})) {
                    ++entry.intact;
                    ++report.commands_intact;
                }
                i = j;
            } else {
                ++i;
            }
        }
    }

    if (report.commands_seen > 0) {
        report.fragmentation_rate = 1.0 - static_cast<double>(report.commands_intact) /
                                              static_cast<double>(report.commands_seen);
    }

    std::vector<CommandFragmentation> all;
    for (auto& [cmd, entry] : per_command) all.push_back(entry);
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.seen != b.seen) return a.seen > b.seen;
        return a.command < b.command;
    });
    if (all.size() > top_n) all.resize(top_n);
    report.top_commands = std::move(all);
    return report;
}

namespace {

struct FamilyInfo {
    std::string tokenizer_family;  // "sentencepiece" or "bpe"
    std::string arch_marker;
};

const std::map<std::string, FamilyInfo>& model_type_table() {
    static const std::map<std::string, FamilyInfo> kTable = {
        {"llama", {"sentencepiece", "Llama"}},   {"mistral", {"sentencepiece", "Mistral"}},
        {"gemma", {"sentencepiece", "Gemma"}},   {"t5", {"sentencepiece", "T5"}},
        {"deepseek", {"bpe", "Deepseek"}},       {"gpt2", {"bpe", "GPT2"}},
        {"gpt_neox", {"bpe", "GPTNeoX"}},        {"qwen2", {"bpe", "Qwen2"}},
        {"falcon", {"bpe", "Falcon"}},           {"bloom", {"bpe", "Bloom"}},
    };
    return kTable;
}

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

// Map a tokenizer_class hint (family keyword or known class name) onto a
// family; empty when unknown.
std::string hint_family(const std::string& hint) {
    std::string h = to_lower(hint);
    if (h.empty()) return "";
    if (h.find("sentencepiece") != std::string::npos) return "sentencepiece";
    static const std::map<std::string, std::string> kClasses = {
        {"llamatokenizer", "sentencepiece"},  {"llamatokenizerfast", "sentencepiece"},
        {"gemmatokenizer", "sentencepiece"},  {"t5tokenizer", "sentencepiece"},
        {"mistraltokenizer", "sentencepiece"}, {"gpt2tokenizer", "bpe"},
        {"gpt2tokenizerfast", "bpe"},         {"gptneoxtokenizer", "bpe"},
        {"gptneoxtokenizerfast", "bpe"},      {"deepseektokenizer", "bpe"},
        {"qwen2tokenizer", "bpe"},            {"bloomtokenizer", "bpe"},
        {"falcontokenizer", "bpe"},
    };
    if (auto it = kClasses.find(h); it != kClasses.end()) return it->second;
    if (h.find("bpe") != std::string::npos) return "bpe";
    return "";
}

}  // namespace

std::vector<LintDiagnostic> lint_model_config(const ModelConfigSummary& config,
                                              const TokenizerModel& tokenizer) {
    std::vector<LintDiagnostic> diags;

    if (config.vocab_size != tokenizer.vocab_size()) {
        diags.push_back({"VocabSizeMismatch", LintSeverity::Error,
                         "config vocab_size " + std::to_string(config.vocab_size) +
                             " != tokenizer vocab " + std::to_string(tokenizer.vocab_size()) +
                             "; embedding rows will not align and loading fails at runtime"});
    }

    const auto& table = model_type_table();
    auto family_it = table.find(to_lower(config.model_type));
    bool family_matched = true;
    if (family_it != table.end()) {
        const std::string hinted = hint_family(config.tokenizer_class_hint);
        if (!hinted.empty() && hinted != family_it->second.tokenizer_family) {
            family_matched = false;
            diags.push_back(
                {"TokenizerClassMismatch", LintSeverity::Error,
                 "model_type '" + config.model_type + "' dispatches a " +
                     family_it->second.tokenizer_family + " tokenizer but the files hint '" +
                     config.tokenizer_class_hint + "'; token ids will not align"});
        }
    } else if (!config.model_type.empty()) {
        diags.push_back({"UnknownModelType", LintSeverity::Info,
                         "model_type '" + config.model_type +
                             "' is not in the shipped family table; lint is incomplete"});
    }

    const bool bos_ok = tokenizer.specials.bos_id >= 0 &&
                        tokenizer.specials.bos_id < tokenizer.vocab_size() &&
                        !tokenizer.specials.bos.empty();
    const bool eos_ok = tokenizer.specials.eos_id >= 0 &&
                        tokenizer.specials.eos_id < tokenizer.vocab_size() &&
                        !tokenizer.specials.eos.empty();
    if (!bos_ok || !eos_ok) {
        diags.push_back({"MissingSpecialTokens", LintSeverity::Warning,
                         "tokenizer does not define both bos and eos tokens"});
    }

    if (family_it != table.end() && family_matched && !config.architectures.empty()) {
        bool arch_matches = false;
        for (const auto& arch : config.architectures) {
            if (arch.find(family_it->second.arch_marker) != std::string::npos) {
                arch_matches = true;
                break;
            }
        }
        if (!arch_matches) {
            diags.push_back({"ModelTypeArchitectureMismatch", LintSeverity::Info,
                             "model_type '" + config.model_type +
                                 "' does not correspond to architectures list; this may load "
                                 "but breaks downstream tooling"});
        }
    }

    return diags;
}

ModelConfigSummary parse_model_config(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ModelFormatError("model config: invalid json");
    }
    ModelConfigSummary summary;
    summary.model_type = j.value("model_type", "");
    if (j.contains("architectures") && j["architectures"].is_array()) {
        for (const auto& a : j["architectures"]) {
            if (a.is_string()) summary.architectures.push_back(a.get<std::string>());
        }
    }
    summary.vocab_size = j.value("vocab_size", std::int64_t{0});
    summary.tokenizer_class_hint = j.value("tokenizer_class", "");
    if (j.contains("special_tokens") && j["special_tokens"].is_array()) {
        for (const auto& s : j["special_tokens"]) {
            if (s.is_string()) summary.special_token_names.insert(s.get<std::string>());
        }
    }
    if (summary.vocab_size <= 0) {
        throw ModelFormatError("model config: vocab_size must be positive");
    }
    return summary;
}

void save_tokenizer(const TokenizerModel& model, const std::string& path) {
    nlohmann::ordered_json j;
    j["format"] = "texmill-tokenizer";
    j["version"] = 1;
    j["byte_fallback"] = model.byte_fallback;
    j["specials"] = {
        {"bos", {{"token", model.specials.bos}, {"id", model.specials.bos_id}}},
        {"eos", {{"token", model.specials.eos}, {"id", model.specials.eos_id}}},
        {"unk", {{"token", model.specials.unk}, {"id", model.specials.unk_id}}},
        {"pad", {{"token", model.specials.pad}, {"id", model.specials.pad_id}}},
    };
    j["vocab"] = model.id_to_token;
    nlohmann::ordered_json merges = nlohmann::ordered_json::array();
    for (const auto& [l, r] : model.merges) merges.push_back({l, r});
    j["merges"] = std::move(merges);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ModelFormatError("tokenizer: cannot write " + path);
    out << j.dump(2) << '\n';
}

TokenizerModel load_tokenizer(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelFormatError("tokenizer: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || j.value("format", "") != "texmill-tokenizer" ||
        j.value("version", 0) != 1) {
        throw ModelFormatError("tokenizer: unrecognized file format");
    }
    TokenizerModel model;
    model.byte_fallback = j.value("byte_fallback", false);
    model.id_to_token = j.at("vocab").get<std::vector<std::string>>();
    for (size_t i = 0; i < model.id_to_token.size(); ++i) {
        model.vocab.emplace(model.id_to_token[i], static_cast<int>(i));
    }
    for (const auto& m : j.at("merges")) {
        model.merges.emplace_back(m.at(0).get<std::string>(), m.at(1).get<std::string>());
    }
    const auto& sp = j.at("specials");
    auto load_special = [&](const char* key, std::string& token, int& id) {
        token = sp.at(key).at("token").get<std::string>();
        id = sp.at(key).at("id").get<int>();
    };
    load_special("bos", model.specials.bos, model.specials.bos_id);
    load_special("eos", model.specials.eos, model.specials.eos_id);
    load_special("unk", model.specials.unk, model.specials.unk_id);
    load_special("pad", model.specials.pad, model.specials.pad_id);
    return model;
}

const char* to_string(LintSeverity s) {
    switch (s) {
        case LintSeverity::Error: return "error";
        case LintSeverity::Warning: return "warning";
        case LintSeverity::Info: return "info";
    }
    return "?";
}

}  // namespace texmill::tokenlab
