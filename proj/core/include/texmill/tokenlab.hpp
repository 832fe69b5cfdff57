#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace texmill::tokenlab {

class VocabTooSmall : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class UnencodableInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class UnknownId : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class ModelFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SpecialTokens {
    std::string bos = "<s>";
    std::string eos = "</s>";
    std::string unk = "<unk>";
    std::string pad = "<pad>";
    int bos_id = 0;
    int eos_id = 1;
    int unk_id = 2;
    int pad_id = 3;
};

struct TokenizerModel {
    std::unordered_map<std::string, int> vocab;  // token -> id, ids dense [0, |vocab|)
    std::vector<std::string> id_to_token;
    std::vector<std::pair<std::string, std::string>> merges;  // rank order
    SpecialTokens specials;
    bool byte_fallback = false;

    int vocab_size() const { return static_cast<int>(id_to_token.size()); }
    int token_id(const std::string& token) const;  // -1 when absent
};

/// Whitespace-splitting pre-tokenizer that keeps backslash commands attached
/// to their following letters; whitespace runs are pre-tokens of their own so
/// decode(encode(text)) is exact.
std::vector<std::string> pretokenize(std::string_view text);

/// Train a BPE tokenizer: repeatedly merge the most frequent adjacent symbol
/// pair (ties: lexicographically smallest merged string), stopping at
/// target_vocab total text tokens (alphabet + merges; specials not counted)
/// or when no pair occurs twice.
TokenizerModel train_bpe(const std::vector<std::string>& corpus, int target_vocab,
                         bool byte_fallback = false);

std::vector<int> encode(const TokenizerModel& model, std::string_view text);

struct TokenSpan {
    int id = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// encode plus byte offsets into the input; used by fragmentation metrics.
std::vector<TokenSpan> encode_with_offsets(const TokenizerModel& model, std::string_view text);

std::string decode(const TokenizerModel& model, const std::vector<int>& ids);

struct TokenStats {
    std::uint64_t docs = 0;
    std::uint64_t total_tokens = 0;
    std::uint64_t total_bytes = 0;
    std::uint64_t total_words = 0;
    double mean_tokens_per_doc = 0.0;
    double bytes_per_token = 0.0;
    double tokens_per_word = 0.0;
};

TokenStats corpus_token_stats(const TokenizerModel& model, const std::vector<std::string>& docs);

struct CommandFragmentation {
    std::string command;
    std::uint64_t seen = 0;
    std::uint64_t intact = 0;
};

struct FragmentationReport {
    std::uint64_t commands_seen = 0;
    std::uint64_t commands_intact = 0;
    double fragmentation_rate = 0.0;  // 1 - intact/seen; 0 when nothing seen
    std::vector<CommandFragmentation> top_commands;
};

/// A LaTeX command occurrence (backslash + letters) counts intact iff one
/// token's span equals the command exactly.
FragmentationReport fragmentation_stats(const TokenizerModel& model,
                                        const std::vector<std::string>& docs,
                                        std::size_t top_n = 10);

struct ModelConfigSummary {
    std::string model_type;
    std::vector<std::string> architectures;
    std::int64_t vocab_size = 0;
    std::string tokenizer_class_hint;
    std::set<std::string> special_token_names;
};

enum class LintSeverity { Error, Warning, Info };

struct LintDiagnostic {
    std::string code;
    LintSeverity severity = LintSeverity::Info;
    std::string message;
};

/// Pure, order-stable compatibility lint between a model config and a
/// tokenizer; never fails, only reports.
std::vector<LintDiagnostic> lint_model_config(const ModelConfigSummary& config,
                                              const TokenizerModel& tokenizer);

ModelConfigSummary parse_model_config(const std::string& json_text);

void save_tokenizer(const TokenizerModel& model, const std::string& path);
TokenizerModel load_tokenizer(const std::string& path);

const char* to_string(LintSeverity s);

}  // namespace texmill::tokenlab
