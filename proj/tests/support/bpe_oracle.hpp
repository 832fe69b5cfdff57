#pragma once

// Independent brute-force BPE oracle. Re-implements pre-tokenization, pair
// counting, and single-step merge application from the documented rules,
// sharing no code with the trainer/encoder it checks.

#include <cctype>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "texmill/tokenlab.hpp"

namespace texmill::testsupport::bpe_oracle {

inline bool is_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_word(unsigned char c) { return is_letter(static_cast<char>(c)) || c >= 0x80; }

inline std::vector<std::string> pretokenize(const std::string& text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        std::size_t j = i;
        if (std::isspace(c)) {
            while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        } else if (c == '\\' && i + 1 < text.size() && is_letter(text[i + 1])) {
            j = i + 1;
            while (j < text.size() && is_letter(text[j])) ++j;
        } else if (is_word(c)) {
            while (j < text.size() && is_word(static_cast<unsigned char>(text[j]))) ++j;
        } else if (is_digit(static_cast<char>(c))) {
            while (j < text.size() && is_digit(text[j])) ++j;
        } else {
            std::size_t len = 1;
            if ((c & 0xe0) == 0xc0) len = 2;
            else if ((c & 0xf0) == 0xe0) len = 3;
            else if ((c & 0xf8) == 0xf0) len = 4;
            if (i + len > text.size()) len = 1;
            j = i + len;
        }
        out.push_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::vector<std::string> symbols(const std::string& pretoken) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < pretoken.size()) {
        unsigned char c = static_cast<unsigned char>(pretoken[i]);
        std::size_t len = 1;
        if ((c & 0xe0) == 0xc0) len = 2;
        else if ((c & 0xf0) == 0xe0) len = 3;
        else if ((c & 0xf8) == 0xf0) len = 4;
        if (i + len > pretoken.size()) len = 1;
        out.push_back(pretoken.substr(i, len));
        i += len;
    }
    return out;
}

using Sequences = std::vector<std::vector<std::string>>;

inline Sequences sequences(const std::vector<std::string>& corpus) {
    Sequences seqs;
    for (const auto& doc : corpus) {
        for (const auto& p : pretokenize(doc)) seqs.push_back(symbols(p));
    }
    return seqs;
}

/// One training step: highest pair count, ties by lexicographically smallest
/// merged string then left symbol; false when no pair occurs twice.
inline bool step(Sequences& seqs, std::pair<std::string, std::string>& merge) {
    std::map<std::pair<std::string, std::string>, std::uint64_t> counts;
    for (const auto& seq : seqs) {
        for (std::size_t i = 0; i + 1 < seq.size(); ++i) counts[{seq[i], seq[i + 1]}]++;
    }
    bool found = false;
    std::uint64_t best_count = 0;
    std::string best_merged;
    std::pair<std::string, std::string> best;
    for (const auto& [pair, count] : counts) {
        const std::string merged = pair.first + pair.second;
        if (!found || count > best_count ||
            (count == best_count &&
             (merged < best_merged || (merged == best_merged && pair.first < best.first)))) {
            found = true;
            best_count = count;
            best_merged = merged;
            best = pair;
        }
    }
    if (!found || best_count < 2) return false;
    merge = best;
    for (auto& seq : seqs) {
        std::vector<std::string> out;
        std::size_t i = 0;
        while (i < seq.size()) {
            if (i + 1 < seq.size() && seq[i] == merge.first && seq[i + 1] == merge.second) {
                out.push_back(merge.first + merge.second);
                i += 2;
            } else {
                out.push_back(seq[i]);
                ++i;
            }
        }
        seq = out;
    }
    return true;
}

inline std::vector<std::pair<std::string, std::string>> train(
    const std::vector<std::string>& corpus, int max_merges) {
    auto seqs = sequences(corpus);
    std::vector<std::pair<std::string, std::string>> merges;
    for (int i = 0; i < max_merges; ++i) {
        std::pair<std::string, std::string> m;
        if (!step(seqs, m)) break;
        merges.push_back(m);
    }
    return merges;
}

/// Step-by-step encode: apply merges one rank at a time per pre-token.
inline std::vector<std::string> encode_symbols(const tokenlab::TokenizerModel& model,
                                               const std::string& text) {
    std::vector<std::string> out;
    for (const auto& p : pretokenize(text)) {
        auto syms = symbols(p);
        for (const auto& merge : model.merges) {
            std::vector<std::string> next;
            std::size_t i = 0;
            while (i < syms.size()) {
                if (i + 1 < syms.size() && syms[i] == merge.first &&
                    syms[i + 1] == merge.second) {
                    next.push_back(merge.first + merge.second);
                    i += 2;
                } else {
                    next.push_back(syms[i]);
                    ++i;
                }
            }
            syms = next;
        }
        out.insert(out.end(), syms.begin(), syms.end());
    }
    return out;
}

inline int alphabet_size(const std::vector<std::string>& corpus) {
    std::set<std::string> alphabet;
    for (const auto& seq : sequences(corpus)) {
        for (const auto& s : seq) alphabet.insert(s);
    }
    return static_cast<int>(alphabet.size());
}

}  // namespace texmill::testsupport::bpe_oracle
