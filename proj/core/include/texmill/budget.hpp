#pragma once

#include <cstdint>
#include <string>

namespace texmill::budget {

/// Transformer shape used to derive a parameter count analytically.
struct ArchitectureSpec {
    std::uint64_t d_model = 0;
    std::uint64_t layers = 0;
    std::uint64_t heads = 0;
    std::uint64_t kv_heads = 0;
    std::uint64_t ffn_dim = 0;
    std::uint64_t vocab = 0;
    bool tied_embeddings = false;
    std::uint64_t context_length = 0;

    void validate() const;  // throws std::invalid_argument on nonsense shapes
};

struct GbBand {
    double low_gb = 0.0;
    double high_gb = 0.0;
};

struct TokenBand {
    double low_tokens = 0.0;
    double high_tokens = 0.0;
};

enum class DataRegime { TooSmall, Borderline, Suitable, Ample };

enum class TrainingRegime { UnderTrained, ComputeOptimal, DataRich };

struct TokensPerParam {
    double ratio = 0.0;
    TrainingRegime regime = TrainingRegime::UnderTrained;
};

/// Compute-optimal token budget: exactly 20 tokens per parameter.
std::uint64_t chinchilla_tokens(std::uint64_t params);

/// Token count to a processed-text size band, assuming 3--4 GB per 1e9 tokens.
GbBand tokens_to_gb(double tokens);

/// Inverse conversion: GB of processed text to a token-count band.
TokenBand gb_to_tokens(double gb);

DataRegime classify_regime(double gb);

TokensPerParam tokens_per_param(double tokens, double params);

/// Analytic parameter count: embeddings (doubled when untied), per-layer
/// attention projections 4*d^2, gated feed-forward 3*d*ffn, two norms per
/// layer, and a final norm. Biases assumed absent.
std::uint64_t estimate_params(const ArchitectureSpec& arch);

const char* to_string(DataRegime r);
const char* to_string(TrainingRegime r);

}  // namespace texmill::budget
