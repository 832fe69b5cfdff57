#include "texmill/budget.hpp"

#include <stdexcept>

namespace texmill::budget {

void ArchitectureSpec::validate() const {
    if (d_model == 0 || layers == 0 || heads == 0 || kv_heads == 0 || ffn_dim == 0 ||
        vocab == 0 || context_length == 0) {
        throw std::invalid_argument("architecture spec: all dimensions must be positive");
    }
    if (d_model % heads != 0) {
        throw std::invalid_argument("architecture spec: heads must divide d_model");
    }
}

std::uint64_t chinchilla_tokens(std::uint64_t params) {
    if (params == 0) throw std::invalid_argument("chinchilla_tokens: params must be positive");
    return 20 * params;
}

GbBand tokens_to_gb(double tokens) {
    if (tokens < 0) throw std::invalid_argument("tokens_to_gb: tokens must be non-negative");
    return {3.0 * tokens / 1e9, 4.0 * tokens / 1e9};
}

TokenBand gb_to_tokens(double gb) {
    if (gb < 0) throw std::invalid_argument("gb_to_tokens: gb must be non-negative");
    return {gb / 4.0 * 1e9, gb / 3.0 * 1e9};
}

DataRegime classify_regime(double gb) {
    if (gb < 0) throw std::invalid_argument("classify_regime: gb must be non-negative");
    if (gb < 10.0) return DataRegime::TooSmall;
    if (gb <= 50.0) return DataRegime::Borderline;
    if (gb <= 300.0) return DataRegime::Suitable;
    return DataRegime::Ample;
}

TokensPerParam tokens_per_param(double tokens, double params) {
    if (params <= 0) throw std::invalid_argument("tokens_per_param: params must be positive");
    TokensPerParam out;
    out.ratio = tokens / params;
    if (out.ratio == 20.0) {
        out.regime = TrainingRegime::ComputeOptimal;
    } else if (out.ratio > 20.0) {
        out.regime = TrainingRegime::DataRich;
    } else {
        out.regime = TrainingRegime::UnderTrained;
    }
    return out;
}

std::uint64_t estimate_params(const ArchitectureSpec& arch) {
    const std::uint64_t d = arch.d_model;
    const std::uint64_t embeddings = (arch.tied_embeddings ? 1ULL : 2ULL) * arch.vocab * d;
    const std::uint64_t per_layer = 4 * d * d + 3 * d * arch.ffn_dim + 2 * d;
    return embeddings + arch.layers * per_layer + d;
}

const char* to_string(DataRegime r) {
    switch (r) {
        case DataRegime::TooSmall: return "TooSmall";
        case DataRegime::Borderline: return "Borderline";
        case DataRegime::Suitable: return "Suitable";
        case DataRegime::Ample: return "Ample";
    }
    return "?";
}

const char* to_string(TrainingRegime r) {
    switch (r) {
        case TrainingRegime::UnderTrained: return "under-trained";
        case TrainingRegime::ComputeOptimal: return "compute-optimal";
        case TrainingRegime::DataRich: return "data-rich";
    }
    return "?";
}

}  // namespace texmill::budget
