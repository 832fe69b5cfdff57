#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "texmill/archive.hpp"
#include "texmill/dedup.hpp"
#include "texmill/latexnorm.hpp"
#include "texmill/metadata.hpp"
#include "texmill/mixture.hpp"

namespace texmill::pipeline {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Single config for the whole pipeline; every module default overridable.
/// Round-trips losslessly through its JSON form.
struct PipelineConfig {
    std::string metadata_path;
    std::string archives_dir;
    std::string output_dir = "out";
    int workers = 1;
    bool resume = false;

    metadata::FilterPolicy filter;
    archive::ArchiveLimits archive_limits;
    archive::FlattenOptions flatten;
    latexnorm::NormalizeOptions latex;
    int macro_max_depth = 8;
    bool emit_removal_sidecar = false;  // per-document removal counters for audit

    dedup::MinHashParams dedup_params;
    dedup::BandLayout dedup_bands;
    double dedup_threshold = 0.8;
    dedup::KeepPolicy dedup_keep = dedup::KeepPolicy::Earliest;

    std::vector<mixture::SourceSpec> sources;
    std::uint64_t mix_seed = 0;
    std::uint64_t shard_target_bytes = 256ULL * 1024 * 1024;
};

nlohmann::ordered_json config_to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const nlohmann::json& j);

PipelineConfig load_config(const std::string& path);
void save_config(const PipelineConfig& config, const std::string& path);

/// Hash of the semantically relevant configuration; runtime knobs (workers,
/// resume) are excluded so they cannot change outputs or invalidate resume.
std::string config_hash(const PipelineConfig& config);

}  // namespace texmill::pipeline
