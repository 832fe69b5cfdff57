#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "texmill/latexnorm.hpp"

namespace texmill::mixture {

class UnreadableSource : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Stage { Pretraining, Posttraining };

const char* to_string(Stage s);
std::optional<Stage> stage_from_string(const std::string& s);

struct SourceSpec {
    std::string name;
    std::string input_path;  // "@pipeline" resolves to the pipeline's clean corpus
    Stage stage = Stage::Pretraining;
    double weight = 1.0;
};

struct SourceStats {
    std::string name;
    std::uint64_t docs_read = 0;
    std::uint64_t emissions = 0;
};

struct ShardInfo {
    std::string path;  // relative to the output directory
    Stage stage = Stage::Pretraining;
    std::uint64_t doc_count = 0;
    std::uint64_t byte_count = 0;
};

struct StageTotals {
    std::uint64_t docs = 0;
    std::uint64_t bytes = 0;
};

struct MixtureManifest {
    std::string toolkit_version;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::uint64_t shard_target_bytes = 0;
    std::vector<SourceSpec> sources;
    std::vector<SourceStats> source_stats;
    std::vector<ShardInfo> shards;
    StageTotals pretraining;
    StageTotals posttraining;
    std::vector<std::string> empty_sources;
    std::vector<std::string> source_errors;
};

/// One input document for assembly.
struct MixDoc {
    std::string id;
    std::string text;
    std::vector<latexnorm::Span> stage1_spans;
};

/// Per-document emission count for weight w: floor(w) plus one more when the
/// seeded draw keyed by (seed, source, doc id) lands below frac(w). Exposed
/// so tests can replay decisions independently.
std::uint64_t emission_count(std::uint64_t seed, const std::string& source_name,
                             const std::string& doc_id, double weight);

/// Assemble weighted shards under out_dir. Documents are emitted per weight,
/// shuffled within stage by a seeded permutation, and cut near
/// shard_target_bytes without splitting documents. Stages never share a
/// shard. Deterministic: same seed and inputs give byte-identical output.
MixtureManifest assemble_mixture(const std::vector<SourceSpec>& sources, std::uint64_t seed,
                                 std::uint64_t shard_target_bytes, const std::string& out_dir,
                                 const std::string& config_hash = "");

nlohmann::ordered_json manifest_to_json(const MixtureManifest& manifest);
void write_manifest(const MixtureManifest& manifest, const std::string& path);

/// Counters collected from one pipeline run; keys are stable identifiers
/// (reject reasons, archive error kinds, extraction loss kinds).
struct PipelineCounters {
    std::uint64_t input_records = 0;
    std::uint64_t malformed_lines = 0;
    std::map<std::string, std::uint64_t> rejected;
    std::map<std::string, std::uint64_t> archive_failures;
    std::map<std::string, std::uint64_t> extraction_losses;
    std::uint64_t dedup_exact = 0;
    std::uint64_t dedup_near = 0;
    std::uint64_t final_docs = 0;
    std::uint64_t final_bytes = 0;
};

struct YieldReport {
    PipelineCounters counters;
    double est_tokens_low = 0.0;
    double est_tokens_high = 0.0;
    bool accounting_ok = false;  // input = final + every attributed loss
};

/// Full-accounting yield report; a mismatch is reported with a hard warning
/// flag rather than an error (it signals a pipeline bug).
YieldReport yield_report(const PipelineCounters& counters);

nlohmann::ordered_json yield_to_json(const YieldReport& report);
std::string render_yield_table(const YieldReport& report);

}  // namespace texmill::mixture
