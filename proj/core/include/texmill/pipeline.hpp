#pragma once

#include <optional>
#include <string>
#include <vector>

#include "texmill/config.hpp"
#include "texmill/latexnorm.hpp"
#include "texmill/metadata.hpp"
#include "texmill/mixture.hpp"

namespace texmill::pipeline {

class FatalIOError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class OutcomeKind { Accepted, Rejected, ArchiveFailure, ExtractionLoss };

const char* to_string(OutcomeKind k);

/// One paper's fate: accepted with its clean document, or attributed to
/// exactly one loss bucket (detail = reason / error kind).
struct RecordOutcome {
    OutcomeKind kind = OutcomeKind::Accepted;
    std::string detail;
    std::vector<std::string> reasons;  // all filter reasons when rejected
    std::optional<latexnorm::CleanDocument> doc;
};

struct PipelineResult {
    mixture::MixtureManifest manifest;
    mixture::YieldReport report;
};

/// Default archive lookup: explicit source_path when the record carries one,
/// otherwise archives_dir/<id> with '/' sanitized and common extensions tried.
std::optional<std::string> resolve_archive_path(const metadata::PaperRecord& record,
                                                const std::string& archives_dir);

/// Validate, extract, flatten, clean, and filter one paper.
RecordOutcome process_record(const metadata::PaperRecord& record, const PipelineConfig& config);

/// Full run: ingest -> validate -> flatten -> normalize -> filter -> dedup ->
/// mix -> report, with a per-paper progress ledger for resume. Partial
/// failures are counted, never fatal. Output is deterministic for a fixed
/// config and seed, independent of worker count.
PipelineResult run_pipeline(const PipelineConfig& config);

/// Worker count after applying the TEXMILL_WORKERS environment override.
int effective_workers(const PipelineConfig& config);

nlohmann::ordered_json clean_doc_to_json(const latexnorm::CleanDocument& doc);
latexnorm::CleanDocument clean_doc_from_json(const nlohmann::json& j);

}  // namespace texmill::pipeline
