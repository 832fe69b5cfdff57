#include "texmill/pipeline.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "texmill/archive.hpp"
#include "texmill/dedup.hpp"

namespace texmill::pipeline {

namespace fs = std::filesystem;

const char* to_string(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::Accepted: return "accepted";
        case OutcomeKind::Rejected: return "rejected";
        case OutcomeKind::ArchiveFailure: return "archive_failure";
        case OutcomeKind::ExtractionLoss: return "extraction_loss";
    }
    return "?";
}

std::optional<std::string> resolve_archive_path(const metadata::PaperRecord& record,
                                                const std::string& archives_dir) {
    if (record.source_path) {
        fs::path p(*record.source_path);
        if (p.is_relative()) p = fs::path(archives_dir) / p;
        if (fs::exists(p)) return p.string();
        return std::nullopt;
    }
    std::string safe_id = record.id;
    for (auto& c : safe_id) {
        if (c == '/') c = '_';
    }
    static const char* kExtensions[] = {".tar.gz", ".tgz", ".tar", ".gz", ".tex"};
    for (const char* ext : kExtensions) {
        fs::path p = fs::path(archives_dir) / (safe_id + ext);
        if (fs::exists(p)) return p.string();
    }
    return std::nullopt;
}

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FatalIOError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

RecordOutcome process_record(const metadata::PaperRecord& record,
                             const PipelineConfig& config) {
    RecordOutcome outcome;

    auto path = resolve_archive_path(record, config.archives_dir);
    if (!path) {
        outcome.kind = OutcomeKind::ExtractionLoss;
        outcome.detail = "missing_archive";
        return outcome;
    }

    archive::SourceArchive src;
    try {
        src = archive::validate_archive(read_file(*path), config.archive_limits, record.id);
    } catch (const archive::ArchiveError& e) {
        outcome.kind = OutcomeKind::ArchiveFailure;
        outcome.detail = archive::to_string(e.kind());
        return outcome;
    }

    archive::FlattenResult flat;
    try {
        auto project = archive::extract_tex_sources(src);
        flat = archive::flatten_project(project, config.flatten);
    } catch (const archive::ArchiveError& e) {
        outcome.kind = OutcomeKind::ExtractionLoss;
        outcome.detail = archive::to_string(e.kind());
        return outcome;
    } catch (const archive::FlattenError& e) {
        outcome.kind = OutcomeKind::ExtractionLoss;
        outcome.detail = archive::to_string(e.kind());
        return outcome;
    }

    auto doc = latexnorm::clean_document(record.id, record.title, record.abstract, flat.text,
                                         config.latex, config.macro_max_depth);
    if (flat.missing_includes > 0) {
        doc.removed_counters["missing_include"] += flat.missing_includes;
    }
    if (flat.depth_exceeded > 0) {
        doc.removed_counters["include_depth"] += flat.depth_exceeded;
    }

    auto verdict = metadata::evaluate_filters(record, doc, config.filter);
    if (!verdict.accepted) {
        outcome.kind = OutcomeKind::Rejected;
        outcome.detail = metadata::to_string(verdict.reasons.front());
        for (auto r : verdict.reasons) outcome.reasons.emplace_back(metadata::to_string(r));
        return outcome;
    }

    outcome.kind = OutcomeKind::Accepted;
    outcome.doc = std::move(doc);
    return outcome;
}

int effective_workers(const PipelineConfig& config) {
    if (const char* env = std::getenv("TEXMILL_WORKERS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return config.workers;
}

nlohmann::ordered_json clean_doc_to_json(const latexnorm::CleanDocument& doc) {
    nlohmann::ordered_json j;
    j["paper_id"] = doc.paper_id;
    j["title"] = doc.title;
    j["abstract"] = doc.abstract;
    j["body"] = doc.body;
    j["char_count"] = doc.char_count;
    j["math_span_count"] = doc.math_span_count;
    j["removed_counters"] = doc.removed_counters;
    nlohmann::ordered_json spans = nlohmann::ordered_json::array();
    for (const auto& s : doc.curriculum.stage1_spans) spans.push_back({s.begin, s.end});
    j["curriculum"] = {{"stage1_spans", std::move(spans)},
                       {"stage2_full", doc.curriculum.stage2_full}};
    return j;
}

latexnorm::CleanDocument clean_doc_from_json(const nlohmann::json& j) {
    latexnorm::CleanDocument doc;
    doc.paper_id = j.at("paper_id").get<std::string>();
    doc.title = j.at("title").get<std::string>();
    doc.abstract = j.at("abstract").get<std::string>();
    doc.body = j.at("body").get<std::string>();
    doc.char_count = j.at("char_count").get<std::uint64_t>();
    doc.math_span_count = j.at("math_span_count").get<std::uint64_t>();
    doc.removed_counters = j.at("removed_counters").get<std::map<std::string, std::uint64_t>>();
    for (const auto& s : j.at("curriculum").at("stage1_spans")) {
        doc.curriculum.stage1_spans.push_back(
            {s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
    }
    doc.curriculum.stage2_full = j.at("curriculum").at("stage2_full").get<bool>();
    return doc;
}

namespace {

nlohmann::ordered_json outcome_to_json(const std::string& id, const RecordOutcome& o) {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["kind"] = to_string(o.kind);
    j["detail"] = o.detail;
    j["reasons"] = o.reasons;
    if (o.doc) j["doc"] = clean_doc_to_json(*o.doc);
    return j;
}

std::optional<RecordOutcome> outcome_from_json(const nlohmann::json& j) {
    RecordOutcome o;
    const std::string kind = j.value("kind", "");
    if (kind == "accepted") o.kind = OutcomeKind::Accepted;
    else if (kind == "rejected") o.kind = OutcomeKind::Rejected;
    else if (kind == "archive_failure") o.kind = OutcomeKind::ArchiveFailure;
    else if (kind == "extraction_loss") o.kind = OutcomeKind::ExtractionLoss;
    else return std::nullopt;
    o.detail = j.value("detail", "");
    if (j.contains("reasons")) o.reasons = j["reasons"].get<std::vector<std::string>>();
    if (o.kind == OutcomeKind::Accepted) {
        if (!j.contains("doc")) return std::nullopt;
        o.doc = clean_doc_from_json(j["doc"]);
    }
    return o;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config) {
    const std::string hash = config_hash(config);
    const fs::path out_dir(config.output_dir);
    fs::create_directories(out_dir / "clean");

    // ---- ingest metadata --------------------------------------------------
    std::ifstream meta_in(config.metadata_path, std::ios::binary);
    if (!meta_in) throw FatalIOError("cannot open metadata file " + config.metadata_path);
    auto lines = metadata::parse_metadata_stream(meta_in);

    mixture::PipelineCounters counters;
    counters.input_records = lines.size();

    // ---- progress ledger (resume support) ---------------------------------
    const fs::path ledger_path = out_dir / "progress.jsonl";
    std::unordered_map<std::string, RecordOutcome> completed;
    if (config.resume && fs::exists(ledger_path)) {
        std::ifstream ledger_in(ledger_path, std::ios::binary);
        std::string line;
        bool header_ok = false;
        if (std::getline(ledger_in, line)) {
            auto header = nlohmann::json::parse(line, nullptr, false);
            header_ok = !header.is_discarded() &&
                        header.value("format", "") == "texmill-progress" &&
                        header.value("config_hash", "") == hash;
        }
        while (header_ok && std::getline(ledger_in, line)) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("id")) continue;  // torn tail write
            auto outcome = outcome_from_json(j);
            if (outcome) completed[j["id"].get<std::string>()] = std::move(*outcome);
        }
    }

    std::ofstream ledger;
    if (config.resume && !completed.empty()) {
        ledger.open(ledger_path, std::ios::binary | std::ios::app);
    } else {
        completed.clear();
        ledger.open(ledger_path, std::ios::binary | std::ios::trunc);
        nlohmann::ordered_json header = {{"format", "texmill-progress"},
                                         {"config_hash", hash}};
        ledger << header.dump() << '\n';
        ledger.flush();
    }

    // ---- per-paper processing (worker pool, deterministic merge) ----------
    struct Task {
        std::size_t line_index;
        const metadata::PaperRecord* record;
    };
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].record) tasks.push_back({i, &*lines[i].record});
        else ++counters.malformed_lines;
    }

    std::vector<std::optional<RecordOutcome>> outcomes(lines.size());
    std::vector<Task> pending;
    for (const auto& task : tasks) {
        auto it = completed.find(task.record->id);
        if (it != completed.end()) {
            outcomes[task.line_index] = it->second;
        } else {
            pending.push_back(task);
        }
    }

    const int workers = std::max(1, effective_workers(config));
    std::atomic<std::size_t> cursor{0};
    std::mutex ledger_mutex;
    auto worker_fn = [&]() {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= pending.size()) return;
            RecordOutcome outcome = process_record(*pending[i].record, config);
            {
                std::lock_guard<std::mutex> lock(ledger_mutex);
                ledger << outcome_to_json(pending[i].record->id, outcome).dump() << '\n';
                ledger.flush();
                outcomes[pending[i].line_index] = std::move(outcome);
            }
        }
    };
    if (workers == 1) {
        worker_fn();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn);
        for (auto& t : pool) t.join();
    }

    // ---- counters + dedup over accepted docs in ingest order --------------
    dedup::DedupIndex index(config.dedup_params, config.dedup_bands);
    std::vector<const latexnorm::CleanDocument*> accepted;  // ingest order
    std::vector<std::string> accepted_ids;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (!lines[i].record) continue;
        const auto& outcome = *outcomes[i];
        switch (outcome.kind) {
            case OutcomeKind::Accepted: {
                const auto& doc = *outcome.doc;
                index.insert(doc.paper_id, accepted.size(), doc.body);
                accepted.push_back(&doc);
                accepted_ids.push_back(doc.paper_id);
                break;
            }
            case OutcomeKind::Rejected:
                ++counters.rejected[outcome.detail];
                break;
            case OutcomeKind::ArchiveFailure:
                ++counters.archive_failures[outcome.detail];
                break;
            case OutcomeKind::ExtractionLoss:
                ++counters.extraction_losses[outcome.detail];
                break;
        }
    }

    if (config.emit_removal_sidecar) {
        std::ofstream sidecar(out_dir / "clean" / "removal_counters.jsonl",
                              std::ios::binary | std::ios::trunc);
        for (const auto* doc : accepted) {
            nlohmann::ordered_json j;
            j["id"] = doc->paper_id;
            j["removed_counters"] = doc->removed_counters;
            j["math_span_count"] = doc->math_span_count;
            sidecar << j.dump() << '\n';
        }
    }

    auto dedup_result = index.cluster(config.dedup_threshold, config.dedup_keep);
    counters.dedup_exact = dedup_result.exact_removed;
    counters.dedup_near = dedup_result.near_removed;

    std::unordered_map<std::string, bool> kept;
    for (const auto& id : dedup_result.kept_ids) kept[id] = true;

    // ---- clean corpus ------------------------------------------------------
    const fs::path clean_path = out_dir / "clean" / "arxiv.jsonl";
    {
        std::ofstream clean_out(clean_path, std::ios::binary | std::ios::trunc);
        if (!clean_out) throw FatalIOError("cannot write " + clean_path.string());
        for (const auto* doc : accepted) {
            if (!kept.count(doc->paper_id)) continue;
            const std::string text = doc->full_text();
            nlohmann::ordered_json j;
            j["id"] = doc->paper_id;
            j["text"] = text;
            nlohmann::ordered_json spans = nlohmann::ordered_json::array();
            for (const auto& s : doc->curriculum.stage1_spans) {
                spans.push_back({s.begin, s.end});
            }
            j["curriculum_stage1_spans"] = std::move(spans);
            clean_out << j.dump() << '\n';
            ++counters.final_docs;
            counters.final_bytes += text.size();
        }
    }

    // ---- mixture ------------------------------------------------------------
    std::vector<mixture::SourceSpec> sources = config.sources;
    if (sources.empty()) {
        sources.push_back({"arxiv", "@pipeline", mixture::Stage::Pretraining, 1.0});
    }
    for (auto& s : sources) {
        if (s.input_path == "@pipeline") s.input_path = clean_path.string();
    }

    PipelineResult result;
    result.manifest =
        mixture::assemble_mixture(sources, config.mix_seed, config.shard_target_bytes,
                                  config.output_dir, hash);
    // the manifest records the configured source paths, not resolved ones
    result.manifest.sources = config.sources.empty()
                                  ? std::vector<mixture::SourceSpec>{{"arxiv", "@pipeline",
                                                                      mixture::Stage::Pretraining,
                                                                      1.0}}
                                  : config.sources;
    mixture::write_manifest(result.manifest, (out_dir / "manifest.json").string());

    result.report = mixture::yield_report(counters);
    {
        std::ofstream report_out(out_dir / "yield_report.json",
                                 std::ios::binary | std::ios::trunc);
        report_out << mixture::yield_to_json(result.report).dump(2) << '\n';
        std::ofstream table_out(out_dir / "yield_report.txt",
                                std::ios::binary | std::ios::trunc);
        table_out << mixture::render_yield_table(result.report);
    }
    return result;
}

}  // namespace texmill::pipeline
