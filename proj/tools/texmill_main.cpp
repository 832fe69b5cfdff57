// texmill: corpus construction and training-planning toolkit for LaTeX
// sources. Subcommands cover the full pipeline (ingest) plus standalone
// stages and desk-scale analyzers.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "texmill/archive.hpp"
#include "texmill/budget.hpp"
#include "texmill/config.hpp"
#include "texmill/dedup.hpp"
#include "texmill/latexnorm.hpp"
#include "texmill/metadata.hpp"
#include "texmill/mixture.hpp"
#include "texmill/pipeline.hpp"
#include "texmill/telemetry.hpp"
#include "texmill/tokenlab.hpp"

namespace fs = std::filesystem;
using namespace texmill;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitLosses = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Documents from a .jsonl file ({"text": ...} per line) or a plain text file.
std::vector<std::string> load_docs(const std::vector<std::string>& paths) {
    std::vector<std::string> docs;
    for (const auto& path : paths) {
        if (fs::path(path).extension() == ".jsonl") {
            std::ifstream in(path, std::ios::binary);
            if (!in) throw std::runtime_error("cannot open " + path);
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                auto j = nlohmann::json::parse(line, nullptr, false);
                if (!j.is_discarded() && j.contains("text")) {
                    docs.push_back(j["text"].get<std::string>());
                }
            }
        } else {
            docs.push_back(read_file(path));
        }
    }
    return docs;
}

std::uint64_t total_losses(const mixture::YieldReport& report) {
    std::uint64_t losses = report.counters.malformed_lines;
    for (const auto& [k, v] : report.counters.archive_failures) losses += v;
    for (const auto& [k, v] : report.counters.extraction_losses) losses += v;
    return losses;
}

int cmd_ingest(const std::string& config_path, int workers_override, bool resume_override) {
    auto config = pipeline::load_config(config_path);
    if (workers_override > 0) config.workers = workers_override;
    if (resume_override) config.resume = true;

    auto result = pipeline::run_pipeline(config);
    std::cout << mixture::render_yield_table(result.report);
    std::cout << "shards: " << result.manifest.shards.size() << " (pretraining "
              << result.manifest.pretraining.docs << " docs, posttraining "
              << result.manifest.posttraining.docs << " docs)\n";
    std::cout << "outputs in " << config.output_dir << "\n";
    if (!result.report.accounting_ok) return kExitFatal;
    return total_losses(result.report) > 0 ? kExitLosses : kExitOk;
}

int cmd_validate(const std::vector<std::string>& files, std::uint64_t max_bytes,
                 std::uint64_t max_entries) {
    archive::ArchiveLimits limits{max_bytes, max_entries};
    std::uint64_t failures = 0;
    for (const auto& file : files) {
        try {
            auto arc = archive::validate_archive(read_file(file), limits,
                                                 fs::path(file).stem().string());
            std::uint64_t tex = 0;
            for (const auto& e : arc.entries) {
                if (e.kind == archive::EntryKind::Tex) ++tex;
            }
            std::cout << "OK   " << file << "  entries=" << arc.entries.size()
                      << " tex=" << tex << "\n";
        } catch (const archive::ArchiveError& e) {
            ++failures;
            std::cout << "FAIL " << file << "  " << archive::to_string(e.kind()) << ": "
                      << e.what() << "\n";
        }
    }
    std::cout << files.size() - failures << "/" << files.size() << " archives valid\n";
    return failures > 0 ? kExitLosses : kExitOk;
}

int cmd_extract(const std::string& file, const std::string& out_path, const std::string& id,
                bool concat_fallback) {
    archive::FlattenOptions options;
    options.concat_without_root = concat_fallback;
    auto arc = archive::validate_archive(read_file(file), {}, id);
    auto project = archive::extract_tex_sources(arc);
    auto flat = archive::flatten_project(project, options);
    if (out_path.empty()) {
        std::cout << flat.text;
    } else {
        std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
        out << flat.text;
        std::cerr << "flattened " << flat.inlined_files << " files"
                  << (flat.main_file ? " (main: " + *flat.main_file + ")" : "") << " -> "
                  << out_path << "\n";
    }
    return kExitOk;
}

int cmd_clean(const std::string& file, const std::string& id, const std::string& title,
              const std::string& abstract, const std::string& out_path) {
    auto arc = archive::validate_archive(read_file(file), {}, id);
    auto project = archive::extract_tex_sources(arc);
    auto flat = archive::flatten_project(project, {});
    auto doc = latexnorm::clean_document(id.empty() ? file : id, title, abstract, flat.text);
    auto j = pipeline::clean_doc_to_json(doc);
    if (out_path.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
        out << j.dump(2) << "\n";
    }
    return kExitOk;
}

int cmd_filter(const std::string& config_path) {
    auto config = pipeline::load_config(config_path);
    std::ifstream in(config.metadata_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + config.metadata_path);
    auto lines = metadata::parse_metadata_stream(in);

    std::uint64_t accepted = 0, losses = 0;
    for (const auto& line : lines) {
        if (!line.record) {
            std::cout << "line " << line.line_no << ": malformed (" << line.error << ")\n";
            ++losses;
            continue;
        }
        auto outcome = pipeline::process_record(*line.record, config);
        std::cout << line.record->id << ": " << pipeline::to_string(outcome.kind);
        if (outcome.kind == pipeline::OutcomeKind::Rejected) {
            std::cout << " [";
            for (std::size_t i = 0; i < outcome.reasons.size(); ++i) {
                if (i) std::cout << ", ";
                std::cout << outcome.reasons[i];
            }
            std::cout << "]";
        } else if (!outcome.detail.empty()) {
            std::cout << " (" << outcome.detail << ")";
        }
        std::cout << "\n";
        if (outcome.kind == pipeline::OutcomeKind::Accepted) ++accepted;
        else ++losses;
    }
    std::cout << accepted << " accepted, " << losses << " filtered/lost of " << lines.size()
              << "\n";
    return losses > 0 ? kExitLosses : kExitOk;
}

int cmd_dedup(const std::string& input, double threshold, std::uint32_t k,
              std::uint32_t shingle_width, std::uint64_t seed, std::uint32_t bands,
              std::uint32_t rows, const std::string& index_out) {
    dedup::MinHashParams params{k, shingle_width, seed};
    dedup::BandLayout layout{bands, rows};
    dedup::DedupIndex index(params, layout);

    std::ifstream in(input, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + input);
    std::string line;
    std::uint64_t ingest = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("id") || !j.contains("text")) continue;
        index.insert(j["id"].get<std::string>(), ingest++, j["text"].get<std::string>());
    }

    auto result = index.cluster(threshold);
    nlohmann::ordered_json out;
    out["kept"] = result.kept_ids;
    nlohmann::ordered_json clusters = nlohmann::ordered_json::array();
    for (const auto& c : result.clusters) {
        clusters.push_back({{"representative", c.representative}, {"members", c.members}});
    }
    out["clusters"] = std::move(clusters);
    out["exact_removed"] = result.exact_removed;
    out["near_removed"] = result.near_removed;
    out["short_docs"] = result.short_docs;
    std::cout << out.dump(2) << "\n";
    if (!index_out.empty()) {
        index.save(index_out);
        std::cerr << "index written to " << index_out << "\n";
    }
    return kExitOk;
}

int cmd_mix(const std::string& config_path) {
    auto config = pipeline::load_config(config_path);
    auto sources = config.sources;
    for (auto& s : sources) {
        if (s.input_path == "@pipeline") {
            s.input_path = (fs::path(config.output_dir) / "clean" / "arxiv.jsonl").string();
        }
    }
    auto manifest = mixture::assemble_mixture(sources, config.mix_seed,
                                              config.shard_target_bytes, config.output_dir,
                                              pipeline::config_hash(config));
    manifest.sources = config.sources;  // record configured paths, not resolved ones
    mixture::write_manifest(manifest, (fs::path(config.output_dir) / "manifest.json").string());
    std::cout << "wrote " << manifest.shards.size() << " shards (pretraining "
              << manifest.pretraining.docs << " docs / " << manifest.pretraining.bytes
              << " bytes, posttraining " << manifest.posttraining.docs << " docs / "
              << manifest.posttraining.bytes << " bytes)\n";
    return manifest.source_errors.empty() ? kExitOk : kExitLosses;
}

int cmd_report(const std::string& run_dir) {
    const std::string path = (fs::path(run_dir) / "yield_report.json").string();
    auto j = nlohmann::json::parse(read_file(path));
    mixture::PipelineCounters counters;
    counters.input_records = j.value("input_records", 0ULL);
    counters.malformed_lines = j.value("malformed_lines", 0ULL);
    if (j.contains("rejected")) {
        counters.rejected = j["rejected"].get<std::map<std::string, std::uint64_t>>();
    }
    if (j.contains("archive_failures")) {
        counters.archive_failures =
            j["archive_failures"].get<std::map<std::string, std::uint64_t>>();
    }
    if (j.contains("extraction_losses")) {
        counters.extraction_losses =
            j["extraction_losses"].get<std::map<std::string, std::uint64_t>>();
    }
    counters.dedup_exact = j["dedup"].value("exact", 0ULL);
    counters.dedup_near = j["dedup"].value("near", 0ULL);
    counters.final_docs = j.value("final_docs", 0ULL);
    counters.final_bytes = j.value("final_bytes", 0ULL);
    auto report = mixture::yield_report(counters);
    std::cout << mixture::render_yield_table(report);
    return report.accounting_ok ? kExitOk : kExitFatal;
}

int cmd_budget(std::uint64_t params, const std::string& arch_path, double tokens, double gb) {
    if (!arch_path.empty()) {
        auto j = nlohmann::json::parse(read_file(arch_path));
        budget::ArchitectureSpec arch;
        arch.d_model = j.at("d_model").get<std::uint64_t>();
        arch.layers = j.at("layers").get<std::uint64_t>();
        arch.heads = j.value("heads", std::uint64_t{1});
        arch.kv_heads = j.value("kv_heads", arch.heads);
        arch.ffn_dim = j.at("ffn_dim").get<std::uint64_t>();
        arch.vocab = j.at("vocab").get<std::uint64_t>();
        arch.tied_embeddings = j.value("tied_embeddings", false);
        arch.context_length = j.value("context_length", std::uint64_t{2048});
        arch.validate();
        const std::uint64_t analytic = budget::estimate_params(arch);
        std::cout << "estimated parameters (analytic): " << analytic << "\n";
        if (params > 0 && params != analytic) {
            const double rel = std::abs(static_cast<double>(params) -
                                        static_cast<double>(analytic)) /
                               static_cast<double>(analytic);
            std::cout << "note: provided --params differs from the analytic estimate by "
                      << std::fixed << std::setprecision(1) << rel * 100.0
                      << "%; the analytic formula is documented in the README\n";
        }
        if (params == 0) params = analytic;
    }
    if (params == 0 && tokens <= 0 && gb <= 0) {
        std::cerr << "budget: provide --params, --arch, --tokens, or --gb\n";
        return kExitFatal;
    }

    std::cout << std::fixed << std::setprecision(2);
    if (params > 0) {
        const auto target = budget::chinchilla_tokens(params);
        const auto band = budget::tokens_to_gb(static_cast<double>(target));
        std::cout << "params:                  " << params << "\n";
        std::cout << "chinchilla tokens (20P): " << static_cast<double>(target) / 1e9
                  << " B\n";
        std::cout << "  as processed text:     " << band.low_gb << " - " << band.high_gb
                  << " GB\n";
        std::cout << "  data regime at target: "
                  << budget::to_string(budget::classify_regime(band.low_gb)) << " - "
                  << budget::to_string(budget::classify_regime(band.high_gb)) << "\n";
    }
    if (tokens > 0) {
        const auto band = budget::tokens_to_gb(tokens);
        std::cout << "tokens:                  " << tokens / 1e9 << " B -> " << band.low_gb
                  << " - " << band.high_gb << " GB\n";
        if (params > 0) {
            const auto tpp = budget::tokens_per_param(tokens, static_cast<double>(params));
            std::cout << "tokens per parameter:    " << tpp.ratio << " ("
                      << budget::to_string(tpp.regime) << ")\n";
        }
    }
    if (gb > 0) {
        const auto band = budget::gb_to_tokens(gb);
        std::cout << "text volume:             " << gb << " GB -> " << band.low_tokens / 1e9
                  << " - " << band.high_tokens / 1e9 << " B tokens\n";
        std::cout << "data regime:             "
                  << budget::to_string(budget::classify_regime(gb)) << "\n";
    }
    return kExitOk;
}

int cmd_tok_train(const std::vector<std::string>& inputs, int vocab, bool byte_fallback,
                  const std::string& out_path) {
    auto docs = load_docs(inputs);
    auto model = tokenlab::train_bpe(docs, vocab, byte_fallback);
    tokenlab::save_tokenizer(model, out_path);
    std::cout << "trained tokenizer: vocab=" << model.vocab_size()
              << " merges=" << model.merges.size() << " -> " << out_path << "\n";
    return kExitOk;
}

int cmd_tok_encode(const std::string& model_path, const std::string& text,
                   const std::string& input, bool roundtrip) {
    auto model = tokenlab::load_tokenizer(model_path);
    const std::string payload = !input.empty() ? read_file(input) : text;
    auto ids = tokenlab::encode(model, payload);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) std::cout << ' ';
        std::cout << ids[i];
    }
    std::cout << "\n";
    if (roundtrip) std::cout << tokenlab::decode(model, ids) << "\n";
    return kExitOk;
}

int cmd_tok_stats(const std::string& model_path, const std::vector<std::string>& inputs) {
    auto model = tokenlab::load_tokenizer(model_path);
    auto stats = tokenlab::corpus_token_stats(model, load_docs(inputs));
    std::cout << std::fixed << std::setprecision(4);
    std::cout << "docs:                " << stats.docs << "\n";
    std::cout << "total tokens:        " << stats.total_tokens << "\n";
    std::cout << "total bytes:         " << stats.total_bytes << "\n";
    std::cout << "mean tokens per doc: " << stats.mean_tokens_per_doc << "\n";
    std::cout << "bytes per token:     " << stats.bytes_per_token << "\n";
    std::cout << "tokens per word:     " << stats.tokens_per_word << "\n";
    return kExitOk;
}

int cmd_tok_frag(const std::string& model_path, const std::vector<std::string>& inputs,
                 std::size_t top_n) {
    auto model = tokenlab::load_tokenizer(model_path);
    auto report = tokenlab::fragmentation_stats(model, load_docs(inputs), top_n);
    std::cout << std::fixed << std::setprecision(4);
    std::cout << "commands seen:      " << report.commands_seen << "\n";
    std::cout << "commands intact:    " << report.commands_intact << "\n";
    std::cout << "fragmentation rate: " << report.fragmentation_rate << "\n";
    for (const auto& c : report.top_commands) {
        std::cout << "  " << c.command << "  seen=" << c.seen << " intact=" << c.intact
                  << "\n";
    }
    return kExitOk;
}

int cmd_telemetry(const std::vector<std::string>& logs, const std::string& out_path,
                  std::int64_t warmup, double threshold, double tail_fraction,
                  double slope_eps, const std::string& plot_dir) {
    nlohmann::ordered_json verdicts = nlohmann::ordered_json::array();
    for (const auto& path : logs) {
        auto log = telemetry::parse_run_log_file(path);
        nlohmann::ordered_json v;
        v["log"] = path;
        v["steps"] = log.steps.size();
        v["quarantined"] = log.quarantined;
        std::cout << path << ": " << log.steps.size() << " steps";
        if (!log.train_loss.empty()) {
            const double final_loss = log.train_loss.back();
            v["final_train_loss"] = final_loss;
            v["final_train_perplexity"] = telemetry::perplexity(final_loss);
            std::cout << ", final loss " << final_loss << " (ppl "
                      << telemetry::perplexity(final_loss) << ")";
        }
        if (log.train_loss.size() >= 10) {
            auto q = telemetry::curve_quality(log.train_loss, tail_fraction);
            v["curve"] = {{"oscillation_score", q.oscillation_score},
                          {"plateau_score", q.plateau_score},
                          {"monotonicity", q.monotonicity}};
        }
        if (log.has_eval()) {
            try {
                auto d = telemetry::detect_divergence(log, tail_fraction, slope_eps);
                v["divergence"] = {{"max_gap", d.max_gap},
                                   {"gap_trend_slope", d.gap_trend_slope},
                                   {"verdict", d.widening ? "Widening" : "NoDivergence"}};
                std::cout << ", " << (d.widening ? "Widening" : "NoDivergence");
            } catch (const telemetry::NoEvalData&) {
            }
        }
        if (log.has_grad()) {
            try {
                auto s = telemetry::grad_norm_stability(log, warmup, threshold);
                v["grad_norm"] = {{"fraction_below_threshold", s.fraction_below_threshold},
                                  {"max_post_warmup_norm", s.max_post_warmup_norm},
                                  {"verdict", s.stable ? "Stable" : "Unstable"}};
                std::cout << ", " << (s.stable ? "Stable" : "Unstable");
            } catch (const telemetry::NoGradData&) {
            }
        }
        std::cout << "\n";
        verdicts.push_back(std::move(v));

        if (!plot_dir.empty()) {
            fs::create_directories(plot_dir);
            auto stem = fs::path(path).stem().string();
            std::ofstream plot(fs::path(plot_dir) / (stem + ".tsv"),
                               std::ios::binary | std::ios::trunc);
            plot << "step\ttrain_loss\teval_loss\tgrad_norm\n";
            for (std::size_t i = 0; i < log.steps.size(); ++i) {
                plot << log.steps[i] << '\t' << log.train_loss[i] << '\t';
                if (log.eval_loss[i]) plot << *log.eval_loss[i];
                plot << '\t';
                if (log.grad_norm[i]) plot << *log.grad_norm[i];
                plot << '\n';
            }
        }
    }
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
        out << verdicts.dump(2) << "\n";
    }
    return kExitOk;
}

int cmd_lint_config(const std::string& config_path, const std::string& tokenizer_path) {
    auto summary = tokenlab::parse_model_config(read_file(config_path));
    auto model = tokenlab::load_tokenizer(tokenizer_path);
    auto diags = tokenlab::lint_model_config(summary, model);
    if (diags.empty()) {
        std::cout << "no diagnostics\n";
        return kExitOk;
    }
    bool has_error = false;
    for (const auto& d : diags) {
        std::cout << tokenlab::to_string(d.severity) << " " << d.code << ": " << d.message
                  << "\n";
        if (d.severity == tokenlab::LintSeverity::Error) has_error = true;
    }
    return has_error ? kExitLosses : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"texmill: LaTeX corpus construction and training-planning toolkit"};
    app.set_version_flag("--version", "texmill 0.1.0");
    app.require_subcommand(1);

    // ingest
    std::string config_path;
    int workers_override = 0;
    bool resume_override = false;
    auto* ingest = app.add_subcommand("ingest", "run the full pipeline from a config file");
    ingest->add_option("--config", config_path, "pipeline config file")->required();
    ingest->add_option("--workers", workers_override, "override worker count");
    ingest->add_flag("--resume", resume_override, "resume a previous run");

    // validate
    std::vector<std::string> validate_files;
    std::uint64_t max_bytes = archive::ArchiveLimits{}.max_decompressed_bytes;
    std::uint64_t max_entries = archive::ArchiveLimits{}.max_entries;
    auto* validate = app.add_subcommand("validate", "check archive structural integrity");
    validate->add_option("files", validate_files, "archive files")->required();
    validate->add_option("--max-bytes", max_bytes, "decompressed size cap");
    validate->add_option("--max-entries", max_entries, "entry count cap");

    // extract
    std::string extract_file, extract_out, extract_id;
    bool extract_concat = false;
    auto* extract = app.add_subcommand("extract", "flatten a LaTeX project to one source");
    extract->add_option("archive", extract_file, "archive file")->required();
    extract->add_option("--out", extract_out, "write flattened source here");
    extract->add_option("--id", extract_id, "paper id");
    extract->add_flag("--concat-without-root", extract_concat,
                      "concatenate files when no root is found");

    // clean
    std::string clean_file, clean_id, clean_title, clean_abstract, clean_out;
    auto* clean = app.add_subcommand("clean", "flatten and normalize one archive");
    clean->add_option("archive", clean_file, "archive file")->required();
    clean->add_option("--id", clean_id, "paper id");
    clean->add_option("--title", clean_title, "paper title");
    clean->add_option("--abstract", clean_abstract, "paper abstract");
    clean->add_option("--out", clean_out, "write clean document JSON here");

    // filter
    std::string filter_config;
    auto* filter = app.add_subcommand("filter", "run admission filters, print per-record fate");
    filter->add_option("--config", filter_config, "pipeline config file")->required();

    // dedup
    std::string dedup_input, dedup_index_out;
    double dedup_threshold = 0.8;
    std::uint32_t dedup_k = 128, dedup_width = 5, dedup_bands = 16, dedup_rows = 8;
    std::uint64_t dedup_seed = 1;
    auto* dedup_cmd = app.add_subcommand("dedup", "cluster duplicates in a clean corpus");
    dedup_cmd->add_option("--input", dedup_input, "clean corpus jsonl")->required();
    dedup_cmd->add_option("--threshold", dedup_threshold, "jaccard threshold");
    dedup_cmd->add_option("--k", dedup_k, "minhash permutations");
    dedup_cmd->add_option("--shingle-width", dedup_width, "shingle width in words");
    dedup_cmd->add_option("--seed", dedup_seed, "permutation seed");
    dedup_cmd->add_option("--bands", dedup_bands, "LSH bands");
    dedup_cmd->add_option("--rows", dedup_rows, "LSH rows per band");
    dedup_cmd->add_option("--save-index", dedup_index_out, "persist the index here");

    // mix
    std::string mix_config;
    auto* mix = app.add_subcommand("mix", "assemble the weighted mixture into shards");
    mix->add_option("--config", mix_config, "pipeline config file")->required();

    // report
    std::string report_dir;
    auto* report = app.add_subcommand("report", "render the yield report of a run");
    report->add_option("--run", report_dir, "pipeline output directory")->required();

    // budget
    std::uint64_t budget_params = 0;
    std::string budget_arch;
    double budget_tokens = 0, budget_gb = 0;
    auto* budget_cmd = app.add_subcommand("budget", "token budget and scaling calculators");
    budget_cmd->add_option("--params", budget_params, "parameter count");
    budget_cmd->add_option("--arch", budget_arch, "architecture spec JSON file");
    budget_cmd->add_option("--tokens", budget_tokens, "token count");
    budget_cmd->add_option("--gb", budget_gb, "processed text volume in GB");

    // tok-train
    std::vector<std::string> tt_inputs;
    int tt_vocab = 0;
    bool tt_bytes = false;
    std::string tt_out;
    auto* tok_train = app.add_subcommand("tok-train", "train a BPE tokenizer");
    tok_train->add_option("--input", tt_inputs, "corpus files (.txt or .jsonl)")->required();
    tok_train->add_option("--vocab", tt_vocab, "target text-token vocab size")->required();
    tok_train->add_flag("--byte-fallback", tt_bytes, "add byte fallback tokens");
    tok_train->add_option("--out", tt_out, "output tokenizer file")->required();

    // tok-encode
    std::string te_model, te_text, te_input;
    bool te_roundtrip = false;
    auto* tok_encode = app.add_subcommand("tok-encode", "encode text with a tokenizer");
    tok_encode->add_option("--model", te_model, "tokenizer file")->required();
    tok_encode->add_option("--text", te_text, "inline text");
    tok_encode->add_option("--input", te_input, "text file");
    tok_encode->add_flag("--decode", te_roundtrip, "print the decoded roundtrip");

    // tok-stats
    std::string ts_model;
    std::vector<std::string> ts_inputs;
    auto* tok_stats = app.add_subcommand("tok-stats", "compression statistics over a corpus");
    tok_stats->add_option("--model", ts_model, "tokenizer file")->required();
    tok_stats->add_option("--input", ts_inputs, "corpus files")->required();

    // tok-frag
    std::string tf_model;
    std::vector<std::string> tf_inputs;
    std::size_t tf_top = 10;
    auto* tok_frag = app.add_subcommand("tok-frag", "LaTeX command fragmentation report");
    tok_frag->add_option("--model", tf_model, "tokenizer file")->required();
    tok_frag->add_option("--input", tf_inputs, "corpus files")->required();
    tok_frag->add_option("--top", tf_top, "top-N commands to list");

    // telemetry
    std::vector<std::string> tel_logs;
    std::string tel_out, tel_plot;
    std::int64_t tel_warmup = 0;
    double tel_threshold = 1.0, tel_tail = 0.2, tel_slope = 1e-5;
    auto* tel = app.add_subcommand("telemetry", "analyze training-run logs");
    tel->add_option("--log", tel_logs, "run log files (csv)")->required();
    tel->add_option("--out", tel_out, "write verdict JSON here");
    tel->add_option("--warmup", tel_warmup, "warmup end step for grad-norm analysis");
    tel->add_option("--threshold", tel_threshold, "grad-norm stability threshold");
    tel->add_option("--tail", tel_tail, "tail fraction for divergence/quality");
    tel->add_option("--slope-eps", tel_slope, "divergence slope threshold");
    tel->add_option("--plot-data", tel_plot, "dump x,y plot columns to this directory");

    // lint-config
    std::string lint_cfg, lint_tok;
    auto* lint = app.add_subcommand("lint-config", "model config / tokenizer compatibility lint");
    lint->add_option("--config", lint_cfg, "model config.json")->required();
    lint->add_option("--tokenizer", lint_tok, "tokenizer file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) return cmd_ingest(config_path, workers_override, resume_override);
        if (*validate) return cmd_validate(validate_files, max_bytes, max_entries);
        if (*extract) return cmd_extract(extract_file, extract_out, extract_id, extract_concat);
        if (*clean) return cmd_clean(clean_file, clean_id, clean_title, clean_abstract,
                                     clean_out);
        if (*filter) return cmd_filter(filter_config);
        if (*dedup_cmd) {
            return cmd_dedup(dedup_input, dedup_threshold, dedup_k, dedup_width, dedup_seed,
                             dedup_bands, dedup_rows, dedup_index_out);
        }
        if (*mix) return cmd_mix(mix_config);
        if (*report) return cmd_report(report_dir);
        if (*budget_cmd) return cmd_budget(budget_params, budget_arch, budget_tokens, budget_gb);
        if (*tok_train) return cmd_tok_train(tt_inputs, tt_vocab, tt_bytes, tt_out);
        if (*tok_encode) return cmd_tok_encode(te_model, te_text, te_input, te_roundtrip);
        if (*tok_stats) return cmd_tok_stats(ts_model, ts_inputs);
        if (*tok_frag) return cmd_tok_frag(tf_model, tf_inputs, tf_top);
        if (*tel) {
            return cmd_telemetry(tel_logs, tel_out, tel_warmup, tel_threshold, tel_tail,
                                 tel_slope, tel_plot);
        }
        if (*lint) return cmd_lint_config(lint_cfg, lint_tok);
    } catch (const std::exception& e) {
        std::cerr << "texmill: " << e.what() << "\n";
        return kExitFatal;
    }
    return kExitOk;
}
