#include "texmill/mixture.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "texmill/budget.hpp"
#include "texmill/hashing.hpp"

namespace texmill::mixture {

namespace fs = std::filesystem;
using hashing::fnv1a64;

const char* to_string(Stage s) {
    return s == Stage::Pretraining ? "pretraining" : "posttraining";
}

std::optional<Stage> stage_from_string(const std::string& s) {
    if (s == "pretraining") return Stage::Pretraining;
    if (s == "posttraining" || s == "post-training") return Stage::Posttraining;
    return std::nullopt;
}

std::uint64_t emission_count(std::uint64_t seed, const std::string& source_name,
                             const std::string& doc_id, double weight) {
    const auto whole = static_cast<std::uint64_t>(std::floor(weight));
    const double frac = weight - std::floor(weight);
    if (frac <= 0.0) return whole;

    std::uint64_t h = fnv1a64(source_name);
    h = fnv1a64(doc_id, h);
    h = hashing::splitmix64(h ^ seed);
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;  // uniform in [0,1)
    return whole + (u < frac ? 1 : 0);
}

namespace {

struct Emission {
    const MixDoc* doc;
    const SourceSpec* source;
};

std::vector<MixDoc> read_source_docs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UnreadableSource("mixture: cannot open source " + path);
    std::vector<MixDoc> docs;
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("text")) {
            throw UnreadableSource("mixture: bad record at " + path + ":" +
                                   std::to_string(line_no));
        }
        MixDoc doc;
        doc.id = j["id"].get<std::string>();
        doc.text = j["text"].get<std::string>();
        if (j.contains("curriculum_stage1_spans") && j["curriculum_stage1_spans"].is_array()) {
            for (const auto& span : j["curriculum_stage1_spans"]) {
                if (span.is_array() && span.size() == 2) {
                    doc.stage1_spans.push_back(
                        {span[0].get<std::size_t>(), span[1].get<std::size_t>()});
                }
            }
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::string serialize_record(const MixDoc& doc, const SourceSpec& source) {
    nlohmann::ordered_json j;
    j["id"] = doc.id;
    j["source"] = source.name;
    j["stage"] = to_string(source.stage);
    j["weight_applied"] = source.weight;
    nlohmann::ordered_json spans = nlohmann::ordered_json::array();
    for (const auto& s : doc.stage1_spans) spans.push_back({s.begin, s.end});
    j["curriculum_stage1_spans"] = std::move(spans);
    j["text"] = doc.text;
    return j.dump();
}

void shuffle_emissions(std::vector<Emission>& emissions, std::uint64_t seed, Stage stage) {
    hashing::SplitMixStream stream(hashing::splitmix64(seed) ^
                                   fnv1a64(to_string(stage)));
    for (std::size_t i = emissions.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(stream.next_below(i));
        std::swap(emissions[i - 1], emissions[j]);
    }
}

}  // namespace

MixtureManifest assemble_mixture(const std::vector<SourceSpec>& sources, std::uint64_t seed,
                                 std::uint64_t shard_target_bytes, const std::string& out_dir,
                                 const std::string& config_hash) {
    MixtureManifest manifest;
    manifest.toolkit_version = "0.1.0";
    manifest.config_hash = config_hash;
    manifest.seed = seed;
    manifest.shard_target_bytes = shard_target_bytes;
    manifest.sources = sources;

    fs::create_directories(fs::path(out_dir) / "shards");

    // hold all source docs; emissions reference into this storage
    std::vector<std::vector<MixDoc>> docs_per_source(sources.size());
    std::map<Stage, std::vector<Emission>> emissions_by_stage;

    for (std::size_t s = 0; s < sources.size(); ++s) {
        const auto& source = sources[s];
        if (source.weight <= 0.0) {
            throw std::invalid_argument("mixture: source weight must be positive: " +
                                        source.name);
        }
        SourceStats stats;
        stats.name = source.name;
        try {
            docs_per_source[s] = read_source_docs(source.input_path);
        } catch (const UnreadableSource& e) {
            manifest.source_errors.push_back(e.what());
            manifest.source_stats.push_back(stats);
            continue;
        }
        stats.docs_read = docs_per_source[s].size();
        if (docs_per_source[s].empty()) {
            manifest.empty_sources.push_back(source.name);
        }
        for (const auto& doc : docs_per_source[s]) {
            const std::uint64_t copies = emission_count(seed, source.name, doc.id, source.weight);
            for (std::uint64_t c = 0; c < copies; ++c) {
                emissions_by_stage[source.stage].push_back({&doc, &source});
            }
            stats.emissions += copies;
        }
        manifest.source_stats.push_back(stats);
    }

    for (auto& [stage, emissions] : emissions_by_stage) {
        shuffle_emissions(emissions, seed, stage);

        std::uint64_t shard_seq = 0;
        std::ofstream shard;
        std::string shard_rel;
        std::uint64_t shard_docs = 0, shard_bytes = 0;

        auto open_shard = [&]() {
            std::ostringstream name;
            name << to_string(stage) << "-";
            name.width(5);
            name.fill('0');
            name << shard_seq;
            shard_rel = std::string("shards/") + name.str() + ".jsonl";
            shard.open(fs::path(out_dir) / shard_rel, std::ios::binary | std::ios::trunc);
            if (!shard) {
                throw std::runtime_error("mixture: cannot write shard " + shard_rel);
            }
            shard_docs = 0;
            shard_bytes = 0;
        };
        auto close_shard = [&]() {
            if (!shard.is_open()) return;
            shard.close();
            manifest.shards.push_back({shard_rel, stage, shard_docs, shard_bytes});
            auto& totals =
                (stage == Stage::Pretraining) ? manifest.pretraining : manifest.posttraining;
            totals.docs += shard_docs;
            totals.bytes += shard_bytes;
            ++shard_seq;
        };

        for (const auto& emission : emissions) {
            std::string record = serialize_record(*emission.doc, *emission.source);
            record.push_back('\n');
            if (!shard.is_open()) open_shard();
            if (shard_docs > 0 && shard_bytes + record.size() > shard_target_bytes) {
                close_shard();
                open_shard();
            }
            shard.write(record.data(), static_cast<std::streamsize>(record.size()));
            ++shard_docs;
            shard_bytes += record.size();
        }
        close_shard();
    }

    return manifest;
}

nlohmann::ordered_json manifest_to_json(const MixtureManifest& m) {
    nlohmann::ordered_json j;
    j["format"] = "texmill-manifest";
    j["toolkit_version"] = m.toolkit_version;
    j["config_hash"] = m.config_hash;
    j["seed"] = m.seed;
    j["shard_target_bytes"] = m.shard_target_bytes;

    nlohmann::ordered_json sources = nlohmann::ordered_json::array();
    for (const auto& s : m.sources) {
        sources.push_back({{"name", s.name},
                           {"path", s.input_path},
                           {"stage", to_string(s.stage)},
                           {"weight", s.weight}});
    }
    j["sources"] = std::move(sources);

    nlohmann::ordered_json stats = nlohmann::ordered_json::array();
    for (const auto& s : m.source_stats) {
        stats.push_back(
            {{"name", s.name}, {"docs_read", s.docs_read}, {"emissions", s.emissions}});
    }
    j["source_stats"] = std::move(stats);

    nlohmann::ordered_json shards = nlohmann::ordered_json::array();
    for (const auto& s : m.shards) {
        shards.push_back({{"path", s.path},
                          {"stage", to_string(s.stage)},
                          {"docs", s.doc_count},
                          {"bytes", s.byte_count}});
    }
    j["shards"] = std::move(shards);

    j["totals"] = {
        {"pretraining", {{"docs", m.pretraining.docs}, {"bytes", m.pretraining.bytes}}},
        {"posttraining", {{"docs", m.posttraining.docs}, {"bytes", m.posttraining.bytes}}},
    };
    j["empty_sources"] = m.empty_sources;
    j["source_errors"] = m.source_errors;
    return j;
}

void write_manifest(const MixtureManifest& manifest, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("mixture: cannot write manifest " + path);
    out << manifest_to_json(manifest).dump(2) << '\n';
}

YieldReport yield_report(const PipelineCounters& counters) {
    YieldReport report;
    report.counters = counters;

    std::uint64_t attributed = counters.final_docs + counters.malformed_lines +
                               counters.dedup_exact + counters.dedup_near;
    for (const auto& [k, v] : counters.rejected) attributed += v;
    for (const auto& [k, v] : counters.archive_failures) attributed += v;
    for (const auto& [k, v] : counters.extraction_losses) attributed += v;
    report.accounting_ok = attributed == counters.input_records;

    const auto band =
        budget::gb_to_tokens(static_cast<double>(counters.final_bytes) / 1e9);
    report.est_tokens_low = band.low_tokens;
    report.est_tokens_high = band.high_tokens;
    return report;
}

nlohmann::ordered_json yield_to_json(const YieldReport& r) {
    nlohmann::ordered_json j;
    j["format"] = "texmill-yield-report";
    j["input_records"] = r.counters.input_records;
    j["malformed_lines"] = r.counters.malformed_lines;
    j["rejected"] = r.counters.rejected;
    j["archive_failures"] = r.counters.archive_failures;
    j["extraction_losses"] = r.counters.extraction_losses;
    j["dedup"] = {{"exact", r.counters.dedup_exact}, {"near", r.counters.dedup_near}};
    j["final_docs"] = r.counters.final_docs;
    j["final_bytes"] = r.counters.final_bytes;
    j["est_tokens_low"] = r.est_tokens_low;
    j["est_tokens_high"] = r.est_tokens_high;
    j["accounting_ok"] = r.accounting_ok;
    return j;
}

std::string render_yield_table(const YieldReport& r) {
    std::ostringstream out;
    auto row = [&](const std::string& label, std::uint64_t value) {
        out << "  " << label;
        for (std::size_t i = label.size(); i < 34; ++i) out << ' ';
        out << value << '\n';
    };
    out << "yield report\n";
    row("input records", r.counters.input_records);
    row("malformed lines", r.counters.malformed_lines);
    for (const auto& [k, v] : r.counters.rejected) row("rejected: " + k, v);
    for (const auto& [k, v] : r.counters.archive_failures) row("archive failure: " + k, v);
    for (const auto& [k, v] : r.counters.extraction_losses) row("extraction loss: " + k, v);
    row("dedup removed (exact)", r.counters.dedup_exact);
    row("dedup removed (near)", r.counters.dedup_near);
    row("final docs", r.counters.final_docs);
    row("final bytes", r.counters.final_bytes);
    out << "  est. tokens                       " << r.est_tokens_low << " .. "
        << r.est_tokens_high << '\n';
    out << "  accounting                        " << (r.accounting_ok ? "ok" : "MISMATCH")
        << '\n';
    if (!r.accounting_ok) {
        out << "  WARNING: counters do not sum to input records; pipeline bug\n";
    }
    return out.str();
}

}  // namespace texmill::mixture
