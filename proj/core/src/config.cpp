#include "texmill/config.hpp"

#include <fstream>

#include "texmill/hashing.hpp"

namespace texmill::pipeline {

namespace {

nlohmann::ordered_json filter_to_json(const metadata::FilterPolicy& p) {
    return {{"allowed_categories", p.allowed_categories},
            {"min_year", p.min_year},
            {"min_body_chars", p.min_body_chars},
            {"target_language", p.target_language},
            {"withdrawal_patterns", p.withdrawal_patterns},
            {"language_min_confidence", p.language_min_confidence}};
}

metadata::FilterPolicy filter_from_json(const nlohmann::json& j) {
    metadata::FilterPolicy p;
    if (j.contains("allowed_categories")) {
        p.allowed_categories = j["allowed_categories"].get<std::vector<std::string>>();
    }
    p.min_year = j.value("min_year", p.min_year);
    p.min_body_chars = j.value("min_body_chars", p.min_body_chars);
    p.target_language = j.value("target_language", p.target_language);
    if (j.contains("withdrawal_patterns")) {
        p.withdrawal_patterns = j["withdrawal_patterns"].get<std::vector<std::string>>();
    }
    p.language_min_confidence = j.value("language_min_confidence", p.language_min_confidence);
    if (p.allowed_categories.empty()) {
        throw ConfigError("config: allowed_categories must be non-empty");
    }
    if (p.language_min_confidence < 0.0 || p.language_min_confidence > 1.0) {
        throw ConfigError("config: language_min_confidence must be in [0,1]");
    }
    return p;
}

}  // namespace

nlohmann::ordered_json config_to_json(const PipelineConfig& c) {
    nlohmann::ordered_json j;
    j["metadata"] = c.metadata_path;
    j["archives_dir"] = c.archives_dir;
    j["output_dir"] = c.output_dir;
    j["workers"] = c.workers;
    j["resume"] = c.resume;
    j["filter"] = filter_to_json(c.filter);
    j["archive"] = {{"max_decompressed_bytes", c.archive_limits.max_decompressed_bytes},
                    {"max_entries", c.archive_limits.max_entries},
                    {"missing_include_policy",
                     c.flatten.missing_policy == archive::MissingIncludePolicy::Drop ? "drop"
                                                                                     : "error"},
                    {"max_include_depth", c.flatten.max_include_depth},
                    {"concat_without_root", c.flatten.concat_without_root}};
    j["latex"] = {{"remove_environments", c.latex.remove_environments},
                  {"math_environments", c.latex.math_environments},
                  {"structural_environments", c.latex.structural_environments},
                  {"verbatim_environments", c.latex.verbatim_environments},
                  {"placeholder_refs", c.latex.placeholder_refs},
                  {"macro_max_depth", c.macro_max_depth},
                  {"emit_removal_sidecar", c.emit_removal_sidecar}};
    j["dedup"] = {{"k", c.dedup_params.k},
                  {"shingle_width", c.dedup_params.shingle_width},
                  {"seed", c.dedup_params.seed},
                  {"bands", c.dedup_bands.bands},
                  {"rows", c.dedup_bands.rows},
                  {"threshold", c.dedup_threshold},
                  {"keep", c.dedup_keep == dedup::KeepPolicy::Earliest ? "earliest" : "longest"}};
    nlohmann::ordered_json sources = nlohmann::ordered_json::array();
    for (const auto& s : c.sources) {
        sources.push_back({{"name", s.name},
                           {"path", s.input_path},
                           {"stage", mixture::to_string(s.stage)},
                           {"weight", s.weight}});
    }
    j["mixture"] = {{"seed", c.mix_seed},
                    {"shard_target_bytes", c.shard_target_bytes},
                    {"sources", std::move(sources)}};
    return j;
}

PipelineConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    PipelineConfig c;
    c.metadata_path = j.value("metadata", "");
    c.archives_dir = j.value("archives_dir", "");
    c.output_dir = j.value("output_dir", c.output_dir);
    c.workers = j.value("workers", c.workers);
    c.resume = j.value("resume", c.resume);
    if (c.workers < 1) throw ConfigError("config: workers must be >= 1");

    if (j.contains("filter")) c.filter = filter_from_json(j["filter"]);

    if (j.contains("archive")) {
        const auto& a = j["archive"];
        c.archive_limits.max_decompressed_bytes =
            a.value("max_decompressed_bytes", c.archive_limits.max_decompressed_bytes);
        c.archive_limits.max_entries = a.value("max_entries", c.archive_limits.max_entries);
        std::string policy = a.value("missing_include_policy", "drop");
        if (policy == "drop") {
            c.flatten.missing_policy = archive::MissingIncludePolicy::Drop;
        } else if (policy == "error") {
            c.flatten.missing_policy = archive::MissingIncludePolicy::Error;
        } else {
            throw ConfigError("config: missing_include_policy must be drop or error");
        }
        c.flatten.max_include_depth =
            a.value("max_include_depth", c.flatten.max_include_depth);
        c.flatten.concat_without_root =
            a.value("concat_without_root", c.flatten.concat_without_root);
    }

    if (j.contains("latex")) {
        const auto& l = j["latex"];
        if (l.contains("remove_environments")) {
            c.latex.remove_environments =
                l["remove_environments"].get<std::vector<std::string>>();
        }
        if (l.contains("math_environments")) {
            c.latex.math_environments = l["math_environments"].get<std::vector<std::string>>();
        }
        if (l.contains("structural_environments")) {
            c.latex.structural_environments =
                l["structural_environments"].get<std::vector<std::string>>();
        }
        if (l.contains("verbatim_environments")) {
            c.latex.verbatim_environments =
                l["verbatim_environments"].get<std::vector<std::string>>();
        }
        c.latex.placeholder_refs = l.value("placeholder_refs", c.latex.placeholder_refs);
        c.macro_max_depth = l.value("macro_max_depth", c.macro_max_depth);
        c.emit_removal_sidecar = l.value("emit_removal_sidecar", c.emit_removal_sidecar);
    }

    if (j.contains("dedup")) {
        const auto& d = j["dedup"];
        c.dedup_params.k = d.value("k", c.dedup_params.k);
        c.dedup_params.shingle_width = d.value("shingle_width", c.dedup_params.shingle_width);
        c.dedup_params.seed = d.value("seed", c.dedup_params.seed);
        c.dedup_bands.bands = d.value("bands", c.dedup_bands.bands);
        c.dedup_bands.rows = d.value("rows", c.dedup_bands.rows);
        c.dedup_threshold = d.value("threshold", c.dedup_threshold);
        std::string keep = d.value("keep", "earliest");
        if (keep == "earliest") {
            c.dedup_keep = dedup::KeepPolicy::Earliest;
        } else if (keep == "longest") {
            c.dedup_keep = dedup::KeepPolicy::Longest;
        } else {
            throw ConfigError("config: dedup keep must be earliest or longest");
        }
        if (c.dedup_threshold <= 0.0 || c.dedup_threshold > 1.0) {
            throw ConfigError("config: dedup threshold must be in (0,1]");
        }
        if (static_cast<std::uint64_t>(c.dedup_bands.bands) * c.dedup_bands.rows !=
            c.dedup_params.k) {
            throw ConfigError("config: dedup bands * rows must equal k");
        }
    }

    if (j.contains("mixture")) {
        const auto& m = j["mixture"];
        c.mix_seed = m.value("seed", c.mix_seed);
        c.shard_target_bytes = m.value("shard_target_bytes", c.shard_target_bytes);
        if (m.contains("sources")) {
            for (const auto& s : m["sources"]) {
                mixture::SourceSpec spec;
                spec.name = s.value("name", "");
                spec.input_path = s.value("path", "");
                spec.weight = s.value("weight", 1.0);
                auto stage = mixture::stage_from_string(s.value("stage", "pretraining"));
                if (!stage) throw ConfigError("config: unknown mixture stage");
                spec.stage = *stage;
                if (spec.name.empty()) throw ConfigError("config: source name required");
                if (spec.weight <= 0.0) {
                    throw ConfigError("config: source weight must be positive");
                }
                for (const auto& other : c.sources) {
                    if (other.name == spec.name) {
                        throw ConfigError("config: duplicate source name " + spec.name);
                    }
                }
                c.sources.push_back(std::move(spec));
            }
        }
    }
    return c;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config: invalid json in " + path);
    return config_from_json(j);
}

void save_config(const PipelineConfig& config, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("config: cannot write " + path);
    out << config_to_json(config).dump(2) << '\n';
}

std::string config_hash(const PipelineConfig& config) {
    nlohmann::ordered_json j = config_to_json(config);
    // runtime placement knobs cannot change the outputs
    j.erase("workers");
    j.erase("resume");
    j.erase("output_dir");
    return hashing::to_hex(hashing::sha256(j.dump()));
}

}  // namespace texmill::pipeline
