#include "texmill/dedup.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace texmill::dedup {

namespace {

using hashing::fnv1a64;
using hashing::splitmix64;

std::vector<std::string_view> split_words(std::string_view normalized) {
    std::vector<std::string_view> words;
    size_t i = 0;
    while (i < normalized.size()) {
        size_t j = normalized.find(' ', i);
        if (j == std::string_view::npos) j = normalized.size();
        if (j > i) words.push_back(normalized.substr(i, j - i));
        i = j + 1;
    }
    return words;
}

// Hash of one word w-gram; words are joined with a separator byte that
// cannot appear inside a word, so ("ab","c") and ("a","bc") differ.
std::uint64_t shingle_hash(const std::vector<std::string_view>& words, size_t start, size_t w) {
    std::uint64_t h = hashing::kFnvOffset;
    for (size_t i = 0; i < w; ++i) {
        h = fnv1a64(words[start + i], h);
        h ^= 0x1f;
        h *= hashing::kFnvPrime;
    }
    return h;
}

std::vector<std::uint64_t> permutation_keys(const MinHashParams& params) {
    hashing::SplitMixStream stream(params.seed ^ 0x6d696e68617368ULL);
    std::vector<std::uint64_t> keys(params.k);
    for (auto& k : keys) k = stream.next();
    return keys;
}

struct UnionFind {
    std::vector<std::size_t> parent;

    explicit UnionFind(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), std::size_t{0});
    }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        // smaller root index wins so representatives stay earliest-ingested
        if (b < a) std::swap(a, b);
        parent[b] = a;
    }
};

}  // namespace

std::string normalize_whitespace(std::string_view body) {
    std::string out;
    out.reserve(body.size());
    bool in_ws = true;  // leading whitespace trimmed
    for (char c : body) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_ws = true;
        } else {
            if (in_ws && !out.empty()) out.push_back(' ');
            out.push_back(c);
            in_ws = false;
        }
    }
    return out;
}

ContentFingerprint exact_fingerprint(std::string_view body) {
    return {hashing::sha256(normalize_whitespace(body))};
}

MinHashSignature minhash_signature(std::string_view body, const MinHashParams& params) {
    if (params.k < 1) throw std::invalid_argument("minhash: k must be >= 1");
    const std::string normalized = normalize_whitespace(body);
    const auto words = split_words(normalized);
    if (words.size() < params.shingle_width) {
        throw BodyTooShort("minhash: body has fewer words than one shingle");
    }

    const auto keys = permutation_keys(params);
    MinHashSignature sig;
    sig.params = params;
    sig.values.assign(params.k, UINT64_MAX);
    const size_t n_shingles = words.size() - params.shingle_width + 1;
    for (size_t s = 0; s < n_shingles; ++s) {
        const std::uint64_t base = shingle_hash(words, s, params.shingle_width);
        for (std::uint32_t i = 0; i < params.k; ++i) {
            const std::uint64_t v = splitmix64(base ^ keys[i]);
            if (v < sig.values[i]) sig.values[i] = v;
        }
    }
    return sig;
}

double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
    if (!(a.params == b.params) || a.values.size() != b.values.size()) {
        throw IncompatibleSignatures("estimate_jaccard: signatures use different parameters");
    }
    std::size_t agree = 0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        if (a.values[i] == b.values[i]) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(a.values.size());
}

DedupIndex::DedupIndex(MinHashParams params, BandLayout bands)
    : params_(params), bands_(bands) {
    if (static_cast<std::uint64_t>(bands_.bands) * bands_.rows != params_.k) {
        throw std::invalid_argument("dedup: bands * rows must equal k");
    }
}

void DedupIndex::insert(const std::string& id, std::uint64_t ingest_index,
                        std::string_view body) {
    if (by_id_.count(id)) {
        throw std::invalid_argument("dedup: duplicate document id '" + id + "'");
    }
    DocEntry e;
    e.id = id;
    e.ingest_index = ingest_index;
    const std::string normalized = normalize_whitespace(body);
    e.body_length = normalized.size();
    e.fingerprint_hex = hashing::to_hex(hashing::sha256(normalized));
    try {
        e.signature = minhash_signature(body, params_);
    } catch (const BodyTooShort&) {
        e.signature = std::nullopt;
    }
    by_id_[id] = docs_.size();
    docs_.push_back(std::move(e));
}

void DedupIndex::merge(const DedupIndex& other) {
    if (!(params_ == other.params_) || bands_.bands != other.bands_.bands ||
        bands_.rows != other.bands_.rows) {
        throw IncompatibleSignatures("dedup: cannot merge indexes with different parameters");
    }
    for (const auto& e : other.docs_) {
        if (by_id_.count(e.id)) continue;  // first insertion wins
        by_id_[e.id] = docs_.size();
        docs_.push_back(e);
    }
}

DedupResult DedupIndex::cluster(double threshold, KeepPolicy keep) const {
    if (threshold <= 0.0 || threshold > 1.0) {
        throw std::invalid_argument("dedup: threshold must be in (0, 1]");
    }

    // ingest order defines representatives, regardless of insert/merge order
    std::vector<std::size_t> order(docs_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return docs_[a].ingest_index < docs_[b].ingest_index;
    });

    const std::size_t n = order.size();
    UnionFind uf(n);
    DedupResult result;

    // exact phase: identical normalized bodies collapse onto the first copy
    std::unordered_map<std::string, std::size_t> first_by_fp;
    std::vector<bool> is_exact_dup(n, false);
    for (std::size_t pos = 0; pos < n; ++pos) {
        const auto& doc = docs_[order[pos]];
        auto [it, inserted] = first_by_fp.emplace(doc.fingerprint_hex, pos);
        if (!inserted) {
            uf.unite(it->second, pos);
            is_exact_dup[pos] = true;
            ++result.exact_removed;
        }
        if (!doc.signature) ++result.short_docs;
    }

    // near phase: band buckets over exact-representatives with signatures
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    for (std::size_t pos = 0; pos < n; ++pos) {
        const auto& doc = docs_[order[pos]];
        if (is_exact_dup[pos] || !doc.signature) continue;
        for (std::uint32_t b = 0; b < bands_.bands; ++b) {
            std::uint64_t h = hashing::kFnvOffset ^ (0x42414e44ULL + b);
            for (std::uint32_t r = 0; r < bands_.rows; ++r) {
                const std::uint64_t v = doc.signature->values[b * bands_.rows + r];
                h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&v), sizeof(v)), h);
            }
            buckets[h].push_back(pos);
        }
    }
    for (const auto& [key, members] : buckets) {
        for (std::size_t i = 0; i < members.size(); ++i) {
            for (std::size_t j = i + 1; j < members.size(); ++j) {
                const std::size_t a = members[i], b = members[j];
                if (uf.find(a) == uf.find(b)) continue;
                const double sim = estimate_jaccard(*docs_[order[a]].signature,
                                                    *docs_[order[b]].signature);
                if (sim >= threshold) uf.unite(a, b);
            }
        }
    }

    // assemble clusters and the kept set
    std::map<std::size_t, std::vector<std::size_t>> components;
    for (std::size_t pos = 0; pos < n; ++pos) components[uf.find(pos)].push_back(pos);

    std::vector<bool> kept(n, false);
    for (const auto& [root, members] : components) {
        if (members.size() == 1) {
            kept[members[0]] = true;
            continue;
        }
        std::size_t keep_pos = members.front();  // earliest ingest
        if (keep == KeepPolicy::Longest) {
            for (std::size_t pos : members) {
                if (docs_[order[pos]].body_length > docs_[order[keep_pos]].body_length) {
                    keep_pos = pos;
                }
            }
        }
        kept[keep_pos] = true;

        Cluster c;
        c.representative = docs_[order[members.front()]].id;
        for (std::size_t pos : members) c.members.push_back(docs_[order[pos]].id);
        result.clusters.push_back(std::move(c));
    }

    for (std::size_t pos = 0; pos < n; ++pos) {
        if (kept[pos]) result.kept_ids.push_back(docs_[order[pos]].id);
    }
    const std::uint64_t removed = n - result.kept_ids.size();
    result.near_removed = removed - result.exact_removed;
    return result;
}

void DedupIndex::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("dedup: cannot write " + path);
    nlohmann::ordered_json header = {
        {"format", "texmill-dedup-index"},
        {"version", 1},
        {"k", params_.k},
        {"shingle_width", params_.shingle_width},
        {"seed", params_.seed},
        {"bands", bands_.bands},
        {"rows", bands_.rows},
    };
    out << header.dump() << '\n';
    for (const auto& doc : docs_) {
        nlohmann::ordered_json rec = {
            {"id", doc.id},
            {"idx", doc.ingest_index},
            {"len", doc.body_length},
            {"fp", doc.fingerprint_hex},
        };
        if (doc.signature) {
            rec["sig"] = doc.signature->values;
        } else {
            rec["sig"] = nullptr;
        }
        out << rec.dump() << '\n';
    }
}

DedupIndex DedupIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IndexFormatError("dedup: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IndexFormatError("dedup: empty index file");

    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded() || header.value("format", "") != "texmill-dedup-index" ||
        header.value("version", 0) != 1) {
        throw IndexFormatError("dedup: unrecognized index header");
    }
    MinHashParams params{header.at("k").get<std::uint32_t>(),
                         header.at("shingle_width").get<std::uint32_t>(),
                         header.at("seed").get<std::uint64_t>()};
    BandLayout bands{header.at("bands").get<std::uint32_t>(),
                     header.at("rows").get<std::uint32_t>()};
    DedupIndex index(params, bands);

    std::uint64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded()) {
            throw IndexFormatError("dedup: bad record at line " + std::to_string(line_no));
        }
        DocEntry e;
        e.id = rec.at("id").get<std::string>();
        e.ingest_index = rec.at("idx").get<std::uint64_t>();
        e.body_length = rec.at("len").get<std::uint64_t>();
        e.fingerprint_hex = rec.at("fp").get<std::string>();
        if (!rec.at("sig").is_null()) {
            MinHashSignature sig;
            sig.params = params;
            sig.values = rec.at("sig").get<std::vector<std::uint64_t>>();
            if (sig.values.size() != params.k) {
                throw IndexFormatError("dedup: signature length mismatch at line " +
                                       std::to_string(line_no));
            }
            e.signature = std::move(sig);
        }
        if (index.by_id_.count(e.id)) {
            throw IndexFormatError("dedup: duplicate id in index file: " + e.id);
        }
        index.by_id_[e.id] = index.docs_.size();
        index.docs_.push_back(std::move(e));
    }
    return index;
}

DedupResult cluster_duplicates(const std::vector<std::pair<std::string, std::string>>& docs,
                               double threshold, const MinHashParams& params,
                               const BandLayout& bands, KeepPolicy keep) {
    DedupIndex index(params, bands);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        index.insert(docs[i].first, i, docs[i].second);
    }
    return index.cluster(threshold, keep);
}

}  // namespace texmill::dedup
