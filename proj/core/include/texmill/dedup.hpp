#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "texmill/hashing.hpp"

namespace texmill::dedup {

class BodyTooShort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class IncompatibleSignatures : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class IndexFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 256-bit digest of the whitespace-normalized body.
struct ContentFingerprint {
    hashing::Sha256Digest digest{};

    bool operator==(const ContentFingerprint&) const = default;
    std::string hex() const { return hashing::to_hex(digest); }
};

struct MinHashParams {
    std::uint32_t k = 128;
    std::uint32_t shingle_width = 5;
    std::uint64_t seed = 1;

    bool operator==(const MinHashParams&) const = default;
};

struct MinHashSignature {
    std::vector<std::uint64_t> values;
    MinHashParams params;
};

struct BandLayout {
    std::uint32_t bands = 16;
    std::uint32_t rows = 8;
};

enum class KeepPolicy { Earliest, Longest };

/// Collapse whitespace runs to single spaces and trim the ends.
std::string normalize_whitespace(std::string_view body);

ContentFingerprint exact_fingerprint(std::string_view body);

/// Word w-gram MinHash sketch. Throws BodyTooShort when the body has fewer
/// words than one shingle.
MinHashSignature minhash_signature(std::string_view body, const MinHashParams& params);

/// Fraction of agreeing components; unbiased estimator of shingle Jaccard.
double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b);

struct Cluster {
    std::string representative;          // earliest-ingested member
    std::vector<std::string> members;    // in ingest order, includes representative
};

struct DedupResult {
    std::vector<std::string> kept_ids;   // ingest order
    std::vector<Cluster> clusters;       // only clusters of size >= 2
    std::uint64_t exact_removed = 0;
    std::uint64_t near_removed = 0;
    std::uint64_t short_docs = 0;        // bypassed the near-dup stage
};

/// Streaming dedup index. Insertion is order-tagged; partial indexes built
/// on separate workers merge associatively into one. Clustering is a final
/// single-threaded pass: exact duplicates collapse first, LSH band buckets
/// propose candidates, estimate_jaccard >= threshold verifies, union-find
/// forms clusters, earliest member kept (keep-longest available as config).
class DedupIndex {
public:
    DedupIndex(MinHashParams params = {}, BandLayout bands = {});

    void insert(const std::string& id, std::uint64_t ingest_index, std::string_view body);
    void merge(const DedupIndex& other);

    DedupResult cluster(double threshold, KeepPolicy keep = KeepPolicy::Earliest) const;

    std::size_t size() const { return docs_.size(); }
    const MinHashParams& params() const { return params_; }
    const BandLayout& bands() const { return bands_; }

    void save(const std::string& path) const;
    static DedupIndex load(const std::string& path);

private:
    struct DocEntry {
        std::string id;
        std::uint64_t ingest_index = 0;
        std::uint64_t body_length = 0;
        std::string fingerprint_hex;
        std::optional<MinHashSignature> signature;  // absent for short docs
    };

    MinHashParams params_;
    BandLayout bands_;
    std::vector<DocEntry> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;

    friend DedupIndex index_from_entries(MinHashParams, BandLayout);
};

/// One-shot convenience over DedupIndex for in-memory corpora.
DedupResult cluster_duplicates(const std::vector<std::pair<std::string, std::string>>& docs,
                               double threshold, const MinHashParams& params = {},
                               const BandLayout& bands = {},
                               KeepPolicy keep = KeepPolicy::Earliest);

}  // namespace texmill::dedup
