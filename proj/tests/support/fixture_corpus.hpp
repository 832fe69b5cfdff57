#pragma once

// Synthetic 50-archive corpus with planted violations; the generator records
// ground truth so pipeline yield reports can be checked exactly.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace texmill::testsupport {

struct PlantedTruth {
    std::uint64_t total_records = 0;
    std::uint64_t pre2001 = 0;          // rejected Temporal
    std::uint64_t under_volume = 0;     // rejected Volume
    std::uint64_t withdrawn = 0;        // rejected Withdrawn
    std::uint64_t wrong_category = 0;   // rejected Category
    std::uint64_t non_english = 0;      // rejected Language
    std::uint64_t corrupt_archives = 0; // archive integrity failures
    std::uint64_t exact_dup_pairs = 0;
    std::uint64_t near_dup_pairs = 0;
    std::uint64_t expected_final_docs = 0;

    std::vector<std::pair<std::string, std::string>> exact_pairs;
    std::vector<std::pair<std::string, std::string>> near_pairs;
    std::vector<double> near_pair_jaccard;  // brute-force shingle oracle, width 5
};

/// Writes dir/metadata.jsonl and dir/archives/*; returns the planted truth.
PlantedTruth generate_fixture_corpus(const std::string& dir);

/// Exact shingle-set Jaccard over word w-grams (whitespace words).
double exact_shingle_jaccard(const std::string& a, const std::string& b,
                             std::size_t shingle_width);

}  // namespace texmill::testsupport
