#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "support/fixture_corpus.hpp"
#include "texmill/dedup.hpp"

using namespace texmill::dedup;
using texmill::testsupport::exact_shingle_jaccard;

namespace {

// doc made of numbered words; shared_prefix controls overlap between docs
std::string word_doc(int salt, int words, int shared_prefix = 0) {
    std::string out;
    for (int i = 0; i < words; ++i) {
        if (i < shared_prefix) out += "common" + std::to_string(i) + " ";
        else out += "w" + std::to_string(salt) + "x" + std::to_string(i) + " ";
    }
    return out;
}

}  // namespace

TEST_CASE("exact fingerprint normalizes whitespace") {
    CHECK(exact_fingerprint("a  b\nc") == exact_fingerprint("a b c"));
    CHECK(exact_fingerprint("a b c") != exact_fingerprint("a b d"));
    CHECK(exact_fingerprint("").hex() == exact_fingerprint("  \n ").hex());
}

TEST_CASE("minhash determinism and short bodies") {
    MinHashParams params;
    auto a = minhash_signature("one two three four five six seven", params);
    auto b = minhash_signature("one two three four five six seven", params);
    CHECK(a.values == b.values);
    CHECK(a.values.size() == 128);
    CHECK_THROWS_AS(minhash_signature("one two three", params), BodyTooShort);
}

TEST_CASE("jaccard estimate near true value on half-overlap fixture") {
    MinHashParams params;
    const std::string a = word_doc(1, 60, 40);
    const std::string b = word_doc(2, 60, 40);
    const double truth = exact_shingle_jaccard(a, b, params.shingle_width);
    CHECK(truth > 0.4);
    CHECK(truth < 0.6);
    const double est = estimate_jaccard(minhash_signature(a, params),
                                        minhash_signature(b, params));
    CHECK(std::abs(est - truth) <= 0.10);
}

TEST_CASE("jaccard estimate basics") {
    MinHashParams params;
    auto a = minhash_signature(word_doc(1, 40), params);
    CHECK(estimate_jaccard(a, a) == 1.0);

    auto b = minhash_signature(word_doc(2, 40), params);
    CHECK(estimate_jaccard(a, b) == estimate_jaccard(b, a));
    CHECK(estimate_jaccard(a, b) <= 0.05);  // disjoint vocabulary

    MinHashParams other;
    other.k = 64;
    auto c = minhash_signature(word_doc(1, 40), other);
    CHECK_THROWS_AS(estimate_jaccard(a, c), IncompatibleSignatures);
}

TEST_CASE("estimator error bound over random pairs") {
    MinHashParams params;
    std::mt19937 rng(7);
    std::vector<double> errors;
    for (int pair = 0; pair < 200; ++pair) {
        const int words = 40 + static_cast<int>(rng() % 40);
        const int shared = static_cast<int>(rng() % static_cast<std::uint32_t>(words));
        const std::string a = word_doc(2 * pair, words, shared);
        const std::string b = word_doc(2 * pair + 1, words, shared);
        const double truth = exact_shingle_jaccard(a, b, params.shingle_width);
        const double est = estimate_jaccard(minhash_signature(a, params),
                                            minhash_signature(b, params));
        errors.push_back(std::abs(est - truth));
    }
    double mean = 0;
    for (double e : errors) mean += e;
    mean /= static_cast<double>(errors.size());
    double var = 0;
    for (double e : errors) var += (e - mean) * (e - mean);
    var /= static_cast<double>(errors.size());
    const double se = std::sqrt(var / static_cast<double>(errors.size()));
    CHECK(mean <= 2.0 / std::sqrt(128.0) + 3.0 * se);
}

TEST_CASE("cluster collapses a planted exact pair") {
    std::vector<std::pair<std::string, std::string>> docs;
    for (int i = 0; i < 9; ++i) docs.emplace_back("d" + std::to_string(i), word_doc(i, 40));
    docs.emplace_back("d9", word_doc(3, 40));  // exact duplicate of d3

    auto result = cluster_duplicates(docs, 0.8);
    CHECK(result.kept_ids.size() == 9);
    REQUIRE(result.clusters.size() == 1);
    CHECK(result.clusters[0].representative == "d3");
    CHECK(result.clusters[0].members == std::vector<std::string>{"d3", "d9"});
    CHECK(result.exact_removed == 1);
    CHECK(result.near_removed == 0);
}

TEST_CASE("cluster catches a planted near pair above threshold") {
    const std::string a = word_doc(1, 100, 0);
    std::string b = a + "tailx1 tailx2 tailx3 ";
    const double truth = exact_shingle_jaccard(a, b, 5);
    CHECK(truth >= 0.9);

    std::vector<std::pair<std::string, std::string>> docs = {
        {"base", a}, {"other", word_doc(9, 80)}, {"revised", b}};
    auto result = cluster_duplicates(docs, 0.8);
    REQUIRE(result.clusters.size() == 1);
    CHECK(result.clusters[0].representative == "base");
    CHECK(result.clusters[0].members == std::vector<std::string>{"base", "revised"});
    CHECK(result.near_removed == 1);
    CHECK(result.exact_removed == 0);
    CHECK(result.kept_ids == std::vector<std::string>{"base", "other"});
}

TEST_CASE("all-distinct corpus keeps everything") {
    std::vector<std::pair<std::string, std::string>> docs;
    for (int i = 0; i < 12; ++i) docs.emplace_back("d" + std::to_string(i), word_doc(i, 50));
    for (int i = 0; i < 12; ++i) {
        for (int j = i + 1; j < 12; ++j) {
            CHECK(exact_shingle_jaccard(docs[i].second, docs[j].second, 5) < 0.2);
        }
    }
    auto result = cluster_duplicates(docs, 0.8);
    CHECK(result.kept_ids.size() == 12);
    CHECK(result.clusters.empty());
}

TEST_CASE("representative is earliest ingest regardless of injection order") {
    const std::string body = word_doc(5, 40);
    std::vector<std::pair<std::string, std::string>> forward = {
        {"first", body}, {"mid", word_doc(7, 40)}, {"second", body}};
    auto r1 = cluster_duplicates(forward, 0.8);
    REQUIRE(r1.clusters.size() == 1);
    CHECK(r1.clusters[0].representative == "first");

    std::vector<std::pair<std::string, std::string>> reversed = {
        {"second", body}, {"mid", word_doc(7, 40)}, {"first", body}};
    auto r2 = cluster_duplicates(reversed, 0.8);
    REQUIRE(r2.clusters.size() == 1);
    CHECK(r2.clusters[0].representative == "second");  // earliest in this ingest
}

TEST_CASE("removing an unrelated doc never splits a verified pair") {
    const std::string a = word_doc(1, 100);
    std::string b = a + "tail1 tail2 ";
    std::vector<std::pair<std::string, std::string>> with_extra = {
        {"a", a}, {"x", word_doc(3, 60)}, {"b", b}};
    std::vector<std::pair<std::string, std::string>> without_extra = {{"a", a}, {"b", b}};

    auto r1 = cluster_duplicates(with_extra, 0.8);
    auto r2 = cluster_duplicates(without_extra, 0.8);
    REQUIRE(r1.clusters.size() == 1);
    REQUIRE(r2.clusters.size() == 1);
    CHECK(r1.clusters[0].members.size() == 2);
    CHECK(r2.clusters[0].members.size() == 2);
}

TEST_CASE("keep-longest policy keeps the longer member") {
    const std::string a = word_doc(1, 100);
    std::string b = a + "tail1 tail2 tail3 ";
    std::vector<std::pair<std::string, std::string>> docs = {{"short", a}, {"long", b}};
    auto result = cluster_duplicates(docs, 0.8, {}, {}, KeepPolicy::Longest);
    REQUIRE(result.clusters.size() == 1);
    CHECK(result.clusters[0].representative == "short");  // earliest stays representative
    CHECK(result.kept_ids == std::vector<std::string>{"long"});
}

TEST_CASE("short docs bypass the near stage but count") {
    std::vector<std::pair<std::string, std::string>> docs = {
        {"tiny", "just three words"}, {"doc", word_doc(1, 40)}};
    auto result = cluster_duplicates(docs, 0.8);
    CHECK(result.short_docs == 1);
    CHECK(result.kept_ids.size() == 2);
}

TEST_CASE("index save/load/merge") {
    MinHashParams params;
    BandLayout bands;

    DedupIndex full(params, bands);
    DedupIndex part1(params, bands);
    DedupIndex part2(params, bands);
    const std::string dup = word_doc(3, 40);
    std::vector<std::pair<std::string, std::string>> docs;
    for (int i = 0; i < 8; ++i) docs.emplace_back("d" + std::to_string(i), word_doc(i, 40));
    docs.emplace_back("d8", dup);
    docs[3].second = dup;

    for (std::size_t i = 0; i < docs.size(); ++i) {
        full.insert(docs[i].first, i, docs[i].second);
        (i % 2 == 0 ? part1 : part2).insert(docs[i].first, i, docs[i].second);
    }

    auto from_full = full.cluster(0.8);

    DedupIndex merged(params, bands);
    merged.merge(part2);  // merge order must not matter
    merged.merge(part1);
    auto from_merged = merged.cluster(0.8);
    CHECK(from_full.kept_ids == from_merged.kept_ids);
    CHECK(from_full.exact_removed == from_merged.exact_removed);

    const std::string path = "dedup_index_test.jsonl";
    full.save(path);
    auto loaded = DedupIndex::load(path);
    auto from_loaded = loaded.cluster(0.8);
    CHECK(from_full.kept_ids == from_loaded.kept_ids);
    CHECK(from_full.clusters.size() == from_loaded.clusters.size());
    std::remove(path.c_str());

    DedupIndex incompatible(MinHashParams{64, 5, 1}, BandLayout{8, 8});
    CHECK_THROWS_AS(merged.merge(incompatible), IncompatibleSignatures);
}

TEST_CASE("duplicate id insertion is rejected") {
    DedupIndex index;
    index.insert("a", 0, word_doc(1, 40));
    CHECK_THROWS_AS(index.insert("a", 1, word_doc(2, 40)), std::invalid_argument);
}

TEST_CASE("band layout must factor k") {
    CHECK_THROWS_AS(DedupIndex(MinHashParams{128, 5, 1}, BandLayout{10, 10}),
                    std::invalid_argument);
}
