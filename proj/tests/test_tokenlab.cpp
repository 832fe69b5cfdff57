#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <map>
#include <random>
#include <set>

#include "support/bpe_oracle.hpp"
#include "texmill/tokenlab.hpp"

using namespace texmill::tokenlab;
namespace oracle = texmill::testsupport::bpe_oracle;
using oracle::alphabet_size;

namespace {

std::string random_latexish(std::mt19937& rng, std::size_t pieces) {
    static const std::vector<std::string> kPieces = {
        "\\alpha ", "\\beta ",  "$x+y$ ",  "theorem ", "proof ",  "of ",
        "the ",     "lemma ",   "bound ",  "norm ",    "\\sum ",  "(x_i) ",
        "42 ",      "operator ", "space ", "\\mathbb ", "result ", "follows ",
    };
    std::string out;
    for (std::size_t i = 0; i < pieces; ++i) out += kPieces[rng() % kPieces.size()];
    return out;
}

}  // namespace

TEST_CASE("first merge on the canonical corpus") {
    auto model = train_bpe({"abab abab"}, alphabet_size({"abab abab"}) + 1);
    REQUIRE(model.merges.size() == 1);
    CHECK(model.merges[0] == std::pair<std::string, std::string>{"a", "b"});
    CHECK(model.vocab.count("ab") == 1);
}

TEST_CASE("vocab too small") {
    CHECK_THROWS_AS(train_bpe({"abcdef"}, 3), VocabTooSmall);
}

TEST_CASE("empty corpus trains to specials only") {
    auto model = train_bpe({}, 0);
    CHECK(model.merges.empty());
    CHECK(model.vocab_size() == 4);  // bos, eos, unk, pad
    CHECK(model.token_id("<s>") == 0);
}

TEST_CASE("merge sequences match the brute-force oracle") {
    std::mt19937 rng(19);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::string> corpus;
        const int docs = 1 + static_cast<int>(rng() % 3);
        for (int d = 0; d < docs; ++d) {
            corpus.push_back(random_latexish(rng, 30 + rng() % 200));
        }
        const int merges_wanted = 5 + static_cast<int>(rng() % 30);
        const int target = alphabet_size(corpus) + merges_wanted;
        auto model = train_bpe(corpus, target);
        auto expected = oracle::train(corpus, merges_wanted);
        CHECK(model.merges == expected);
    }
}

TEST_CASE("encode matches step-by-step merge application") {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::string> corpus = {random_latexish(rng, 100)};
        auto model = train_bpe(corpus, alphabet_size(corpus) + 20);
        const std::string text = random_latexish(rng, 30);
        auto ids = encode(model, text);
        auto expected_symbols = oracle::encode_symbols(model, text);
        REQUIRE(ids.size() == expected_symbols.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const std::string& actual = model.id_to_token[static_cast<std::size_t>(ids[i])];
            if (model.vocab.count(expected_symbols[i])) {
                CHECK(actual == expected_symbols[i]);
            } else {
                CHECK(ids[i] == model.specials.unk_id);  // out-of-vocabulary symbol
            }
        }
    }
}

TEST_CASE("encode basics") {
    auto model = train_bpe({"abab abab"}, alphabet_size({"abab abab"}) + 1);
    CHECK(encode(model, "").empty());
    auto ids = encode(model, "ab");
    REQUIRE(ids.size() == 1);
    CHECK(model.id_to_token[static_cast<std::size_t>(ids[0])] == "ab");
}

TEST_CASE("unknown symbols: unk fallback and byte fallback") {
    auto model = train_bpe({"aa bb"}, alphabet_size({"aa bb"}));
    auto ids = encode(model, "z");
    REQUIRE(ids.size() == 1);
    CHECK(ids[0] == model.specials.unk_id);

    auto bytes_model = train_bpe({"aa bb"}, alphabet_size({"aa bb"}), /*byte_fallback=*/true);
    auto byte_ids = encode(bytes_model, "z");
    REQUIRE(byte_ids.size() == 1);
    CHECK(bytes_model.id_to_token[static_cast<std::size_t>(byte_ids[0])] == "<0x7A>");
    CHECK(decode(bytes_model, byte_ids) == "z");

    TokenizerModel hostile = model;
    hostile.specials.unk_id = -1;
    CHECK_THROWS_AS(encode(hostile, "z"), UnencodableInput);
}

TEST_CASE("decode roundtrip identity on covered corpora") {
    std::mt19937 rng(29);
    std::vector<std::string> corpus = {random_latexish(rng, 200)};
    auto model = train_bpe(corpus, alphabet_size(corpus) + 25);
    for (int trial = 0; trial < 100; ++trial) {
        const std::string text = random_latexish(rng, 1 + rng() % 40);
        CHECK(decode(model, encode(model, text)) == text);
    }
    CHECK(decode(model, {}).empty());
}

TEST_CASE("decode rejects out-of-range ids") {
    auto model = train_bpe({"ab"}, 2);
    CHECK_THROWS_AS(decode(model, {9999}), UnknownId);
    CHECK_THROWS_AS(decode(model, {-1}), UnknownId);
}

TEST_CASE("adding merges never increases token count") {
    std::mt19937 rng(31);
    std::vector<std::string> corpus = {random_latexish(rng, 150)};
    const int base = alphabet_size(corpus);
    auto small = train_bpe(corpus, base + 5);
    auto large = train_bpe(corpus, base + 25);
    for (int trial = 0; trial < 30; ++trial) {
        const std::string text = random_latexish(rng, 20);
        CHECK(encode(large, text).size() <= encode(small, text).size());
    }
}

TEST_CASE("token statistics arithmetic") {
    // model with a single merge (a,b); doc "ab ab ab ab ab" -> 9 tokens
    auto model = train_bpe({"abab abab"}, alphabet_size({"abab abab"}) + 1);
    const std::string doc = "ab ab ab ab ab";
    auto stats = corpus_token_stats(model, {doc});
    CHECK(stats.docs == 1);
    CHECK(stats.total_tokens == 9);
    CHECK(stats.total_bytes == doc.size());
    CHECK(stats.mean_tokens_per_doc == doctest::Approx(9.0));
    CHECK(stats.bytes_per_token == doctest::Approx(14.0 / 9.0));
    CHECK(stats.tokens_per_word == doctest::Approx(9.0 / 5.0));

    auto empty = corpus_token_stats(model, {});
    CHECK(empty.docs == 0);
    CHECK(empty.bytes_per_token == 0.0);
}

TEST_CASE("reference corpus ratio sits in the conversion band") {
    // 52.18e9 tokens from ~200 GB of text: about 3.83 bytes per token,
    // inside the 3-4 GB per billion tokens rule
    const double bytes_per_token = 200e9 / 52.18e9;
    CHECK(bytes_per_token == doctest::Approx(3.833).epsilon(1e-3));
    CHECK(bytes_per_token >= 3.0);
    CHECK(bytes_per_token <= 4.0);
}

namespace {

// model that keeps "\alpha" as a single token
TokenizerModel alpha_intact_model() {
    TokenizerModel m;
    m.byte_fallback = false;
    auto add = [&](const std::string& t) {
        int id = static_cast<int>(m.id_to_token.size());
        m.vocab[t] = id;
        m.id_to_token.push_back(t);
        return id;
    };
    m.specials.bos_id = add("<s>");
    m.specials.eos_id = add("</s>");
    m.specials.unk_id = add("<unk>");
    m.specials.pad_id = add("<pad>");
    for (const std::string s : {"$", "\\alpha", "x", " "}) add(s);
    m.merges = {{"\\", "a"}, {"\\a", "l"}, {"\\al", "p"}, {"\\alp", "h"}, {"\\alph", "a"}};
    return m;
}

// model that splits "\alpha" into exactly two tokens
TokenizerModel alpha_split_model() {
    TokenizerModel m = alpha_intact_model();
    m.merges = {{"\\", "a"}, {"\\a", "l"}, {"\\al", "p"}, {"\\alp", "h"}};
    int id = static_cast<int>(m.id_to_token.size());
    m.vocab["\\alph"] = id;
    m.id_to_token.push_back("\\alph");
    m.vocab["a"] = id + 1;
    m.id_to_token.push_back("a");
    return m;
}

}  // namespace

TEST_CASE("fragmentation: intact command") {
    auto report = fragmentation_stats(alpha_intact_model(), {"$\\alpha$ x $\\alpha$"});
    CHECK(report.commands_seen == 2);
    CHECK(report.commands_intact == 2);
    CHECK(report.fragmentation_rate == doctest::Approx(0.0));
    REQUIRE(report.top_commands.size() == 1);
    CHECK(report.top_commands[0].command == "\\alpha");
}

TEST_CASE("fragmentation: fully split command") {
    auto report = fragmentation_stats(alpha_split_model(), {"$\\alpha$"});
    CHECK(report.commands_seen == 1);
    CHECK(report.commands_intact == 0);
    CHECK(report.fragmentation_rate == doctest::Approx(1.0));
}

TEST_CASE("fragmentation: mixed fixture at one half") {
    // \alpha stays whole, \beta falls back to unknown pieces
    auto model = alpha_intact_model();
    auto report = fragmentation_stats(model, {"$\\alpha$ $\\beta$"});
    CHECK(report.commands_seen == 2);
    CHECK(report.commands_intact == 1);
    CHECK(report.fragmentation_rate == doctest::Approx(0.5));
}

TEST_CASE("fragmentation rate bounded and zero when vocab covers all commands") {
    auto report = fragmentation_stats(alpha_intact_model(), {"no commands at all"});
    CHECK(report.commands_seen == 0);
    CHECK(report.fragmentation_rate == 0.0);
}

namespace {

TokenizerModel tokenizer_with_vocab(int size) {
    TokenizerModel m;
    auto add = [&](const std::string& t) {
        int id = static_cast<int>(m.id_to_token.size());
        m.vocab[t] = id;
        m.id_to_token.push_back(t);
        return id;
    };
    m.specials.bos_id = add("<s>");
    m.specials.eos_id = add("</s>");
    m.specials.unk_id = add("<unk>");
    m.specials.pad_id = add("<pad>");
    for (int i = 4; i < size; ++i) add("tok" + std::to_string(i));
    return m;
}

}  // namespace

TEST_CASE("lint: matched configuration is silent") {
    ModelConfigSummary config;
    config.model_type = "llama";
    config.architectures = {"LlamaForCausalLM"};
    config.vocab_size = 102400;
    config.tokenizer_class_hint = "LlamaTokenizer";
    auto diags = lint_model_config(config, tokenizer_with_vocab(102400));
    CHECK(diags.empty());
}

TEST_CASE("lint: vocab size mismatch") {
    ModelConfigSummary config;
    config.model_type = "llama";
    config.architectures = {"LlamaForCausalLM"};
    config.vocab_size = 102400;
    config.tokenizer_class_hint = "sentencepiece";
    auto diags = lint_model_config(config, tokenizer_with_vocab(32000));
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].code == "VocabSizeMismatch");
    CHECK(diags[0].severity == LintSeverity::Error);
}

TEST_CASE("lint: tokenizer family mismatch") {
    ModelConfigSummary config;
    config.model_type = "llama";
    config.architectures = {"LlamaForCausalLM"};
    config.vocab_size = 102400;
    config.tokenizer_class_hint = "GPT2Tokenizer";  // bpe family files
    auto diags = lint_model_config(config, tokenizer_with_vocab(102400));
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].code == "TokenizerClassMismatch");
    CHECK(diags[0].severity == LintSeverity::Error);
}

TEST_CASE("lint: missing specials and mislabeled model_type") {
    ModelConfigSummary config;
    config.model_type = "llama";
    config.architectures = {"DeepseekForCausalLM"};
    config.vocab_size = 100;
    config.tokenizer_class_hint = "sentencepiece";

    auto tok = tokenizer_with_vocab(100);
    auto diags = lint_model_config(config, tok);
    REQUIRE(diags.size() == 1);  // families match but architectures disagree
    CHECK(diags[0].code == "ModelTypeArchitectureMismatch");
    CHECK(diags[0].severity == LintSeverity::Info);

    tok.specials.eos_id = -1;
    auto diags2 = lint_model_config(config, tok);
    REQUIRE(diags2.size() == 2);
    CHECK(diags2[0].code == "MissingSpecialTokens");
    CHECK(diags2[1].code == "ModelTypeArchitectureMismatch");
}

TEST_CASE("lint is pure and order-stable") {
    ModelConfigSummary config;
    config.model_type = "llama";
    config.architectures = {"GPT2LMHeadModel"};
    config.vocab_size = 777;
    config.tokenizer_class_hint = "GPT2Tokenizer";
    auto tok = tokenizer_with_vocab(100);
    auto a = lint_model_config(config, tok);
    auto b = lint_model_config(config, tok);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].code == b[i].code);
    CHECK(a[0].code == "VocabSizeMismatch");
    CHECK(a[1].code == "TokenizerClassMismatch");
}

TEST_CASE("model config parsing") {
    auto summary = parse_model_config(R"({
        "model_type": "deepseek",
        "architectures": ["DeepseekForCausalLM"],
        "vocab_size": 102400,
        "tokenizer_class": "DeepseekTokenizer"
    })");
    CHECK(summary.model_type == "deepseek");
    CHECK(summary.vocab_size == 102400);
    CHECK(summary.architectures.size() == 1);
    CHECK_THROWS_AS(parse_model_config("{\"vocab_size\": 0}"), ModelFormatError);
    CHECK_THROWS_AS(parse_model_config("not json"), ModelFormatError);
}

TEST_CASE("tokenizer save/load roundtrip") {
    std::mt19937 rng(37);
    std::vector<std::string> corpus = {random_latexish(rng, 120)};
    auto model = train_bpe(corpus, alphabet_size(corpus) + 10, /*byte_fallback=*/true);
    const std::string path = "tokenizer_roundtrip_test.json";
    save_tokenizer(model, path);
    auto loaded = load_tokenizer(path);
    CHECK(loaded.vocab_size() == model.vocab_size());
    CHECK(loaded.merges == model.merges);
    CHECK(loaded.byte_fallback == model.byte_fallback);
    CHECK(loaded.specials.bos == model.specials.bos);

    const std::string text = random_latexish(rng, 15);
    CHECK(encode(loaded, text) == encode(model, text));
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_tokenizer("does_not_exist.json"), ModelFormatError);
}
