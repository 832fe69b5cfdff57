#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "texmill/dedup.hpp"
#include "texmill/latexnorm.hpp"
#include "texmill/tokenlab.hpp"

namespace {

std::string synthetic_paper(std::mt19937& rng, std::size_t pieces) {
    static const std::vector<std::string> kPieces = {
        "the operator norm bound follows from the lemma ",
        "$\\|A\\| \\le C \\sum_i |a_i|$ ",
        "\\begin{equation}\nf(x) = \\int_0^x g(t)\\,dt\n\\end{equation}\n",
        "% internal note\n",
        "\\begin{figure}\\includegraphics{fig}\\caption{x}\\end{figure}\n",
        "\\textbf{remark} on the \\cite{key} construction ",
        "\\begin{theorem}\nthe estimate holds for all $n$\n\\end{theorem}\n",
        "\\section{Results}\n",
        "we now consider the general case of the problem ",
    };
    std::string out = "\\documentclass{article}\\begin{document}\n";
    for (std::size_t i = 0; i < pieces; ++i) out += kPieces[rng() % kPieces.size()];
    out += "\\end{document}\n";
    return out;
}

void BM_NormalizeLatex(benchmark::State& state) {
    std::mt19937 rng(1);
    const std::string doc = synthetic_paper(rng, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto result = texmill::latexnorm::normalize_latex(doc);
        benchmark::DoNotOptimize(result.body);
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(doc.size()));
}
BENCHMARK(BM_NormalizeLatex)->Arg(100)->Arg(1000);

void BM_MacroExpansion(benchmark::State& state) {
    std::string doc = "\\newcommand{\\R}{\\mathbb{R}}\\newcommand{\\norm}[1]{\\|#1\\|}\n";
    std::mt19937 rng(2);
    for (int i = 0; i < state.range(0); ++i) {
        doc += (i % 2 == 0) ? "$\\R^n$ and text " : "$\\norm{x_i}$ more ";
    }
    for (auto _ : state) {
        auto result = texmill::latexnorm::expand_macros(doc);
        benchmark::DoNotOptimize(result.text);
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(doc.size()));
}
BENCHMARK(BM_MacroExpansion)->Arg(200)->Arg(2000);

void BM_MinHashSignature(benchmark::State& state) {
    std::mt19937 rng(3);
    std::string doc;
    for (int i = 0; i < state.range(0); ++i) {
        doc += "word" + std::to_string(rng() % 5000) + " ";
    }
    texmill::dedup::MinHashParams params;
    for (auto _ : state) {
        auto sig = texmill::dedup::minhash_signature(doc, params);
        benchmark::DoNotOptimize(sig.values);
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(doc.size()));
}
BENCHMARK(BM_MinHashSignature)->Arg(500)->Arg(5000);

void BM_BpeEncode(benchmark::State& state) {
    std::mt19937 rng(4);
    std::string corpus_doc = synthetic_paper(rng, 400);
    auto model = texmill::tokenlab::train_bpe({corpus_doc}, 400);
    const std::string text = synthetic_paper(rng, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto ids = texmill::tokenlab::encode(model, text);
        benchmark::DoNotOptimize(ids);
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_BpeEncode)->Arg(100)->Arg(500);

void BM_ExactFingerprint(benchmark::State& state) {
    std::mt19937 rng(5);
    const std::string doc = synthetic_paper(rng, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto fp = texmill::dedup::exact_fingerprint(doc);
        benchmark::DoNotOptimize(fp.digest);
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(doc.size()));
}
BENCHMARK(BM_ExactFingerprint)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
