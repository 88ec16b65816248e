// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "tensorvault/dedup.hpp"
#include "support/modelgen.hpp"
#include "support/testutil.hpp"

using namespace tv;
using tvtest::build_safetensors;
using tvtest::GenTensor;

namespace {

ParsedModelFile model_of(const std::vector<GenTensor>& tensors) {
    return parse_model_bytes(as_view(build_safetensors(tensors)));
}

} // namespace

TEST_CASE("identical files dedup at file level with ratio 0.5") {
    DedupIndex idx;
    Bytes f = tvtest::random_safetensors(11);
    idx.dedup_file(as_view(f));
    auto [id, report] = idx.dedup_file(as_view(f));
    CHECK(report.total_units == 2);
    CHECK(report.unique_units == 1);
    CHECK(report.reduction_ratio() == doctest::Approx(0.5));
    CHECK(report.index_entries == 1);
    CHECK(report.estimated_metadata_bytes == 64);
}

TEST_CASE("one flipped byte defeats file-level dedup") {
    DedupIndex idx;
    Bytes f = tvtest::random_safetensors(12);
    Bytes g = f;
    g.back() ^= 0xFF;
    idx.dedup_file(as_view(f));
    auto [id, report] = idx.dedup_file(as_view(g));
    CHECK(report.unique_units == 2);
    CHECK(report.reduction_ratio() == 0.0);
}

TEST_CASE("identical tensor bytes under different headers dedup at tensor level only") {
    GenTensor t{"weights", "F32", {64}, tvtest::gaussian_bytes(DTypeTag::FP32, 64, 0.05, 3)};
    GenTensor renamed = t;
    renamed.name = "other_name";
    auto m1 = model_of({t});
    auto m2 = model_of({renamed});

    tvtest::TempDir tmp("dedup_pool");
    Pool pool = Pool::open(tmp.path());
    DedupIndex idx(&pool);
    idx.dedup_file(m1);
    idx.dedup_file(m2);
    CHECK(idx.file_tracker().report().unique_units == 2); // headers differ

    idx.dedup_tensors(m1);
    auto [res, report] = idx.dedup_tensors(m2);
    CHECK(report.total_units == 2);
    CHECK(report.unique_units == 1);
    CHECK_FALSE(res[0].was_new);
}

TEST_CASE("tied embeddings dedup within one file") {
    Bytes emb = tvtest::gaussian_bytes(DTypeTag::BF16, 256, 0.02, 9);
    GenTensor a{"embed.weight", "BF16", {256}, emb};
    GenTensor b{"lm_head.weight", "BF16", {256}, emb};
    GenTensor c{"other", "BF16", {256}, tvtest::gaussian_bytes(DTypeTag::BF16, 256, 0.02, 10)};
    DedupIndex idx;
    auto [res, report] = idx.dedup_tensors(model_of({a, b, c}));
    CHECK(report.total_units == 3);
    CHECK(report.unique_units == 2); // total - 1
}

TEST_CASE("corpus sharing 30% of tensors dedups 27% of tensor bytes") {
    // 10 models x 10 equal-size tensors; 3 shared verbatim, 7 unique.
    // Duplicate bytes: 9 redundant copies of the 3 shared = 27 of 100 units.
    const std::uint64_t elems = 512;
    std::vector<GenTensor> shared;
    for (int t = 0; t < 3; ++t)
        shared.push_back({"shared." + std::to_string(t), "BF16", {elems},
                          tvtest::gaussian_bytes(DTypeTag::BF16, elems, 0.03, 100 + t)});
    DedupIndex idx;
    for (int m = 0; m < 10; ++m) {
        std::vector<GenTensor> tensors = shared;
        for (int t = 0; t < 7; ++t)
            tensors.push_back({"own." + std::to_string(t), "BF16", {elems},
                               tvtest::gaussian_bytes(DTypeTag::BF16, elems, 0.03,
                                                      1000 + m * 10 + t)});
        idx.dedup_tensors(model_of(tensors));
    }
    auto report = idx.tensor_tracker().report();
    CHECK(report.total_units == 100);
    CHECK(report.unique_units == 73);
    CHECK(report.reduction_ratio() == doctest::Approx(0.27));
    CHECK(report.index_entries == 73);
    CHECK(report.estimated_metadata_bytes == 73 * 64);
}

TEST_CASE("one modified tensor breaks the whole layer") {
    const std::uint64_t elems = 128;
    auto w0 = tvtest::gaussian_bytes(DTypeTag::BF16, elems, 0.03, 1);
    auto w1 = tvtest::gaussian_bytes(DTypeTag::BF16, elems, 0.03, 2);
    auto w2 = tvtest::gaussian_bytes(DTypeTag::BF16, elems, 0.03, 3);
    std::vector<GenTensor> base = {
        {"model.layers.0.a", "BF16", {elems}, w0},
        {"model.layers.0.b", "BF16", {elems}, w1},
        {"model.layers.1.a", "BF16", {elems}, w2},
    };
    auto variant = base;
    variant[1].bytes = tvtest::add_noise(as_view(w1), DTypeTag::BF16, 0.001, 5);

    DedupIndex idx;
    idx.dedup_layers(model_of(base));
    auto report = idx.dedup_layers(model_of(variant));
    // layer 1 (unchanged) dedups; layer 0 is broken by the modified tensor
    CHECK(report.total_units == 4);
    CHECK(report.unique_units == 3);

    DedupIndex tidx;
    tidx.dedup_tensors(model_of(base));
    auto [res, treport] = tidx.dedup_tensors(model_of(variant));
    CHECK(treport.unique_units == 4); // tensor level still finds 2 of 3 shared
}

TEST_CASE("identical models dedup equally at every granularity") {
    auto tensors = std::vector<GenTensor>{
        {"model.layers.0.w", "BF16", {64}, tvtest::gaussian_bytes(DTypeTag::BF16, 64, 0.03, 4)},
        {"head", "BF16", {64}, tvtest::gaussian_bytes(DTypeTag::BF16, 64, 0.03, 5)},
    };
    auto parsed = model_of(tensors);
    DedupIndex idx;
    idx.dedup_file(parsed);
    idx.dedup_file(parsed);
    idx.dedup_tensors(parsed);
    idx.dedup_tensors(parsed);
    idx.dedup_layers(parsed);
    idx.dedup_layers(parsed);
    CHECK(idx.file_tracker().report().reduction_ratio() == doctest::Approx(0.5));
    CHECK(idx.tensor_tracker().report().reduction_ratio() == doctest::Approx(0.5));
    CHECK(idx.layer_tracker().report().reduction_ratio() == doctest::Approx(0.5));
}

TEST_CASE("monotonic granularity: tensor >= layer >= file on random corpora") {
    std::mt19937_64 rng(77);
    for (int round = 0; round < 5; ++round) {
        DedupIndex idx;
        std::vector<Bytes> corpus;
        // mix: unrelated models, exact duplicates, partially shared models
        Bytes a = tvtest::random_safetensors(rng());
        Bytes b = tvtest::random_safetensors(rng());
        corpus = {a, b, a};
        auto fam = tvtest::make_family({.n_models = 3,
                                        .n_tensors = 4,
                                        .shared_tensors = 2,
                                        .elements = 256,
                                        .seed = rng()});
        for (auto& m : fam) corpus.push_back(build_safetensors(m));
        for (const auto& f : corpus) {
            auto parsed = parse_model_bytes(as_view(f));
            idx.dedup_file(as_view(f));
            idx.dedup_tensors(parsed);
            idx.dedup_layers(parsed);
        }
        double tensor = idx.tensor_tracker().report().reduction_ratio();
        double layer = idx.layer_tracker().report().reduction_ratio();
        double file = idx.file_tracker().report().reduction_ratio();
        CHECK(tensor >= layer);
        CHECK(layer >= file);
    }
}

TEST_CASE("default layer rule keys on the layers.<N>. prefix") {
    CHECK(default_layer_key("model.layers.3.attn.q.weight") == "model.layers.3.");
    CHECK(default_layer_key("transformer.layers.12.mlp.up") == "transformer.layers.12.");
    CHECK(default_layer_key("lm_head.weight") == "lm_head.weight"); // singleton
    CHECK(default_layer_key("layers.0.w") == "layers.0.");
}
