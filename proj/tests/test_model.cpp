#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>

#include <euler_attn/checkpoint.hpp>
#include <euler_attn/gradcheck.hpp>
#include <euler_attn/model.hpp>

using namespace euler_attn;

namespace {

ModelConfig tiny_config(EncodingKind kind, std::size_t vocab = 11) {
    ModelConfig cfg;
    cfg.d = 8;
    cfg.h = 2;
    cfg.layers = 1;
    cfg.ffn_dim = 16;
    cfg.max_len = 4;
    cfg.vocab = vocab;
    cfg.dropout = 0.0;
    cfg.encoding.kind = kind;
    return cfg;
}

SequenceBatch tiny_batch() {
    SequenceBatch batch;
    batch.item_ids = {{3, 7, 5, 2}, {0, 0, 9, 4}};
    batch.lengths = {4, 2};
    batch.targets = {{7, 5, 2, 11}, {0, 0, 4, 6}};
    return batch;
}

// Mean cross-entropy over every position that carries a target, with the
// scoring head tied to the item embedding table.
Tensor batch_ce(SequenceModel& model, const SequenceBatch& batch, const ForwardResult& fwd) {
    std::vector<Tensor> rows;
    std::vector<std::size_t> targets;
    for (std::size_t b = 0; b < batch.rows(); ++b) {
        std::size_t n = batch.width();
        std::size_t first = n - batch.lengths[b];
        for (std::size_t t = first; t < n; ++t)
            if (batch.targets[b][t] != 0) {
                rows.push_back(take_rows(fwd.hidden[b], t, 1));
                targets.push_back(batch.targets[b][t] - 1);
            }
    }
    return softmax_cross_entropy(matmul(vstack(rows), transpose(model.item_rows())), targets);
}

} // namespace

TEST_CASE("config validation") {
    ModelConfig cfg = tiny_config(EncodingKind::EulerAdaptive);
    cfg.d = 6; // not divisible by 2*h = 4
    CHECK_THROWS_AS(SequenceModel(cfg, Rng(1)), std::invalid_argument);
    cfg = tiny_config(EncodingKind::None, 1);
    CHECK_THROWS_AS(SequenceModel(cfg, Rng(1)), std::invalid_argument);
    cfg = tiny_config(EncodingKind::None);
    cfg.max_len = 0;
    CHECK_THROWS_AS(SequenceModel(cfg, Rng(1)), std::invalid_argument);
}

TEST_CASE("forward produces the contracted shape for every encoding") {
    for (EncodingKind kind : {EncodingKind::None, EncodingKind::LearnedAbs, EncodingKind::Sinusoidal,
                              EncodingKind::RoPE, EncodingKind::ALiBi, EncodingKind::EulerVanilla,
                              EncodingKind::EulerAdaptive}) {
        SequenceModel model(tiny_config(kind), Rng(7));
        auto batch = tiny_batch();
        auto out = model.forward(batch);
        REQUIRE(out.hidden.size() == 2);
        for (auto& hseq : out.hidden) {
            REQUIRE(hseq.shape() == Shape{4, 8});
            CHECK(all_finite(hseq));
        }
        if (is_euler(kind)) {
            REQUIRE(out.theta_q.size() == 1);
            REQUIRE(out.theta_q[0].size() == 2);    // batch rows
            REQUIRE(out.theta_q[0][0].size() == 2); // heads
            REQUIRE(out.theta_q[0][0][0].shape() == Shape{4, 2});
        } else {
            CHECK(out.theta_q[0].empty());
        }
    }
}

TEST_CASE("single-step sequence works") {
    ModelConfig cfg = tiny_config(EncodingKind::EulerAdaptive);
    cfg.max_len = 1;
    SequenceModel model(cfg, Rng(3));
    SequenceBatch batch;
    batch.item_ids = {{5}};
    batch.lengths = {1};
    batch.targets = {{0}};
    auto out = model.forward(batch);
    REQUIRE(out.hidden[0].shape() == Shape{1, 8});
    CHECK(all_finite(out.hidden[0]));
}

TEST_CASE("same seed gives bit-identical models and outputs") {
    auto cfg = tiny_config(EncodingKind::EulerAdaptive);
    SequenceModel a(cfg, Rng(99)), b(cfg, Rng(99));
    auto batch = tiny_batch();
    auto oa = a.forward(batch), ob = b.forward(batch);
    for (std::size_t i = 0; i < oa.hidden.size(); ++i)
        CHECK(oa.hidden[i].value() == ob.hidden[i].value());

    SequenceModel c(cfg, Rng(100));
    auto oc = c.forward(batch);
    CHECK(oa.hidden[0].value() != oc.hidden[0].value());
}

TEST_CASE("out-of-range ids are rejected") {
    SequenceModel model(tiny_config(EncodingKind::None), Rng(1));
    SequenceBatch batch;
    batch.item_ids = {{1, 2, 3, 12}}; // vocab is 11
    batch.lengths = {4};
    batch.targets = {{0, 0, 0, 0}};
    CHECK_THROWS_AS(model.forward(batch), std::invalid_argument);
}

TEST_CASE("score_items matches a brute-force dot product") {
    SequenceModel model(tiny_config(EncodingKind::None), Rng(5));
    Rng rng(6);
    auto hidden = Tensor::from({1, 8}, rng.normal_vec(8));
    auto scores = model.score_items(hidden);
    REQUIRE(scores.shape() == Shape{1, 11});
    const auto& table = model.item_embedding_table().value();
    for (std::size_t j = 0; j < 11; ++j) {
        double expect = 0.0;
        for (std::size_t c = 0; c < 8; ++c)
            expect += hidden.value()[c] * table[(j + 1) * 8 + c];
        CHECK(std::fabs(scores.value()[j] - expect) < 1e-12);
    }

    auto zero = model.score_items(Tensor::zeros({1, 8}));
    for (double v : zero.value()) CHECK(v == 0.0);

    // Hidden state equal to item 7's embedding, table orthogonalized by hand.
    auto& emb = model.item_embedding_table().leaf_value();
    for (std::size_t j = 0; j <= 11; ++j)
        for (std::size_t c = 0; c < 8; ++c) emb[j * 8 + c] = 0.0;
    for (std::size_t j = 1; j <= 8; ++j) emb[j * 8 + (j - 1)] = 1.0;
    auto aligned = model.score_items(Tensor::from({1, 8}, {0, 0, 0, 0, 0, 0, 1, 0}));
    std::size_t argmax = 0;
    for (std::size_t j = 1; j < 11; ++j)
        if (aligned.value()[j] > aligned.value()[argmax]) argmax = j;
    CHECK(argmax + 1 == 7);
}

TEST_CASE("perturbing an item never changes earlier hidden states") {
    SequenceModel model(tiny_config(EncodingKind::EulerAdaptive), Rng(11));
    SequenceBatch batch;
    batch.item_ids = {{3, 7, 5, 2}};
    batch.lengths = {4};
    batch.targets = {{0, 0, 0, 0}};
    auto base = model.forward(batch);
    for (std::size_t t = 1; t < 4; ++t) {
        auto modified = batch;
        modified.item_ids[0][t] = 10;
        auto out = model.forward(modified);
        for (std::size_t before = 0; before < t; ++before)
            for (std::size_t c = 0; c < 8; ++c)
                CHECK(out.hidden[0].value()[before * 8 + c] ==
                      base.hidden[0].value()[before * 8 + c]);
    }
}

TEST_CASE("no positions and no mask: permuted inputs permute outputs") {
    SequenceModel model(tiny_config(EncodingKind::None), Rng(13));
    SequenceBatch batch;
    batch.item_ids = {{3, 7, 5, 2}};
    batch.lengths = {4};
    batch.targets = {{0, 0, 0, 0}};
    auto base = model.forward(batch, false, nullptr, false);

    std::vector<std::size_t> perm = {2, 0, 3, 1};
    SequenceBatch shuffled = batch;
    for (std::size_t t = 0; t < 4; ++t) shuffled.item_ids[0][t] = batch.item_ids[0][perm[t]];
    auto out = model.forward(shuffled, false, nullptr, false);
    for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t c = 0; c < 8; ++c)
            CHECK(out.hidden[0].value()[t * 8 + c] ==
                  Catch::Approx(base.hidden[0].value()[perm[t] * 8 + c]).margin(1e-12));
}

TEST_CASE("dropout draws change training-mode outputs only") {
    auto cfg = tiny_config(EncodingKind::EulerAdaptive);
    cfg.dropout = 0.5;
    SequenceModel model(cfg, Rng(17));
    auto batch = tiny_batch();
    auto eval1 = model.forward(batch);
    auto eval2 = model.forward(batch);
    CHECK(eval1.hidden[0].value() == eval2.hidden[0].value());

    Rng d1(21), d2(21), d3(22);
    auto t1 = model.forward(batch, true, &d1);
    auto t2 = model.forward(batch, true, &d2);
    auto t3 = model.forward(batch, true, &d3);
    CHECK(t1.hidden[0].value() == t2.hidden[0].value());
    CHECK(t1.hidden[0].value() != t3.hidden[0].value());
    CHECK_THROWS_AS(model.forward(batch, true, nullptr), std::invalid_argument);
}

TEST_CASE("end-to-end gradients match finite differences") {
    auto batch = tiny_batch();
    SECTION("adaptive encoder, every trainable parameter") {
        SequenceModel model(tiny_config(EncodingKind::EulerAdaptive), Rng(23));
        auto rep = check_gradients(
            [&] { return batch_ce(model, batch, model.forward(batch)); },
            model.trainable_params(), 1e-6, 1e-4);
        INFO(rep.worst << " rel=" << rep.max_rel_err);
        CHECK(rep.pass);
        CHECK(rep.checked > 500);
    }
    SECTION("learnable frequencies") {
        auto cfg = tiny_config(EncodingKind::EulerVanilla);
        cfg.encoding.learnable_freq = true;
        SequenceModel model(cfg, Rng(29));
        std::vector<Tensor> gs;
        for (auto& [name, t] : model.named_params())
            if (name.size() > 2 && name.substr(name.size() - 2) == ".g") gs.push_back(t);
        REQUIRE(gs.size() == 1);
        auto rep = check_gradients(
            [&] { return batch_ce(model, batch, model.forward(batch)); },
            gs, 1e-6, 1e-4);
        INFO(rep.worst << " rel=" << rep.max_rel_err);
        CHECK(rep.pass);
    }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    auto cfg = tiny_config(EncodingKind::EulerAdaptive);
    SequenceModel model(cfg, Rng(31));
    std::string path = "roundtrip.ckpt";
    save_checkpoint(model, path);
    auto loaded = load_checkpoint(path);

    auto pa = model.named_params();
    auto pb = loaded.named_params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].first == pb[i].first);
        CHECK(pa[i].second.value() == pb[i].second.value());
    }
    auto batch = tiny_batch();
    CHECK(model.forward(batch).hidden[0].value() == loaded.forward(batch).hidden[0].value());
    CHECK(loaded.config().encoding.kind == EncodingKind::EulerAdaptive);
    std::remove(path.c_str());
}

TEST_CASE("sinusoidal table is constant, learned tables are parameters") {
    SequenceModel sin_model(tiny_config(EncodingKind::Sinusoidal), Rng(37));
    for (auto& [name, t] : sin_model.named_params()) CHECK(name != "pos_emb");
    SequenceModel abs_model(tiny_config(EncodingKind::LearnedAbs), Rng(37));
    bool found = false;
    for (auto& [name, t] : abs_model.named_params()) found = found || name == "pos_emb";
    CHECK(found);
}

TEST_CASE("bad checkpoint files are rejected") {
    std::string path = "garbage.ckpt";
    {
        std::ofstream out(path, std::ios::binary);
        out << "definitely not a checkpoint";
    }
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    CHECK_THROWS_AS(load_checkpoint("missing-file.ckpt"), std::runtime_error);
    std::remove(path.c_str());
}
