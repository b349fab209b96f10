#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "euler_attn/eval.hpp"

using namespace euler_attn;

namespace {

struct TempPath {
    std::string path;
    explicit TempPath(const std::string& name) : path("/tmp/euler_attn_eval_" + name) {}
    ~TempPath() { std::remove(path.c_str()); }
};

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

ModelConfig tiny_config(EncodingKind kind, std::size_t vocab) {
    ModelConfig cfg;
    cfg.d = 8;
    cfg.h = 2;
    cfg.layers = 1;
    cfg.ffn_dim = 16;
    cfg.max_len = 6;
    cfg.vocab = vocab;
    cfg.dropout = 0.0;
    cfg.encoding.kind = kind;
    return cfg;
}

} // namespace

TEST_CASE("rank metrics at reference points") {
    // Item 3 is beaten by items 5 and 1: rank 3.
    std::vector<double> scores = {4.0, 1.0, 3.0, 0.5, 9.0};
    RankMetrics m = rank_metrics(scores, 3);
    REQUIRE(m.rank == 3);
    REQUIRE(m.recall_at_10 == 1.0);
    REQUIRE(m.mrr == Catch::Approx(1.0 / 3.0).margin(1e-15));
    REQUIRE(m.ndcg_at_10 == Catch::Approx(0.5).margin(1e-15));

    SECTION("rank 4 hits the frozen discount value") {
        std::vector<double> s = {4.0, 3.0, 2.0, 1.0, 0.0};
        RankMetrics r4 = rank_metrics(s, 4);
        REQUIRE(r4.rank == 4);
        REQUIRE(r4.ndcg_at_10 == Catch::Approx(0.43067655807339306).margin(1e-15));
    }
    SECTION("rank 1 is perfect") {
        RankMetrics top = rank_metrics(scores, 5);
        REQUIRE(top.rank == 1);
        REQUIRE(top.recall_at_10 == 1.0);
        REQUIRE(top.mrr == 1.0);
        REQUIRE(top.ndcg_at_10 == 1.0);
    }
    SECTION("past the cutoff only reciprocal rank survives") {
        std::vector<double> s(20, 0.0);
        s[0] = 1.0; // item 1 on top, everything else tied below
        RankMetrics deep = rank_metrics(s, 12);
        REQUIRE(deep.rank == 12); // beaten by item 1 and ties 2..11
        REQUIRE(deep.recall_at_10 == 0.0);
        REQUIRE(deep.ndcg_at_10 == 0.0);
        REQUIRE(deep.mrr == Catch::Approx(1.0 / 12.0).margin(1e-15));
    }
    SECTION("ties resolve toward the smaller item id") {
        std::vector<double> tied = {1.0, 1.0, 1.0};
        REQUIRE(rank_metrics(tied, 1).rank == 1);
        REQUIRE(rank_metrics(tied, 2).rank == 2);
        REQUIRE(rank_metrics(tied, 3).rank == 3);
    }
    SECTION("bad targets are rejected") {
        REQUIRE_THROWS_AS(rank_metrics(scores, 0), std::invalid_argument);
        REQUIRE_THROWS_AS(rank_metrics(scores, 6), std::invalid_argument);
    }
}

TEST_CASE("evaluate ranks through the model and buckets by context length") {
    std::size_t vocab = 30;
    ModelConfig cfg = tiny_config(EncodingKind::EulerAdaptive, vocab);
    SequenceModel model(cfg, Rng(14));

    Rng rng(3);
    std::vector<EvalCase> cases;
    for (std::size_t i = 0; i < 40; ++i) {
        EvalCase c;
        c.user = i;
        std::size_t len = 1 + static_cast<std::size_t>(rng.uniform_int(0, 24));
        for (std::size_t t = 0; t < len; ++t)
            c.context.push_back(static_cast<std::size_t>(rng.uniform_int(1, vocab)));
        c.target = static_cast<std::size_t>(rng.uniform_int(1, vocab));
        cases.push_back(std::move(c));
    }
    MetricsReport rep = evaluate(model, cases, 7);

    SECTION("overall means match a direct per-case pass") {
        double recall = 0, mrr = 0, ndcg = 0;
        for (const auto& c : cases) {
            std::vector<const EvalCase*> one = {&c};
            SequenceBatch b = make_eval_batch(one, cfg.max_len);
            ForwardResult fwd = model.forward(b);
            Tensor scores = model.score_items(take_rows(fwd.hidden[0], b.width() - 1, 1));
            RankMetrics m = rank_metrics(scores.value(), c.target);
            recall += m.recall_at_10;
            mrr += m.mrr;
            ndcg += m.ndcg_at_10;
        }
        REQUIRE(rep.cases == cases.size());
        REQUIRE(rep.recall_at_10 == Catch::Approx(recall / cases.size()).margin(1e-12));
        REQUIRE(rep.mrr == Catch::Approx(mrr / cases.size()).margin(1e-12));
        REQUIRE(rep.ndcg_at_10 == Catch::Approx(ndcg / cases.size()).margin(1e-12));
    }
    SECTION("bucket means recompose the overall means") {
        double recall = 0, mrr = 0, ndcg = 0;
        std::size_t count = 0;
        for (const auto& b : rep.buckets) {
            REQUIRE(b.count > 0);
            REQUIRE(b.hi == b.lo + 9);
            count += b.count;
            recall += b.recall_at_10 * b.count;
            mrr += b.mrr * b.count;
            ndcg += b.ndcg_at_10 * b.count;
        }
        REQUIRE(count == rep.cases);
        REQUIRE(recall / count == Catch::Approx(rep.recall_at_10).margin(1e-12));
        REQUIRE(mrr / count == Catch::Approx(rep.mrr).margin(1e-12));
        REQUIRE(ndcg / count == Catch::Approx(rep.ndcg_at_10).margin(1e-12));
        REQUIRE(rep.buckets.size() >= 3); // lengths 1..25 span three buckets
    }
    SECTION("batch size does not change the result") {
        MetricsReport again = evaluate(model, cases, 64);
        REQUIRE(again.recall_at_10 == rep.recall_at_10);
        REQUIRE(again.mrr == rep.mrr);
        REQUIRE(again.ndcg_at_10 == rep.ndcg_at_10);
    }
    SECTION("empty case lists are rejected") {
        REQUIRE_THROWS_AS(evaluate(model, {}), std::invalid_argument);
    }
}

TEST_CASE("a zeroed item table ranks every item by id") {
    ModelConfig cfg = tiny_config(EncodingKind::None, 20);
    SequenceModel model(cfg, Rng(1));
    for (auto& v : model.item_embedding_table().leaf_value()) v = 0.0;

    std::vector<EvalCase> cases = {{0, {1, 2}, 7}};
    MetricsReport rep = evaluate(model, cases);
    // All scores tie at zero, so the target's rank equals its id.
    REQUIRE(rep.mrr == Catch::Approx(1.0 / 7.0).margin(1e-12));
    REQUIRE(rep.recall_at_10 == 1.0);
}

TEST_CASE("encoder comparison trains each variant on identical data") {
    InteractionDataset ds = synth_copy_offset(10, 6, 8, 1, 50);
    Splits sp = leave_one_out(ds);
    ModelConfig base = tiny_config(EncodingKind::EulerAdaptive, ds.vocab);
    TrainConfig tcfg;
    tcfg.steps = 8;
    tcfg.batch_size = 5;
    tcfg.seed = 4;

    auto rows = compare_encodings(base, tcfg, sp, {"full", "rope", "no-pcl"}, 9);
    REQUIRE(rows.size() == 3);
    REQUIRE(rows[0].name == "full");
    for (const auto& row : rows) {
        REQUIRE(row.training.curve.size() == 8);
        REQUIRE(row.valid.cases == sp.valid.size());
        REQUIRE(row.test.cases == sp.test.size());
        REQUIRE(row.test.ndcg_at_10 >= 0.0);
        REQUIRE(row.test.ndcg_at_10 <= 1.0);
    }
    // rope records no contrastive term, no-pcl switches it off, full keeps it.
    REQUIRE(rows[0].training.curve[0].contrastive > 0.0);
    REQUIRE(rows[1].training.curve[0].contrastive == 0.0);
    REQUIRE(rows[2].training.curve[0].contrastive == 0.0);

    SECTION("identical seeds reproduce identical rows") {
        auto again = compare_encodings(base, tcfg, sp, {"full"}, 9);
        REQUIRE(again[0].test.ndcg_at_10 == rows[0].test.ndcg_at_10);
        REQUIRE(again[0].training.curve.back().total == rows[0].training.curve.back().total);
    }
    SECTION("unknown variants are rejected") {
        REQUIRE_THROWS_AS(compare_encodings(base, tcfg, sp, {"frobnicate"}, 9),
                          std::invalid_argument);
    }
}

TEST_CASE("decay curve export matches finite differences of itself") {
    std::vector<double> g = frequency_schedule(8);
    std::vector<double> delta = {1.1, 0.9, 1.3, 0.7};
    std::vector<double> bias = {0.1, -0.2, 0.3, 0.0};
    TempPath f("decay.csv");
    export_decay_curve(f.path, delta, bias, g, 5.0, 51);

    auto rows = read_csv(f.path);
    REQUIRE(rows[0] == std::vector<std::string>{"distance", "score", "gradient"});
    REQUIRE(rows.size() == 52);

    std::vector<double> dist, score, grad;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        dist.push_back(std::stod(rows[i][0]));
        score.push_back(std::stod(rows[i][1]));
        grad.push_back(std::stod(rows[i][2]));
    }
    REQUIRE(dist.front() == 0.0);
    REQUIRE(dist.back() == Catch::Approx(5.0).margin(1e-12));
    double step = dist[1] - dist[0];
    REQUIRE(step == Catch::Approx(0.1).margin(1e-12));

    // Centered differences at spacing 0.1 stay within 5% of the curve's
    // gradient scale everywhere.
    double scale = 0.0;
    for (double v : grad) scale = std::max(scale, std::abs(v));
    REQUIRE(scale > 0.0);
    for (std::size_t i = 1; i + 1 < dist.size(); ++i) {
        double fd = (score[i + 1] - score[i - 1]) / (2.0 * step);
        REQUIRE(std::abs(fd - grad[i]) < 0.05 * scale);
    }
}

TEST_CASE("doubling every frequency halves the decay distance axis") {
    std::vector<double> g = frequency_schedule(8);
    std::vector<double> doubled(g);
    for (auto& v : doubled) v *= 2.0;

    TempPath fa("decay_g.csv"), fb("decay_2g.csv");
    export_decay_curve(fa.path, {}, {}, g, 4.0, 21);       // distances 0, 0.2, ..., 4
    export_decay_curve(fb.path, {}, {}, doubled, 2.0, 11); // distances 0, 0.2, ..., 2
    auto a = read_csv(fa.path), b = read_csv(fb.path);
    for (std::size_t i = 1; i < b.size(); ++i) {
        // b row i sits at distance D, a row 2i-1 at distance 2D.
        REQUIRE(std::stod(b[i][1]) == std::stod(a[2 * i - 1][1]));
    }

    SECTION("bad arguments are rejected") {
        REQUIRE_THROWS_AS(export_decay_curve("/tmp/x.csv", {1.0}, {}, g, 1.0, 5),
                          std::invalid_argument);
        REQUIRE_THROWS_AS(export_decay_curve("/tmp/x.csv", {}, {}, g, 1.0, 1),
                          std::invalid_argument);
    }
}

TEST_CASE("phase export writes one row per recorded dimension") {
    ModelConfig cfg = tiny_config(EncodingKind::EulerAdaptive, 9);
    SequenceModel model(cfg, Rng(5));
    SequenceBatch batch;
    batch.item_ids = {{0, 0, 2, 5, 1, 3}};
    batch.lengths = {4};
    batch.targets = {{0, 0, 0, 0, 0, 0}};

    TempPath f("phases.csv");
    export_phase_distribution(f.path, model, batch);
    auto rows = read_csv(f.path);
    REQUIRE(rows[0] == std::vector<std::string>{"layer", "position", "dimension", "phase"});
    // 1 layer, 2 heads of width 2, 4 valid positions.
    REQUIRE(rows.size() == 1 + 1 * 4 * 4);

    ForwardResult fwd = model.forward(batch);
    double pi = 3.14159265358979323846;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        REQUIRE(rows[i].size() == 4);
        std::size_t pos = std::stoul(rows[i][1]);
        std::size_t dim = std::stoul(rows[i][2]);
        double phase = std::stod(rows[i][3]);
        REQUIRE(pos >= 2); // two padded slots are skipped
        REQUIRE(phase > -pi);
        REQUIRE(phase <= pi);
        std::size_t head = dim / 2, j = dim % 2;
        REQUIRE(phase == fwd.theta_q[0][0][head].value()[pos * 2 + j]);
    }

    SECTION("baseline encoders have nothing to export") {
        SequenceModel plain(tiny_config(EncodingKind::RoPE, 9), Rng(5));
        REQUIRE_THROWS_AS(export_phase_distribution(f.path, plain, batch), std::invalid_argument);
    }
    SECTION("multi-sequence batches are rejected") {
        SequenceBatch two = batch;
        two.item_ids.push_back(batch.item_ids[0]);
        two.lengths.push_back(4);
        two.targets.push_back(batch.targets[0]);
        REQUIRE_THROWS_AS(export_phase_distribution(f.path, model, two), std::invalid_argument);
    }
}

TEST_CASE("attention export writes normalized causal maps") {
    ModelConfig cfg = tiny_config(EncodingKind::EulerAdaptive, 9);
    SequenceModel model(cfg, Rng(6));
    SequenceBatch batch;
    batch.item_ids = {{4, 2, 5, 1, 3, 2}};
    batch.lengths = {6};
    batch.targets = {{0, 0, 0, 0, 0, 0}};

    TempPath f("attn.csv");
    export_attention(f.path, model, batch);
    auto rows = read_csv(f.path);
    REQUIRE(rows[0] == std::vector<std::string>{"layer", "head", "query", "key", "weight"});
    REQUIRE(rows.size() == 1 + 1 * 2 * 6 * 6);

    std::map<std::string, double> row_sums;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        std::size_t query = std::stoul(rows[i][2]);
        std::size_t key = std::stoul(rows[i][3]);
        double w = std::stod(rows[i][4]);
        REQUIRE(w >= 0.0);
        REQUIRE(w <= 1.0);
        if (key > query) REQUIRE(w == 0.0); // causal mask
        row_sums[rows[i][0] + "/" + rows[i][1] + "/" + rows[i][2]] += w;
    }
    REQUIRE(row_sums.size() == 12);
    for (const auto& [key, sum] : row_sums) REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("encoding latency probe returns a positive time") {
    double ms = encoding_latency(16, 8, 3);
    REQUIRE(ms > 0.0);
    REQUIRE_THROWS_AS(encoding_latency(16, 7), std::invalid_argument);
    REQUIRE_THROWS_AS(encoding_latency(0, 8), std::invalid_argument);
    REQUIRE_THROWS_AS(encoding_latency(16, 8, 0), std::invalid_argument);
}
