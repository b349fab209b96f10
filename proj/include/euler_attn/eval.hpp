#ifndef EULER_ATTN_EVAL_HPP
#define EULER_ATTN_EVAL_HPP

// Ranking metrics, side-by-side encoder comparisons, CSV exports for the
// learned rotation structure, and a latency probe for the encoding path.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "attention.hpp"
#include "data.hpp"
#include "model.hpp"
#include "training.hpp"

namespace euler_attn {

struct RankMetrics {
    std::size_t rank;
    double recall_at_10;
    double mrr;
    double ndcg_at_10;
};

// Rank of the target among all items, counting ties pessimistically for the
// larger item id so equal scores resolve the same way every run. scores[j]
// belongs to item id j+1.
inline RankMetrics rank_metrics(const std::vector<double>& scores, std::size_t target) {
    if (target == 0 || target > scores.size())
        throw std::invalid_argument("target id outside the scored vocabulary");
    double own = scores[target - 1];
    std::size_t rank = 1;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (j == target - 1) continue;
        if (scores[j] > own || (scores[j] == own && j < target - 1)) ++rank;
    }
    RankMetrics m;
    m.rank = rank;
    m.recall_at_10 = rank <= 10 ? 1.0 : 0.0;
    m.mrr = 1.0 / static_cast<double>(rank);
    m.ndcg_at_10 = rank <= 10 ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
    return m;
}

struct BucketStats {
    std::size_t lo, hi; // context lengths covered, inclusive
    std::size_t count = 0;
    double recall_at_10 = 0.0, mrr = 0.0, ndcg_at_10 = 0.0;
};

struct MetricsReport {
    std::size_t cases = 0;
    double recall_at_10 = 0.0, mrr = 0.0, ndcg_at_10 = 0.0;
    std::vector<BucketStats> buckets; // width-10 context-length buckets, ascending
};

// Scores every case's full context (truncated to the model window) and ranks
// the held-out target against the whole vocabulary. Per-bucket means weighted
// by count recompose the overall means.
inline MetricsReport evaluate(SequenceModel& model, const std::vector<EvalCase>& cases,
                              std::size_t batch_size = 64) {
    if (cases.empty()) throw std::invalid_argument("no evaluation cases");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");

    MetricsReport report;
    std::map<std::size_t, BucketStats> buckets;
    std::size_t max_len = model.config().max_len;
    for (std::size_t start = 0; start < cases.size(); start += batch_size) {
        std::size_t stop = std::min(cases.size(), start + batch_size);
        std::vector<const EvalCase*> chunk;
        for (std::size_t i = start; i < stop; ++i) chunk.push_back(&cases[i]);
        SequenceBatch batch = make_eval_batch(chunk, max_len);
        ForwardResult fwd = model.forward(batch);
        for (std::size_t row = 0; row < chunk.size(); ++row) {
            Tensor scores = model.score_items(take_rows(fwd.hidden[row], batch.width() - 1, 1));
            RankMetrics m = rank_metrics(scores.value(), chunk[row]->target);

            std::size_t len = chunk[row]->context.size();
            std::size_t idx = (len - 1) / 10;
            auto [it, fresh] = buckets.try_emplace(idx);
            if (fresh) {
                it->second.lo = idx * 10 + 1;
                it->second.hi = idx * 10 + 10;
            }
            BucketStats& b = it->second;
            ++b.count;
            b.recall_at_10 += m.recall_at_10;
            b.mrr += m.mrr;
            b.ndcg_at_10 += m.ndcg_at_10;
        }
    }
    for (auto& [idx, b] : buckets) {
        report.cases += b.count;
        report.recall_at_10 += b.recall_at_10;
        report.mrr += b.mrr;
        report.ndcg_at_10 += b.ndcg_at_10;
        double inv = 1.0 / static_cast<double>(b.count);
        b.recall_at_10 *= inv;
        b.mrr *= inv;
        b.ndcg_at_10 *= inv;
        report.buckets.push_back(b);
    }
    double inv = 1.0 / static_cast<double>(report.cases);
    report.recall_at_10 *= inv;
    report.mrr *= inv;
    report.ndcg_at_10 *= inv;
    return report;
}

struct ComparisonRow {
    std::string name;
    TrainResult training;
    MetricsReport valid, test;
};

// Trains one model per named variant on the same splits and scores both
// held-out views. A variant is "full", an encoder kind name, or an ablation
// name; every run shares the model seed and the training seed, so data
// order, dropout, and masking noise are identical across variants.
inline std::vector<ComparisonRow> compare_encodings(const ModelConfig& base,
                                                    const TrainConfig& base_train,
                                                    const Splits& splits,
                                                    const std::vector<std::string>& variants,
                                                    std::uint64_t model_seed) {
    std::vector<ComparisonRow> rows;
    for (const auto& name : variants) {
        ModelConfig cfg = base;
        TrainConfig tcfg = base_train;
        if (name != "full") {
            try {
                cfg.encoding.kind = kind_from_name(name);
            } catch (const std::invalid_argument&) {
                apply_ablation(cfg, tcfg.pcl, name);
            }
        }
        SequenceModel model(cfg, Rng(model_seed));
        ComparisonRow row;
        row.name = name;
        row.training = train(model, splits.train, tcfg);
        row.valid = evaluate(model, splits.valid);
        row.test = evaluate(model, splits.test);
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace detail {

inline std::ofstream open_csv(const std::string& path, const std::string& header) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << header << '\n';
    return out;
}

} // namespace detail

// Attention score of a unit-modulus, zero-phase probe pair as a function of
// continuous relative distance, with its analytic distance derivative.
// Shows how the learned (delta, bias, g) triples shape long-range decay.
inline void export_decay_curve(const std::string& path, const std::vector<double>& delta,
                               const std::vector<double>& bias, const std::vector<double>& g,
                               double max_distance, std::size_t points) {
    if (points < 2) throw std::invalid_argument("need at least 2 curve points");
    if (!delta.empty() && delta.size() != g.size())
        throw std::invalid_argument("delta length does not match g");
    if (!bias.empty() && bias.size() != g.size())
        throw std::invalid_argument("bias length does not match g");
    std::vector<double> ones(g.size(), 1.0), zeros(g.size(), 0.0);
    auto out = detail::open_csv(path, "distance,score,gradient");
    out.precision(17);
    double step = max_distance / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) {
        double dist = static_cast<double>(i) * step;
        out << dist << ',' << pair_score(ones, zeros, ones, zeros, delta, bias, g, dist) << ','
            << decay_gradient(ones, ones, zeros, zeros, delta, bias, g, dist) << '\n';
    }
    if (!out) throw std::runtime_error("short write to " + path);
}

// Adapted query-side phases of a single sequence, one row per
// (layer, window position, flattened head dimension).
inline void export_phase_distribution(const std::string& path, SequenceModel& model,
                                      const SequenceBatch& batch) {
    if (batch.rows() != 1)
        throw std::invalid_argument("phase export expects a single-sequence batch");
    ForwardResult fwd = model.forward(batch);
    if (fwd.theta_q.empty() || fwd.theta_q[0].empty() || fwd.theta_q[0][0].empty())
        throw std::invalid_argument("this encoder records no phases");

    std::size_t n = batch.width();
    std::size_t first = n - batch.lengths[0];
    auto out = detail::open_csv(path, "layer,position,dimension,phase");
    out.precision(17);
    for (std::size_t l = 0; l < fwd.theta_q.size(); ++l)
        for (std::size_t h = 0; h < fwd.theta_q[l][0].size(); ++h) {
            const Tensor& theta = fwd.theta_q[l][0][h];
            std::size_t half = theta.dim(1);
            for (std::size_t t = first; t < n; ++t)
                for (std::size_t j = 0; j < half; ++j)
                    out << l << ',' << t << ',' << (h * half + j) << ','
                        << theta.value()[t * half + j] << '\n';
        }
    if (!out) throw std::runtime_error("short write to " + path);
}

// Post-softmax attention maps of a single sequence.
inline void export_attention(const std::string& path, SequenceModel& model,
                             const SequenceBatch& batch) {
    if (batch.rows() != 1)
        throw std::invalid_argument("attention export expects a single-sequence batch");
    ForwardResult fwd = model.forward(batch);
    std::size_t n = batch.width();
    auto out = detail::open_csv(path, "layer,head,query,key,weight");
    out.precision(17);
    for (std::size_t l = 0; l < fwd.attention.size(); ++l) {
        const Tensor& maps = fwd.attention[l][0];
        for (std::size_t h = 0; h < maps.dim(0); ++h)
            for (std::size_t m = 0; m < n; ++m)
                for (std::size_t k = 0; k < n; ++k)
                    out << l << ',' << h << ',' << m << ',' << k << ','
                        << maps.value()[(h * n + m) * n + k] << '\n';
    }
    if (!out) throw std::runtime_error("short write to " + path);
}

// Median wall-clock milliseconds of one rotation pass (adaptive phase shift
// plus positional rotation for one head's queries and keys) at sequence
// length n. Scores and softmax are excluded on purpose: this isolates the
// part the encoding adds on top of plain attention, which grows linearly
// with n.
inline double encoding_latency(std::size_t n, std::size_t d_head, std::size_t reps = 5,
                               std::uint64_t seed = 0) {
    if (n == 0 || d_head == 0 || d_head % 2 != 0)
        throw std::invalid_argument("latency probe needs n >= 1 and even d_head");
    if (reps == 0) throw std::invalid_argument("need at least one timed repetition");
    Rng rng(seed);
    Tensor q = Tensor::from({n, d_head}, rng.normal_vec(n * d_head), true);
    Tensor k = Tensor::from({n, d_head}, rng.normal_vec(n * d_head), true);
    AdaptiveParams adapt = make_adaptive(d_head / 2);
    std::vector<double> g = frequency_schedule(d_head);
    Tensor gt = Tensor::from({d_head / 2}, g);

    std::vector<double> positions = detail::default_positions(n);
    std::vector<double> times;
    for (std::size_t r = 0; r <= reps; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        RotatedQK rot = euler_rotate_qk(q, k, &adapt, gt, positions);
        if (!all_finite(rot.q) || !all_finite(rot.k))
            throw std::runtime_error("rotation produced non-finite values");
        auto t1 = std::chrono::steady_clock::now();
        if (r > 0) // first pass warms allocators and caches
            times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

} // namespace euler_attn

#endif
