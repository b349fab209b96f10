#ifndef EULER_ATTN_TRAINING_HPP
#define EULER_ATTN_TRAINING_HPP

// Losses, the Adam optimizer, and a small training loop for SequenceModel.
// The contrastive term operates purely on recorded phases, so a model whose
// encoder produces none (the non-euler baselines) trains on cross-entropy
// alone.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "autograd.hpp"
#include "data.hpp"
#include "model.hpp"
#include "random.hpp"

namespace euler_attn {

// Phase-contrastive settings. epsilon weights the term in the total loss;
// mask_ratio is the fraction of phase entries zeroed in the corrupted view.
struct PCLConfig {
    double tau = 1.0;
    double epsilon = 1e-5;
    double mask_ratio = 0.2;

    void validate() const {
        if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
        if (epsilon < 0.0) throw std::invalid_argument("epsilon must be nonnegative");
        if (mask_ratio < 0.0 || mask_ratio >= 1.0)
            throw std::invalid_argument("mask_ratio must be in [0, 1)");
    }
};

// Next-item cross-entropy over every supervised position in the batch:
// rows with target 0 (padding, or positions without a next item) are
// skipped, the rest are scored against the full item vocabulary and
// averaged. Depends only on phases through the hidden states, so it is
// shared by all encoder kinds.
inline Tensor ce_loss(SequenceModel& model, const SequenceBatch& batch,
                      const ForwardResult& fwd) {
    std::size_t n = batch.width();
    std::vector<Tensor> rows;
    std::vector<std::size_t> targets;
    for (std::size_t b = 0; b < batch.rows(); ++b) {
        std::size_t first = n - batch.lengths[b];
        for (std::size_t t = first; t < n; ++t) {
            std::size_t tgt = batch.targets[b][t];
            if (tgt == 0) continue;
            if (tgt > model.config().vocab)
                throw std::invalid_argument("target item id exceeds the vocabulary");
            rows.push_back(take_rows(fwd.hidden[b], t, 1));
            targets.push_back(tgt - 1);
        }
    }
    if (rows.empty()) throw std::invalid_argument("batch has no supervised positions");
    Tensor logits = matmul(vstack(rows), transpose(model.item_rows()));
    return softmax_cross_entropy(logits, targets);
}

// InfoNCE between each sequence's phase matrix and a masked copy of itself
// (masked entries set to 0). Per position, similarity to every position of
// the corrupted view is w-weighted cos(theta_j - theta_j') summed over
// dimensions; the position itself is the positive. Because the phases enter
// only through cos/sin differences, rescaling the moduli leaves the loss
// untouched. Query and key phases contribute separate records; the result
// averages over all of them (layers, batch rows, heads, both sides), so a
// degenerate record whose positions are indistinguishable costs exactly
// ln(length).
//
// Masks are drawn from `seed` alone, in (layer, row, head, query-then-key)
// order, so repeated calls with equal arguments agree exactly.
inline Tensor pcl_loss(const ForwardResult& fwd, const SequenceBatch& batch,
                       const std::vector<Tensor>& w_per_layer, const PCLConfig& cfg,
                       std::uint64_t seed) {
    cfg.validate();
    std::size_t layers = fwd.theta_q.size();
    if (layers == 0) return Tensor::scalar(0.0);
    if (w_per_layer.size() != layers)
        throw std::invalid_argument("need one weight vector per recorded layer");

    std::size_t n = batch.width();
    Rng rng(seed);
    Tensor acc = Tensor::scalar(0.0);
    std::size_t records = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        const Tensor& w = w_per_layer[l];
        for (std::size_t b = 0; b < batch.rows(); ++b) {
            std::size_t len = batch.lengths[b];
            std::size_t first = n - len;
            for (std::size_t h = 0; h < fwd.theta_q[l][b].size(); ++h) {
                for (const auto* rec : {&fwd.theta_q[l][b][h], &fwd.theta_k[l][b][h]}) {
                    Tensor theta = take_rows(*rec, first, len);
                    std::size_t width = theta.dim(1);
                    std::vector<double> keep(len * width);
                    for (auto& kv : keep) kv = rng.bernoulli(cfg.mask_ratio) ? 0.0 : 1.0;
                    Tensor masked = mul(theta, Tensor::from({len, width}, keep));
                    Tensor sim = add(matmul(mul(cos_t(theta), w), transpose(cos_t(masked))),
                                     matmul(mul(sin_t(theta), w), transpose(sin_t(masked))));
                    std::vector<std::size_t> diag(len);
                    std::iota(diag.begin(), diag.end(), std::size_t{0});
                    acc = add(acc, softmax_cross_entropy(mul_scalar(sim, 1.0 / cfg.tau), diag));
                    ++records;
                }
            }
        }
    }
    if (records == 0) return Tensor::scalar(0.0);
    return mul_scalar(acc, 1.0 / static_cast<double>(records));
}

inline Tensor total_loss(const Tensor& ce, const Tensor& contrastive, double epsilon) {
    return add(ce, mul_scalar(contrastive, epsilon));
}

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Moment state is keyed by the parameter's node identity, so the same
// optimizer instance must keep seeing the same tensors.
class Adam {
  public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(const std::vector<Tensor>& params) {
        ++t_;
        double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (Tensor p : params) {
            if (!p.requires_grad()) continue;
            const auto& g = p.grad();
            auto& mom = moments_[p.node_ptr().get()];
            if (mom.m.empty()) {
                mom.m.assign(g.size(), 0.0);
                mom.v.assign(g.size(), 0.0);
            }
            auto& x = p.leaf_value();
            for (std::size_t j = 0; j < g.size(); ++j) {
                mom.m[j] = cfg_.beta1 * mom.m[j] + (1.0 - cfg_.beta1) * g[j];
                mom.v[j] = cfg_.beta2 * mom.v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
                x[j] -= cfg_.lr * (mom.m[j] / bc1) / (std::sqrt(mom.v[j] / bc2) + cfg_.eps);
            }
        }
    }

    std::size_t steps() const { return t_; }

  private:
    struct Moments { std::vector<double> m, v; };
    AdamConfig cfg_;
    std::size_t t_ = 0;
    std::unordered_map<const void*, Moments> moments_;
};

struct TrainConfig {
    std::size_t steps = 1000;
    std::size_t batch_size = 128;
    AdamConfig adam{};
    PCLConfig pcl{};
    std::uint64_t seed = 42;
};

struct LossPoint {
    std::size_t step; // 1-based
    double ce;
    double contrastive; // 0 when the term is inactive
    double total;
};

struct TrainResult {
    std::vector<LossPoint> curve;
};

// Minibatch training over full train-split sequences: each epoch shuffles
// the sequence order with a seed-derived stream, batches are consecutive
// slices, and every weight update is one Adam step on ce + epsilon * pcl.
// Divergence (non-finite loss) aborts with a diagnostic instead of letting
// NaNs spread through the parameters.
inline TrainResult train(SequenceModel& model,
                         const std::vector<std::vector<std::size_t>>& seqs,
                         const TrainConfig& cfg) {
    cfg.pcl.validate();
    if (seqs.empty()) throw std::invalid_argument("no training sequences");
    if (cfg.batch_size == 0) throw std::invalid_argument("batch_size must be positive");

    Adam opt(cfg.adam);
    std::vector<Tensor> params = model.trainable_params();
    Rng dropout_rng = Rng(cfg.seed).fork("dropout");

    TrainResult result;
    std::vector<std::size_t> order(seqs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = 0, epoch = 0;
    Rng(cfg.seed).fork("order/epoch0").shuffle(order);

    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        if (cursor >= order.size()) {
            cursor = 0;
            ++epoch;
            Rng(cfg.seed).fork("order/epoch" + std::to_string(epoch)).shuffle(order);
        }
        std::size_t take = std::min(cfg.batch_size, order.size() - cursor);
        std::vector<std::size_t> indices(order.begin() + cursor, order.begin() + cursor + take);
        cursor += take;

        SequenceBatch batch = make_training_batch(seqs, indices, model.config().max_len);
        ForwardResult fwd = model.forward(batch, true, &dropout_rng, true);
        Tensor ce = ce_loss(model, batch, fwd);

        bool use_pcl = cfg.pcl.epsilon > 0.0 && !model.pcl_w().empty();
        Tensor total = ce;
        double pcl_value = 0.0;
        if (use_pcl) {
            std::uint64_t mask_seed = Rng(cfg.seed).fork("pcl/step" + std::to_string(step)).seed();
            Tensor con = pcl_loss(fwd, batch, model.pcl_w(), cfg.pcl, mask_seed);
            pcl_value = con.item();
            total = total_loss(ce, con, cfg.pcl.epsilon);
        }

        double tv = total.item();
        if (!std::isfinite(tv))
            throw std::runtime_error("training diverged at step " + std::to_string(step) +
                                     " (ce=" + std::to_string(ce.item()) +
                                     ", contrastive=" + std::to_string(pcl_value) + ")");

        for (auto& p : params) p.zero_grad();
        backward(total);
        opt.step(params);
        result.curve.push_back({step, ce.item(), pcl_value, tv});
    }
    return result;
}

// Named single-change variants of the full euler-adaptive setup, used by the
// comparison harness. Each edits exactly one aspect; unknown names are
// rejected rather than silently ignored.
inline void apply_ablation(ModelConfig& cfg, PCLConfig& pcl, const std::string& name) {
    if (name == "no-adapt") {
        cfg.encoding.kind = EncodingKind::EulerVanilla;
    } else if (name == "learnable-g") {
        cfg.encoding.kind = EncodingKind::EulerVanilla;
        cfg.encoding.learnable_freq = true;
    } else if (name == "no-relative") {
        cfg.encoding.zero_freq = true;
    } else if (name == "no-rotary") {
        cfg.encoding.use_rotary_input_embedding = false;
    } else if (name == "no-pcl") {
        pcl.epsilon = 0.0;
    } else {
        throw std::invalid_argument(
            "unknown ablation '" + name +
            "' (expected no-adapt, learnable-g, no-relative, no-rotary, or no-pcl)");
    }
}

} // namespace euler_attn

#endif
