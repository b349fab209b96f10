#ifndef EULER_ATTN_MODEL_HPP
#define EULER_ATTN_MODEL_HPP

// Causal transformer encoder over item sequences (SASRec-style, post-norm)
// with the positional encoder selected by EncodingSpec. Scoring ties the
// output head to the input item embedding table.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "attention.hpp"
#include "autograd.hpp"
#include "encodings.hpp"
#include "random.hpp"

namespace euler_attn {

inline constexpr double kLayerNormEps = 1e-5;

struct ModelConfig {
    std::size_t d = 64;
    std::size_t h = 2;
    std::size_t layers = 2;
    std::size_t ffn_dim = 256;
    std::size_t max_len = 50;
    std::size_t vocab = 0;
    double dropout = 0.2;
    EncodingSpec encoding;

    std::size_t d_head() const { return d / h; }

    void validate() const {
        if (h == 0 || d == 0 || d % (2 * h) != 0)
            throw std::invalid_argument("embedding dim must be divisible by 2*heads, got d=" +
                                        std::to_string(d) + " h=" + std::to_string(h));
        if (max_len < 1) throw std::invalid_argument("max_len must be at least 1");
        if (vocab < 2) throw std::invalid_argument("vocabulary must hold at least 2 items");
        if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0, 1)");
    }
};

// Rows are left-padded with item id 0; the last `length` entries are real.
// targets[i][j] = 0 marks "no target at this position".
struct SequenceBatch {
    std::vector<std::vector<std::size_t>> item_ids;
    std::vector<std::size_t> lengths;
    std::vector<std::vector<std::size_t>> targets;

    std::size_t rows() const { return item_ids.size(); }
    std::size_t width() const { return item_ids.empty() ? 0 : item_ids[0].size(); }
};

struct ForwardResult {
    std::vector<Tensor> hidden;  // per batch row, (N, d)
    // Adapted query/key phases per layer, batch row, head: (N, d_head/2).
    // Filled only by the euler encoders.
    std::vector<std::vector<std::vector<Tensor>>> theta_q, theta_k;
    // Post-softmax attention maps per layer, batch row: (h, N, N).
    std::vector<std::vector<Tensor>> attention;
};

inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    double inv_d = 1.0 / static_cast<double>(x.shape().back());
    Tensor mu = mul_scalar(row_sum(x), inv_d);
    Tensor xc = sub(x, mu);
    Tensor var = mul_scalar(row_sum(mul(xc, xc)), inv_d);
    return add(mul(div(xc, sqrt_t(add_scalar(var, kLayerNormEps))), gamma), beta);
}

class SequenceModel {
public:
    struct Layer {
        Tensor wq, bq, wk, bk, wv, bv, wo, bo;
        Tensor ln1_g, ln1_b, ln2_g, ln2_b;
        Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
        std::vector<AdaptiveParams> adapt; // per head; EulerAdaptive only
        Tensor g;                          // (d_head/2) rotation frequencies; euler kinds
        Tensor pcl_w;                      // (d_head/2) contrastive projection; euler kinds
    };

    SequenceModel(ModelConfig cfg, const Rng& seed_rng) : cfg_(std::move(cfg)) {
        cfg_.validate();
        const auto& enc = cfg_.encoding;
        item_emb_ = init_normal(seed_rng, "item_emb", {cfg_.vocab + 1, cfg_.d}, 0.1);
        for (std::size_t j = 0; j < cfg_.d; ++j) item_emb_.leaf_value()[j] = 0.0; // padding row

        if (has_learned_positions(enc.kind))
            pos_emb_ = init_normal(seed_rng, "pos_emb", {cfg_.max_len, cfg_.d}, 0.1);
        else if (enc.kind == EncodingKind::Sinusoidal)
            pos_emb_ = Tensor::from({cfg_.max_len, cfg_.d},
                                    sinusoidal_table(cfg_.max_len, cfg_.d, enc.angle_base));
        if (is_euler(enc.kind) && enc.use_rotary_input_embedding)
            psi_ = Tensor::zeros({cfg_.max_len, cfg_.d / 2}, true);

        std::size_t half = cfg_.d_head() / 2;
        for (std::size_t l = 0; l < cfg_.layers; ++l) {
            std::string p = "layer" + std::to_string(l) + ".";
            Layer layer;
            double ws = 1.0 / std::sqrt(static_cast<double>(cfg_.d));
            layer.wq = init_normal(seed_rng, p + "wq", {cfg_.d, cfg_.d}, ws);
            layer.bq = Tensor::zeros({cfg_.d}, true);
            layer.wk = init_normal(seed_rng, p + "wk", {cfg_.d, cfg_.d}, ws);
            layer.bk = Tensor::zeros({cfg_.d}, true);
            layer.wv = init_normal(seed_rng, p + "wv", {cfg_.d, cfg_.d}, ws);
            layer.bv = Tensor::zeros({cfg_.d}, true);
            layer.wo = init_normal(seed_rng, p + "wo", {cfg_.d, cfg_.d}, ws);
            layer.bo = Tensor::zeros({cfg_.d}, true);
            layer.ln1_g = Tensor::full({cfg_.d}, 1.0, true);
            layer.ln1_b = Tensor::zeros({cfg_.d}, true);
            layer.ln2_g = Tensor::full({cfg_.d}, 1.0, true);
            layer.ln2_b = Tensor::zeros({cfg_.d}, true);
            layer.ffn_w1 = init_normal(seed_rng, p + "ffn_w1", {cfg_.d, cfg_.ffn_dim}, ws);
            layer.ffn_b1 = Tensor::zeros({cfg_.ffn_dim}, true);
            layer.ffn_w2 = init_normal(seed_rng, p + "ffn_w2", {cfg_.ffn_dim, cfg_.d},
                                       1.0 / std::sqrt(static_cast<double>(cfg_.ffn_dim)));
            layer.ffn_b2 = Tensor::zeros({cfg_.d}, true);
            if (is_euler(enc.kind)) {
                if (enc.kind == EncodingKind::EulerAdaptive)
                    for (std::size_t i = 0; i < cfg_.h; ++i)
                        layer.adapt.push_back(make_adaptive(half));
                std::vector<double> sched = enc.zero_freq
                    ? std::vector<double>(half, 0.0)
                    : frequency_schedule(cfg_.d_head(), enc.angle_base);
                layer.g = Tensor::from({half}, std::move(sched), enc.learnable_freq);
                layer.pcl_w = Tensor::full({half}, 1.0, true);
            }
            layers_.push_back(std::move(layer));
        }
    }

    const ModelConfig& config() const { return cfg_; }

    ForwardResult forward(const SequenceBatch& batch, bool train = false,
                          Rng* dropout_rng = nullptr, bool causal = true) {
        const auto& enc = cfg_.encoding;
        std::size_t n = batch.width();
        if (n == 0 || n > cfg_.max_len)
            throw std::invalid_argument("batch width " + std::to_string(n) +
                                        " outside [1, max_len=" + std::to_string(cfg_.max_len) + "]");
        if (batch.lengths.size() != batch.rows())
            throw std::invalid_argument("batch lengths do not match rows");

        ForwardResult result;
        result.theta_q.resize(cfg_.layers);
        result.theta_k.resize(cfg_.layers);
        result.attention.resize(cfg_.layers);
        auto positions = detail::default_positions(n);

        for (std::size_t b = 0; b < batch.rows(); ++b) {
            const auto& ids = batch.item_ids[b];
            if (ids.size() != n) throw std::invalid_argument("ragged batch rows");
            for (auto id : ids)
                if (id > cfg_.vocab)
                    throw std::invalid_argument("item id " + std::to_string(id) +
                                                " out of range (vocab " + std::to_string(cfg_.vocab) + ")");
            std::size_t len = batch.lengths[b];
            if (len == 0 || len > n) throw std::invalid_argument("row length outside [1, width]");
            std::size_t first_valid = causal ? n - len : 0;

            Tensor E = gather_rows(item_emb_, ids);
            Tensor P;
            if (pos_emb_.defined()) P = take_rows(pos_emb_, 0, n);
            Tensor x = encode_input(E, P, psi_.defined() ? psi_ : Tensor());
            x = apply_dropout(x, train, dropout_rng);

            for (std::size_t l = 0; l < cfg_.layers; ++l) {
                auto& layer = layers_[l];
                Tensor q = add(matmul(x, layer.wq), layer.bq);
                Tensor k = add(matmul(x, layer.wk), layer.bk);
                Tensor v = add(matmul(x, layer.wv), layer.bv);
                Tensor Q3 = split_heads(q), K3 = split_heads(k), V3 = split_heads(v);

                Tensor scores;
                if (is_euler(enc.kind)) {
                    auto rec = euler_scores(Q3, K3, layer.adapt, layer.g, positions);
                    scores = rec.scores;
                    result.theta_q[l].push_back(std::move(rec.theta_q));
                    result.theta_k[l].push_back(std::move(rec.theta_k));
                } else {
                    scores = baseline_scores(Q3, K3, enc, positions);
                }
                Tensor weights = attention_weights(scores, causal, first_valid);
                result.attention[l].push_back(weights);
                Tensor attn = merge_heads(attend_with(weights, V3));
                attn = add(matmul(attn, layer.wo), layer.bo);
                x = layer_norm(add(x, attn), layer.ln1_g, layer.ln1_b);

                Tensor inner = relu(add(matmul(x, layer.ffn_w1), layer.ffn_b1));
                inner = apply_dropout(inner, train, dropout_rng);
                Tensor ffn = add(matmul(inner, layer.ffn_w2), layer.ffn_b2);
                x = layer_norm(add(x, ffn), layer.ln2_g, layer.ln2_b);
            }
            result.hidden.push_back(x);
        }
        return result;
    }

    // Rows 1..vocab of the tied embedding table; row j scores item j+1.
    Tensor item_rows() { return take_rows(item_emb_, 1, cfg_.vocab); }

    // Dot product of one hidden state against every item embedding.
    Tensor score_items(const Tensor& hidden_row) {
        if (hidden_row.shape() != Shape{1, cfg_.d})
            throw std::invalid_argument("score_items expects a (1, d) hidden state");
        return matmul(hidden_row, transpose(item_rows()));
    }

    std::vector<std::pair<std::string, Tensor>> named_params() {
        std::vector<std::pair<std::string, Tensor>> out;
        out.emplace_back("item_emb", item_emb_);
        if (pos_emb_.defined() && pos_emb_.requires_grad()) out.emplace_back("pos_emb", pos_emb_);
        if (psi_.defined()) out.emplace_back("psi", psi_);
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            std::string p = "layer" + std::to_string(l) + ".";
            auto& layer = layers_[l];
            out.emplace_back(p + "wq", layer.wq);
            out.emplace_back(p + "bq", layer.bq);
            out.emplace_back(p + "wk", layer.wk);
            out.emplace_back(p + "bk", layer.bk);
            out.emplace_back(p + "wv", layer.wv);
            out.emplace_back(p + "bv", layer.bv);
            out.emplace_back(p + "wo", layer.wo);
            out.emplace_back(p + "bo", layer.bo);
            out.emplace_back(p + "ln1_g", layer.ln1_g);
            out.emplace_back(p + "ln1_b", layer.ln1_b);
            out.emplace_back(p + "ln2_g", layer.ln2_g);
            out.emplace_back(p + "ln2_b", layer.ln2_b);
            out.emplace_back(p + "ffn_w1", layer.ffn_w1);
            out.emplace_back(p + "ffn_b1", layer.ffn_b1);
            out.emplace_back(p + "ffn_w2", layer.ffn_w2);
            out.emplace_back(p + "ffn_b2", layer.ffn_b2);
            for (std::size_t i = 0; i < layer.adapt.size(); ++i) {
                out.emplace_back(p + "head" + std::to_string(i) + ".delta", layer.adapt[i].delta);
                out.emplace_back(p + "head" + std::to_string(i) + ".bias", layer.adapt[i].bias);
            }
            if (layer.g.defined()) out.emplace_back(p + "g", layer.g);
            if (layer.pcl_w.defined()) out.emplace_back(p + "pcl_w", layer.pcl_w);
        }
        return out;
    }

    std::vector<Tensor> trainable_params() {
        std::vector<Tensor> out;
        for (auto& [name, t] : named_params())
            if (t.requires_grad()) out.push_back(t);
        return out;
    }

    std::vector<Tensor> pcl_w() const {
        std::vector<Tensor> out;
        for (const auto& layer : layers_)
            if (layer.pcl_w.defined()) out.push_back(layer.pcl_w);
        return out;
    }

    const std::vector<Layer>& layers() const { return layers_; }
    Tensor item_embedding_table() { return item_emb_; }

private:
    static Tensor init_normal(const Rng& root, const std::string& name, Shape shape, double stddev) {
        Rng stream = root.fork(name);
        return Tensor::from(std::move(shape),
                            stream.normal_vec(numel(shape), 0.0, stddev), true);
    }

    Tensor split_heads(const Tensor& x) {
        std::size_t n = x.dim(0), dh = cfg_.d_head();
        std::vector<Tensor> parts;
        for (std::size_t i = 0; i < cfg_.h; ++i)
            parts.push_back(slice_cols(x, i * dh, dh));
        return reshape(vstack(parts), {cfg_.h, n, dh});
    }

    Tensor merge_heads(const Tensor& stacked) {
        std::size_t n = stacked.dim(1);
        Tensor flat = reshape(stacked, {cfg_.h * n, stacked.dim(2)});
        Tensor out = take_rows(flat, 0, n);
        for (std::size_t i = 1; i < cfg_.h; ++i)
            out = concat_cols(out, take_rows(flat, i * n, n));
        return out;
    }

    Tensor apply_dropout(const Tensor& x, bool train, Rng* rng) {
        if (!train || cfg_.dropout <= 0.0) return x;
        if (!rng) throw std::invalid_argument("training-mode forward needs a dropout rng");
        double keep = 1.0 - cfg_.dropout;
        std::vector<double> mask(x.size());
        for (auto& m : mask) m = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
        return mul(x, Tensor::from(x.shape(), std::move(mask)));
    }

    ModelConfig cfg_;
    Tensor item_emb_;
    Tensor pos_emb_;
    Tensor psi_;
    std::vector<Layer> layers_;
};

} // namespace euler_attn

#endif
