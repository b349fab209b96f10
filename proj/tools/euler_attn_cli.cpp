// Command-line front end: property verification, training, evaluation,
// encoder comparison, CSV exports of learned structure, and synthetic data
// generation.
//
// Exit codes: 0 on success, 1 for invalid input (bad flags, bad config, bad
// data), 2 for runtime failures (missing files at runtime, divergence,
// failed verification).

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "euler_attn/checkpoint.hpp"
#include "euler_attn/data.hpp"
#include "euler_attn/eval.hpp"
#include "euler_attn/model.hpp"
#include "euler_attn/training.hpp"
#include "euler_attn/verify.hpp"

namespace ea = euler_attn;
using nlohmann::json;

namespace {

struct ModelSettings {
    std::size_t d = 64, heads = 2, layers = 2, ffn_dim = 256, max_len = 50;
    double dropout = 0.2, angle_base = 10000.0;
    std::string encoding = "euler-adaptive";
    bool no_rotary = false;

    ea::ModelConfig to_config(std::size_t vocab) const {
        ea::ModelConfig cfg;
        cfg.d = d;
        cfg.h = heads;
        cfg.layers = layers;
        cfg.ffn_dim = ffn_dim;
        cfg.max_len = max_len;
        cfg.vocab = vocab;
        cfg.dropout = dropout;
        cfg.encoding.kind = ea::kind_from_name(encoding);
        cfg.encoding.use_rotary_input_embedding = !no_rotary;
        cfg.encoding.angle_base = angle_base;
        cfg.validate();
        return cfg;
    }
};

struct TrainSettings {
    std::size_t steps = 1000, batch_size = 128;
    double lr = 1e-3;
    std::uint64_t seed = 42;
    double tau = 1.0, epsilon = 1e-5, mask_ratio = 0.2;

    ea::TrainConfig to_config() const {
        ea::TrainConfig cfg;
        cfg.steps = steps;
        cfg.batch_size = batch_size;
        cfg.adam.lr = lr;
        cfg.seed = seed;
        cfg.pcl.tau = tau;
        cfg.pcl.epsilon = epsilon;
        cfg.pcl.mask_ratio = mask_ratio;
        cfg.pcl.validate();
        return cfg;
    }
};

void register_model_flags(CLI::App* cmd, ModelSettings& ms) {
    cmd->add_option("--d", ms.d, "model width");
    cmd->add_option("--heads", ms.heads, "attention heads");
    cmd->add_option("--layers", ms.layers, "transformer layers");
    cmd->add_option("--ffn-dim", ms.ffn_dim, "feed-forward inner width");
    cmd->add_option("--max-len", ms.max_len, "sequence window length");
    cmd->add_option("--dropout", ms.dropout, "dropout probability");
    cmd->add_option("--encoding", ms.encoding,
                    "none | learned-abs | sinusoidal | rope | alibi | euler-vanilla | euler-adaptive");
    cmd->add_flag("--no-rotary-input", ms.no_rotary, "skip the learned input rotation");
    cmd->add_option("--angle-base", ms.angle_base, "rotation frequency base");
}

void register_train_flags(CLI::App* cmd, TrainSettings& ts) {
    cmd->add_option("--steps", ts.steps, "optimizer steps");
    cmd->add_option("--batch-size", ts.batch_size, "sequences per step");
    cmd->add_option("--lr", ts.lr, "adam learning rate");
    cmd->add_option("--seed", ts.seed, "root seed for init, order, dropout, masking");
    cmd->add_option("--tau", ts.tau, "contrastive temperature");
    cmd->add_option("--epsilon", ts.epsilon, "contrastive loss weight");
    cmd->add_option("--mask-ratio", ts.mask_ratio, "contrastive phase mask ratio");
}

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config " + path + ": " + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config root must be a JSON object");
    return j;
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::invalid_argument("unknown config key '" + where + it.key() + "'");
}

// Config file values apply only where the command line stayed silent.
template <typename T>
void take(const json& sec, const char* key, CLI::App* cmd, const std::string& flag, T& dest) {
    if (!sec.contains(key) || cmd->count(flag) > 0) return;
    try {
        dest = sec.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument("config key '" + std::string(key) + "' has the wrong type");
    }
}

void apply_config(CLI::App* cmd, const std::string& path, ModelSettings& ms, TrainSettings& ts) {
    if (path.empty()) return;
    json j = load_config_file(path);
    reject_unknown(j, {"model", "train", "pcl"}, "");
    if (j.contains("model")) {
        const json& m = j["model"];
        reject_unknown(m, {"d", "heads", "layers", "ffn_dim", "max_len", "dropout",
                           "encoding", "rotary_input", "angle_base"}, "model.");
        take(m, "d", cmd, "--d", ms.d);
        take(m, "heads", cmd, "--heads", ms.heads);
        take(m, "layers", cmd, "--layers", ms.layers);
        take(m, "ffn_dim", cmd, "--ffn-dim", ms.ffn_dim);
        take(m, "max_len", cmd, "--max-len", ms.max_len);
        take(m, "dropout", cmd, "--dropout", ms.dropout);
        take(m, "encoding", cmd, "--encoding", ms.encoding);
        take(m, "angle_base", cmd, "--angle-base", ms.angle_base);
        if (m.contains("rotary_input") && cmd->count("--no-rotary-input") == 0)
            ms.no_rotary = !m.at("rotary_input").get<bool>();
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        reject_unknown(t, {"steps", "batch_size", "lr", "seed"}, "train.");
        take(t, "steps", cmd, "--steps", ts.steps);
        take(t, "batch_size", cmd, "--batch-size", ts.batch_size);
        take(t, "lr", cmd, "--lr", ts.lr);
        take(t, "seed", cmd, "--seed", ts.seed);
    }
    if (j.contains("pcl")) {
        const json& p = j["pcl"];
        reject_unknown(p, {"tau", "epsilon", "mask_ratio"}, "pcl.");
        take(p, "tau", cmd, "--tau", ts.tau);
        take(p, "epsilon", cmd, "--epsilon", ts.epsilon);
        take(p, "mask_ratio", cmd, "--mask-ratio", ts.mask_ratio);
    }
}

void write_loss_csv(const std::string& path, const ea::TrainResult& result) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    out << "step,ce,contrastive,total\n";
    for (const auto& pt : result.curve)
        out << pt.step << ',' << pt.ce << ',' << pt.contrastive << ',' << pt.total << '\n';
    if (!out) throw std::runtime_error("short write to " + path);
}

void print_report(const std::string& split, const ea::MetricsReport& rep) {
    std::cout << "split=" << split << " cases=" << rep.cases << " recall@10=" << rep.recall_at_10
              << " mrr=" << rep.mrr << " ndcg@10=" << rep.ndcg_at_10 << '\n';
    for (const auto& b : rep.buckets)
        std::cout << "  bucket len " << b.lo << ".." << b.hi << " cases=" << b.count
                  << " recall@10=" << b.recall_at_10 << " mrr=" << b.mrr
                  << " ndcg@10=" << b.ndcg_at_10 << '\n';
}

ea::SequenceBatch single_row_batch(const ea::InteractionDataset& ds, std::size_t row,
                                   std::size_t max_len) {
    if (row >= ds.seqs.size())
        throw std::invalid_argument("sequence index " + std::to_string(row) + " out of range (" +
                                    std::to_string(ds.seqs.size()) + " sequences)");
    const auto& s = ds.seqs[row];
    std::size_t len = std::min(s.size(), max_len);
    ea::SequenceBatch batch;
    std::vector<std::size_t> ids(max_len, 0);
    for (std::size_t t = 0; t < len; ++t) ids[max_len - len + t] = s[s.size() - len + t];
    batch.item_ids.push_back(std::move(ids));
    batch.targets.emplace_back(max_len, 0);
    batch.lengths.push_back(len);
    return batch;
}

int run(int argc, char** argv) {
    CLI::App app{"polar attention workbench"};
    app.require_subcommand(1);

    // verify
    auto* verify = app.add_subcommand("verify", "run the property checks");
    std::uint64_t verify_seed = 0;
    bool inject_fault = false;
    verify->add_option("--seed", verify_seed, "seed for the randomized checks");
    verify->add_flag("--inject-fault", inject_fault,
                     "mis-initialize the adaptive rotation to prove failures are caught");

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model on a TSV interaction log");
    std::string train_data, train_out, train_loss_csv, train_config, train_ablation;
    ModelSettings train_ms;
    TrainSettings train_ts;
    train_cmd->add_option("--data", train_data, "user<TAB>item<TAB>timestamp file")->required();
    train_cmd->add_option("--out", train_out, "checkpoint path to write");
    train_cmd->add_option("--loss-csv", train_loss_csv, "per-step loss curve path");
    train_cmd->add_option("--config", train_config, "JSON config (command line wins)");
    train_cmd->add_option("--ablation", train_ablation,
                          "no-adapt | learnable-g | no-relative | no-rotary | no-pcl");
    register_model_flags(train_cmd, train_ms);
    register_train_flags(train_cmd, train_ts);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on held-out targets");
    std::string eval_model, eval_data, eval_split = "test";
    eval_cmd->add_option("--model", eval_model, "checkpoint path")->required();
    eval_cmd->add_option("--data", eval_data, "TSV interaction log")->required();
    eval_cmd->add_option("--split", eval_split, "valid | test")
        ->check(CLI::IsMember({"valid", "test"}));

    // compare
    auto* cmp_cmd = app.add_subcommand("compare", "train several encoder variants on one dataset");
    std::string cmp_data, cmp_out, cmp_config, cmp_variants = "full,rope,none";
    std::uint64_t cmp_model_seed = 7;
    ModelSettings cmp_ms;
    TrainSettings cmp_ts;
    cmp_cmd->add_option("--data", cmp_data, "TSV interaction log")->required();
    cmp_cmd->add_option("--variants", cmp_variants,
                        "comma list: full, encoder kind names, or ablation names");
    cmp_cmd->add_option("--out", cmp_out, "metrics CSV path");
    cmp_cmd->add_option("--config", cmp_config, "JSON config (command line wins)");
    cmp_cmd->add_option("--model-seed", cmp_model_seed, "weight init seed shared by variants");
    register_model_flags(cmp_cmd, cmp_ms);
    register_train_flags(cmp_cmd, cmp_ts);

    // exports
    auto* attn_cmd = app.add_subcommand("export-attention", "dump post-softmax attention maps");
    std::string attn_model, attn_data, attn_out;
    std::size_t attn_row = 0;
    attn_cmd->add_option("--model", attn_model, "checkpoint path")->required();
    attn_cmd->add_option("--data", attn_data, "TSV interaction log")->required();
    attn_cmd->add_option("--out", attn_out, "CSV path")->required();
    attn_cmd->add_option("--sequence", attn_row, "sequence index within the dataset");

    auto* phase_cmd = app.add_subcommand("export-phases", "dump adapted query phases");
    std::string phase_model, phase_data, phase_out;
    std::size_t phase_row = 0;
    phase_cmd->add_option("--model", phase_model, "checkpoint path")->required();
    phase_cmd->add_option("--data", phase_data, "TSV interaction log")->required();
    phase_cmd->add_option("--out", phase_out, "CSV path")->required();
    phase_cmd->add_option("--sequence", phase_row, "sequence index within the dataset");

    auto* decay_cmd = app.add_subcommand("export-decay", "dump the learned decay curve");
    std::string decay_model, decay_out;
    std::size_t decay_layer = 0, decay_head = 0, decay_points = 101;
    double decay_max = 50.0;
    decay_cmd->add_option("--model", decay_model, "checkpoint path")->required();
    decay_cmd->add_option("--out", decay_out, "CSV path")->required();
    decay_cmd->add_option("--layer", decay_layer, "layer index");
    decay_cmd->add_option("--head", decay_head, "head index");
    decay_cmd->add_option("--max-distance", decay_max, "largest relative distance");
    decay_cmd->add_option("--points", decay_points, "number of samples");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic interaction log");
    std::string synth_task, synth_out;
    std::size_t synth_users = 1000, synth_vocab = 50, synth_len = 20, synth_k = 2;
    std::uint64_t synth_seed = 0;
    synth_cmd->add_option("--task", synth_task, "copy-offset | position-parity")
        ->required()
        ->check(CLI::IsMember({"copy-offset", "position-parity"}));
    synth_cmd->add_option("--out", synth_out, "TSV path to write")->required();
    synth_cmd->add_option("--users", synth_users, "number of sequences");
    synth_cmd->add_option("--vocab", synth_vocab, "number of distinct items");
    synth_cmd->add_option("--len", synth_len, "sequence length");
    synth_cmd->add_option("--k", synth_k, "copy offset (copy-offset only)");
    synth_cmd->add_option("--seed", synth_seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (verify->parsed()) {
        ea::VerifyOptions opts;
        opts.seed = verify_seed;
        opts.inject_fault = inject_fault;
        auto results = ea::run_verification(opts);
        bool all_pass = true;
        for (const auto& r : results) {
            std::cout << (r.pass ? "PASS" : "FAIL") << ' ' << r.name << ": " << r.detail << '\n';
            all_pass = all_pass && r.pass;
        }
        std::cout << (all_pass ? "all checks passed" : "CHECKS FAILED") << '\n';
        return all_pass ? 0 : 2;
    }

    if (train_cmd->parsed()) {
        apply_config(train_cmd, train_config, train_ms, train_ts);
        ea::InteractionDataset ds = ea::ingest(train_data);
        ea::Splits splits = ea::leave_one_out(ds);
        if (splits.train.empty())
            throw std::invalid_argument("no trainable sequences (all users too short)");

        ea::ModelConfig cfg = train_ms.to_config(ds.vocab);
        ea::TrainConfig tcfg = train_ts.to_config();
        if (!train_ablation.empty()) ea::apply_ablation(cfg, tcfg.pcl, train_ablation);
        std::cout << "seed: " << tcfg.seed << '\n';
        std::cout << "sequences: " << splits.train.size() << "  vocab: " << ds.vocab << '\n';

        ea::SequenceModel model(cfg, ea::Rng(tcfg.seed).fork("model"));
        ea::TrainResult result = ea::train(model, splits.train, tcfg);
        if (!result.curve.empty())
            std::cout << "loss: " << result.curve.front().total << " -> "
                      << result.curve.back().total << " over " << result.curve.size()
                      << " steps\n";
        if (!train_loss_csv.empty()) write_loss_csv(train_loss_csv, result);
        if (!train_out.empty()) {
            ea::save_checkpoint(model, train_out);
            std::cout << "checkpoint: " << train_out << '\n';
        }
        return 0;
    }

    if (eval_cmd->parsed()) {
        ea::SequenceModel model = ea::load_checkpoint(eval_model);
        ea::InteractionDataset ds = ea::ingest(eval_data);
        if (ds.vocab > model.config().vocab)
            throw std::invalid_argument("dataset vocabulary exceeds the checkpoint's");
        ea::Splits splits = ea::leave_one_out(ds);
        const auto& cases = eval_split == "valid" ? splits.valid : splits.test;
        print_report(eval_split, ea::evaluate(model, cases));
        return 0;
    }

    if (cmp_cmd->parsed()) {
        apply_config(cmp_cmd, cmp_config, cmp_ms, cmp_ts);
        ea::InteractionDataset ds = ea::ingest(cmp_data);
        ea::Splits splits = ea::leave_one_out(ds);
        ea::ModelConfig cfg = cmp_ms.to_config(ds.vocab);
        ea::TrainConfig tcfg = cmp_ts.to_config();

        std::vector<std::string> variants;
        for (std::size_t start = 0; start < cmp_variants.size();) {
            std::size_t comma = cmp_variants.find(',', start);
            if (comma == std::string::npos) comma = cmp_variants.size();
            if (comma > start) variants.push_back(cmp_variants.substr(start, comma - start));
            start = comma + 1;
        }
        if (variants.empty()) throw std::invalid_argument("no variants given");
        std::cout << "seed: " << tcfg.seed << "  model-seed: " << cmp_model_seed << '\n';

        auto rows = ea::compare_encodings(cfg, tcfg, splits, variants, cmp_model_seed);
        for (const auto& row : rows) {
            std::cout << "variant=" << row.name
                      << " final_loss=" << row.training.curve.back().total
                      << " valid_ndcg@10=" << row.valid.ndcg_at_10
                      << " test_ndcg@10=" << row.test.ndcg_at_10
                      << " test_recall@10=" << row.test.recall_at_10 << '\n';
        }
        if (!cmp_out.empty()) {
            std::ofstream out(cmp_out);
            if (!out) throw std::runtime_error("cannot write " + cmp_out);
            out.precision(17);
            out << "variant,split,cases,recall_at_10,mrr,ndcg_at_10\n";
            for (const auto& row : rows) {
                out << row.name << ",valid," << row.valid.cases << ',' << row.valid.recall_at_10
                    << ',' << row.valid.mrr << ',' << row.valid.ndcg_at_10 << '\n';
                out << row.name << ",test," << row.test.cases << ',' << row.test.recall_at_10
                    << ',' << row.test.mrr << ',' << row.test.ndcg_at_10 << '\n';
            }
        }
        return 0;
    }

    if (attn_cmd->parsed()) {
        ea::SequenceModel model = ea::load_checkpoint(attn_model);
        ea::InteractionDataset ds = ea::ingest(attn_data);
        ea::export_attention(attn_out, model,
                             single_row_batch(ds, attn_row, model.config().max_len));
        std::cout << "wrote " << attn_out << '\n';
        return 0;
    }

    if (phase_cmd->parsed()) {
        ea::SequenceModel model = ea::load_checkpoint(phase_model);
        ea::InteractionDataset ds = ea::ingest(phase_data);
        ea::export_phase_distribution(phase_out, model,
                                      single_row_batch(ds, phase_row, model.config().max_len));
        std::cout << "wrote " << phase_out << '\n';
        return 0;
    }

    if (decay_cmd->parsed()) {
        ea::SequenceModel model = ea::load_checkpoint(decay_model);
        if (!ea::is_euler(model.config().encoding.kind))
            throw std::invalid_argument("decay export needs an euler checkpoint");
        if (decay_layer >= model.layers().size())
            throw std::invalid_argument("layer index out of range");
        const auto& layer = model.layers()[decay_layer];
        std::vector<double> delta, bias;
        if (!layer.adapt.empty()) {
            if (decay_head >= layer.adapt.size())
                throw std::invalid_argument("head index out of range");
            delta = layer.adapt[decay_head].delta.value();
            bias = layer.adapt[decay_head].bias.value();
        } else if (decay_head >= model.config().h) {
            throw std::invalid_argument("head index out of range");
        }
        ea::export_decay_curve(decay_out, delta, bias, layer.g.value(), decay_max, decay_points);
        std::cout << "wrote " << decay_out << '\n';
        return 0;
    }

    if (synth_cmd->parsed()) {
        std::cout << "seed: " << synth_seed << '\n';
        ea::InteractionDataset ds =
            synth_task == "copy-offset"
                ? ea::synth_copy_offset(synth_users, synth_vocab, synth_len, synth_k, synth_seed)
                : ea::synth_position_parity(synth_users, synth_vocab, synth_len, synth_seed);
        ea::write_tsv(ds, synth_out);
        std::cout << "wrote " << synth_out << ": " << ds.seqs.size() << " sequences, vocab "
                  << ds.vocab << '\n';
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
