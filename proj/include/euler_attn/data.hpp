#ifndef EULER_ATTN_DATA_HPP
#define EULER_ATTN_DATA_HPP

// Interaction-log ingestion, leave-one-out splits, batching, and synthetic
// generators whose solvability depends on positional structure.

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "model.hpp"
#include "random.hpp"

namespace euler_attn {

struct InteractionDataset {
    std::vector<std::vector<std::size_t>> seqs; // per user, time-ascending, dense 1-based ids
    std::size_t vocab = 0;
    std::vector<std::string> item_labels;       // dense id -> original label (index id-1)
};

// Tab-separated "user  item  timestamp" rows. Sequences are sorted by
// timestamp with ties kept in input order, item ids densified by first
// appearance, and users with fewer than 3 interactions dropped.
inline InteractionDataset ingest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open dataset: " + path);

    struct Row { std::string item; double ts; std::size_t line; };
    std::vector<std::string> user_order;
    std::unordered_map<std::string, std::vector<Row>> per_user;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string user, item, ts_text;
        if (!std::getline(ss, user, '\t') || !std::getline(ss, item, '\t') ||
            !std::getline(ss, ts_text, '\t') || user.empty() || item.empty())
            throw std::invalid_argument(path + ": line " + std::to_string(lineno) +
                                        ": expected user<TAB>item<TAB>timestamp");
        double ts;
        try {
            std::size_t used = 0;
            ts = std::stod(ts_text, &used);
            if (used != ts_text.size()) throw std::invalid_argument("trailing text");
        } catch (const std::exception&) {
            throw std::invalid_argument(path + ": line " + std::to_string(lineno) +
                                        ": bad timestamp '" + ts_text + "'");
        }
        auto [it, fresh] = per_user.try_emplace(user);
        if (fresh) user_order.push_back(user);
        it->second.push_back({item, ts, lineno});
    }
    if (per_user.empty()) throw std::invalid_argument(path + ": no interactions found");

    InteractionDataset ds;
    std::unordered_map<std::string, std::size_t> dense;
    for (const auto& user : user_order) {
        auto& rows = per_user[user];
        if (rows.size() < 3) continue;
        std::stable_sort(rows.begin(), rows.end(),
                         [](const Row& a, const Row& b) { return a.ts < b.ts; });
        std::vector<std::size_t> seq;
        for (const auto& row : rows) {
            auto [it, fresh] = dense.try_emplace(row.item, dense.size() + 1);
            if (fresh) ds.item_labels.push_back(row.item);
            seq.push_back(it->second);
        }
        ds.seqs.push_back(std::move(seq));
    }
    if (ds.seqs.empty())
        throw std::invalid_argument(path + ": every user has fewer than 3 interactions");
    ds.vocab = dense.size();
    return ds;
}

struct EvalCase {
    std::size_t user;
    std::vector<std::size_t> context;
    std::size_t target;
};

// test: last item from all prior; valid: second-to-last from its prefix;
// train: autoregressive targets over v_1..v_{n-2}. A length-3 sequence
// leaves no train targets (its second item already belongs to the valid
// split), keeping the three views disjoint.
struct Splits {
    std::vector<std::vector<std::size_t>> train; // per user: v_1..v_{n-2}
    std::vector<EvalCase> valid, test;
};

inline Splits leave_one_out(const InteractionDataset& ds) {
    Splits out;
    for (std::size_t u = 0; u < ds.seqs.size(); ++u) {
        const auto& s = ds.seqs[u];
        if (s.size() < 3) throw std::invalid_argument("sequence shorter than 3 after filtering");
        std::size_t n = s.size();
        out.test.push_back({u, {s.begin(), s.end() - 1}, s[n - 1]});
        out.valid.push_back({u, {s.begin(), s.end() - 2}, s[n - 2]});
        if (n >= 4) out.train.emplace_back(s.begin(), s.end() - 2);
    }
    return out;
}

// One training row per sequence: inputs are all but the last item of the
// kept window, targets the next item at each step. Windows keep the most
// recent max_len steps and are left-padded, so the final target survives
// truncation.
inline SequenceBatch make_training_batch(const std::vector<std::vector<std::size_t>>& seqs,
                                         const std::vector<std::size_t>& indices,
                                         std::size_t max_len) {
    SequenceBatch batch;
    for (std::size_t idx : indices) {
        const auto& s = seqs.at(idx);
        if (s.size() < 2) throw std::invalid_argument("training sequence needs at least 2 items");
        std::size_t window = std::min(s.size(), max_len + 1);
        std::size_t start = s.size() - window;
        std::size_t len = window - 1;
        std::vector<std::size_t> ids(max_len, 0), targets(max_len, 0);
        for (std::size_t t = 0; t < len; ++t) {
            ids[max_len - len + t] = s[start + t];
            targets[max_len - len + t] = s[start + t + 1];
        }
        batch.item_ids.push_back(std::move(ids));
        batch.targets.push_back(std::move(targets));
        batch.lengths.push_back(len);
    }
    return batch;
}

// Contexts truncated to the most recent max_len items, left-padded; the
// prediction is read from the last position. Targets stay out of the batch.
inline SequenceBatch make_eval_batch(const std::vector<const EvalCase*>& cases,
                                     std::size_t max_len) {
    SequenceBatch batch;
    for (const auto* c : cases) {
        if (c->context.empty()) throw std::invalid_argument("empty evaluation context");
        std::size_t len = std::min(c->context.size(), max_len);
        std::size_t start = c->context.size() - len;
        std::vector<std::size_t> ids(max_len, 0);
        for (std::size_t t = 0; t < len; ++t) ids[max_len - len + t] = c->context[start + t];
        batch.item_ids.push_back(std::move(ids));
        batch.targets.emplace_back(max_len, 0);
        batch.lengths.push_back(len);
    }
    return batch;
}

// Periodic copying task: the first k+1 items are uniform draws, after which
// v_t repeats v_{t-(k+1)}. Predicting the next item requires looking exactly
// k steps back, so content alone does not solve it.
inline InteractionDataset synth_copy_offset(std::size_t users, std::size_t vocab,
                                            std::size_t len, std::size_t k,
                                            std::uint64_t seed) {
    if (len <= k) throw std::invalid_argument("copy_offset needs len > k");
    if (vocab < 2) throw std::invalid_argument("copy_offset needs at least 2 items");
    InteractionDataset ds;
    ds.vocab = vocab;
    Rng rng = Rng(seed).fork("copy_offset");
    for (std::size_t u = 0; u < users; ++u) {
        std::vector<std::size_t> s(len);
        for (std::size_t t = 0; t < len; ++t)
            s[t] = t <= k ? static_cast<std::size_t>(rng.uniform_int(1, vocab)) : s[t - (k + 1)];
        ds.seqs.push_back(std::move(s));
    }
    for (std::size_t j = 1; j <= vocab; ++j) ds.item_labels.push_back(std::to_string(j));
    return ds;
}

// The next item is a fixed random function of (current item, step parity).
// Absolute position information separates even from odd steps.
inline InteractionDataset synth_position_parity(std::size_t users, std::size_t vocab,
                                                std::size_t len, std::uint64_t seed) {
    if (len < 2) throw std::invalid_argument("position_parity needs len >= 2");
    if (vocab < 2) throw std::invalid_argument("position_parity needs at least 2 items");
    InteractionDataset ds;
    ds.vocab = vocab;
    Rng rng = Rng(seed).fork("position_parity");
    std::vector<std::size_t> table(vocab * 2);
    for (auto& v : table) v = static_cast<std::size_t>(rng.uniform_int(1, vocab));
    for (std::size_t u = 0; u < users; ++u) {
        std::vector<std::size_t> s(len);
        s[0] = static_cast<std::size_t>(rng.uniform_int(1, vocab));
        for (std::size_t t = 1; t < len; ++t)
            s[t] = table[(s[t - 1] - 1) * 2 + (t % 2)];
        ds.seqs.push_back(std::move(s));
    }
    for (std::size_t j = 1; j <= vocab; ++j) ds.item_labels.push_back(std::to_string(j));
    return ds;
}

// Serializes to the same TSV the ingester reads; timestamps are positions.
inline void write_tsv(const InteractionDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset: " + path);
    for (std::size_t u = 0; u < ds.seqs.size(); ++u)
        for (std::size_t t = 0; t < ds.seqs[u].size(); ++t)
            out << (u + 1) << '\t' << ds.item_labels.at(ds.seqs[u][t] - 1) << '\t' << (t + 1) << '\n';
    if (!out) throw std::runtime_error("short write to dataset: " + path);
}

// Upper bound on any predictor that sees the context as an unordered
// multiset plus the final item, for data with period `period` (copy_offset
// data has period k+1). Brute force: enumerate every assignment of context
// items to residue classes, keep the ones matching the observed counts and
// final item, and predict the majority next item among them. Ties resolve
// to the smaller item id.
inline double content_only_ceiling(const std::vector<EvalCase>& cases, std::size_t period) {
    if (period == 0 || period > 8)
        throw std::invalid_argument("content_only_ceiling expects a period in [1, 8]");
    std::size_t hits = 0;
    for (const auto& c : cases) {
        std::size_t len = c.context.size();
        if (len == 0) throw std::invalid_argument("empty evaluation context");
        std::map<std::size_t, std::size_t> counts;
        for (std::size_t v : c.context) ++counts[v];
        std::vector<std::size_t> items;
        for (const auto& [v, n] : counts) items.push_back(v);
        std::vector<std::size_t> class_size(period, 0);
        for (std::size_t t = 0; t < len; ++t) ++class_size[t % period];

        std::size_t total = 1;
        for (std::size_t r = 0; r < period; ++r) total *= items.size();
        std::map<std::size_t, std::size_t> votes;
        std::vector<std::size_t> pattern(period);
        for (std::size_t code = 0; code < total; ++code) {
            std::size_t rest = code;
            for (std::size_t r = 0; r < period; ++r) {
                pattern[r] = items[rest % items.size()];
                rest /= items.size();
            }
            if (pattern[(len - 1) % period] != c.context.back()) continue;
            std::map<std::size_t, std::size_t> implied;
            for (std::size_t r = 0; r < period; ++r) implied[pattern[r]] += class_size[r];
            if (implied != counts) continue;
            ++votes[pattern[len % period]];
        }
        std::size_t best = 0, best_votes = 0;
        for (const auto& [v, n] : votes)
            if (n > best_votes) { best = v; best_votes = n; }
        hits += best == c.target ? 1 : 0;
    }
    return cases.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(cases.size());
}

// Frequency baseline over ordered training data: successor counts of the
// last context item over the train split, falling back to global
// popularity. Ties resolve to the smaller item id.
inline double count_oracle_accuracy(const Splits& splits, const std::vector<EvalCase>& cases) {
    std::map<std::size_t, std::map<std::size_t, std::size_t>> bigram;
    std::map<std::size_t, std::size_t> popularity;
    for (const auto& s : splits.train)
        for (std::size_t t = 0; t + 1 < s.size(); ++t) {
            ++bigram[s[t]][s[t + 1]];
            ++popularity[s[t + 1]];
        }
    auto argmax = [](const std::map<std::size_t, std::size_t>& counts) {
        std::size_t best = 0, best_count = 0;
        for (const auto& [item, count] : counts)
            if (count > best_count) { best = item; best_count = count; }
        return best;
    };
    std::size_t fallback = argmax(popularity);
    std::size_t hits = 0;
    for (const auto& c : cases) {
        auto it = bigram.find(c.context.back());
        std::size_t guess = it != bigram.end() ? argmax(it->second) : fallback;
        if (guess == 0) guess = fallback;
        hits += guess == c.target ? 1 : 0;
    }
    return cases.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(cases.size());
}

} // namespace euler_attn

#endif
