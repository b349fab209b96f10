#ifndef EULER_ATTN_CHECKPOINT_HPP
#define EULER_ATTN_CHECKPOINT_HPP

// Self-describing binary checkpoint: a JSON header (model config plus the
// array index) followed by raw fp64 payloads. Round-trips bit-exactly.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "model.hpp"

namespace euler_attn {

inline constexpr char kCheckpointMagic[] = "EATNCKPT1\n";

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    return {
        {"d", cfg.d},
        {"h", cfg.h},
        {"layers", cfg.layers},
        {"ffn_dim", cfg.ffn_dim},
        {"max_len", cfg.max_len},
        {"vocab", cfg.vocab},
        {"dropout", cfg.dropout},
        {"encoding",
         {{"kind", kind_name(cfg.encoding.kind)},
          {"rotary_input", cfg.encoding.use_rotary_input_embedding},
          {"angle_base", cfg.encoding.angle_base},
          {"learnable_freq", cfg.encoding.learnable_freq},
          {"zero_freq", cfg.encoding.zero_freq}}},
    };
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.d = j.at("d").get<std::size_t>();
    cfg.h = j.at("h").get<std::size_t>();
    cfg.layers = j.at("layers").get<std::size_t>();
    cfg.ffn_dim = j.at("ffn_dim").get<std::size_t>();
    cfg.max_len = j.at("max_len").get<std::size_t>();
    cfg.vocab = j.at("vocab").get<std::size_t>();
    cfg.dropout = j.at("dropout").get<double>();
    const auto& e = j.at("encoding");
    cfg.encoding.kind = kind_from_name(e.at("kind").get<std::string>());
    cfg.encoding.use_rotary_input_embedding = e.at("rotary_input").get<bool>();
    cfg.encoding.angle_base = e.at("angle_base").get<double>();
    cfg.encoding.learnable_freq = e.at("learnable_freq").get<bool>();
    cfg.encoding.zero_freq = e.at("zero_freq").get<bool>();
    return cfg;
}

inline void save_checkpoint(SequenceModel& model, const std::string& path) {
    auto params = model.named_params();
    nlohmann::json header;
    header["config"] = model_config_to_json(model.config());
    header["arrays"] = nlohmann::json::array();
    for (auto& [name, t] : params)
        header["arrays"].push_back({{"name", name}, {"shape", t.shape()}});
    std::string head = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
    std::uint64_t head_len = head.size();
    out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (auto& [name, t] : params)
        out.write(reinterpret_cast<const char*>(t.value().data()),
                  static_cast<std::streamsize>(t.value().size() * sizeof(double)));
    if (!out) throw std::runtime_error("short write to checkpoint: " + path);
}

inline SequenceModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[sizeof(kCheckpointMagic) - 1];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    std::uint64_t head_len = 0;
    in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
    std::string head(head_len, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head_len));
    if (!in) throw std::runtime_error("truncated checkpoint header: " + path);

    nlohmann::json header = nlohmann::json::parse(head);
    ModelConfig cfg = model_config_from_json(header.at("config"));
    SequenceModel model(cfg, Rng(0)); // initialization is fully overwritten below

    auto params = model.named_params();
    const auto& arrays = header.at("arrays");
    if (arrays.size() != params.size())
        throw std::runtime_error("checkpoint array count does not match the model");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& entry = arrays.at(i);
        if (entry.at("name").get<std::string>() != params[i].first)
            throw std::runtime_error("checkpoint array order mismatch at " + params[i].first);
        Shape shape = entry.at("shape").get<Shape>();
        if (shape != params[i].second.shape())
            throw std::runtime_error("checkpoint shape mismatch at " + params[i].first);
        auto& dest = params[i].second.leaf_value();
        in.read(reinterpret_cast<char*>(dest.data()),
                static_cast<std::streamsize>(dest.size() * sizeof(double)));
        if (!in) throw std::runtime_error("truncated checkpoint payload: " + path);
    }
    return model;
}

} // namespace euler_attn

#endif
