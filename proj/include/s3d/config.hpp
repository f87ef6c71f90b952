#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "s3d/error.hpp"
#include "s3d/net.hpp"

namespace s3d {

/// Flat JSON run configuration; every key is optional. Defaults mirror the
/// paper where it speaks (224x224 input, Adam 0.9/0.999/1e-8) and sensible
/// desk-scale values elsewhere.
struct RunConfig {
    std::string preset = "paper";
    std::int64_t input_h = 224;
    std::int64_t input_w = 224;
    std::int64_t batch_size = 4;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t max_steps = 100;
    std::uint64_t seed = 42;
    bool shuffle = true;
    std::int64_t checkpoint_every = 100;
    std::string manifest;
    std::string checkpoint_dir = "checkpoints";
    std::string output_dir = "out";
    std::int64_t synth_sequences = 2;
    std::int64_t synth_frames_per_seq = 8;

    void validate() const {
        const ArchPreset p = preset_by_name(preset); // throws on unknown names
        if (input_h < p.spatial_factor() || input_w < p.spatial_factor() ||
            input_h % p.spatial_factor() != 0 || input_w % p.spatial_factor() != 0)
            throw ConfigError("input_h/input_w must be positive multiples of " +
                              std::to_string(p.spatial_factor()) + " for preset '" + preset + "'");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
        if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
        if (learning_rate <= 0) throw ConfigError("learning_rate must be > 0");
        if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
            throw ConfigError("beta1/beta2 must lie in [0,1)");
        if (epsilon <= 0) throw ConfigError("epsilon must be > 0");
        if (synth_sequences < 1 || synth_frames_per_seq < 1)
            throw ConfigError("synth_sequences and synth_frames_per_seq must be >= 1");
    }
};

inline RunConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig cfg;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "preset") cfg.preset = value.get<std::string>();
            else if (key == "input_h") cfg.input_h = value.get<std::int64_t>();
            else if (key == "input_w") cfg.input_w = value.get<std::int64_t>();
            else if (key == "batch_size") cfg.batch_size = value.get<std::int64_t>();
            else if (key == "learning_rate") cfg.learning_rate = value.get<double>();
            else if (key == "beta1") cfg.beta1 = value.get<double>();
            else if (key == "beta2") cfg.beta2 = value.get<double>();
            else if (key == "epsilon") cfg.epsilon = value.get<double>();
            else if (key == "max_steps") cfg.max_steps = value.get<std::int64_t>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "shuffle") cfg.shuffle = value.get<bool>();
            else if (key == "checkpoint_every") cfg.checkpoint_every = value.get<std::int64_t>();
            else if (key == "manifest") cfg.manifest = value.get<std::string>();
            else if (key == "checkpoint_dir") cfg.checkpoint_dir = value.get<std::string>();
            else if (key == "output_dir") cfg.output_dir = value.get<std::string>();
            else if (key == "synth_sequences") cfg.synth_sequences = value.get<std::int64_t>();
            else if (key == "synth_frames_per_seq")
                cfg.synth_frames_per_seq = value.get<std::int64_t>();
            else throw ConfigError("unknown config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    try {
        cfg.validate();
    } catch (const ShapeError& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": malformed JSON: " + e.what());
    }
    return parse_config(j);
}

} // namespace s3d
