#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "biome/archive.hpp"
#include "biome/distill.hpp"

namespace biome::io {

using nlohmann::json;

// Shortest round-trip decimal form, locale-independent.
inline std::string format_double(double x) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    (void)ec;
    return std::string(buf, p);
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("json: cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError("json: malformed '" + path + "': " + e.what());
    }
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InputError("json: cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
}

// Written to a temp name then renamed, so a manifest is never half-present.
inline void write_json_atomic(const std::string& path, const json& j) {
    const std::string tmp = path + ".tmp";
    write_json_file(tmp, j);
    std::filesystem::rename(tmp, path);
}

inline uint64_t file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("hash: cannot open '" + path + "'");
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 15];
    while (in.good()) {
        in.read(buf, sizeof(buf));
        h = fnv1a(buf, static_cast<size_t>(in.gcount()), h);
    }
    return h;
}

// ---- config JSON ----

inline json to_json(const enc::EncoderConfig& c) {
    return json{{"n_layers", c.n_layers},       {"d_model", c.d_model},
                {"n_heads", c.n_heads},         {"n_kv_heads", c.n_kv_heads},
                {"mlp_hidden", c.mlp_hidden},   {"msab_dim", c.msab_dim},
                {"rope_base", c.rope_base},     {"size_tag", enc::to_string(c.size_tag)},
                {"use_film", c.use_film}};
}

inline enc::EncoderConfig encoder_config_from_json(const json& j) {
    enc::EncoderConfig c;
    c.n_layers = j.value("n_layers", c.n_layers);
    c.d_model = j.value("d_model", c.d_model);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.n_kv_heads = j.value("n_kv_heads", c.n_kv_heads);
    c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
    c.msab_dim = j.value("msab_dim", c.msab_dim);
    c.rope_base = j.value("rope_base", c.rope_base);
    c.use_film = j.value("use_film", c.use_film);
    const std::string tag = j.value("size_tag", "custom");
    c.size_tag = tag == "edge"    ? enc::SizeTag::Edge
                 : tag == "small" ? enc::SizeTag::Small
                 : tag == "base"  ? enc::SizeTag::Base
                                  : enc::SizeTag::Custom;
    c.validate();
    return c;
}

inline json to_json(const distill::TrainSchedule& s) {
    return json{{"peak_lr", s.peak_lr},
                {"floor_lr", s.floor_lr},
                {"warmup_steps", s.warmup_steps},
                {"total_steps", s.total_steps},
                {"weight_decay", s.weight_decay},
                {"beta1", s.beta1},
                {"beta2", s.beta2},
                {"batch_size", s.batch_size},
                {"seed", s.seed}};
}

inline distill::TrainSchedule schedule_from_json(const json& j) {
    distill::TrainSchedule s;
    s.peak_lr = j.value("peak_lr", s.peak_lr);
    s.floor_lr = j.value("floor_lr", s.floor_lr);
    s.warmup_steps = j.value("warmup_steps", s.warmup_steps);
    s.total_steps = j.value("total_steps", s.total_steps);
    s.weight_decay = j.value("weight_decay", s.weight_decay);
    s.beta1 = j.value("beta1", s.beta1);
    s.beta2 = j.value("beta2", s.beta2);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.seed = j.value("seed", s.seed);
    s.validate();
    return s;
}

inline json to_json(const distill::TrainConfig& c) {
    json j;
    j["student"] = to_json(c.student);
    j["schedule"] = to_json(c.sched);
    j["d_teacher"] = c.d_teacher;
    j["distill_layers"] = c.distill_layers;
    j["clip_seconds"] = c.clip_seconds;
    j["msab_resolution"] = c.msab_resolution;
    j["overfit_one_batch"] = c.overfit_one_batch;
    j["checkpoint_interval"] = c.checkpoint_interval;
    return j;
}

inline distill::TrainConfig train_config_from_json(const json& j) {
    distill::TrainConfig c = distill::desk_scale_config();
    if (j.contains("student")) c.student = encoder_config_from_json(j["student"]);
    if (j.contains("schedule")) c.sched = schedule_from_json(j["schedule"]);
    c.d_teacher = j.value("d_teacher", c.d_teacher);
    if (j.contains("distill_layers"))
        c.distill_layers = j["distill_layers"].get<std::vector<int>>();
    c.clip_seconds = j.value("clip_seconds", c.clip_seconds);
    c.msab_resolution = j.value("msab_resolution", c.msab_resolution);
    c.overfit_one_batch = j.value("overfit_one_batch", c.overfit_one_batch);
    c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
    require(!c.distill_layers.empty(), "train config: distill_layers empty");
    require(c.msab_resolution * 2 == c.student.msab_dim,
            "train config: student msab_dim must be 2x msab_resolution");
    return c;
}

// ---- checkpoints ----

// A checkpoint is <stem>.bin (tensor archive, f64) plus <stem>.json holding
// the config and training-state record.
inline void save_checkpoint(const std::string& stem, enc::EncoderWeights& weights,
                            distill::ProjectionHeads* heads, const json& state) {
    TensorArchive a;
    weights.for_each_tensor([&a](const std::string& n, Mat& m) {
        a.put(n, m, TensorArchive::DType::F64);
    });
    if (heads)
        heads->for_each_tensor([&a](const std::string& n, Mat& m) {
            a.put(n, m, TensorArchive::DType::F64);
        });
    a.write_file(stem + ".bin");
    json j = state;
    j["encoder"] = to_json(weights.cfg);
    if (heads) j["head_layers"] = heads->k_layers;
    write_json_file(stem + ".json", j);
}

inline std::string checkpoint_json_path(const std::string& bin_path) {
    std::filesystem::path p(bin_path);
    p.replace_extension(".json");
    return p.string();
}

inline enc::EncoderWeights load_encoder_checkpoint(const std::string& bin_path) {
    const json meta = read_json_file(checkpoint_json_path(bin_path));
    require(meta.contains("encoder"), "checkpoint: metadata missing encoder config");
    enc::EncoderConfig cfg = encoder_config_from_json(meta["encoder"]);
    TensorArchive a = TensorArchive::read_file(bin_path);
    enc::EncoderWeights w = enc::EncoderWeights::init(cfg, 0);
    w.for_each_tensor([&a](const std::string& name, Mat& m) {
        const Mat loaded = a.get_mat(name);
        require_shape(loaded.rows == m.rows && loaded.cols == m.cols,
                      "checkpoint: tensor '" + name + "' is " + shape_str(loaded) +
                          ", config wants " + shape_str(m));
        m = loaded;
    });
    return w;
}

// ---- run manifest ----

struct RunManifest {
    json config;
    uint64_t seed = 0;
    std::string tool_version;
    std::map<std::string, std::string> input_hashes;  // path -> hex hash
    std::vector<std::string> outputs;
};

inline void write_manifest(const std::string& path, const RunManifest& m) {
    json j;
    j["config"] = m.config;
    j["seed"] = m.seed;
    j["tool_version"] = m.tool_version;
    j["input_hashes"] = m.input_hashes;
    j["outputs"] = m.outputs;
    write_json_atomic(path, j);
}

inline std::string hex64(uint64_t v) {
    char buf[17];
    static const char* d = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = d[v & 0xf];
        v >>= 4;
    }
    buf[16] = '\0';
    return std::string(buf);
}

// ---- metrics CSV ----

inline std::string metrics_csv_header(const std::vector<int>& k_layers) {
    std::string h = "step,lr,total,l1_term,cos_term";
    for (int k : k_layers)
        h += ",k" + std::to_string(k) + "_l1,k" + std::to_string(k) + "_cos";
    return h;
}

inline std::string metrics_csv_row(int step, double lr, const distill::LossBreakdown& b) {
    std::string r = std::to_string(step) + "," + format_double(lr) + "," + format_double(b.total) +
                    "," + format_double(b.l1_term) + "," + format_double(b.cos_term);
    for (const auto& [k, v] : b.per_layer)
        r += "," + format_double(v.first) + "," + format_double(v.second);
    return r;
}

}  // namespace biome::io
