#pragma once

#include <map>
#include <string>

#include "biome/dsp.hpp"
#include "biome/encoder.hpp"

namespace biome::profiler {

// Token count for a given duration at the model front-end settings:
// floor(n_mels/16) * floor(n_frames/16) with the standard mel framing.
inline long long token_count(double audio_seconds, const dsp::MelConfig& mel = {}) {
    const int sr = dsp::kModelSampleRate;
    const auto samples = static_cast<long long>(audio_seconds * sr);
    const auto win = static_cast<long long>(std::lround(mel.win_seconds * sr));
    const auto hop = static_cast<long long>(std::lround(mel.hop_seconds * sr));
    if (samples < win) return 0;
    const long long frames = (samples - win) / hop + 1;
    constexpr int P = dsp::PatchSequence::kPatchSize;
    return (mel.n_mels / P) * (frames / P);
}

inline std::map<std::string, long long> param_breakdown(const enc::EncoderConfig& cfg) {
    cfg.validate();
    const long long d = cfg.d_model, kv = cfg.kv_dim(), h = cfg.mlp_hidden, L = cfg.n_layers;
    std::map<std::string, long long> b;
    b["embedding"] = enc::kPatchDim * d + d;
    b["attention"] = L * (d * d + 2 * d * kv + d * d);
    b["mlp"] = L * 3 * d * h;
    b["film"] = cfg.use_film ? L * 2 * (cfg.msab_dim * d + d) : 0;
    b["norms"] = L * 2 * d + d;
    b["heads"] = 0;  // distillation projection heads are not part of the deployed encoder
    return b;
}

inline long long count_params(const enc::EncoderConfig& cfg) {
    long long n = 0;
    for (const auto& [k, v] : param_breakdown(cfg)) n += v;
    return n;
}

// Multiply-accumulate counts, dominant-term convention: matrix products and
// the FiLM affine only; softmax, normalization and activation flops excluded.
inline std::map<std::string, double> macs_breakdown(const enc::EncoderConfig& cfg,
                                                    double audio_seconds,
                                                    const dsp::MelConfig& mel = {}) {
    cfg.validate();
    require(audio_seconds >= 0, "count_macs: negative duration");
    const double T = static_cast<double>(token_count(audio_seconds, mel));
    const double d = cfg.d_model, kv = cfg.kv_dim(), h = cfg.mlp_hidden, L = cfg.n_layers;
    std::map<std::string, double> b;
    b["embedding"] = T * enc::kPatchDim * d;
    b["attention"] = L * (T * d * d + 2.0 * T * d * kv + 2.0 * T * T * d + T * d * d);
    b["mlp"] = L * 3.0 * T * d * h;
    b["film"] = cfg.use_film ? L * (2.0 * cfg.msab_dim * d + T * d) : 0.0;
    return b;
}

inline double count_macs(const enc::EncoderConfig& cfg, double audio_seconds,
                         const dsp::MelConfig& mel = {}) {
    require(audio_seconds > 0, "count_macs: duration must be positive");
    double total = 0.0;
    for (const auto& [k, v] : macs_breakdown(cfg, audio_seconds, mel)) total += v;
    return total / audio_seconds / 1e6;  // MMACs per second of audio
}

// Analytic lower-bound estimate: weights + one layer's working set (token
// buffers, Q/K/V/context, all heads' score matrices, MLP hidden) + front-end
// I/O buffers. Not a hardware measurement.
inline long long estimate_peak_memory(const enc::EncoderConfig& cfg, double audio_seconds,
                                      int bytes_per_scalar = 4, const dsp::MelConfig& mel = {}) {
    cfg.validate();
    require(bytes_per_scalar > 0, "estimate_peak_memory: bytes_per_scalar must be positive");
    const long long T = token_count(audio_seconds, mel);
    const long long d = cfg.d_model, kv = cfg.kv_dim(), h = cfg.mlp_hidden;
    long long scalars = count_params(cfg);
    if (T > 0) {
        scalars += 2 * T * d;                                   // residual stream ping/pong
        scalars += T * d + 2 * T * kv + T * d;                  // Q, K, V, head context
        scalars += static_cast<long long>(cfg.n_heads) * T * T; // attention scores
        scalars += 2 * T * h;                                   // MLP gate/up
        const int sr = dsp::kModelSampleRate;
        const auto samples = static_cast<long long>(audio_seconds * sr);
        const auto win = static_cast<long long>(std::lround(mel.win_seconds * sr));
        const auto hop = static_cast<long long>(std::lround(mel.hop_seconds * sr));
        const long long frames = samples >= win ? (samples - win) / hop + 1 : 0;
        scalars += mel.n_mels * frames;  // mel map
        scalars += T * enc::kPatchDim;   // patch matrix
        scalars += cfg.msab_dim;         // context vector
    }
    return scalars * bytes_per_scalar;
}

struct ProfileReport {
    std::string size_name;
    long long param_count = 0;
    double mmacs_per_s = 0.0;
    long long peak_mem_bytes_estimate = 0;
    double audio_seconds = 1.0;
    int bytes_per_scalar = 4;
    long long tokens = 0;
    std::map<std::string, long long> params_by_component;
    std::map<std::string, double> macs_by_component;
};

inline ProfileReport profile(const enc::EncoderConfig& cfg, double audio_seconds = 1.0,
                             int bytes_per_scalar = 4) {
    ProfileReport r;
    r.size_name = enc::to_string(cfg.size_tag);
    r.audio_seconds = audio_seconds;
    r.bytes_per_scalar = bytes_per_scalar;
    r.tokens = token_count(audio_seconds);
    r.params_by_component = param_breakdown(cfg);
    for (const auto& [k, v] : r.params_by_component) r.param_count += v;
    r.macs_by_component = macs_breakdown(cfg, audio_seconds);
    r.mmacs_per_s = count_macs(cfg, audio_seconds);
    r.peak_mem_bytes_estimate = estimate_peak_memory(cfg, audio_seconds, bytes_per_scalar);
    return r;
}

// Published reference figures for the named sizes, reported alongside the
// analytic numbers for context (the memory figures include framework
// overheads the analytic estimate deliberately excludes).
struct ReferenceFigures {
    const char* name;
    double params_millions;
    double mmacs_per_s;      // for 1 s of 16 kHz audio
    double peak_gb_5min;     // FP32, 5 minutes
};

inline const std::vector<ReferenceFigures>& reference_figures() {
    static const std::vector<ReferenceFigures> refs = {
        {"edge", 6.0, 227.0, 1.7},
        {"small", 26.0, 1154.0, 3.6},
        {"base", 76.0, 3427.0, 4.3},
    };
    return refs;
}

}  // namespace biome::profiler
