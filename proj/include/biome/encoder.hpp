#pragma once

#include <functional>
#include <string>
#include <vector>

#include "biome/autodiff.hpp"
#include "biome/dsp.hpp"

namespace biome::enc {

constexpr int kPatchDim = dsp::PatchSequence::kPatchSize * dsp::PatchSequence::kPatchSize;
constexpr double kRmsEps = 1e-6;

enum class SizeTag { Edge, Small, Base, Custom };

inline const char* to_string(SizeTag t) {
    switch (t) {
        case SizeTag::Edge: return "edge";
        case SizeTag::Small: return "small";
        case SizeTag::Base: return "base";
        default: return "custom";
    }
}

struct EncoderConfig {
    int n_layers = 12;
    int d_model = 192;
    int n_heads = 6;
    int n_kv_heads = 2;
    int mlp_hidden = 352;
    int msab_dim = 512;
    double rope_base = 10000.0;
    SizeTag size_tag = SizeTag::Custom;
    bool use_film = true;

    int head_dim() const { return d_model / n_heads; }
    int kv_dim() const { return n_kv_heads * head_dim(); }
    int group_size() const { return n_heads / n_kv_heads; }

    void validate() const {
        require(n_layers >= 0, "config: n_layers must be >= 0");
        require(d_model > 0 && n_heads > 0 && n_kv_heads > 0 && mlp_hidden > 0,
                "config: dimensions must be positive");
        require(d_model % n_heads == 0, "config: d_model must divide by n_heads");
        require(n_heads % n_kv_heads == 0, "config: n_heads must divide by n_kv_heads");
        require(head_dim() % 2 == 0, "config: head_dim must be even for rotary embedding");
        require(msab_dim > 0 || !use_film, "config: msab_dim must be positive when FiLM is on");
        require(rope_base > 0, "config: rope_base must be positive");
    }
};

// Named sizes. Hidden widths are tuned per size so the total parameter count
// lands on the 6M / 26M / 76M budgets with the per-layer FiLM conditioners
// included; head counts keep head_dim in {32, 64}.
inline EncoderConfig build_config(SizeTag tag) {
    EncoderConfig c;
    c.size_tag = tag;
    switch (tag) {
        case SizeTag::Edge:
            c.d_model = 192; c.n_heads = 6; c.n_kv_heads = 2; c.mlp_hidden = 352;
            break;
        case SizeTag::Small:
            c.d_model = 384; c.n_heads = 6; c.n_kv_heads = 2; c.mlp_hidden = 1184;
            break;
        case SizeTag::Base:
            c.d_model = 768; c.n_heads = 12; c.n_kv_heads = 4; c.mlp_hidden = 1728;
            break;
        default:
            throw InputError("build_config: unknown size tag");
    }
    c.validate();
    return c;
}

inline EncoderConfig build_config(const std::string& name) {
    if (name == "edge") return build_config(SizeTag::Edge);
    if (name == "small") return build_config(SizeTag::Small);
    if (name == "base") return build_config(SizeTag::Base);
    throw InputError("build_config: unknown size '" + name + "' (want edge|small|base)");
}

struct LayerWeights {
    Mat attn_norm;                 // 1 x d
    Mat wq, wk, wv, wo;            // d x d, d x kv, d x kv, d x d
    Mat film_scale_w, film_scale_b;  // msab x d, 1 x d (empty when FiLM off)
    Mat film_shift_w, film_shift_b;
    Mat mlp_norm;                  // 1 x d
    Mat w_gate, w_up, w_down;      // d x h, d x h, h x d
};

struct EncoderWeights {
    EncoderConfig cfg;
    Mat embed_w;   // 256 x d
    Mat embed_b;   // 1 x d
    std::vector<LayerWeights> layers;
    Mat final_norm;  // 1 x d

    // Projections ~ N(0, 0.02); norms start at one; FiLM starts at identity
    // (scale head bias = 1, everything else 0) so conditioning is a no-op
    // until trained. film_identity=false draws the conditioners randomly too,
    // for zero-shot experiments where the context should already matter.
    static EncoderWeights init(const EncoderConfig& cfg, uint64_t seed, bool film_identity = true) {
        cfg.validate();
        Rng rng(seed);
        const double sd = 0.02;
        EncoderWeights w;
        w.cfg = cfg;
        w.embed_w = Mat::gaussian(kPatchDim, cfg.d_model, rng, sd);
        w.embed_b = Mat::zeros(1, cfg.d_model);
        w.layers.resize(static_cast<size_t>(cfg.n_layers));
        for (auto& l : w.layers) {
            l.attn_norm = Mat::full(1, cfg.d_model, 1.0);
            l.wq = Mat::gaussian(cfg.d_model, cfg.d_model, rng, sd);
            l.wk = Mat::gaussian(cfg.d_model, cfg.kv_dim(), rng, sd);
            l.wv = Mat::gaussian(cfg.d_model, cfg.kv_dim(), rng, sd);
            l.wo = Mat::gaussian(cfg.d_model, cfg.d_model, rng, sd);
            if (cfg.use_film) {
                if (film_identity) {
                    l.film_scale_w = Mat::zeros(cfg.msab_dim, cfg.d_model);
                    l.film_scale_b = Mat::full(1, cfg.d_model, 1.0);
                    l.film_shift_w = Mat::zeros(cfg.msab_dim, cfg.d_model);
                    l.film_shift_b = Mat::zeros(1, cfg.d_model);
                } else {
                    l.film_scale_w = Mat::gaussian(cfg.msab_dim, cfg.d_model, rng, sd);
                    l.film_scale_b = Mat::full(1, cfg.d_model, 1.0);
                    l.film_shift_w = Mat::gaussian(cfg.msab_dim, cfg.d_model, rng, sd);
                    l.film_shift_b = Mat::zeros(1, cfg.d_model);
                }
            }
            l.mlp_norm = Mat::full(1, cfg.d_model, 1.0);
            l.w_gate = Mat::gaussian(cfg.d_model, cfg.mlp_hidden, rng, sd);
            l.w_up = Mat::gaussian(cfg.d_model, cfg.mlp_hidden, rng, sd);
            l.w_down = Mat::gaussian(cfg.mlp_hidden, cfg.d_model, rng, sd);
        }
        w.final_norm = Mat::full(1, cfg.d_model, 1.0);
        return w;
    }

    void for_each_tensor(const std::function<void(const std::string&, Mat&)>& fn) {
        fn("embed.weight", embed_w);
        fn("embed.bias", embed_b);
        for (size_t i = 0; i < layers.size(); ++i) {
            const std::string p = "layers." + std::to_string(i) + ".";
            LayerWeights& l = layers[i];
            fn(p + "attn_norm.scale", l.attn_norm);
            fn(p + "attn.wq", l.wq);
            fn(p + "attn.wk", l.wk);
            fn(p + "attn.wv", l.wv);
            fn(p + "attn.wo", l.wo);
            if (cfg.use_film) {
                fn(p + "film.scale_w", l.film_scale_w);
                fn(p + "film.scale_b", l.film_scale_b);
                fn(p + "film.shift_w", l.film_shift_w);
                fn(p + "film.shift_b", l.film_shift_b);
            }
            fn(p + "mlp_norm.scale", l.mlp_norm);
            fn(p + "mlp.gate", l.w_gate);
            fn(p + "mlp.up", l.w_up);
            fn(p + "mlp.down", l.w_down);
        }
        fn("final_norm.scale", final_norm);
    }

    void for_each_tensor(const std::function<void(const std::string&, const Mat&)>& fn) const {
        auto* self = const_cast<EncoderWeights*>(this);
        self->for_each_tensor([&fn](const std::string& n, Mat& m) { fn(n, m); });
    }

    long long n_params() const {
        long long n = 0;
        for_each_tensor([&n](const std::string&, const Mat& m) { n += static_cast<long long>(m.size()); });
        return n;
    }

    uint64_t content_hash() const {
        uint64_t h = 0xcbf29ce484222325ull;
        for_each_tensor([&h](const std::string& name, const Mat& m) {
            h = fnv1a(name.data(), name.size(), h);
            h = fnv1a(m.v.data(), m.v.size() * sizeof(double), h);
        });
        return h;
    }
};

// ---- graph binding ----

struct BoundTensor {
    std::string name;
    Mat* param;
    ad::Var var;
};

struct BoundLayer {
    ad::Var attn_norm, wq, wk, wv, wo;
    ad::Var film_scale_w, film_scale_b, film_shift_w, film_shift_b;
    ad::Var mlp_norm, w_gate, w_up, w_down;
};

struct BoundEncoder {
    EncoderConfig cfg;
    ad::Var embed_w, embed_b, final_norm;
    std::vector<BoundLayer> layers;
    std::vector<BoundTensor> params;  // flat, for optimizer and grad checks
};

inline BoundEncoder bind(ad::Graph& g, EncoderWeights& w, bool trainable) {
    BoundEncoder b;
    b.cfg = w.cfg;
    b.layers.resize(w.layers.size());
    std::vector<std::pair<std::string, Mat*>> order;
    w.for_each_tensor([&order](const std::string& n, Mat& m) { order.emplace_back(n, &m); });
    // Bind in enumeration order so optimizer slots line up deterministically.
    for (auto& [name, mat] : order) {
        ad::Var v = g.leaf(*mat, trainable);
        b.params.push_back({name, mat, v});
    }
    size_t idx = 0;
    auto next = [&]() { return b.params[idx++].var; };
    b.embed_w = next();
    b.embed_b = next();
    for (auto& l : b.layers) {
        l.attn_norm = next();
        l.wq = next();
        l.wk = next();
        l.wv = next();
        l.wo = next();
        if (w.cfg.use_film) {
            l.film_scale_w = next();
            l.film_scale_b = next();
            l.film_shift_w = next();
            l.film_shift_b = next();
        }
        l.mlp_norm = next();
        l.w_gate = next();
        l.w_up = next();
        l.w_down = next();
    }
    b.final_norm = next();
    return b;
}

// ---- building blocks ----

inline ad::Var embed_patches(ad::Graph& g, ad::Var patches, ad::Var w, ad::Var b) {
    require_shape(patches->val.cols == w->val.rows,
                  "embed_patches: patch dim " + std::to_string(patches->val.cols) +
                      " vs weight rows " + std::to_string(w->val.rows));
    return ad::add_rowvec(g, ad::matmul(g, patches, w), b);
}

inline ad::Var rms_norm(ad::Graph& g, ad::Var x, ad::Var scale, double eps = kRmsEps) {
    return ad::rms_norm_rows(g, x, scale, eps);
}

// Grouped-query attention, bidirectional, rotary positions applied to Q and K
// before scoring. Each group of n_heads/n_kv_heads query heads shares one K/V
// head. Scores are softmax(Q Kt / sqrt(head_dim)).
inline ad::Var gqa_attention(ad::Graph& g, ad::Var tokens, const EncoderConfig& cfg,
                             ad::Var wq, ad::Var wk, ad::Var wv, ad::Var wo,
                             const std::vector<int>& positions) {
    cfg.validate();
    require_shape(tokens->val.cols == cfg.d_model, "gqa_attention: token width mismatch");
    require_shape(wq->val.rows == cfg.d_model && wq->val.cols == cfg.d_model &&
                      wk->val.cols == cfg.kv_dim() && wv->val.cols == cfg.kv_dim() &&
                      wo->val.rows == cfg.d_model,
                  "gqa_attention: weight shapes inconsistent with config");
    const int hd = cfg.head_dim();
    ad::Var q = ad::matmul(g, tokens, wq);
    ad::Var k = ad::matmul(g, tokens, wk);
    ad::Var v = ad::matmul(g, tokens, wv);

    std::vector<ad::Var> k_rot(static_cast<size_t>(cfg.n_kv_heads));
    std::vector<ad::Var> v_head(static_cast<size_t>(cfg.n_kv_heads));
    for (int kv = 0; kv < cfg.n_kv_heads; ++kv) {
        k_rot[static_cast<size_t>(kv)] =
            ad::rope_rotate(g, ad::slice_cols(g, k, kv * hd, hd), positions, cfg.rope_base);
        v_head[static_cast<size_t>(kv)] = ad::slice_cols(g, v, kv * hd, hd);
    }

    std::vector<ad::Var> ctx;
    ctx.reserve(static_cast<size_t>(cfg.n_heads));
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    for (int h = 0; h < cfg.n_heads; ++h) {
        const int group = h / cfg.group_size();
        ad::Var qh = ad::rope_rotate(g, ad::slice_cols(g, q, h * hd, hd), positions, cfg.rope_base);
        ad::Var scores = ad::scale(g, ad::matmul_nt(g, qh, k_rot[static_cast<size_t>(group)]), inv_sqrt);
        ad::Var attn = ad::softmax_rows(g, scores);
        ctx.push_back(ad::matmul(g, attn, v_head[static_cast<size_t>(group)]));
    }
    return ad::matmul(g, ad::concat_cols(g, ctx), wo);
}

// FiLM: gamma = h Wg + bg, beta = h Wb + bb, both 1 x d, broadcast over all
// tokens as x' = gamma .* x + beta.
inline ad::Var film_condition(ad::Graph& g, ad::Var tokens, ad::Var h, ad::Var scale_w,
                              ad::Var scale_b, ad::Var shift_w, ad::Var shift_b) {
    require_shape(h->val.rows == 1 && h->val.cols == scale_w->val.rows,
                  "film_condition: context width " + shape_str(h->val) + " vs conditioner " +
                      shape_str(scale_w->val));
    require_shape(tokens->val.cols == scale_w->val.cols, "film_condition: token width mismatch");
    ad::Var gamma = ad::add(g, ad::matmul(g, h, scale_w), scale_b);
    ad::Var beta = ad::add(g, ad::matmul(g, h, shift_w), shift_b);
    return ad::add_rowvec(g, ad::mul_rowvec(g, tokens, gamma), beta);
}

// SwiGLU: down( silu(x gate) .* (x up) ); no biases.
inline ad::Var mlp_block(ad::Graph& g, ad::Var tokens, ad::Var w_gate, ad::Var w_up, ad::Var w_down) {
    require_shape(tokens->val.cols == w_gate->val.rows, "mlp_block: token width mismatch");
    ad::Var gated = ad::mul(g, ad::silu(g, ad::matmul(g, tokens, w_gate)), ad::matmul(g, tokens, w_up));
    return ad::matmul(g, gated, w_down);
}

struct ActivationsVar {
    std::vector<ad::Var> per_layer;  // recorded after each full layer
};

// Full forward. Per layer: x += GQA(norm(x)); x = FiLM(x, h); x += MLP(norm(x)).
// The last recorded activation has the final norm applied. A 0-layer config
// (tests only) records the embedded patches as its single activation.
inline ActivationsVar encoder_forward(ad::Graph& g, ad::Var patches, ad::Var msab_context,
                                      const BoundEncoder& enc) {
    const EncoderConfig& cfg = enc.cfg;
    if (cfg.use_film) {
        require_shape(msab_context != nullptr, "encoder_forward: FiLM config needs a context vector");
        require_shape(msab_context->val.rows == 1 && msab_context->val.cols == cfg.msab_dim,
                      "encoder_forward: context must be 1 x msab_dim");
    }
    ad::Var x = embed_patches(g, patches, enc.embed_w, enc.embed_b);
    std::vector<int> positions(static_cast<size_t>(x->val.rows));
    for (size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);

    ActivationsVar acts;
    if (cfg.n_layers == 0) {
        acts.per_layer.push_back(x);
        return acts;
    }
    acts.per_layer.reserve(static_cast<size_t>(cfg.n_layers));
    for (int li = 0; li < cfg.n_layers; ++li) {
        const BoundLayer& l = enc.layers[static_cast<size_t>(li)];
        ad::Var attn_in = rms_norm(g, x, l.attn_norm);
        x = ad::add(g, x, gqa_attention(g, attn_in, cfg, l.wq, l.wk, l.wv, l.wo, positions));
        if (cfg.use_film)
            x = film_condition(g, x, msab_context, l.film_scale_w, l.film_scale_b,
                               l.film_shift_w, l.film_shift_b);
        ad::Var mlp_in = rms_norm(g, x, l.mlp_norm);
        x = ad::add(g, x, mlp_block(g, mlp_in, l.w_gate, l.w_up, l.w_down));
        acts.per_layer.push_back(li + 1 == cfg.n_layers ? rms_norm(g, x, enc.final_norm) : x);
    }
    return acts;
}

// ---- value-level API ----

struct LayerActivations {
    std::vector<Mat> per_layer;
};

inline Mat msab_row(const dsp::MSABVector& h) {
    return Mat::row(h.values);
}

inline LayerActivations encoder_forward(EncoderWeights& w, const dsp::PatchSequence& patches,
                                        const dsp::MSABVector* h) {
    ad::Graph g;
    BoundEncoder enc = bind(g, w, false);
    ad::Var p = g.constant(patches.patches);
    ad::Var hv = nullptr;
    if (w.cfg.use_film) {
        require_shape(h != nullptr, "encoder_forward: model expects an MSAB vector");
        hv = g.constant(msab_row(*h));
    }
    ActivationsVar acts = encoder_forward(g, p, hv, enc);
    LayerActivations out;
    out.per_layer.reserve(acts.per_layer.size());
    for (ad::Var v : acts.per_layer) out.per_layer.push_back(v->val);
    return out;
}

}  // namespace biome::enc
