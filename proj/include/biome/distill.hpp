#pragma once

#include <map>
#include <optional>
#include <utility>

#include "biome/encoder.hpp"
#include "biome/synth.hpp"

namespace biome::distill {

// ---- projection heads ----

// One affine map per distillation layer k, student width -> teacher width.
// Identity-initialized when the widths match so the uniform code path is a
// no-op at start; random otherwise.
struct ProjectionHeads {
    std::vector<int> k_layers;  // 1-indexed layer ids, e.g. {3, 6, 9, 12}
    std::vector<Mat> w;         // d_student x d_teacher
    std::vector<Mat> b;         // 1 x d_teacher

    static ProjectionHeads init(const std::vector<int>& K, int d_student, int d_teacher,
                                uint64_t seed) {
        require(!K.empty(), "projection heads: K must be non-empty");
        ProjectionHeads h;
        h.k_layers = K;
        Rng rng(seed);
        for (size_t i = 0; i < K.size(); ++i) {
            if (d_student == d_teacher) {
                Mat eye = Mat::zeros(d_student, d_teacher);
                for (int d = 0; d < d_student; ++d) eye.at(d, d) = 1.0;
                h.w.push_back(std::move(eye));
            } else {
                h.w.push_back(Mat::gaussian(d_student, d_teacher, rng,
                                            1.0 / std::sqrt(static_cast<double>(d_student))));
            }
            h.b.push_back(Mat::zeros(1, d_teacher));
        }
        return h;
    }

    void for_each_tensor(const std::function<void(const std::string&, Mat&)>& fn) {
        for (size_t i = 0; i < k_layers.size(); ++i) {
            const std::string p = "heads.k" + std::to_string(k_layers[i]) + ".";
            fn(p + "weight", w[i]);
            fn(p + "bias", b[i]);
        }
    }
};

// ---- layer alignment ----

// Same-index pairing of student/teacher activations at the selected layers.
template <typename T>
std::vector<std::pair<T, T>> align_layers(const std::vector<T>& student,
                                          const std::vector<T>& teacher,
                                          const std::vector<int>& k_layers) {
    require_shape(student.size() == teacher.size(),
                  "align_layers: depth mismatch (" + std::to_string(student.size()) + " vs " +
                      std::to_string(teacher.size()) + ")");
    std::vector<std::pair<T, T>> pairs;
    for (int k : k_layers) {
        require_shape(k >= 1 && k <= static_cast<int>(student.size()),
                      "align_layers: layer " + std::to_string(k) + " out of range");
        pairs.emplace_back(student[static_cast<size_t>(k - 1)], teacher[static_cast<size_t>(k - 1)]);
    }
    return pairs;
}

inline std::vector<std::pair<Mat, Mat>> align_layers(const enc::LayerActivations& student,
                                                     const enc::LayerActivations& teacher,
                                                     const std::vector<int>& k_layers) {
    auto pairs = align_layers(student.per_layer, teacher.per_layer, k_layers);
    for (auto& [s, t] : pairs)
        require_shape(s.rows == t.rows, "align_layers: token-count mismatch " + shape_str(s) +
                                            " vs " + shape_str(t));
    return pairs;
}

// ---- loss ----

struct LossBreakdown {
    double total = 0.0;
    double l1_term = 0.0;
    double cos_term = 0.0;
    std::map<int, std::pair<double, double>> per_layer;  // k -> (l1, cos)
};

constexpr double kCosNormGuard = 1e-8;

struct BoundHeads {
    std::vector<ad::Var> w, b;
    std::vector<enc::BoundTensor> params;
};

inline BoundHeads bind(ad::Graph& g, ProjectionHeads& heads, bool trainable) {
    BoundHeads bh;
    for (size_t i = 0; i < heads.k_layers.size(); ++i) {
        ad::Var wv = g.leaf(heads.w[i], trainable);
        ad::Var bv = g.leaf(heads.b[i], trainable);
        const std::string p = "heads.k" + std::to_string(heads.k_layers[i]) + ".";
        bh.params.push_back({p + "weight", &heads.w[i], wv});
        bh.params.push_back({p + "bias", &heads.b[i], bv});
        bh.w.push_back(wv);
        bh.b.push_back(bv);
    }
    return bh;
}

// Per token t and layer k: (1/D) * |zhat - z|_1 + softplus(-cos(zhat, z)),
// averaged over all k and t. zhat is the head-projected student activation;
// the teacher side is never projected. Norms get a 1e-8 guard before the
// cosine division.
inline ad::Var distill_loss_graph(ad::Graph& g,
                                  const std::vector<std::pair<ad::Var, ad::Var>>& pairs,
                                  const BoundHeads& heads, LossBreakdown* breakdown) {
    require(!pairs.empty(), "distill_loss: no layer pairs");
    require_shape(pairs.size() == heads.w.size(), "distill_loss: heads/pairs mismatch");
    ad::Var total = nullptr;
    double agg_l1 = 0.0, agg_cos = 0.0;
    for (size_t i = 0; i < pairs.size(); ++i) {
        auto [s, t] = pairs[i];
        require_shape(s->val.rows == t->val.rows, "distill_loss: token-count mismatch");
        require_shape(heads.w[i]->val.cols == t->val.cols,
                      "distill_loss: projected width must equal teacher width");
        const int T = s->val.rows;
        const int D = t->val.cols;

        ad::Var zhat = ad::add_rowvec(g, ad::matmul(g, s, heads.w[i]), heads.b[i]);
        ad::Var l1_tok = ad::scale(g, ad::row_sum(g, ad::abs_val(g, ad::sub(g, zhat, t))),
                                   1.0 / D);  // T x 1

        ad::Var dots = ad::row_sum(g, ad::mul(g, zhat, t));
        ad::Var s_norm = ad::add_scalar(g, ad::sqrt_val(g, ad::row_sum(g, ad::mul(g, zhat, zhat))),
                                        kCosNormGuard);
        ad::Var t_norm = ad::add_scalar(g, ad::sqrt_val(g, ad::row_sum(g, ad::mul(g, t, t))),
                                        kCosNormGuard);
        ad::Var cosine = ad::divide(g, dots, ad::mul(g, s_norm, t_norm));
        ad::Var cos_tok = ad::softplus(g, ad::scale(g, cosine, -1.0));  // -log sigmoid(cos)

        ad::Var layer_l1 = ad::scale(g, ad::sum_all(g, l1_tok), 1.0 / T);
        ad::Var layer_cos = ad::scale(g, ad::sum_all(g, cos_tok), 1.0 / T);
        ad::Var layer_total = ad::add(g, layer_l1, layer_cos);
        total = total ? ad::add(g, total, layer_total) : layer_total;

        if (breakdown) {
            agg_l1 += layer_l1->val.v[0];
            agg_cos += layer_cos->val.v[0];
            breakdown->per_layer[static_cast<int>(i)] = {layer_l1->val.v[0], layer_cos->val.v[0]};
        }
    }
    total = ad::scale(g, total, 1.0 / static_cast<double>(pairs.size()));
    if (breakdown) {
        breakdown->l1_term = agg_l1 / static_cast<double>(pairs.size());
        breakdown->cos_term = agg_cos / static_cast<double>(pairs.size());
        breakdown->total = total->val.v[0];
    }
    return total;
}

// Value-level entry point over already-computed activations.
inline LossBreakdown distill_loss(const std::vector<std::pair<Mat, Mat>>& pairs,
                                  ProjectionHeads& heads) {
    ad::Graph g;
    BoundHeads bh = bind(g, heads, false);
    std::vector<std::pair<ad::Var, ad::Var>> vp;
    vp.reserve(pairs.size());
    for (const auto& [s, t] : pairs) vp.emplace_back(g.constant(s), g.constant(t));
    LossBreakdown bd;
    distill_loss_graph(g, vp, bh, &bd);
    // Re-key per-layer entries by the head's layer id.
    std::map<int, std::pair<double, double>> keyed;
    int i = 0;
    for (auto& [idx, v] : bd.per_layer) keyed[heads.k_layers[static_cast<size_t>(i++)]] = v;
    bd.per_layer = std::move(keyed);
    return bd;
}

// ---- schedule ----

struct TrainSchedule {
    double peak_lr = 1e-4;
    double floor_lr = 1e-5;
    int warmup_steps = 25000;
    int total_steps = 100000;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.98;
    int batch_size = 128;
    uint64_t seed = 0;

    void validate() const {
        require(warmup_steps >= 0 && warmup_steps < total_steps,
                "schedule: need 0 <= warmup_steps < total_steps");
        require(peak_lr > floor_lr && floor_lr >= 0.0, "schedule: need peak_lr > floor_lr >= 0");
        require(batch_size > 0, "schedule: batch_size must be positive");
    }
};

// Linear floor->peak over [0, warmup], cosine peak->0 over [warmup, total].
inline double lr_at(int step, const TrainSchedule& s) {
    s.validate();
    require(step >= 0 && step <= s.total_steps, "lr_at: step out of range");
    if (step <= s.warmup_steps) {
        if (step == s.warmup_steps) return s.peak_lr;
        return s.floor_lr + (s.peak_lr - s.floor_lr) * static_cast<double>(step) / s.warmup_steps;
    }
    if (step == s.total_steps) return 0.0;
    const double u = static_cast<double>(step - s.warmup_steps) /
                     static_cast<double>(s.total_steps - s.warmup_steps);
    return 0.5 * s.peak_lr * (1.0 + std::cos(kPi * u));
}

// ---- optimizer ----

// Adam moments with decoupled weight decay. Slot order must match the bound
// parameter order, which is the tensor enumeration order.
class AdamW {
public:
    void ensure_slots(const std::vector<enc::BoundTensor>& params) {
        if (!slots_.empty()) {
            require_shape(slots_.size() == params.size(), "adamw: parameter set changed");
            return;
        }
        slots_.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            slots_[i].m = Mat::zeros(params[i].param->rows, params[i].param->cols);
            slots_[i].v = Mat::zeros(params[i].param->rows, params[i].param->cols);
        }
    }

    void step(const std::vector<enc::BoundTensor>& params, double lr, const TrainSchedule& sched) {
        ensure_slots(params);
        ++t_;
        const double bc1 = 1.0 - std::pow(sched.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(sched.beta2, static_cast<double>(t_));
        for (size_t i = 0; i < params.size(); ++i) {
            Mat& p = *params[i].param;
            const Mat& grad = params[i].var->grad;
            Mat& m = slots_[i].m;
            Mat& v = slots_[i].v;
            const bool has_grad = !grad.empty();
            for (size_t j = 0; j < p.size(); ++j) {
                const double gj = has_grad ? grad.v[j] : 0.0;
                m.v[j] = sched.beta1 * m.v[j] + (1.0 - sched.beta1) * gj;
                v.v[j] = sched.beta2 * v.v[j] + (1.0 - sched.beta2) * gj * gj;
                const double mhat = m.v[j] / bc1;
                const double vhat = v.v[j] / bc2;
                p.v[j] -= lr * (mhat / (std::sqrt(vhat) + 1e-8) + sched.weight_decay * p.v[j]);
            }
        }
    }

    int64_t steps_taken() const { return t_; }

private:
    struct Slot {
        Mat m, v;
    };
    std::vector<Slot> slots_;
    int64_t t_ = 0;
};

// ---- teacher ----

// Frozen, randomly initialized 12-layer encoder over the same patch
// front-end, without FiLM. Stands in for a large pretrained teacher at desk
// scale; deterministic in seed.
struct TeacherAdapter {
    enc::EncoderWeights weights;

    int width() const { return weights.cfg.d_model; }
    int depth() const { return weights.cfg.n_layers; }

    enc::LayerActivations forward(const dsp::PatchSequence& patches) const {
        auto& w = const_cast<enc::EncoderWeights&>(weights);
        return enc::encoder_forward(w, patches, nullptr);
    }

    uint64_t weights_hash() const { return weights.content_hash(); }
};

inline TeacherAdapter make_toy_teacher(uint64_t seed, int d_teacher) {
    require(d_teacher > 0, "make_toy_teacher: width must be positive");
    enc::EncoderConfig cfg;
    cfg.n_layers = 12;
    cfg.d_model = d_teacher;
    cfg.n_heads = (d_teacher % 8 == 0) ? 4 : ((d_teacher % 4 == 0) ? 2 : 1);
    cfg.n_kv_heads = cfg.n_heads;
    cfg.mlp_hidden = ((8 * d_teacher / 3 + 31) / 32) * 32;
    cfg.use_film = false;
    cfg.size_tag = enc::SizeTag::Custom;
    cfg.validate();
    TeacherAdapter t;
    t.weights = enc::EncoderWeights::init(cfg, seed);
    return t;
}

// ---- batches & trainer ----

struct DistillBatch {
    std::vector<dsp::PatchSequence> patches;
    std::vector<Mat> msab_rows;  // 1 x msab_dim each

    void validate() const {
        require(!patches.empty(), "batch: empty");
        for (const auto& p : patches)
            require_shape(p.patches.cols == enc::kPatchDim &&
                              p.freq_patches == patches[0].freq_patches &&
                              p.time_patches == patches[0].time_patches,
                          "batch: patch grids must be uniform");
    }
};

struct TrainConfig {
    enc::EncoderConfig student;
    int d_teacher = 64;
    std::vector<int> distill_layers = {3, 6, 9, 12};
    TrainSchedule sched;
    double clip_seconds = 2.0;
    int msab_resolution = 256;
    bool overfit_one_batch = false;
    int checkpoint_interval = 0;  // 0 = final only
    dsp::MelConfig mel;
};

// Desk-scale defaults: the full-scale schedule shape with small widths and
// short synthetic clips.
inline TrainConfig desk_scale_config() {
    TrainConfig c;
    c.student.n_layers = 12;
    c.student.d_model = 32;
    c.student.n_heads = 4;
    c.student.n_kv_heads = 2;
    c.student.mlp_hidden = 96;
    c.student.msab_dim = 512;
    c.student.use_film = true;
    c.d_teacher = 64;
    c.sched.peak_lr = 2e-3;
    c.sched.floor_lr = 1e-5;
    c.sched.warmup_steps = 50;
    c.sched.total_steps = 500;
    c.sched.batch_size = 8;
    c.sched.seed = 7;
    return c;
}

class Trainer {
public:
    explicit Trainer(const TrainConfig& cfg)
        : cfg_(cfg),
          student_(enc::EncoderWeights::init(cfg.student, cfg.sched.seed ^ 0x5717ull)),
          heads_(ProjectionHeads::init(cfg.distill_layers, cfg.student.d_model, cfg.d_teacher,
                                       cfg.sched.seed ^ 0xbeadull)),
          teacher_(make_toy_teacher(cfg.sched.seed ^ 0x7ea0ull, cfg.d_teacher)) {
        cfg_.sched.validate();
        cfg_.student.validate();
    }

    enc::EncoderWeights& student() { return student_; }
    ProjectionHeads& heads() { return heads_; }
    const TeacherAdapter& teacher() const { return teacher_; }
    const TrainConfig& config() const { return cfg_; }

    // Deterministic synthetic batch for a given step.
    DistillBatch make_batch(int step) const {
        Rng rng(cfg_.sched.seed * 0x9e37ull + static_cast<uint64_t>(cfg_.overfit_one_batch ? 0 : step));
        DistillBatch b;
        for (int i = 0; i < cfg_.sched.batch_size; ++i) {
            Rng clip_rng = rng.fork(static_cast<uint64_t>(i) + 1);
            dsp::AudioClip clip = synth::training_clip(clip_rng, cfg_.clip_seconds);
            append_clip(b, clip);
        }
        b.validate();
        return b;
    }

    // Featurize one clip into an existing batch (crop/pad to clip_seconds).
    void append_clip(DistillBatch& b, const dsp::AudioClip& raw) const {
        dsp::AudioClip clip = raw;
        if (clip.sample_rate != dsp::kModelSampleRate)
            clip = dsp::resample(clip, dsp::kModelSampleRate);
        const auto want = static_cast<size_t>(std::lround(cfg_.clip_seconds * clip.sample_rate));
        clip.samples.resize(want, 0.0);  // crop or zero-pad the tail
        b.patches.push_back(dsp::patchify(dsp::mel_spectrogram(clip, cfg_.mel)));
        b.msab_rows.push_back(enc::msab_row(dsp::msab_features(clip, cfg_.msab_resolution)));
    }

    std::vector<enc::LayerActivations> teacher_forward(const DistillBatch& batch) const {
        std::vector<enc::LayerActivations> acts;
        acts.reserve(batch.patches.size());
        for (const auto& p : batch.patches) acts.push_back(teacher_.forward(p));
        return acts;
    }

    // One optimizer update at lr_at(step); returns the pre-update loss.
    LossBreakdown train_step(const DistillBatch& batch, int step) {
        return train_step(batch, teacher_forward(batch), step);
    }

    LossBreakdown train_step(const DistillBatch& batch,
                             const std::vector<enc::LayerActivations>& teacher_acts, int step) {
        batch.validate();
        require_shape(teacher_acts.size() == batch.patches.size(), "train_step: teacher acts size");
        ad::Graph g;
        enc::BoundEncoder be = enc::bind(g, student_, true);
        BoundHeads bh = bind(g, heads_, true);

        ad::Var total = nullptr;
        LossBreakdown agg;
        for (auto& k : cfg_.distill_layers) agg.per_layer[k] = {0.0, 0.0};
        for (size_t c = 0; c < batch.patches.size(); ++c) {
            ad::Var p = g.constant(batch.patches[c].patches);
            ad::Var hv = cfg_.student.use_film ? g.constant(batch.msab_rows[c]) : nullptr;
            enc::ActivationsVar acts = enc::encoder_forward(g, p, hv, be);
            std::vector<ad::Var> teacher_vars;
            teacher_vars.reserve(teacher_acts[c].per_layer.size());
            for (const Mat& m : teacher_acts[c].per_layer) teacher_vars.push_back(g.constant(m));
            auto pairs = align_layers(acts.per_layer, teacher_vars, cfg_.distill_layers);
            LossBreakdown bd;
            ad::Var clip_loss = distill_loss_graph(g, pairs, bh, &bd);
            total = total ? ad::add(g, total, clip_loss) : clip_loss;
            agg.l1_term += bd.l1_term;
            agg.cos_term += bd.cos_term;
            int i = 0;
            for (auto& [idx, v] : bd.per_layer) {
                const int k = cfg_.distill_layers[static_cast<size_t>(i++)];
                agg.per_layer[k].first += v.first;
                agg.per_layer[k].second += v.second;
            }
        }
        const double inv_n = 1.0 / static_cast<double>(batch.patches.size());
        total = ad::scale(g, total, inv_n);
        agg.total = total->val.v[0];
        agg.l1_term *= inv_n;
        agg.cos_term *= inv_n;
        for (auto& [k, v] : agg.per_layer) {
            v.first *= inv_n;
            v.second *= inv_n;
        }
        if (!std::isfinite(agg.total))
            throw NumericalError("train_step: non-finite loss at step " + std::to_string(step));

        g.backward(total);
        std::vector<enc::BoundTensor> params = be.params;
        params.insert(params.end(), bh.params.begin(), bh.params.end());
        opt_.step(params, lr_at(step, cfg_.sched), cfg_.sched);
        return agg;
    }

    // Mean per-token cosine between projected student and teacher at each k.
    std::map<int, double> alignment_cosines(const DistillBatch& batch,
                                            const std::vector<enc::LayerActivations>& teacher_acts) {
        std::map<int, double> out;
        int clips = 0;
        for (size_t c = 0; c < batch.patches.size(); ++c) {
            enc::LayerActivations acts;
            {
                ad::Graph g;
                enc::BoundEncoder be = enc::bind(g, student_, false);
                ad::Var p = g.constant(batch.patches[c].patches);
                ad::Var hv = cfg_.student.use_film ? g.constant(batch.msab_rows[c]) : nullptr;
                enc::ActivationsVar av = enc::encoder_forward(g, p, hv, be);
                for (ad::Var v : av.per_layer) acts.per_layer.push_back(v->val);
            }
            for (size_t i = 0; i < cfg_.distill_layers.size(); ++i) {
                const int k = cfg_.distill_layers[i];
                const Mat& s = acts.per_layer[static_cast<size_t>(k - 1)];
                const Mat& t = teacher_acts[c].per_layer[static_cast<size_t>(k - 1)];
                Mat zhat;
                mm_nn(s, heads_.w[i], zhat, false);
                for (int r = 0; r < zhat.rows; ++r)
                    for (int j = 0; j < zhat.cols; ++j) zhat.at(r, j) += heads_.b[i].v[static_cast<size_t>(j)];
                double mean_cos = 0.0;
                for (int r = 0; r < zhat.rows; ++r) {
                    double dot = 0.0, ns = 0.0, nt = 0.0;
                    for (int j = 0; j < zhat.cols; ++j) {
                        dot += zhat.at(r, j) * t.at(r, j);
                        ns += zhat.at(r, j) * zhat.at(r, j);
                        nt += t.at(r, j) * t.at(r, j);
                    }
                    mean_cos += dot / ((std::sqrt(ns) + kCosNormGuard) * (std::sqrt(nt) + kCosNormGuard));
                }
                out[k] += mean_cos / zhat.rows;
            }
            ++clips;
        }
        for (auto& [k, v] : out) v /= clips;
        return out;
    }

private:
    TrainConfig cfg_;
    enc::EncoderWeights student_;
    ProjectionHeads heads_;
    TeacherAdapter teacher_;
    AdamW opt_;
};

}  // namespace biome::distill
