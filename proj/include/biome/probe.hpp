#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "biome/distill.hpp"
#include "biome/encoder.hpp"

namespace biome::probe {

// ---- clip embeddings ----

enum class Pooling { Mean, FirstToken };

inline int msab_resolution_for(const enc::EncoderConfig& cfg) { return cfg.msab_dim / 2; }

struct ClipFeatures {
    dsp::PatchSequence patches;
    Mat msab_row;  // 1 x msab_dim (empty when the model has no FiLM)
    Mat mel;       // kept for saliency rendering
};

inline ClipFeatures featurize(const dsp::AudioClip& raw, const enc::EncoderConfig& cfg,
                              const dsp::MelConfig& mel_cfg = {}) {
    dsp::AudioClip clip = raw;
    if (clip.sample_rate != dsp::kModelSampleRate) clip = dsp::resample(clip, dsp::kModelSampleRate);
    ClipFeatures f;
    dsp::MelSpectrogram mel = dsp::mel_spectrogram(clip, mel_cfg);
    f.mel = mel.values;
    f.patches = dsp::patchify(mel);
    if (cfg.use_film)
        f.msab_row = enc::msab_row(dsp::msab_features(clip, msab_resolution_for(cfg)));
    return f;
}

inline std::vector<double> pool_tokens(const Mat& tokens, Pooling pooling) {
    std::vector<double> out(static_cast<size_t>(tokens.cols), 0.0);
    if (pooling == Pooling::FirstToken) {
        for (int j = 0; j < tokens.cols; ++j) out[static_cast<size_t>(j)] = tokens.at(0, j);
        return out;
    }
    for (int i = 0; i < tokens.rows; ++i)
        for (int j = 0; j < tokens.cols; ++j) out[static_cast<size_t>(j)] += tokens.at(i, j);
    for (auto& x : out) x /= tokens.rows;
    return out;
}

// Deterministic pooled vector from the final recorded activation.
inline std::vector<double> clip_embedding(enc::EncoderWeights& model, const dsp::AudioClip& clip,
                                          Pooling pooling = Pooling::Mean,
                                          const dsp::MelConfig& mel_cfg = {}) {
    ClipFeatures f = featurize(clip, model.cfg, mel_cfg);
    dsp::MSABVector h;
    h.values.assign(f.msab_row.v.begin(), f.msab_row.v.end());
    enc::LayerActivations acts = enc::encoder_forward(model, f.patches, model.cfg.use_film ? &h : nullptr);
    return pool_tokens(acts.per_layer.back(), pooling);
}

// ---- probe tasks ----

enum class TaskKind { BinaryClassification, Multiclass, Regression, Detection };
enum class Metric { Accuracy, MeanAP, RocAuc, Mae, F1 };

struct ProbeTask {
    TaskKind kind = TaskKind::Multiclass;
    Metric metric = Metric::Accuracy;
    Mat embeddings;                    // n x d
    std::vector<int> class_labels;     // classification kinds
    std::vector<double> target_values; // regression
    Mat multi_labels;                  // n x c, 0/1, detection

    int n_examples() const { return embeddings.rows; }

    int n_classes() const {
        switch (kind) {
            case TaskKind::BinaryClassification: return 2;
            case TaskKind::Multiclass: {
                int c = 0;
                for (int l : class_labels) c = std::max(c, l + 1);
                return c;
            }
            case TaskKind::Detection: return multi_labels.cols;
            case TaskKind::Regression: return 1;
        }
        return 0;
    }

    void validate() const {
        require(embeddings.rows > 0, "probe task: no examples");
        if (kind == TaskKind::Regression) {
            require(target_values.size() == static_cast<size_t>(embeddings.rows) &&
                        embeddings.rows >= 2,
                    "probe task: regression needs >= 2 labelled examples");
            return;
        }
        if (kind == TaskKind::Detection) {
            require(multi_labels.rows == embeddings.rows && multi_labels.cols >= 1,
                    "probe task: detection label matrix mismatch");
            return;
        }
        require(class_labels.size() == static_cast<size_t>(embeddings.rows),
                "probe task: label count mismatch");
        std::vector<int> counts(static_cast<size_t>(std::max(2, n_classes())), 0);
        for (int l : class_labels) {
            require(l >= 0 && l < static_cast<int>(counts.size()), "probe task: bad label");
            ++counts[static_cast<size_t>(l)];
        }
        int populated = 0;
        for (int c : counts) populated += (c >= 2) ? 1 : 0;
        require(populated >= 2 && n_classes() >= 2,
                "probe task: need >= 2 classes with >= 2 examples each");
    }
};

struct ProbeWeights {
    TaskKind kind = TaskKind::Multiclass;
    Mat w;           // d x c
    Mat b;           // 1 x c
    Mat feat_mean;   // 1 x d
    Mat feat_scale;  // 1 x d (inverse applied at scoring time)
};

struct FitOptions {
    int steps = 4000;
    double momentum = 0.9;
};

// Raw scores: softmax logits, per-class detection logits, or the predicted
// value for regression.
inline Mat probe_scores(const ProbeWeights& pw, const Mat& embeddings) {
    require_shape(embeddings.cols == pw.w.rows, "probe_scores: embedding width mismatch");
    Mat xs = embeddings;
    for (int i = 0; i < xs.rows; ++i)
        for (int j = 0; j < xs.cols; ++j)
            xs.at(i, j) = (xs.at(i, j) - pw.feat_mean.v[static_cast<size_t>(j)]) /
                          pw.feat_scale.v[static_cast<size_t>(j)];
    Mat out;
    mm_nn(xs, pw.w, out, false);
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i, j) += pw.b.v[static_cast<size_t>(j)];
    return out;
}

namespace detail {

inline double lipschitz_estimate(const Mat& xs) {
    // Power iteration on Xt X / n.
    const int d = xs.cols;
    std::vector<double> v(static_cast<size_t>(d));
    for (int j = 0; j < d; ++j) v[static_cast<size_t>(j)] = 1.0 + 1e-3 * j;
    double lam = 1.0;
    std::vector<double> xv(static_cast<size_t>(xs.rows)), u(static_cast<size_t>(d));
    for (int it = 0; it < 100; ++it) {
        for (int i = 0; i < xs.rows; ++i) {
            double s = 0.0;
            const double* row = xs.row_ptr(i);
            for (int j = 0; j < d; ++j) s += row[j] * v[static_cast<size_t>(j)];
            xv[static_cast<size_t>(i)] = s;
        }
        std::fill(u.begin(), u.end(), 0.0);
        for (int i = 0; i < xs.rows; ++i) {
            const double* row = xs.row_ptr(i);
            for (int j = 0; j < d; ++j) u[static_cast<size_t>(j)] += row[j] * xv[static_cast<size_t>(i)];
        }
        double norm = 0.0;
        for (double x : u) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-30) break;
        lam = norm / 1.0;
        for (int j = 0; j < d; ++j) v[static_cast<size_t>(j)] = u[static_cast<size_t>(j)] / norm;
    }
    // One more pass for the Rayleigh quotient.
    double num = 0.0;
    for (int i = 0; i < xs.rows; ++i) {
        double s = 0.0;
        const double* row = xs.row_ptr(i);
        for (int j = 0; j < d; ++j) s += row[j] * v[static_cast<size_t>(j)];
        num += s * s;
    }
    return std::max(num / xs.rows, 1e-12);
}

}  // namespace detail

// Affine head on frozen embeddings, fit by deterministic full-batch gradient
// descent with Nesterov momentum: cross-entropy for classification/detection,
// squared error for regression. Features are standardized internally.
inline ProbeWeights fit_linear_probe(const ProbeTask& task, const FitOptions& opt = {}) {
    task.validate();
    const int n = task.embeddings.rows, d = task.embeddings.cols;
    const int c = task.n_classes();

    ProbeWeights pw;
    pw.kind = task.kind;
    pw.feat_mean = Mat::zeros(1, d);
    pw.feat_scale = Mat::full(1, d, 1.0);
    for (int j = 0; j < d; ++j) {
        double mu = 0.0;
        for (int i = 0; i < n; ++i) mu += task.embeddings.at(i, j);
        mu /= n;
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
            const double t = task.embeddings.at(i, j) - mu;
            var += t * t;
        }
        pw.feat_mean.v[static_cast<size_t>(j)] = mu;
        pw.feat_scale.v[static_cast<size_t>(j)] = std::max(std::sqrt(var / n), 1e-8);
    }
    Mat xs = task.embeddings;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            xs.at(i, j) = (xs.at(i, j) - pw.feat_mean.v[static_cast<size_t>(j)]) /
                          pw.feat_scale.v[static_cast<size_t>(j)];

    Mat targets(n, c);
    if (task.kind == TaskKind::Regression) {
        for (int i = 0; i < n; ++i) targets.at(i, 0) = task.target_values[static_cast<size_t>(i)];
    } else if (task.kind == TaskKind::Detection) {
        targets = task.multi_labels;
    } else {
        for (int i = 0; i < n; ++i) targets.at(i, task.class_labels[static_cast<size_t>(i)]) = 1.0;
    }

    const double lam = detail::lipschitz_estimate(xs);
    const double lr = (task.kind == TaskKind::Regression ? 0.45 : 0.9) / lam;

    pw.w = Mat::zeros(d, c);
    pw.b = Mat::zeros(1, c);
    Mat vw = Mat::zeros(d, c), vb = Mat::zeros(1, c);
    Mat logits, resid(n, c);
    for (int step = 0; step < opt.steps; ++step) {
        // Nesterov lookahead.
        Mat wl = pw.w, bl = pw.b;
        for (size_t j = 0; j < wl.size(); ++j) wl.v[j] += opt.momentum * vw.v[j];
        for (size_t j = 0; j < bl.size(); ++j) bl.v[j] += opt.momentum * vb.v[j];

        mm_nn(xs, wl, logits, false);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j) logits.at(i, j) += bl.v[static_cast<size_t>(j)];

        if (task.kind == TaskKind::Regression) {
            for (int i = 0; i < n; ++i) resid.at(i, 0) = 2.0 * (logits.at(i, 0) - targets.at(i, 0));
        } else if (task.kind == TaskKind::Detection) {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < c; ++j)
                    resid.at(i, j) = 1.0 / (1.0 + std::exp(-logits.at(i, j))) - targets.at(i, j);
        } else {
            for (int i = 0; i < n; ++i) {
                double mx = logits.at(i, 0);
                for (int j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
                double z = 0.0;
                for (int j = 0; j < c; ++j) z += std::exp(logits.at(i, j) - mx);
                for (int j = 0; j < c; ++j)
                    resid.at(i, j) = std::exp(logits.at(i, j) - mx) / z - targets.at(i, j);
            }
        }
        Mat gw;
        mm_tn(xs, resid, gw, false);
        for (auto& x : gw.v) x /= n;
        Mat gb = Mat::zeros(1, c);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j) gb.v[static_cast<size_t>(j)] += resid.at(i, j) / n;

        for (size_t j = 0; j < pw.w.size(); ++j) {
            vw.v[j] = opt.momentum * vw.v[j] - lr * gw.v[j];
            pw.w.v[j] += vw.v[j];
        }
        for (size_t j = 0; j < pw.b.size(); ++j) {
            vb.v[j] = opt.momentum * vb.v[j] - lr * gb.v[j];
            pw.b.v[j] += vb.v[j];
        }
    }
    return pw;
}

// ---- metrics ----

inline double accuracy(const Mat& scores, const std::vector<int>& labels) {
    require(scores.rows > 0 && scores.rows == static_cast<int>(labels.size()),
            "accuracy: empty or misaligned inputs");
    int hits = 0;
    for (int i = 0; i < scores.rows; ++i) {
        int arg = 0;
        for (int j = 1; j < scores.cols; ++j)
            if (scores.at(i, j) > scores.at(i, arg)) arg = j;
        hits += (arg == labels[static_cast<size_t>(i)]) ? 1 : 0;
    }
    return static_cast<double>(hits) / scores.rows;
}

// Rank statistic with midranks for ties.
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels01) {
    require(!scores.empty() && scores.size() == labels01.size(),
            "roc_auc: empty or misaligned inputs");
    const size_t n = scores.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&scores](size_t a, size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double mid = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (size_t k = i; k <= j; ++k) rank[idx[k]] = mid;
        i = j + 1;
    }
    double pos_rank_sum = 0.0;
    size_t n_pos = 0;
    for (size_t k = 0; k < n; ++k) {
        if (labels01[k] == 1) {
            pos_rank_sum += rank[k];
            ++n_pos;
        }
    }
    const size_t n_neg = n - n_pos;
    require(n_pos > 0 && n_neg > 0, "roc_auc: needs both classes present");
    return (pos_rank_sum - 0.5 * n_pos * (n_pos + 1)) / (static_cast<double>(n_pos) * n_neg);
}

inline double average_precision(const std::vector<double>& scores, const std::vector<int>& rel) {
    std::vector<size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&scores](size_t a, size_t b) { return scores[a] > scores[b]; });
    int n_pos = 0;
    for (int r : rel) n_pos += r;
    require(n_pos > 0, "average_precision: no positives");
    double ap = 0.0;
    int hits = 0;
    for (size_t k = 0; k < idx.size(); ++k) {
        if (rel[idx[k]] == 1) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(k + 1);
        }
    }
    return ap / n_pos;
}

inline double mean_average_precision(const Mat& scores, const Mat& multi01) {
    require(scores.rows > 0 && scores.rows == multi01.rows && scores.cols == multi01.cols,
            "mAP: misaligned inputs");
    double sum = 0.0;
    int classes = 0;
    for (int j = 0; j < scores.cols; ++j) {
        std::vector<double> s(static_cast<size_t>(scores.rows));
        std::vector<int> r(static_cast<size_t>(scores.rows));
        int n_pos = 0;
        for (int i = 0; i < scores.rows; ++i) {
            s[static_cast<size_t>(i)] = scores.at(i, j);
            r[static_cast<size_t>(i)] = multi01.at(i, j) > 0.5 ? 1 : 0;
            n_pos += r[static_cast<size_t>(i)];
        }
        if (n_pos == 0) continue;  // class absent from this evaluation set
        sum += average_precision(s, r);
        ++classes;
    }
    require(classes > 0, "mAP: no class has positives");
    return sum / classes;
}

inline double mean_absolute_error(const std::vector<double>& pred, const std::vector<double>& truth) {
    require(!pred.empty() && pred.size() == truth.size(), "mae: empty or misaligned inputs");
    double s = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
    return s / static_cast<double>(pred.size());
}

// F1 of the positive class with probabilities thresholded at 0.5.
inline double f1_score(const std::vector<double>& probs, const std::vector<int>& labels01,
                       double threshold = 0.5) {
    require(!probs.empty() && probs.size() == labels01.size(), "f1: empty or misaligned inputs");
    int tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < probs.size(); ++i) {
        const bool p = probs[i] >= threshold;
        const bool t = labels01[i] == 1;
        tp += (p && t) ? 1 : 0;
        fp += (p && !t) ? 1 : 0;
        fn += (!p && t) ? 1 : 0;
    }
    if (2 * tp + fp + fn == 0) return 0.0;
    return 2.0 * tp / (2.0 * tp + fp + fn);
}

inline double compute_metric(const Mat& scores, const ProbeTask& task, Metric metric) {
    switch (metric) {
        case Metric::Accuracy:
            return accuracy(scores, task.class_labels);
        case Metric::RocAuc: {
            require_shape(scores.cols == 2, "roc_auc metric expects two-class scores");
            std::vector<double> s(static_cast<size_t>(scores.rows));
            for (int i = 0; i < scores.rows; ++i) s[static_cast<size_t>(i)] = scores.at(i, 1) - scores.at(i, 0);
            return roc_auc(s, task.class_labels);
        }
        case Metric::MeanAP:
            return mean_average_precision(scores, task.multi_labels);
        case Metric::Mae: {
            std::vector<double> p(static_cast<size_t>(scores.rows));
            for (int i = 0; i < scores.rows; ++i) p[static_cast<size_t>(i)] = scores.at(i, 0);
            return mean_absolute_error(p, task.target_values);
        }
        case Metric::F1: {
            require_shape(scores.cols >= 1, "f1 metric expects scores");
            std::vector<double> probs(static_cast<size_t>(scores.rows));
            for (int i = 0; i < scores.rows; ++i) {
                const double logit = scores.cols == 2 ? scores.at(i, 1) - scores.at(i, 0) : scores.at(i, 0);
                probs[static_cast<size_t>(i)] = 1.0 / (1.0 + std::exp(-logit));
            }
            return f1_score(probs, task.class_labels);
        }
    }
    throw InputError("compute_metric: unknown metric");
}

// ---- saliency ----

struct TargetSelector {
    enum class Kind { EmbeddingNorm, ProbeLogit };
    Kind kind = Kind::EmbeddingNorm;
    const ProbeWeights* probe = nullptr;  // required for ProbeLogit
    int class_index = 0;
};

struct SaliencyMap {
    Mat values;  // same shape as the source mel, max-abs normalized
};

namespace detail {

inline ad::Var selector_scalar(ad::Graph& g, ad::Var pooled, const TargetSelector& sel) {
    if (sel.kind == TargetSelector::Kind::EmbeddingNorm) {
        return ad::sqrt_val(g, ad::sum_all(g, ad::mul(g, pooled, pooled)));
    }
    require(sel.probe != nullptr, "saliency: probe logit selector needs probe weights");
    const ProbeWeights& pw = *sel.probe;
    require_shape(pooled->val.cols == pw.w.rows, "saliency: probe width mismatch");
    require(sel.class_index >= 0 && sel.class_index < pw.w.cols, "saliency: class index");
    Mat neg_mean = pw.feat_mean;
    for (auto& x : neg_mean.v) x = -x;
    Mat inv_scale = pw.feat_scale;
    for (auto& x : inv_scale.v) x = 1.0 / x;
    Mat wcol(pw.w.rows, 1);
    for (int i = 0; i < pw.w.rows; ++i) wcol.at(i, 0) = pw.w.at(i, sel.class_index);
    ad::Var xs = ad::mul(g, ad::add(g, pooled, g.constant(neg_mean)), g.constant(inv_scale));
    return ad::add_scalar(g, ad::matmul(g, xs, g.constant(wcol)),
                          pw.b.v[static_cast<size_t>(sel.class_index)]);
}

}  // namespace detail

// Scalar forward from a mel map with the side-channel context held fixed;
// exposed so finite-difference checks can drive the identical path.
inline double saliency_forward(enc::EncoderWeights& model, const Mat& mel_values,
                               const Mat& msab_row, const TargetSelector& sel) {
    ad::Graph g;
    enc::BoundEncoder be = enc::bind(g, model, false);
    ad::Var mel = g.constant(mel_values);
    ad::Var patches = ad::patch_gather(g, mel, dsp::PatchSequence::kPatchSize);
    ad::Var hv = model.cfg.use_film ? g.constant(msab_row) : nullptr;
    enc::ActivationsVar acts = enc::encoder_forward(g, patches, hv, be);
    ad::Var pooled = ad::col_mean(g, acts.per_layer.back());
    return detail::selector_scalar(g, pooled, sel)->val.v[0];
}

// Absolute gradient of the selected scalar w.r.t. each mel cell, max-abs
// normalized (all-zero gradients stay all-zero). Cells outside the patch grid
// receive zero: they do not reach the model.
inline SaliencyMap saliency_map(enc::EncoderWeights& model, const dsp::AudioClip& clip,
                                const TargetSelector& sel, const dsp::MelConfig& mel_cfg = {}) {
    ClipFeatures f = featurize(clip, model.cfg, mel_cfg);
    ad::Graph g;
    enc::BoundEncoder be = enc::bind(g, model, false);
    ad::Var mel = g.leaf(f.mel, true);
    ad::Var patches = ad::patch_gather(g, mel, dsp::PatchSequence::kPatchSize);
    ad::Var hv = model.cfg.use_film ? g.constant(f.msab_row) : nullptr;
    enc::ActivationsVar acts = enc::encoder_forward(g, patches, hv, be);
    ad::Var pooled = ad::col_mean(g, acts.per_layer.back());
    ad::Var target = detail::selector_scalar(g, pooled, sel);
    g.backward(target);

    SaliencyMap out;
    out.values = Mat::zeros(f.mel.rows, f.mel.cols);
    if (!mel->grad.empty()) {
        for (size_t i = 0; i < out.values.size(); ++i) out.values.v[i] = std::abs(mel->grad.v[i]);
    }
    const double mx = out.values.max_abs();
    if (mx > 0.0)
        for (auto& x : out.values.v) x /= mx;
    return out;
}

// ---- separability: PCA + shallow decision tree ----

struct DecisionTree {
    struct Node {
        int feature = -1;       // -1 marks a leaf
        double threshold = 0.0;
        int label = 0;
        int left = -1, right = -1;
    };
    std::vector<Node> nodes;

    int predict(const double* x) const {
        int i = 0;
        while (nodes[static_cast<size_t>(i)].feature >= 0) {
            const Node& n = nodes[static_cast<size_t>(i)];
            i = (x[n.feature] <= n.threshold) ? n.left : n.right;
        }
        return nodes[static_cast<size_t>(i)].label;
    }
};

namespace detail {

inline double gini(const std::vector<int>& counts, int total) {
    if (total == 0) return 0.0;
    double s = 1.0;
    for (int c : counts) {
        const double p = static_cast<double>(c) / total;
        s -= p * p;
    }
    return s;
}

inline int majority(const std::vector<int>& counts) {
    int best = 0;
    for (size_t i = 1; i < counts.size(); ++i)
        if (counts[i] > counts[static_cast<size_t>(best)]) best = static_cast<int>(i);
    return best;
}

inline int build_tree(DecisionTree& tree, const Mat& X, const std::vector<int>& y,
                      std::vector<int> idx, int depth, int max_depth, int n_classes) {
    std::vector<int> counts(static_cast<size_t>(n_classes), 0);
    for (int i : idx) ++counts[static_cast<size_t>(y[static_cast<size_t>(i)])];
    const double node_gini = gini(counts, static_cast<int>(idx.size()));

    DecisionTree::Node node;
    node.label = majority(counts);
    const int me = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(node);
    if (depth >= max_depth || node_gini == 0.0 || idx.size() < 2) return me;

    // Exhaustive threshold search over both features, midpoints of adjacent
    // distinct values, minimizing the weighted child Gini.
    int best_feat = -1;
    double best_thr = 0.0, best_score = node_gini - 1e-12;
    for (int f = 0; f < X.cols; ++f) {
        std::vector<int> order = idx;
        std::stable_sort(order.begin(), order.end(), [&X, f](int a, int b) {
            return X.at(a, f) < X.at(b, f);
        });
        std::vector<int> left_counts(static_cast<size_t>(n_classes), 0);
        for (size_t i = 0; i + 1 < order.size(); ++i) {
            ++left_counts[static_cast<size_t>(y[static_cast<size_t>(order[i])])];
            const double a = X.at(order[i], f), b = X.at(order[i + 1], f);
            if (a == b) continue;
            std::vector<int> right_counts(static_cast<size_t>(n_classes), 0);
            for (int c = 0; c < n_classes; ++c)
                right_counts[static_cast<size_t>(c)] = counts[static_cast<size_t>(c)] - left_counts[static_cast<size_t>(c)];
            const int nl = static_cast<int>(i + 1);
            const int nr = static_cast<int>(order.size()) - nl;
            const double score = (nl * gini(left_counts, nl) + nr * gini(right_counts, nr)) /
                                 static_cast<double>(order.size());
            if (score < best_score) {
                best_score = score;
                best_feat = f;
                best_thr = 0.5 * (a + b);
            }
        }
    }
    if (best_feat < 0) return me;

    std::vector<int> li, ri;
    for (int i : idx)
        (X.at(i, best_feat) <= best_thr ? li : ri).push_back(i);
    if (li.empty() || ri.empty()) return me;
    tree.nodes[static_cast<size_t>(me)].feature = best_feat;
    tree.nodes[static_cast<size_t>(me)].threshold = best_thr;
    tree.nodes[static_cast<size_t>(me)].left =
        build_tree(tree, X, y, std::move(li), depth + 1, max_depth, n_classes);
    tree.nodes[static_cast<size_t>(me)].right =
        build_tree(tree, X, y, std::move(ri), depth + 1, max_depth, n_classes);
    return me;
}

}  // namespace detail

inline DecisionTree fit_decision_tree(const Mat& X, const std::vector<int>& y, int max_depth) {
    require(X.rows > 0 && X.rows == static_cast<int>(y.size()), "tree: misaligned inputs");
    int n_classes = 0;
    for (int l : y) n_classes = std::max(n_classes, l + 1);
    DecisionTree tree;
    std::vector<int> idx(static_cast<size_t>(X.rows));
    std::iota(idx.begin(), idx.end(), 0);
    detail::build_tree(tree, X, y, std::move(idx), 0, max_depth, n_classes);
    return tree;
}

inline double tree_accuracy(const DecisionTree& tree, const Mat& X, const std::vector<int>& y) {
    int hits = 0;
    for (int i = 0; i < X.rows; ++i)
        hits += (tree.predict(X.row_ptr(i)) == y[static_cast<size_t>(i)]) ? 1 : 0;
    return static_cast<double>(hits) / X.rows;
}

// Top-2 principal components by power iteration with deflation. Deterministic
// start vector and sign convention (largest-magnitude component positive).
inline Mat pca_project_2d(const Mat& embeddings) {
    require(embeddings.rows >= 2, "pca: need at least two points");
    const int n = embeddings.rows, d = embeddings.cols;
    Mat centered = embeddings;
    for (int j = 0; j < d; ++j) {
        double mu = 0.0;
        for (int i = 0; i < n; ++i) mu += centered.at(i, j);
        mu /= n;
        for (int i = 0; i < n; ++i) centered.at(i, j) -= mu;
    }
    Mat cov;
    mm_tn(centered, centered, cov, false);
    for (auto& x : cov.v) x /= n;

    Mat components(2, d);
    for (int comp = 0; comp < 2; ++comp) {
        std::vector<double> v(static_cast<size_t>(d));
        for (int j = 0; j < d; ++j) v[static_cast<size_t>(j)] = 1.0 + 1e-3 * ((j + comp) % 7);
        double lambda = 0.0;
        std::vector<double> u(static_cast<size_t>(d));
        for (int it = 0; it < 500; ++it) {
            std::fill(u.begin(), u.end(), 0.0);
            for (int r = 0; r < d; ++r) {
                const double* row = cov.row_ptr(r);
                double s = 0.0;
                for (int j = 0; j < d; ++j) s += row[j] * v[static_cast<size_t>(j)];
                u[static_cast<size_t>(r)] = s;
            }
            double norm = 0.0;
            for (double x : u) norm += x * x;
            norm = std::sqrt(norm);
            if (norm < 1e-30) break;
            lambda = norm;
            for (int j = 0; j < d; ++j) v[static_cast<size_t>(j)] = u[static_cast<size_t>(j)] / norm;
        }
        int arg = 0;
        for (int j = 1; j < d; ++j)
            if (std::abs(v[static_cast<size_t>(j)]) > std::abs(v[static_cast<size_t>(arg)])) arg = j;
        if (v[static_cast<size_t>(arg)] < 0.0)
            for (auto& x : v) x = -x;
        for (int j = 0; j < d; ++j) components.at(comp, j) = v[static_cast<size_t>(j)];
        // Deflate.
        for (int r = 0; r < d; ++r)
            for (int j = 0; j < d; ++j)
                cov.at(r, j) -= lambda * v[static_cast<size_t>(r)] * v[static_cast<size_t>(j)];
    }
    Mat proj;
    mm_nt(centered, components, proj, false);
    return proj;  // n x 2
}

struct SeparabilityResult {
    Mat projection;  // n x 2
    DecisionTree tree;
    double tree_accuracy = 0.0;
};

// Deterministic stand-in for a stochastic 2-D embedding view: project to the
// top-2 principal components, then fit a depth-3 axis-aligned decision tree
// and report its training accuracy as the separability score.
inline SeparabilityResult separability_probe(const Mat& embeddings, const std::vector<int>& labels,
                                             int max_depth = 3) {
    require(embeddings.rows == static_cast<int>(labels.size()) && embeddings.rows > 0,
            "separability_probe: misaligned inputs");
    std::vector<int> counts;
    for (int l : labels) {
        require(l >= 0, "separability_probe: negative label");
        if (l >= static_cast<int>(counts.size())) counts.resize(static_cast<size_t>(l) + 1, 0);
        ++counts[static_cast<size_t>(l)];
    }
    int distinct = 0;
    for (int c : counts) distinct += c > 0 ? 1 : 0;
    require(distinct >= 2, "separability_probe: need at least 2 distinct labels");
    for (int c : counts)
        require(c == 0 || c >= 3, "separability_probe: need >= 3 points per class");

    SeparabilityResult r;
    r.projection = pca_project_2d(embeddings);
    r.tree = fit_decision_tree(r.projection, labels, max_depth);
    r.tree_accuracy = tree_accuracy(r.tree, r.projection, labels);
    return r;
}

}  // namespace biome::probe
