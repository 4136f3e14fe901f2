#pragma once

// Independent reference implementations used as test oracles. These must not
// call into the library paths they check.

#include <cmath>
#include <complex>
#include <vector>

#include "biome/matrix.hpp"

namespace oracles {

// O(n^2) DFT magnitude of the first n samples, bins 0..n/2.
inline std::vector<double> naive_dft_magnitude(const std::vector<double>& x, int n) {
    const double pi = 3.14159265358979323846;
    std::vector<double> mag(static_cast<size_t>(n / 2 + 1));
    for (int k = 0; k <= n / 2; ++k) {
        double re = 0.0, im = 0.0;
        for (int t = 0; t < n; ++t) {
            const double a = -2.0 * pi * k * t / n;
            re += x[static_cast<size_t>(t)] * std::cos(a);
            im += x[static_cast<size_t>(t)] * std::sin(a);
        }
        mag[static_cast<size_t>(k)] = std::hypot(re, im);
    }
    return mag;
}

inline biome::Mat naive_matmul(const biome::Mat& a, const biome::Mat& b) {
    biome::Mat c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(k, j);
            c.at(i, j) = s;
        }
    return c;
}

// Plain multi-head attention with rotary positions, written with scalar
// loops. Weight layout matches the grouped implementation at n_kv = n_heads.
inline biome::Mat reference_mha(const biome::Mat& tokens, const biome::Mat& wq,
                                const biome::Mat& wk, const biome::Mat& wv, const biome::Mat& wo,
                                int n_heads, double rope_base) {
    using biome::Mat;
    const int T = tokens.rows, d = tokens.cols;
    const int hd = d / n_heads;
    Mat q = naive_matmul(tokens, wq), k = naive_matmul(tokens, wk), v = naive_matmul(tokens, wv);

    auto rope = [&](Mat& m) {
        for (int t = 0; t < m.rows; ++t)
            for (int h = 0; h < n_heads; ++h)
                for (int i = 0; i < hd / 2; ++i) {
                    const double th = t * std::pow(rope_base, -2.0 * i / hd);
                    const double c = std::cos(th), s = std::sin(th);
                    const int c0 = h * hd + 2 * i;
                    const double a = m.at(t, c0), b = m.at(t, c0 + 1);
                    m.at(t, c0) = a * c - b * s;
                    m.at(t, c0 + 1) = a * s + b * c;
                }
    };
    rope(q);
    rope(k);

    Mat ctx(T, d);
    for (int h = 0; h < n_heads; ++h) {
        for (int i = 0; i < T; ++i) {
            std::vector<double> scores(static_cast<size_t>(T));
            double mx = -1e300;
            for (int j = 0; j < T; ++j) {
                double s = 0.0;
                for (int c = 0; c < hd; ++c) s += q.at(i, h * hd + c) * k.at(j, h * hd + c);
                scores[static_cast<size_t>(j)] = s / std::sqrt(static_cast<double>(hd));
                mx = std::max(mx, scores[static_cast<size_t>(j)]);
            }
            double z = 0.0;
            for (int j = 0; j < T; ++j) {
                scores[static_cast<size_t>(j)] = std::exp(scores[static_cast<size_t>(j)] - mx);
                z += scores[static_cast<size_t>(j)];
            }
            for (int c = 0; c < hd; ++c) {
                double s = 0.0;
                for (int j = 0; j < T; ++j) s += scores[static_cast<size_t>(j)] / z * v.at(j, h * hd + c);
                ctx.at(i, h * hd + c) = s;
            }
        }
    }
    return naive_matmul(ctx, wo);
}

// Scalar-loop distillation loss for one layer pair with a projection head.
inline double naive_pair_loss(const biome::Mat& student, const biome::Mat& teacher,
                              const biome::Mat& hw, const biome::Mat& hb) {
    const int T = student.rows, D = teacher.cols;
    double total = 0.0;
    for (int t = 0; t < T; ++t) {
        std::vector<double> zhat(static_cast<size_t>(D), 0.0);
        for (int j = 0; j < D; ++j) {
            double s = hb.at(0, j);
            for (int c = 0; c < student.cols; ++c) s += student.at(t, c) * hw.at(c, j);
            zhat[static_cast<size_t>(j)] = s;
        }
        double l1 = 0.0, dot = 0.0, ns = 0.0, nt = 0.0;
        for (int j = 0; j < D; ++j) {
            l1 += std::abs(zhat[static_cast<size_t>(j)] - teacher.at(t, j));
            dot += zhat[static_cast<size_t>(j)] * teacher.at(t, j);
            ns += zhat[static_cast<size_t>(j)] * zhat[static_cast<size_t>(j)];
            nt += teacher.at(t, j) * teacher.at(t, j);
        }
        const double cosv = dot / ((std::sqrt(ns) + 1e-8) * (std::sqrt(nt) + 1e-8));
        const double sig = 1.0 / (1.0 + std::exp(-cosv));
        total += l1 / D - std::log(sig);
    }
    return total / T;
}

// Pairwise-comparison AUC: P(score_pos > score_neg) + 0.5 P(tie).
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    long long pairs = 0;
    for (size_t i = 0; i < scores.size(); ++i)
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[i] == 1 && labels[j] == 0) {
                ++pairs;
                if (scores[i] > scores[j]) wins += 1.0;
                else if (scores[i] == scores[j]) wins += 0.5;
            }
        }
    return wins / static_cast<double>(pairs);
}

}  // namespace oracles
