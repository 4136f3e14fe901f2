#include <gtest/gtest.h>

#include "biome/autodiff.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace biome;

namespace {

Mat randm(int r, int c, Rng& rng, double sd = 1.0) { return Mat::gaussian(r, c, rng, sd); }

// Generic check: builds the graph via `build`, which must return the scalar
// root given leaves bound from `inputs`. Every coordinate of every input is
// finite-difference checked.
using BuildFn = std::function<ad::Var(ad::Graph&, std::vector<ad::Var>&)>;

void check_op(const BuildFn& build, std::vector<Mat> inputs, double tol = 1e-6) {
    // Analytic gradients.
    ad::Graph g;
    std::vector<ad::Var> vars;
    for (auto& m : inputs) vars.push_back(g.leaf(m, true));
    ad::Var root = build(g, vars);
    g.backward(root);

    auto eval = [&build, &inputs]() {
        ad::Graph g2;
        std::vector<ad::Var> vs;
        for (auto& m : inputs) vs.push_back(g2.leaf(m, true));
        return build(g2, vs)->val.v[0];
    };
    Rng rng(7);
    for (size_t i = 0; i < inputs.size(); ++i) {
        gradcheck::Result r =
            gradcheck::check_tensor(eval, inputs[i], vars[i]->grad, rng, 64);
        EXPECT_LT(r.max_rel_err, tol) << "input " << i;
    }
}

// Weighted sum makes a scalar objective that exercises all matrix entries.
ad::Var weighted_sum(ad::Graph& g, ad::Var x, uint64_t salt = 3) {
    Rng rng(salt);
    Mat w = Mat::gaussian(x->val.rows, x->val.cols, rng, 1.0);
    return ad::sum_all(g, ad::mul(g, x, g.constant(w)));
}

}  // namespace

TEST(Autodiff, MatmulMatchesNaiveOracle) {
    Rng rng(1);
    Mat a = randm(7, 5, rng), b = randm(5, 9, rng);
    ad::Graph g;
    ad::Var r = ad::matmul(g, g.constant(a), g.constant(b));
    Mat expect = oracles::naive_matmul(a, b);
    for (size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(r->val.v[i], expect.v[i], 1e-12);
}

TEST(Autodiff, ElementwiseOpGradients) {
    Rng rng(2);
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::add(g, v[0], v[1]));
    }, {randm(3, 4, rng), randm(3, 4, rng)});
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::sub(g, v[0], v[1]));
    }, {randm(3, 4, rng), randm(3, 4, rng)});
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::mul(g, v[0], v[1]));
    }, {randm(3, 4, rng), randm(3, 4, rng)});
    // Keep the divisor away from zero.
    Mat denom = randm(3, 4, rng);
    for (auto& x : denom.v) x = 2.0 + std::abs(x);
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::divide(g, v[0], v[1]));
    }, {randm(3, 4, rng), denom});
}

TEST(Autodiff, UnaryOpGradients) {
    Rng rng(3);
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::silu(g, v[0]));
    }, {randm(4, 6, rng)});
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::softplus(g, v[0]));
    }, {randm(4, 6, rng, 2.0)});
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::scale(g, v[0], -2.5));
    }, {randm(4, 6, rng)});
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::add_scalar(g, v[0], 1.25));
    }, {randm(4, 6, rng)});
    // abs away from the kink, sqrt away from zero.
    Mat pos = randm(4, 6, rng);
    for (auto& x : pos.v) x = 0.5 + std::abs(x);
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::sqrt_val(g, v[0]));
    }, {pos});
    Mat off = randm(4, 6, rng);
    for (auto& x : off.v) x += (x >= 0 ? 0.3 : -0.3);
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::abs_val(g, v[0]));
    }, {off});
}

TEST(Autodiff, MatmulGradients) {
    Rng rng(4);
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::matmul(g, v[0], v[1]));
    }, {randm(3, 5, rng), randm(5, 4, rng)});
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::matmul_nt(g, v[0], v[1]));
    }, {randm(3, 5, rng), randm(4, 5, rng)});
}

TEST(Autodiff, ShapeOpGradients) {
    Rng rng(5);
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::slice_cols(g, v[0], 2, 3));
    }, {randm(4, 8, rng)});
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        std::vector<ad::Var> parts = {ad::slice_cols(g, v[0], 0, 2), v[1]};
        return weighted_sum(g, ad::concat_cols(g, parts));
    }, {randm(4, 5, rng), randm(4, 3, rng)});
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::patch_gather(g, v[0], 2));
    }, {randm(6, 8, rng)});
}

TEST(Autodiff, BroadcastAndReductionGradients) {
    Rng rng(6);
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::mul_rowvec(g, v[0], v[1]));
    }, {randm(5, 4, rng), randm(1, 4, rng)});
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::add_rowvec(g, v[0], v[1]));
    }, {randm(5, 4, rng), randm(1, 4, rng)});
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::row_sum(g, v[0]));
    }, {randm(5, 4, rng)});
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::col_mean(g, v[0]));
    }, {randm(5, 4, rng)});
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) { return ad::sum_all(g, v[0]); },
             {randm(5, 4, rng)});
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) { return ad::mean_all(g, v[0]); },
             {randm(5, 4, rng)});
}

TEST(Autodiff, SoftmaxAndNormGradients) {
    Rng rng(7);
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::softmax_rows(g, v[0]));
    }, {randm(5, 6, rng)});
    check_op([](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::rms_norm_rows(g, v[0], v[1], 1e-6));
    }, {randm(5, 6, rng), randm(1, 6, rng)});
}

TEST(Autodiff, RopeGradientAndProperties) {
    Rng rng(8);
    std::vector<int> pos = {0, 1, 2, 5, 9};
    check_op([&pos](ad::Graph& g, std::vector<ad::Var>& v) {
        return weighted_sum(g, ad::rope_rotate(g, v[0], pos, 10000.0));
    }, {randm(5, 8, rng)});

    // Position 0 is the identity.
    Mat x = randm(1, 8, rng);
    ad::Graph g;
    ad::Var r = ad::rope_rotate(g, g.constant(x), {0}, 10000.0);
    for (size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(r->val.v[i], x.v[i]);

    // Rotation preserves the per-pair Euclidean norm.
    Mat y = randm(4, 8, rng);
    ad::Graph g2;
    ad::Var ry = ad::rope_rotate(g2, g2.constant(y), {3, 7, 11, 20}, 10000.0);
    for (int row = 0; row < 4; ++row)
        for (int i = 0; i < 4; ++i) {
            const double n0 = std::hypot(y.at(row, 2 * i), y.at(row, 2 * i + 1));
            const double n1 = std::hypot(ry->val.at(row, 2 * i), ry->val.at(row, 2 * i + 1));
            EXPECT_NEAR(n0, n1, 1e-12);
        }

    // Scores depend only on relative position: dot(rope(q,m), rope(k,n)) is
    // invariant under a common shift.
    for (int s = 1; s <= 8; ++s) {
        Mat q = randm(1, 8, rng), k = randm(1, 8, rng);
        ad::Graph g3;
        ad::Var q0 = ad::rope_rotate(g3, g3.constant(q), {4}, 10000.0);
        ad::Var k0 = ad::rope_rotate(g3, g3.constant(k), {11}, 10000.0);
        ad::Var qs = ad::rope_rotate(g3, g3.constant(q), {4 + s}, 10000.0);
        ad::Var ks = ad::rope_rotate(g3, g3.constant(k), {11 + s}, 10000.0);
        double d0 = 0.0, d1 = 0.0;
        for (int i = 0; i < 8; ++i) {
            d0 += q0->val.v[static_cast<size_t>(i)] * k0->val.v[static_cast<size_t>(i)];
            d1 += qs->val.v[static_cast<size_t>(i)] * ks->val.v[static_cast<size_t>(i)];
        }
        EXPECT_NEAR(d0, d1, 1e-10);
    }
}

TEST(Autodiff, OddHeadDimRejected) {
    ad::Graph g;
    Mat x(2, 6);
    EXPECT_THROW(ad::rope_rotate(g, g.constant(x), {0, 1, 2}, 10000.0), ShapeError);
    Mat odd(2, 5);
    EXPECT_THROW(ad::rope_rotate(g, g.constant(odd), {0, 1}, 10000.0), ShapeError);
}

TEST(Autodiff, BackwardAccumulatesThroughSharedLeaves) {
    // f(x) = sum(x*x) + sum(x) has gradient 2x + 1.
    Rng rng(9);
    Mat x = randm(3, 3, rng);
    ad::Graph g;
    ad::Var xv = g.leaf(x, true);
    ad::Var root = ad::add(g, ad::sum_all(g, ad::mul(g, xv, xv)), ad::sum_all(g, xv));
    g.backward(root);
    for (size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(xv->grad.v[i], 2.0 * x.v[i] + 1.0, 1e-12);
}
