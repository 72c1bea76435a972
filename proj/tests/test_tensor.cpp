// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "adgen/gradcheck.hpp"
#include "adgen/tensor.hpp"

using namespace adgen;

namespace {

Tensor randt(std::vector<size_t> shape, Rng& rng) {
    return Tensor::randn(std::move(shape), rng, 1.0);
}

// Independent per-row NLL oracle for cross_entropy (plain loops, no tape).
double nll_oracle(const Tensor& logits, const std::vector<int>& targets) {
    const size_t t = logits.rows(), v = logits.cols();
    double total = 0;
    for (size_t r = 0; r < t; ++r) {
        double mx = logits.at(r, 0);
        for (size_t j = 1; j < v; ++j) mx = std::max(mx, logits.at(r, j));
        double denom = 0;
        for (size_t j = 0; j < v; ++j) denom += std::exp(logits.at(r, j) - mx);
        const double logp = logits.at(r, (size_t)targets[r]) - mx - std::log(denom);
        total -= logp;
    }
    return total / (double)t;
}

}  // namespace

TEST_CASE("matmul identity cases") {
    Tape tape;
    Tensor i2 = Tensor::from({1, 0, 0, 1}, {2, 2});
    Tensor c = tape.matmul(i2, i2);
    CHECK(c.at(0, 0) == 1.0);
    CHECK(c.at(0, 1) == 0.0);
    CHECK(c.at(1, 1) == 1.0);

    Tensor a = Tensor::from({1, 2, 3, 4}, {2, 2});
    Tensor r = tape.matmul(a, i2);
    for (size_t i = 0; i < 4; ++i) CHECK(r.data()[i] == a.data()[i]);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tape tape;
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 2});
    CHECK_THROWS_WITH_AS(tape.matmul(a, b), doctest::Contains("[2x3]"), ShapeError);
}

TEST_CASE("matmul gradient vs central differences") {
    Rng rng(11);
    Tensor a = randt({3, 4}, rng);
    Tensor b = randt({4, 2}, rng);
    // d/dA of sum(A*B)
    double err_a = grad_check(
        [&](Tape& t, const Tensor& x) { return t.sum_all(t.matmul(x, b)); }, a, 1e-5);
    CHECK(err_a < 1e-6);
    double err_b = grad_check(
        [&](Tape& t, const Tensor& x) { return t.sum_all(t.matmul(a, x)); }, b, 1e-5);
    CHECK(err_b < 1e-6);
    // Non-trivial downstream: sum of squares.
    double err_sq = grad_check(
        [&](Tape& t, const Tensor& x) {
            Tensor c = t.matmul(x, b);
            return t.sum_all(t.mul(c, c));
        },
        a, 1e-5);
    CHECK(err_sq < 1e-6);
}

TEST_CASE("softmax symmetry and stability") {
    Tape tape;
    Tensor x = Tensor::from({0, 0, 0}, {3});
    Tensor y = tape.softmax(x);
    for (size_t i = 0; i < 3; ++i) CHECK(y.at(i) == doctest::Approx(1.0 / 3).epsilon(1e-14));

    Tensor big = Tensor::from({1000, 1000}, {2});
    Tensor yb = tape.softmax(big);
    CHECK(yb.at(0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(std::isfinite(yb.at(0)));
}

TEST_CASE("softmax rows sum to one") {
    Rng rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        Tape tape;
        Tensor x = randt({5, 7}, rng);
        Tensor y = tape.softmax(x);
        for (size_t r = 0; r < 5; ++r) {
            double s = 0;
            for (size_t j = 0; j < 7; ++j) s += y.at(r, j);
            CHECK(std::abs(s - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("softmax gradient of sum log softmax") {
    Rng rng(5);
    Tensor x = randt({6}, rng);
    double err = grad_check(
        [](Tape& t, const Tensor& v) { return t.sum_all(t.log(t.softmax(v))); }, x, 1e-5);
    CHECK(err < 1e-6);
}

TEST_CASE("cross_entropy values") {
    Tape tape;
    // Probability ~1 on the target -> loss ~ 0.
    Tensor conf = Tensor::from({30, 0, 0, 0}, {1, 4});
    CHECK(tape.cross_entropy(conf, {0}).item() == doctest::Approx(0.0).epsilon(1e-10));

    // Uniform logits over V=16 -> ln 16.
    Tensor uni = Tensor::zeros({3, 16});
    CHECK(tape.cross_entropy(uni, {1, 7, 15}).item() ==
          doctest::Approx(std::log(16.0)).epsilon(1e-14));
}

TEST_CASE("cross_entropy matches per-position NLL oracle") {
    Rng rng(17);
    Tape tape;
    Tensor logits = randt({9, 12}, rng);
    std::vector<int> targets;
    for (int i = 0; i < 9; ++i) targets.push_back((int)rng.below(12));
    const double got = tape.cross_entropy(logits, targets).item();
    CHECK(std::abs(got - nll_oracle(logits, targets)) <= 1e-12);
}

TEST_CASE("cross_entropy rejects out-of-range target") {
    Tape tape;
    Tensor logits = Tensor::zeros({2, 4});
    CHECK_THROWS_AS(tape.cross_entropy(logits, {0, 4}), IndexError);
}

TEST_CASE("cross_entropy gradient") {
    Rng rng(23);
    Tensor logits = randt({4, 6}, rng);
    double err = grad_check(
        [](Tape& t, const Tensor& x) { return t.cross_entropy(x, {1, 0, 5, 3}); }, logits, 1e-5);
    CHECK(err < 1e-6);
}

TEST_CASE("gumbel_softmax basic properties") {
    Tensor scores = Tensor::from({0.5, -0.2, 1.0, 0.0}, {4});

    SUBCASE("rejects non-positive temperature") {
        Tape tape;
        Rng rng(1);
        CHECK_THROWS_AS(tape.gumbel_softmax(scores, 0.0, rng), ParamError);
        CHECK_THROWS_AS(tape.gumbel_softmax(scores, -1.0, rng), ParamError);
    }

    SUBCASE("sums to one for any seed") {
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            Tape tape;
            Rng rng(seed);
            Tensor y = tape.gumbel_softmax(scores, 1.0, rng);
            double s = std::accumulate(y.data().begin(), y.data().end(), 0.0);
            CHECK(std::abs(s - 1.0) <= 1e-12);
        }
    }

    SUBCASE("temperature to zero gives one-hot at argmax of perturbed scores") {
        Rng rng_a(42), rng_b(42);
        Tape tape;
        // Recreate the same noise with the replayable rng to find the argmax.
        std::vector<double> perturbed(4);
        for (size_t i = 0; i < 4; ++i) perturbed[i] = scores.at(i) + rng_a.gumbel();
        size_t argmax = 0;
        for (size_t i = 1; i < 4; ++i)
            if (perturbed[i] > perturbed[argmax]) argmax = i;

        Tensor hard = tape.gumbel_softmax(scores, 1e-9, rng_b, /*hard=*/true);
        for (size_t i = 0; i < 4; ++i) CHECK(hard.at(i) == (i == argmax ? 1.0 : 0.0));
    }

    SUBCASE("deterministic given the same seed") {
        Tape t1, t2;
        Rng r1(9), r2(9);
        Tensor y1 = t1.gumbel_softmax(scores, 0.7, r1);
        Tensor y2 = t2.gumbel_softmax(scores, 0.7, r2);
        for (size_t i = 0; i < 4; ++i) CHECK(y1.at(i) == y2.at(i));
    }
}

TEST_CASE("gumbel_softmax argmax frequencies match softmax(scores)") {
    // Gumbel-max oracle: argmax(s + g) ~ Categorical(softmax(s)).
    Tensor scores = Tensor::from({1.0, 0.0, -0.5, 0.5}, {4});
    Tape probs_tape;
    Tensor expected = probs_tape.softmax(scores);

    const int draws = 100000;
    Rng rng(1234);
    std::vector<int> counts(4, 0);
    Tape tape;
    tape.set_grad_enabled(false);
    for (int i = 0; i < draws; ++i) {
        Tensor y = tape.gumbel_softmax(scores, 1.0, rng, /*hard=*/true);
        for (size_t j = 0; j < 4; ++j)
            if (y.at(j) == 1.0) counts[(int)j]++;
    }
    for (size_t j = 0; j < 4; ++j) {
        CHECK(std::abs(counts[j] / (double)draws - expected.at(j)) <= 0.01);
    }
}

TEST_CASE("gumbel_softmax straight-through gradient") {
    Rng rng(31);
    Tensor scores = Tensor::from({0.2, -0.4, 0.9}, {3});
    // Soft path gradient (fixed noise via fixed counter start).
    double err = grad_check(
        [](Tape& t, const Tensor& s) {
            Rng noise(77);  // same noise each evaluation
            Tensor y = t.gumbel_softmax(s, 0.8, noise);
            return t.sum_all(t.mul(y, y));
        },
        scores, 1e-6);
    CHECK(err < 1e-5);
}

TEST_CASE("backward basics") {
    SUBCASE("loss = sum(x) -> grad ones") {
        Tape tape;
        Tensor x = Tensor::from({1, 2, 3}, {3}, true);
        tape.backward(tape.sum_all(x));
        for (size_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == 1.0);
    }
    SUBCASE("loss = sum(x*x) -> grad 2x") {
        Tape tape;
        Tensor x = Tensor::from({1, -2, 0.5}, {3}, true);
        tape.backward(tape.sum_all(tape.mul(x, x)));
        for (size_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == doctest::Approx(2 * x.at(i)));
    }
    SUBCASE("non-scalar loss rejected") {
        Tape tape;
        Tensor x = Tensor::from({1, 2}, {2}, true);
        Tensor y = tape.mul(x, x);
        CHECK_THROWS_AS(tape.backward(y), ContractError);
    }
    SUBCASE("double backward without reset rejected") {
        Tape tape;
        Tensor x = Tensor::from({1, 2}, {2}, true);
        Tensor l = tape.sum_all(x);
        tape.backward(l);
        CHECK_THROWS_AS(tape.backward(l), ContractError);
        tape.reset();
        Tensor l2 = tape.sum_all(x);
        CHECK_NOTHROW(tape.backward(l2));
    }
}

TEST_CASE("grad_check sanity") {
    Rng rng(2);
    Tensor x = randt({5}, rng);
    double err_sum =
        grad_check([](Tape& t, const Tensor& v) { return t.sum_all(v); }, x, 1e-5);
    CHECK(err_sum < 1e-10);

    Tensor logits = randt({3, 8}, rng);
    double err_ce = grad_check(
        [](Tape& t, const Tensor& v) { return t.cross_entropy(v, {2, 0, 7}); }, logits, 1e-5);
    CHECK(err_ce < 1e-6);
}

TEST_CASE("every primitive op passes grad_check on random small inputs") {
    Rng rng(99);
    auto check = [&](const char* name, const TensorFn& f, const Tensor& x) {
        INFO(name);
        CHECK(grad_check(f, x, 1e-5) < 1e-4);
    };

    Tensor a = randt({4, 5}, rng);
    Tensor b = randt({4, 5}, rng);
    Tensor bpos = Tensor::from({0.5, 1.5, 2.0, 0.7, 1.2, 0.9, 1.1, 2.2, 0.4, 1.7,
                                0.6, 1.3, 2.5, 0.8, 1.9, 1.4, 2.1, 0.3, 1.6, 2.4},
                               {4, 5});
    Tensor row = randt({1, 5}, rng);
    Tensor col = randt({4}, rng);

    check("add", [&](Tape& t, const Tensor& x) { return t.sum_all(t.mul(t.add(x, b), t.add(x, b))); }, a);
    check("sub", [&](Tape& t, const Tensor& x) { return t.sum_all(t.mul(t.sub(x, b), x)); }, a);
    check("mul", [&](Tape& t, const Tensor& x) { return t.sum_all(t.mul(x, b)); }, a);
    check("div", [&](Tape& t, const Tensor& x) { return t.sum_all(t.div(x, bpos)); }, a);
    check("div-denominator",
          [&](Tape& t, const Tensor& x) { return t.sum_all(t.div(b, x)); }, bpos);
    check("relu", [&](Tape& t, const Tensor& x) { return t.sum_all(t.relu(x)); }, bpos);
    check("exp", [&](Tape& t, const Tensor& x) { return t.sum_all(t.exp(x)); }, a);
    check("log", [&](Tape& t, const Tensor& x) { return t.sum_all(t.log(x)); }, bpos);
    check("sqrt", [&](Tape& t, const Tensor& x) { return t.sum_all(t.sqrt(x)); }, bpos);
    check("scale", [&](Tape& t, const Tensor& x) { return t.sum_all(t.scale(x, -2.5)); }, a);
    check("add_scalar",
          [&](Tape& t, const Tensor& x) { return t.sum_all(t.mul(t.add_scalar(x, 3.0), x)); }, a);
    check("add_rowvec",
          [&](Tape& t, const Tensor& x) { return t.sum_all(t.mul(t.add_rowvec(x, row), x)); }, a);
    check("add_rowvec-vec",
          [&](Tape& t, const Tensor& x) { return t.sum_all(t.mul(t.add_rowvec(a, x), a)); }, row);
    check("mul_rowvec",
          [&](Tape& t, const Tensor& x) { return t.sum_all(t.mul_rowvec(x, row)); }, a);
    check("mul_rowvec-vec",
          [&](Tape& t, const Tensor& x) { return t.sum_all(t.mul(t.mul_rowvec(a, x), a)); }, row);
    check("add_colvec",
          [&](Tape& t, const Tensor& x) { return t.sum_all(t.mul(t.add_colvec(x, col), x)); }, a);
    check("add_colvec-vec",
          [&](Tape& t, const Tensor& x) { return t.sum_all(t.mul(t.add_colvec(a, x), a)); }, col);
    check("mul_colvec",
          [&](Tape& t, const Tensor& x) { return t.sum_all(t.mul(t.mul_colvec(x, col), x)); }, a);
    check("mul_colvec-vec",
          [&](Tape& t, const Tensor& x) { return t.sum_all(t.mul(t.mul_colvec(a, x), a)); }, col);
    check("mean_all", [&](Tape& t, const Tensor& x) { return t.mean_all(t.mul(x, x)); }, a);
    check("mean_rows",
          [&](Tape& t, const Tensor& x) {
              Tensor m = t.mean_rows(x);
              return t.sum_all(t.mul(m, m));
          },
          a);
    check("sum_cols",
          [&](Tape& t, const Tensor& x) {
              Tensor s = t.sum_cols(x);
              return t.sum_all(t.mul(s, s));
          },
          a);
    check("mean_cols",
          [&](Tape& t, const Tensor& x) {
              Tensor s = t.mean_cols(x);
              return t.sum_all(t.mul(s, s));
          },
          a);
    check("gather_rows",
          [&](Tape& t, const Tensor& x) {
              Tensor g = t.gather_rows(x, {0, 2, 2, 3});
              return t.sum_all(t.mul(g, g));
          },
          a);
    Tensor repl = randt({2, 5}, rng);
    check("overwrite_rows-base",
          [&](Tape& t, const Tensor& x) {
              Tensor o = t.overwrite_rows(x, {1, 3}, repl);
              return t.sum_all(t.mul(o, o));
          },
          a);
    check("overwrite_rows-repl",
          [&](Tape& t, const Tensor& x) {
              Tensor o = t.overwrite_rows(a, {1, 3}, x);
              return t.sum_all(t.mul(o, o));
          },
          repl);
    check("concat_rows",
          [&](Tape& t, const Tensor& x) {
              Tensor c = t.concat_rows(x, b);
              return t.sum_all(t.mul(c, c));
          },
          a);
    check("slice_rows",
          [&](Tape& t, const Tensor& x) {
              Tensor s = t.slice_rows(x, 1, 3);
              return t.sum_all(t.mul(s, s));
          },
          a);
    check("slice_cols",
          [&](Tape& t, const Tensor& x) {
              Tensor s = t.slice_cols(x, 1, 4);
              return t.sum_all(t.mul(s, s));
          },
          a);
    check("concat_cols",
          [&](Tape& t, const Tensor& x) {
              Tensor c = t.concat_cols({x, b});
              return t.sum_all(t.mul(c, c));
          },
          a);
    Tensor m2 = randt({5, 3}, rng);
    check("matmul",
          [&](Tape& t, const Tensor& x) {
              Tensor c = t.matmul(x, m2);
              return t.sum_all(t.mul(c, c));
          },
          a);
    Tensor m3 = randt({6, 5}, rng);
    check("matmul_nt",
          [&](Tape& t, const Tensor& x) {
              Tensor c = t.matmul_nt(x, m3);
              return t.sum_all(t.mul(c, c));
          },
          a);
    check("softmax",
          [&](Tape& t, const Tensor& x) {
              Tensor y = t.softmax(x);
              return t.sum_all(t.mul(y, y));
          },
          a);
}

TEST_CASE("ops are deterministic given the same seed") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        Tape tape;
        Tensor x = Tensor::randn({4, 4}, rng, 1.0, true);
        Tensor y = tape.softmax(tape.matmul(x, x));
        Tensor g = tape.gumbel_softmax(Tensor::from({1, 2, 3}, {3}), 0.5, rng);
        double a = 0;
        size_t i = 0;
        for (double v : y.data()) a += v * (double)(++i);
        for (double v : g.data()) a += 7 * v * (double)(++i);
        return a;
    };
    CHECK(run(5) == run(5));
    CHECK(run(5) != run(6));
}
