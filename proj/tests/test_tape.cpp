// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference checks for every tape op, in float64.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>

#include "higen/rng.hpp"
#include "higen/tape.hpp"

using namespace higen;
using namespace higen::ops;

namespace {

Matd random_mat(Index r, Index c, Rng& rng, double scale = 1.0) {
  Matd m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rng.gaussian() * scale;
  return m;
}

// Builds the graph twice per perturbed entry and compares d(sum(output))
// against the tape gradient of every input.
void check_grad(
    const std::vector<Matd>& inputs,
    const std::function<Val<double>(Tape<double>&, std::vector<Val<double>>&)>&
        build,
    double tol = 1e-7) {
  auto eval = [&](const std::vector<Matd>& xs) {
    Tape<double> tape(false);
    std::vector<Val<double>> vs;
    for (const auto& x : xs) vs.push_back(tape.leaf(x));
    Val<double> out = build(tape, vs);
    return out.v().sum();
  };

  Tape<double> tape(true);
  std::vector<Val<double>> vs;
  for (const auto& x : inputs) vs.push_back(tape.leaf(x));
  Val<double> out = build(tape, vs);
  tape.seed(out.id, Matd::Ones(out.v().rows(), out.v().cols()));
  tape.sweep_all();

  const double delta = 1e-6;
  for (size_t k = 0; k < inputs.size(); ++k) {
    Matd analytic = tape.has_grad(vs[k].id)
                        ? tape.grad(vs[k].id)
                        : Matd::Zero(inputs[k].rows(), inputs[k].cols());
    for (Index r = 0; r < inputs[k].rows(); ++r)
      for (Index c = 0; c < inputs[k].cols(); ++c) {
        std::vector<Matd> up = inputs, dn = inputs;
        up[k](r, c) += delta;
        dn[k](r, c) -= delta;
        const double fd = (eval(up) - eval(dn)) / (2 * delta);
        const double a = analytic(r, c);
        // relative agreement, with an absolute guard where central
        // differences bottom out in rounding noise
        const double err = std::abs(a - fd);
        CHECK(err <= std::max(tol * std::max(std::abs(a), std::abs(fd)),
                              1e-8));
      }
  }
}

}  // namespace

TEST_CASE("arithmetic ops") {
  Rng rng(1);
  const Matd a = random_mat(3, 4, rng), b = random_mat(3, 4, rng);

  check_grad({a, b}, [](auto& t, auto& v) { return add(v[0], v[1]); });
  check_grad({a, b}, [](auto& t, auto& v) { return sub(v[0], v[1]); });
  check_grad({a, b}, [](auto& t, auto& v) { return hadamard(v[0], v[1]); });
  check_grad({a}, [](auto& t, auto& v) { return scale(v[0], 2.5); });
  check_grad({a}, [](auto& t, auto& v) { return add_const(v[0], -1.3); });
}

TEST_CASE("matrix products") {
  Rng rng(2);
  const Matd a = random_mat(3, 5, rng), b = random_mat(5, 4, rng);
  const Matd c = random_mat(6, 5, rng);
  const Matd w = random_mat(5, 2, rng), bias = random_mat(1, 2, rng);

  check_grad({a, b}, [](auto& t, auto& v) { return matmul(v[0], v[1]); });
  check_grad({a, c},
             [](auto& t, auto& v) { return matmul_nt(v[0], v[1], 0.7); });
  check_grad({a, w, bias}, [](auto& t, auto& v) {
    return affine_rows(v[0], v[1], v[2]);
  });
}

TEST_CASE("structure ops") {
  Rng rng(3);
  const Matd table = random_mat(6, 4, rng);
  const Matd a = random_mat(2, 4, rng), b = random_mat(3, 4, rng);
  const Matd c = random_mat(3, 2, rng);
  const Matd x = random_mat(5, 4, rng);

  check_grad({table}, [](auto& t, auto& v) {
    return gather_rows(v[0], {0, 2, 2, 5});
  });
  check_grad({a, b}, [](auto& t, auto& v) {
    return concat_rows<double>({v[0], v[1]});
  });
  check_grad({b, c}, [](auto& t, auto& v) {
    return concat_cols<double>({v[0], v[1]});
  });
  check_grad({x}, [](auto& t, auto& v) { return slice_rows(v[0], 1, 3); });
  check_grad({x}, [](auto& t, auto& v) { return slice_cols(v[0], 2, 2); });
  check_grad({a}, [](auto& t, auto& v) {
    return replicate_rows(v[0], {0, 0, 1, 1, 0});
  });
  check_grad({x}, [](auto& t, auto& v) { return row_mean_all(v[0]); });
  check_grad({x}, [](auto& t, auto& v) { return sum_all(v[0]); });
  check_grad({x}, [](auto& t, auto& v) { return mean_all(v[0]); });
  check_grad({x}, [](auto& t, auto& v) { return reshape(v[0], 2, 10); });
}

TEST_CASE("replicate_rows accumulates grads onto the source row") {
  // sum over a 4x replication: each source row's gradient is 4x upstream
  Tape<double> tape(true);
  Val<double> x = tape.leaf(Matd::Random(4, 3));
  Val<double> rep = replicate_rows(x, {0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2,
                                       3, 3, 3, 3});
  Val<double> s = sum_all(rep);
  tape.backward(s);
  CHECK(tape.grad(x.id).isApprox(Matd::Constant(4, 3, 4.0), 1e-12));
}

TEST_CASE("nonlinearities") {
  Rng rng(4);
  const Matd x = random_mat(4, 5, rng);

  check_grad({x}, [](auto& t, auto& v) { return gelu(v[0]); });
  check_grad({x}, [](auto& t, auto& v) { return tanh_op(v[0]); });
  check_grad({x}, [](auto& t, auto& v) { return exp_op(v[0]); }, 1e-6);
  check_grad({x}, [](auto& t, auto& v) { return clamp_op(v[0], -0.5, 0.5); });

  const Matd g = random_mat(1, 5, rng), bta = random_mat(1, 5, rng);
  check_grad({x, g, bta}, [](auto& t, auto& v) {
    return layer_norm_rows(v[0], v[1], v[2]);
  });
  check_grad({x, g, bta}, [](auto& t, auto& v) {
    return film_rows(v[0], v[1], v[2]);
  });
}

TEST_CASE("softmax family") {
  Rng rng(5);
  const Matd x = random_mat(4, 6, rng);
  const Matd sq = random_mat(5, 5, rng);

  SUBCASE("rows sum to one") {
    Tape<double> tape(false);
    Val<double> s = softmax_rows(tape.leaf(x));
    for (Index r = 0; r < s.v().rows(); ++r)
      CHECK(s.v().row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("causal rows are normalized and strictly lower-triangular") {
    Tape<double> tape(false);
    Val<double> s = causal_softmax_rows(tape.leaf(sq));
    for (Index r = 0; r < 5; ++r) {
      CHECK(s.v().row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
      for (Index c = r + 1; c < 5; ++c) CHECK(s.v()(r, c) == 0.0);
    }
  }

  check_grad({x}, [](auto& t, auto& v) { return softmax_rows(v[0]); });
  check_grad({sq},
             [](auto& t, auto& v) { return causal_softmax_rows(v[0]); });

  Matd mask = Matd::Ones(4, 4) - Matd::Identity(4, 4);
  const Matd z = random_mat(4, 4, rng);
  check_grad({z}, [mask](auto& t, auto& v) {
    return masked_softmax_rows(v[0], mask);
  });
}

TEST_CASE("loss heads") {
  Rng rng(6);
  const Matd logits = random_mat(6, 8, rng);
  const std::vector<int> targets = {0, 3, 7, 2, 2, 5};

  check_grad({logits}, [targets](auto& t, auto& v) {
    return cross_entropy_mean(v[0], targets);
  });
  check_grad({logits}, [targets](auto& t, auto& v) {
    return logprob_sum(v[0], targets);
  });

  SUBCASE("cross entropy of uniform logits is ln(vocab)") {
    Tape<double> tape(false);
    Val<double> l = tape.leaf(Matd::Zero(10, 8));
    Val<double> ce =
        cross_entropy_mean(l, std::vector<int>(10, 3));
    CHECK(tape.scalar(ce.id) ==
          doctest::Approx(std::log(8.0)).epsilon(1e-12));
  }
}

TEST_CASE("pairwise squared distances") {
  Rng rng(7);
  const Matd z = random_mat(5, 2, rng);
  check_grad({z}, [](auto& t, auto& v) { return pairwise_sqdist(v[0]); });

  SUBCASE("values match the direct formula") {
    Tape<double> tape(false);
    Val<double> d = pairwise_sqdist(tape.leaf(z));
    for (Index i = 0; i < 5; ++i)
      for (Index j = 0; j < 5; ++j)
        CHECK(d.v()(i, j) ==
              doctest::Approx((z.row(i) - z.row(j)).squaredNorm())
                  .epsilon(1e-12));
  }
}

TEST_CASE("constants receive no gradient") {
  Tape<double> tape(true);
  Val<double> c = tape.constant(Matd::Ones(2, 2));
  Val<double> x = tape.leaf(Matd::Ones(2, 2));
  Val<double> y = sum_all(hadamard(c, x));
  tape.backward(y);
  CHECK_FALSE(tape.has_grad(c.id));
  CHECK(tape.has_grad(x.id));
}
