#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "diffstr/rng.hpp"
#include "diffstr/tape.hpp"

using namespace diffstr;

namespace {

MatD random_mat(Rng& rng, int r, int c, double scale = 1.0) {
  MatD m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(-scale, scale);
  return m;
}

/// Central finite differences of `f` (a scalar function of the inputs)
/// against the tape gradient of each input.
void check_grads(const std::vector<MatD>& inputs,
                 const std::function<Var<double>(Tape<double>&, std::vector<Var<double>>&)>& build,
                 double tol = 1e-7) {
  Tape<double> tape;
  std::vector<Var<double>> vars;
  for (const auto& m : inputs) vars.push_back(tape.input(m, true));
  Var<double> loss = build(tape, vars);
  REQUIRE(loss.val().size() == 1);
  tape.backward(loss);

  const double h = 1e-6;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      auto eval_at = [&](double delta) {
        Tape<double> t2;
        std::vector<Var<double>> vs;
        for (std::size_t m = 0; m < inputs.size(); ++m) {
          MatD mm = inputs[m];
          if (m == k) mm.data()[i] += delta;
          vs.push_back(t2.input(mm, false));
        }
        return static_cast<double>(build(t2, vs).scalar());
      };
      const double fd = (eval_at(h) - eval_at(-h)) / (2 * h);
      const double an = vars[k].grad().data()[i];
      CHECK(std::abs(fd - an) <= tol * std::max({std::abs(fd), std::abs(an), 1.0}));
    }
  }
}

/// Sums all entries into a scalar so any op can head a gradient check.
Var<double> sum_all(Var<double> v) {
  Tape<double>& t = *v.tape;
  Var<double> ones = t.input(MatD::Ones(v.cols(), 1), false);
  Var<double> col = matmul(v, ones);  // rows x 1
  Var<double> ones2 = t.input(MatD::Ones(1, v.rows()), false);
  return matmul(ones2, col);
}

}  // namespace

TEST_CASE("matmul / add / scale / add_rowvec gradients") {
  Rng rng(1);
  check_grads({random_mat(rng, 3, 4), random_mat(rng, 4, 2)},
              [](Tape<double>&, std::vector<Var<double>>& v) {
                return sum_all(matmul(v[0], v[1]));
              });
  check_grads({random_mat(rng, 3, 4), random_mat(rng, 3, 4)},
              [](Tape<double>&, std::vector<Var<double>>& v) {
                return sum_all(scale(v[0] + v[1], 1.7));
              });
  check_grads({random_mat(rng, 5, 3), random_mat(rng, 1, 3)},
              [](Tape<double>&, std::vector<Var<double>>& v) {
                return sum_all(add_rowvec(v[0], v[1]));
              });
}

TEST_CASE("add_per_sample_row gradient") {
  Rng rng(2);
  check_grads({random_mat(rng, 6, 3), random_mat(rng, 2, 3)},
              [](Tape<double>&, std::vector<Var<double>>& v) {
                Var<double> sq = activation(add_per_sample_row(v[0], v[1], 3),
                                            Activation::Silu);
                return sum_all(sq);
              });
}

TEST_CASE("activation gradients (gelu, silu)") {
  Rng rng(3);
  for (Activation a : {Activation::Gelu, Activation::Silu}) {
    check_grads({random_mat(rng, 4, 5, 2.0)},
                [a](Tape<double>&, std::vector<Var<double>>& v) {
                  return sum_all(activation(v[0], a));
                });
  }
}

TEST_CASE("layer_norm gradient and forward semantics") {
  Rng rng(4);
  check_grads({random_mat(rng, 4, 6), random_mat(rng, 1, 6), random_mat(rng, 1, 6)},
              [](Tape<double>&, std::vector<Var<double>>& v) {
                Var<double> y = layer_norm(v[0], v[1], v[2]);
                return sum_all(activation(y, Activation::Gelu));
              },
              1e-6);

  Tape<double> tape;
  MatD x = random_mat(rng, 3, 8);
  Var<double> y = layer_norm(tape.input(x), tape.input(MatD::Ones(1, 8)),
                             tape.input(MatD::Zero(1, 8)));
  for (int i = 0; i < 3; ++i) {
    CHECK(y.val().row(i).mean() == doctest::Approx(0.0).epsilon(1e-9));
    const double var = y.val().row(i).array().square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("embedding gradient with repeated ids") {
  Rng rng(5);
  std::vector<int> ids = {0, 2, 2, 1, 0};
  check_grads({random_mat(rng, 3, 4)},
              [ids](Tape<double>&, std::vector<Var<double>>& v) {
                return sum_all(activation(embedding(v[0], ids), Activation::Silu));
              });
}

TEST_CASE("multihead attention gradients, self and cross shapes") {
  Rng rng(6);
  // self: batch 2, heads 2, Lq = Lk = 3, d = 4
  check_grads({random_mat(rng, 6, 4), random_mat(rng, 6, 4), random_mat(rng, 6, 4)},
              [](Tape<double>&, std::vector<Var<double>>& v) {
                return sum_all(activation(
                    multihead_attention(v[0], v[1], v[2], 2, 2, 3, 3),
                    Activation::Gelu));
              },
              1e-6);
  // cross: Lq = 2, Lk = 5
  check_grads({random_mat(rng, 4, 4), random_mat(rng, 10, 4), random_mat(rng, 10, 4)},
              [](Tape<double>&, std::vector<Var<double>>& v) {
                return sum_all(activation(
                    multihead_attention(v[0], v[1], v[2], 2, 2, 2, 5),
                    Activation::Gelu));
              },
              1e-6);
}

TEST_CASE("softmax cross-entropy: value and gradient") {
  Rng rng(7);
  std::vector<int> targets = {1, 0, 3};

  Tape<double> tape;
  Var<double> uniform = tape.input(MatD::Zero(3, 97), false);
  CHECK(softmax_ce_mean(uniform, {5, 10, 96}).scalar() ==
        doctest::Approx(std::log(97.0)).epsilon(1e-12));

  check_grads({random_mat(rng, 3, 4, 2.0)},
              [targets](Tape<double>&, std::vector<Var<double>>& v) {
                return softmax_ce_mean(v[0], targets);
              });
}

TEST_CASE("binary cross-entropy: value and gradient") {
  std::vector<std::uint8_t> targets = {1, 0, 1, 1};
  Tape<double> tape;
  Var<double> zeros = tape.input(MatD::Zero(4, 1), false);
  CHECK(bce_logits_mean(zeros, targets).scalar() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Rng rng(8);
  check_grads({random_mat(rng, 4, 1, 3.0)},
              [targets](Tape<double>&, std::vector<Var<double>>& v) {
                return bce_logits_mean(v[0], targets);
              });

  // saturated logits matching the targets drive the loss to ~0
  MatD sat(4, 1);
  sat << 40, -40, 40, 40;
  Tape<double> t2;
  CHECK(bce_logits_mean(t2.input(sat), targets).scalar() ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("MSE(softmax, one-hot): value and gradient") {
  std::vector<int> targets = {2, 0};
  Rng rng(9);
  check_grads({random_mat(rng, 2, 5, 2.0)},
              [targets](Tape<double>&, std::vector<Var<double>>& v) {
                return mse_softmax_onehot_mean(v[0], targets);
              });

  // a huge correct margin drives the MSE to ~0
  MatD sharp = MatD::Constant(2, 5, -100.0);
  sharp(0, 2) = 100.0;
  sharp(1, 0) = 100.0;
  Tape<double> tape;
  CHECK(mse_softmax_onehot_mean(tape.input(sharp), targets).scalar() ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("dropout: zero rate is identity; masked entries gate gradients") {
  Rng rng(10);
  Tape<double> tape;
  MatD x = random_mat(rng, 4, 4);
  Var<double> v = tape.input(x, true);
  Rng drop_rng(3);
  Var<double> same = dropout(v, 0.0, drop_rng);
  CHECK(same.idx == v.idx);

  Var<double> dropped = dropout(v, 0.5, drop_rng);
  Var<double> loss = sum_all(dropped);
  tape.backward(loss);
  int zeros = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double g = v.grad().data()[i];
    if (g == 0.0) {
      ++zeros;
      CHECK(dropped.val().data()[i] == 0.0);
    } else {
      CHECK(g == doctest::Approx(2.0));  // 1/(1-p)
    }
  }
  CHECK(zeros > 0);
  CHECK(zeros < x.size());
}

TEST_CASE("param links accumulate into the store") {
  ParamStore<double> store;
  const int pid = store.add("w", 2, 2, true);
  store.value(pid) << 1, 2, 3, 4;
  Tape<double> tape;
  Var<double> w = tape.param(store, pid);
  Var<double> loss = sum_all(activation(w, Activation::Silu));
  tape.backward(loss);
  store.zero_grads();
  tape.accumulate_param_grads(store);
  CHECK(store.entry(pid).grad.cwiseAbs().minCoeff() > 0.0);
  CHECK(store.parameter_count() == 4);
}
