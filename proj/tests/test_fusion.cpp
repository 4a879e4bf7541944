#include <doctest.h>

#include <cmath>
#include <random>

#include "casd/error.hpp"
#include "casd/fusion.hpp"
#include "casd/ops.hpp"

using namespace casd;

namespace {

StudentT dist(Tensor u, Tensor o, double v) { return {std::move(u), std::move(o), v}; }

StudentT constant_dist(double u, double o, double v, Shape shape = {2, 3}) {
  return dist(Tensor::full(shape, u), Tensor::full(shape, o), v);
}

}  // namespace

TEST_CASE("confidence weight examples") {
  ConfidenceWeights eq = confidence_weights(5, 5, 5);
  CHECK(eq.c1 == 0.5);
  CHECK(eq.c2 == 0.5);
  CHECK(eq.c3 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  ConfidenceWeights w = confidence_weights(4, 6, 8);
  CHECK(std::abs(w.c1 - 0.4) <= 1e-15);
  CHECK(std::abs(w.c2 - 0.6) <= 1e-15);
  CHECK(std::abs(w.c3 - 8.0 / 18.0) <= 1e-15);
  ConfidenceWeights n = confidence_weights(4, 6, 8, true);
  CHECK(std::abs(n.c1 + n.c2 + n.c3 - 1.0) <= 1e-15);
  CHECK_THROWS_AS(confidence_weights(0, 1, 1), Error);
}

TEST_CASE("confidence weight properties over random dofs") {
  Rng rng = make_rng(7);
  std::uniform_real_distribution<double> dof(1e-3, 1e3);
  for (int i = 0; i < 10000; ++i) {
    double v1 = dof(rng), v2 = dof(rng), v3 = dof(rng);
    ConfidenceWeights w = confidence_weights(v1, v2, v3);
    CHECK(std::abs(w.c1 + w.c2 - 1.0) <= 1e-15);
    CHECK((w.c1 > 0 && w.c1 < 1 && w.c2 > 0 && w.c2 < 1 && w.c3 > 0 && w.c3 < 1));
    if (v1 > v2) CHECK(w.c1 > w.c2);
  }
}

TEST_CASE("fusion of identical inputs") {
  StudentT d = dist(Tensor::matrix({{1, -2}, {0.5, 3}}), Tensor::matrix({{1, 2}, {3, 4}}), 6.0);
  FusedStudentT f = fuse(d, d, d);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(f.u_F[i] - d.u[i] * 4.0 / 3.0) <= 1e-14);
    CHECK(std::abs(f.sigma_F[i] - d.o[i]) <= 1e-14);
  }
  CHECK(f.v_F == 6.0);
}

TEST_CASE("zero locations fuse to zero") {
  FusedStudentT f = fuse(constant_dist(0, 1, 4), constant_dist(0, 2, 7), constant_dist(0, 3, 9));
  for (double x : f.u_F.data()) CHECK(x == 0.0);
}

TEST_CASE("scale and uncertainty on v = (4, 6, 8), unit scales") {
  FusedStudentT f = fuse(constant_dist(0, 1, 4), constant_dist(0, 1, 6), constant_dist(0, 1, 8));
  // (1/3)(1 + 6·2/(4·4) + 8·2/(4·6)) written out with rationals: (1/3)(1 + 3/4 + 2/3) = 29/36.
  const double sigma = 29.0 / 36.0;
  const double U = sigma * 4.0 / 1.0;
  CHECK(f.v_F == 4.0);
  for (double x : f.sigma_F.data()) CHECK(std::abs(x - sigma) <= 1e-9);
  for (double x : f.U_F.data()) CHECK(std::abs(x - U) <= 1e-8);
  CHECK(std::abs(f.sigma_F[0] - 0.805556) <= 1e-6);
  CHECK(std::abs(f.U_F[0] - 3.22222) <= 1e-5);
}

TEST_CASE("uncertainty score limits") {
  FusedStudentT f;
  f.sigma_F = Tensor::full({2}, 0.7);
  f.v_F = 1e12;
  CHECK(std::abs(uncertainty_score(f)[0] - 0.7) <= 1e-9);
  f.v_F = 3.0005;
  Tensor u = uncertainty_score(f);
  CHECK(u.all_finite());
  CHECK(std::abs(u[0] - 0.7 * 3.0005 / kUncertaintyDofFloor) <= 1e-9);
}

TEST_CASE("fused dof is the minimum and location is linear in each input") {
  Rng rng = make_rng(8);
  std::uniform_real_distribution<double> dof(2.5, 30), val(-2, 2), pos(0.1, 3);
  for (int trial = 0; trial < 200; ++trial) {
    StudentT d[3];
    for (auto& di : d) {
      di = dist(Tensor({3}), Tensor({3}), dof(rng));
      for (double& x : di.u.data()) x = val(rng);
      for (double& x : di.o.data()) x = pos(rng);
    }
    FusedStudentT f = fuse(d[0], d[1], d[2]);
    CHECK(f.v_F == std::min({d[0].v, d[1].v, d[2].v}));
    ConfidenceWeights w = confidence_weights(d[0].v, d[1].v, d[2].v);
    for (std::size_t i = 0; i < 3; ++i) {
      double expect = w.c1 * d[0].u[i] + w.c2 * d[1].u[i] + w.c3 * d[2].u[i];
      CHECK(std::abs(f.u_F[i] - expect) <= 1e-12);
    }
    // Scaling every Σ_i by λ scales Σ_F and U_F by λ.
    const double lambda = 2.75;
    StudentT s[3] = {d[0], d[1], d[2]};
    for (auto& si : s) si.o *= lambda;
    FusedStudentT g = fuse(s[0], s[1], s[2]);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(std::abs(g.sigma_F[i] - lambda * f.sigma_F[i]) <= 1e-12 * g.sigma_F[i]);
      CHECK(std::abs(g.U_F[i] - lambda * f.U_F[i]) <= 1e-12 * g.U_F[i]);
    }
  }
}

TEST_CASE("mean fusion and normalized weights") {
  StudentT a = constant_dist(3, 1, 5), b = constant_dist(6, 1, 9), c = constant_dist(0, 1, 4);
  FusedStudentT m = fuse(a, b, c, {FusionMode::kMean, false});
  for (double x : m.u_F.data()) CHECK(std::abs(x - 3.0) <= 1e-15);
  FusedStudentT n = fuse(a, b, c, {FusionMode::kConfidence, true});
  CHECK(std::abs(n.weights.c1 + n.weights.c2 + n.weights.c3 - 1.0) <= 1e-15);
}

TEST_CASE("fusion input contract") {
  StudentT ok = constant_dist(0, 1, 5);
  CHECK_THROWS_AS(fuse(ok, ok, constant_dist(0, 1, 5, {3, 2})), Error);
  try {
    fuse(ok, constant_dist(0, 1, 2.0), ok);
    FAIL("expected domain error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDomain);
  }
}

TEST_CASE("representation sampling") {
  FusedStudentT f = fuse(constant_dist(1, 1, 5), constant_dist(2, 1, 6), constant_dist(3, 1, 7));
  CHECK(rrm_sample(f, nullptr, RepresentationMode::kInfer) == f.u_F);
  CHECK(rrm_sample(f, nullptr, RepresentationMode::kInfer) == rrm_sample(f, nullptr, RepresentationMode::kInfer));

  Rng rng = make_rng(9);
  FusedStudentT zero = f;
  zero.sigma_F = Tensor::zeros(f.sigma_F.shape());
  CHECK(rrm_sample(zero, &rng, RepresentationMode::kTrain) == f.u_F);

  FusedStudentT one;
  one.u_F = Tensor::scalar(2.0);
  one.sigma_F = Tensor::scalar(4.0);
  one.v_F = 10.0;
  double mean = 0.0, sq = 0.0;
  const int n = 100000;
  std::vector<double> xs(n);
  for (double& x : xs) x = rrm_sample(one, &rng, RepresentationMode::kTrain).item();
  for (double x : xs) mean += x / n;
  for (double x : xs) sq += (x - mean) * (x - mean) / (n - 1);
  CHECK(std::abs(mean - 2.0) <= 0.05);
  CHECK(std::abs(sq - 5.0) / 5.0 <= 0.05);
}

TEST_CASE("gradients through the reparameterized sample") {
  Parameter u{"u", Tensor::vector({0.3, -1.0, 2.0})};
  Parameter sigma{"sigma", Tensor::vector({0.5, 1.5, 4.0})};
  Tensor t = Tensor::vector({0.7, -1.2, 0.1});
  Tensor w = Tensor::vector({1.0, -2.0, 0.5});  // ∂L/∂s for L = Σ w·s
  Tape tape;
  FusedNode f;
  f.u = tape.parameter(u);
  f.sigma = tape.parameter(sigma);
  f.v = tape.constant(Tensor::scalar(6.0));
  NoiseSource replay = NoiseSource::replay({t});
  Var s = rrm_sample(f, &replay, RepresentationMode::kTrain);
  Gradients g = tape.backward(sum(s * tape.constant(w)));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(g.of(u)[i] == w[i]);
    CHECK(std::abs(g.of(sigma)[i] - t[i] / (2.0 * std::sqrt(sigma.value[i])) * w[i]) <= 1e-14);
  }
}

TEST_CASE("noise sources") {
  Rng rng = make_rng(10);
  NoiseSource live(rng);
  Tensor a = live.draw({2}, 5.0);
  Tensor b = live.draw({3}, 5.0);
  REQUIRE(live.recorded().size() == 2);
  NoiseSource replay = NoiseSource::replay(live.recorded());
  CHECK(replay.draw({2}, 100.0) == a);
  CHECK(replay.draw({3}, 100.0) == b);
  CHECK_THROWS_AS(replay.draw({3}, 5.0), Error);
  CHECK_THROWS_AS(NoiseSource::replay({a}).draw({4}, 5.0), Error);
}
