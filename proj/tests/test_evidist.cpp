#include <doctest.h>

#include <cmath>
#include <numbers>

#include "casd/error.hpp"
#include "casd/evidist.hpp"

using namespace casd;

namespace {

NIGParams nig(Tensor gamma, Tensor beta, double delta, double alpha) {
  return {std::move(gamma), std::move(beta), delta, alpha};
}

struct Moments {
  double mean, var;
};

Moments moments(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return {m, v / static_cast<double>(xs.size() - 1)};
}

// Student-t density written out from the Gamma-function definition, evaluated
// in long double.
long double t_density(long double x, long double u, long double o, long double v) {
  const long double pi = 3.141592653589793238462643383279502884L;
  long double z = (x - u) * (x - u) / (v * o);
  return std::tgamma((v + 1) / 2) / (std::tgamma(v / 2) * std::sqrt(v * pi * o)) * std::pow(1 + z, -(v + 1) / 2);
}

}  // namespace

TEST_CASE("nig_to_student substitution examples") {
  StudentT a = nig_to_student(nig(Tensor::scalar(0), Tensor::scalar(1), 1.0, 2.0));
  CHECK(a.u.item() == 0.0);
  CHECK(a.o.item() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(a.v == 4.0);

  StudentT b = nig_to_student(nig(Tensor::vector({2, 3}), Tensor::vector({1, 4}), 0.5, 2.5));
  CHECK(b.u == Tensor::vector({2, 3}));
  CHECK(std::abs(b.o[0] - 1.2) <= 1e-12);
  CHECK(std::abs(b.o[1] - 4.8) <= 1e-12);
  CHECK(b.v == 5.0);

  // Large δ: o → β/α.
  StudentT c = nig_to_student(nig(Tensor::scalar(0), Tensor::scalar(3), 1e9, 1.5));
  CHECK(std::abs(c.o.item() - 2.0) <= 1e-8);
}

TEST_CASE("aleatoric and epistemic uncertainty") {
  CHECK(aleatoric(nig(Tensor::scalar(0), Tensor::scalar(1), 1.0, 2.0)).item() == 1.0);
  CHECK(aleatoric(nig(Tensor::scalar(0), Tensor::scalar(3), 1.0, 4.0)).item() == 1.0);
  CHECK(epistemic(nig(Tensor::scalar(0), Tensor::scalar(1), 1.0, 2.0)).item() == 1.0);
  NIGParams p = nig(Tensor::vector({0, 0}), Tensor::vector({0.7, 2.0}), 3.0, 1.8);
  Tensor au = aleatoric(p), eu = epistemic(p);
  for (std::size_t i = 0; i < 2; ++i) CHECK(eu[i] == doctest::Approx(au[i] / 3.0).epsilon(1e-15));
  // Linear in β.
  NIGParams doubled = p;
  doubled.beta *= 2.0;
  CHECK(aleatoric(doubled)[1] == doctest::Approx(2.0 * au[1]).epsilon(1e-15));
  // δ → ∞ leaves AU and drives EU to 0.
  NIGParams sharp = p;
  sharp.delta = 1e12;
  CHECK(aleatoric(sharp) == au);
  CHECK(epistemic(sharp)[1] < 1e-11);
}

TEST_CASE("outputs are monotone in beta and v stays above 2") {
  Rng rng = make_rng(3);
  std::uniform_real_distribution<double> pos(0.01, 5.0), a(1.0001, 6.0);
  for (int i = 0; i < 500; ++i) {
    double beta = pos(rng), delta = pos(rng), alpha = a(rng);
    NIGParams lo = nig(Tensor::scalar(0), Tensor::scalar(beta), delta, alpha);
    NIGParams hi = nig(Tensor::scalar(0), Tensor::scalar(beta * 1.1), delta, alpha);
    StudentT s = nig_to_student(lo);
    CHECK(s.v > 2.0);
    CHECK(nig_to_student(hi).o.item() > s.o.item());
    CHECK(aleatoric(hi).item() > aleatoric(lo).item());
    CHECK(epistemic(hi).item() > epistemic(lo).item());
  }
}

TEST_CASE("invalid NIG parameters are domain errors") {
  CHECK_THROWS_AS(nig_to_student(nig(Tensor::scalar(0), Tensor::scalar(1), 1.0, 1.0)), Error);
  CHECK_THROWS_AS(nig_to_student(nig(Tensor::scalar(0), Tensor::scalar(-1), 1.0, 2.0)), Error);
  CHECK_THROWS_AS(nig_to_student(nig(Tensor::scalar(0), Tensor::scalar(1), 0.0, 2.0)), Error);
  try {
    aleatoric(nig(Tensor::scalar(0), Tensor::scalar(1), 1.0, 0.5));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDomain);
  }
}

TEST_CASE("standard t sampler moments") {
  Rng rng = make_rng(42);
  std::vector<double> xs(1000000);
  for (double& x : xs) x = sample_standard_t(10.0, rng);
  Moments m = moments(xs);
  CHECK(std::abs(m.mean) < 0.05);
  CHECK(std::abs(m.var - 1.25) / 1.25 < 0.05);

  for (double& x : xs) x = sample_standard_t(1e7, rng);
  CHECK(std::abs(moments(xs).var - 1.0) < 0.02);

  CHECK_THROWS_AS(sample_standard_t(0.0, rng), Error);
  Tensor t = sample_standard_t({3, 2}, 5.0, rng);
  CHECK(t.shape() == Shape{3, 2});
}

TEST_CASE("student log-density") {
  StudentT cauchy{Tensor::scalar(0), Tensor::scalar(1), 1.0};
  CHECK(std::abs(student_logpdf(cauchy, Tensor::scalar(0)).item() - std::log(1.0 / std::numbers::pi)) <= 1e-14);

  StudentT d{Tensor::vector({0.4, 0.4}), Tensor::vector({2.0, 2.0}), 5.0};
  Tensor sym = student_logpdf(d, Tensor::vector({0.4 + 1.7, 0.4 - 1.7}));
  CHECK(std::abs(sym[0] - sym[1]) <= 1e-14);

  StudentT e{Tensor::scalar(0), Tensor::scalar(2), 5.0};
  double ref = static_cast<double>(std::log(t_density(1.3L, 0.0L, 2.0L, 5.0L)));
  CHECK(std::abs(student_logpdf(e, Tensor::scalar(1.3)).item() - ref) <= 1e-10);
}
