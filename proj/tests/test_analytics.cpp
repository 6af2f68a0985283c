#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flipkljn/analytics.hpp"
#include "flipkljn/rng.hpp"

using namespace flipkljn;

namespace {

// Independent oracle for the Gaussian tail: adaptive Simpson quadrature of
// the standard normal density on [0, x], Q(x) = 0.5 - integral.
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

double simpson(double a, double b) {
  const double c = 0.5 * (a + b);
  return (b - a) / 6.0 * (normal_pdf(a) + 4.0 * normal_pdf(c) + normal_pdf(b));
}

double adaptive_simpson(double a, double b, double whole, double tol, int depth) {
  const double c = 0.5 * (a + b);
  const double left = simpson(a, c), right = simpson(c, b);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson(a, c, left, tol / 2, depth - 1) +
         adaptive_simpson(c, b, right, tol / 2, depth - 1);
}

double q_oracle(double x) {
  if (x < 0) return 1.0 - q_oracle(-x);
  const double integral = adaptive_simpson(0.0, x, simpson(0.0, x), 1e-15, 48);
  return 0.5 - integral;
}

AnalyticInputs reference_inputs() { return {10.0, 1.4, 4.0, 100}; }

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Random valid inputs with alpha in [2, 50], N in [10, 1000].
AnalyticInputs random_inputs(Xoshiro256pp& rng) {
  AnalyticInputs in;
  in.alpha = 2.0 + 48.0 * rng.uniform01();
  const double m = in.intermediate();
  in.beta = 1.0 + (m - 1.0) * (0.05 + 0.9 * rng.uniform01());
  in.kappa = m + (in.alpha - m) * (0.05 + 0.9 * rng.uniform01());
  in.samples = 10 + static_cast<int>(990 * rng.uniform01());
  return in;
}

}  // namespace

TEST_CASE("Gaussian tail function against quadrature oracle") {
  CHECK(q_function(0.0) == 0.5);
  for (double x : {-8.0, -3.2, -1.0, -0.1, 0.3, 1.0, 2.0, 2.8284271247461903, 5.5, 8.0}) {
    CHECK(std::abs(q_function(x) - q_oracle(x)) < 1e-12);
    CHECK(q_function(x) + q_function(-x) == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(rel(q_function(2.8284271247461903), 2.339e-3) < 1e-4);
}

TEST_CASE("transition tail probabilities match the normalized formulas") {
  const auto in = reference_inputs();
  const auto p = p_values(in);
  const double m = in.intermediate();
  const double s = std::sqrt(2.0 / in.samples);
  CHECK(p[0] == q_function((in.beta - 1.0) / s));
  CHECK(p[1] == q_function((in.kappa - m) / (m * s)));
  CHECK(p[4] == q_function((m - in.beta) / (m * s)));
  CHECK(p[5] == q_function((in.alpha - in.kappa) / (in.alpha * s)));
  CHECK(rel(p[0], 2.3388674905236e-3) < 1e-9);

  // Pair identities are exact by construction.
  CHECK(p[0] == p[3]);
  CHECK(p[1] == p[2]);
  CHECK(p[4] == p[7]);
  CHECK(p[5] == p[6]);
}

TEST_CASE("boundary behavior of the tail formulas") {
  AnalyticInputs in = reference_inputs();
  in.beta = 1.0 + 1e-12;
  CHECK(std::abs(p_values(in)[0] - 0.5) < 1e-6);

  AnalyticInputs boundary = reference_inputs();
  boundary.kappa = boundary.intermediate(); // rejected by the precondition
  CHECK_THROWS_AS(p_values(boundary), std::domain_error);
  CHECK(p_values_unchecked(boundary)[1] == 0.5);
}

TEST_CASE("threshold ordering is enforced") {
  CHECK_THROWS_AS(p_values({10.0, 0.9, 4.0, 100}), std::domain_error);
  CHECK_THROWS_AS(p_values({10.0, 2.0, 4.0, 100}), std::domain_error); // beta > m
  CHECK_THROWS_AS(p_values({10.0, 1.4, 11.0, 100}), std::domain_error);
  CHECK_THROWS_AS(p_values({0.5, 1.4, 4.0, 100}), std::domain_error);
  CHECK_THROWS_AS(p_values({10.0, 1.4, 4.0, 0}), std::domain_error);
}

TEST_CASE("mismatch probability identities") {
  Xoshiro256pp rng(123);
  for (int i = 0; i < 100; ++i) {
    const auto in = random_inputs(rng);
    const auto p = p_values(in);
    const double pmm = mismatch_probability(in);
    const double pbm = match_bep(in);
    const double sum8 = 0.25 * (p[0] + p[1] + p[2] + p[3] + p[4] + p[5] + p[6] + p[7]);
    CHECK(rel(sum8, pmm) < 1e-12);
    CHECK(rel(pmm, 2.0 * pbm) < 1e-12);

    const double via_mix = pmm * 1.0 + (1.0 - pmm) * pbm;
    const double via_poly = 3.0 * pbm - 2.0 * pbm * pbm;
    CHECK(std::abs(via_mix - via_poly) <= 1e-12 * std::max(via_mix, 1e-300));
    CHECK(total_bep(in) == doctest::Approx(via_poly).epsilon(1e-12));
    CHECK(pbm >= 0.0);
    CHECK(pbm <= 0.5); // four tails each at most 0.5, times 0.25
    CHECK(via_poly <= 1.0);
  }
}

TEST_CASE("total BEP algebra") {
  CHECK(propagate_total_bep(0.0) == 0.0);
  CHECK(propagate_total_bep(0.5) == 1.0);
  // Small error probabilities: linear approximation within 2*p relative.
  const auto in = AnalyticInputs{10.0, 1.35, 3.3, 400};
  const double pbm = match_bep(in);
  const double pb = total_bep(in);
  CHECK(pbm < 1e-3);
  CHECK(std::abs(pb - 3.0 * pbm) <= 2.0 * pbm * pbm * (1.0 + 1e-9));
}

TEST_CASE("every tail is non-increasing in the sample count") {
  const double alpha = 10.0, beta = 1.4, kappa = 4.0;
  double prev_pb = 1.0;
  std::array<double, 8> prev{};
  prev.fill(1.0);
  for (int n : {10, 20, 50, 100, 200, 500, 1000}) {
    const AnalyticInputs in{alpha, beta, kappa, n};
    const auto p = p_values(in);
    for (int i = 0; i < 8; ++i) {
      CHECK(p[i] <= prev[i]);
    }
    const double pb = total_bep(in);
    CHECK(pb <= prev_pb);
    prev = p;
    prev_pb = pb;
  }
}

TEST_CASE("exact estimator tail: closed forms and limits") {
  CHECK(exact_tail_probability(0.0, 1.0, 7) == doctest::Approx(1.0));
  // Two samples: the scaled estimator tail is exp(-gamma/sigma2).
  CHECK(std::abs(exact_tail_probability(1.0, 1.0, 2) - std::exp(-1.0)) < 1e-10);
  for (double g : {0.3, 0.9, 1.7, 2.5}) {
    CHECK(std::abs(exact_tail_probability(g, 1.0, 2) - std::exp(-g)) < 1e-10);
    // Four samples: (1 + x/2) exp(-x/2) with x = 4g.
    const double x = 4.0 * g;
    CHECK(std::abs(exact_tail_probability(g, 1.0, 4) -
                   (1.0 + 0.5 * x) * std::exp(-0.5 * x)) < 1e-10);
  }
  CHECK_THROWS_AS(exact_tail_probability(-1.0, 1.0, 2), std::domain_error);
  CHECK_THROWS_AS(exact_tail_probability(1.0, 0.0, 2), std::domain_error);
  CHECK_THROWS_AS(exact_tail_probability(1.0, 1.0, 0), std::domain_error);
}

TEST_CASE("CLT approximation against the exact law at N=200") {
  // Near the bulk (one spread above the mean) the approximation is tight.
  {
    const double clt = q_function((1.1 - 1.0) / std::sqrt(2.0 / 200.0));
    const double exact = exact_tail_probability(1.1, 1.0, 200);
    CHECK(rel(exact, clt) < 0.10);
  }
  // Four spreads out the skewness dominates: the exact upper tail is about
  // five times heavier. Recorded here as the measured gap.
  {
    const double clt = q_function((1.4 - 1.0) / std::sqrt(2.0 / 200.0));
    const double exact = exact_tail_probability(1.4, 1.0, 200);
    CHECK(exact > clt);
    CHECK(exact / clt == doctest::Approx(5.085).epsilon(0.01));
  }
}

TEST_CASE("single-channel bracket reproduces the normalized chain") {
  const auto in = reference_inputs();
  const LevelTriple levels{1.0, in.intermediate(), in.alpha};
  const auto p = p_values(in);
  const double bracket = single_channel_error_bracket(levels, in.beta, in.kappa,
                                                      in.samples, TailLaw::CltGaussian);
  CHECK(bracket == doctest::Approx(p[0] + p[1] + p[4] + p[5]).epsilon(1e-14));
  CHECK(propagate_total_bep(0.25 * bracket) == doctest::Approx(total_bep(in)).epsilon(1e-14));
}

TEST_CASE("joint and selective matched-error objectives") {
  const LevelTriple v{1.0, 20.0 / 11.0, 10.0};
  const LevelTriple i = v;
  const int n = 50;
  const double beta = 1.35, kappa = 3.4;
  const double joint =
      jvcd_matched_error(v, beta, kappa, i, beta, kappa, n, TailLaw::ChiSquare);
  const double single =
      0.25 * single_channel_error_bracket(v, beta, kappa, n, TailLaw::ChiSquare);
  CHECK(joint > 0.0);
  CHECK(joint < single); // coincidence of two independent channel errors
  const double sel = selective_matched_error(v, kappa, i, kappa, n, TailLaw::ChiSquare);
  const double far_pairs = 0.25 * (estimator_tail_below(kappa, i.high, n, TailLaw::ChiSquare) +
                                   estimator_tail_above(kappa, i.mid, n, TailLaw::ChiSquare) +
                                   estimator_tail_above(kappa, v.mid, n, TailLaw::ChiSquare) +
                                   estimator_tail_below(kappa, v.high, n, TailLaw::ChiSquare));
  CHECK(sel == doctest::Approx(far_pairs).epsilon(1e-14));
  CHECK(sel < single);
}
