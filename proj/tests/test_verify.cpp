#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <vlasov/verify.hpp>

using namespace vlasov;

namespace {

RunConfig fixed_run(int d, std::size_t n, double dt, double t_end, int every = 1) {
  RunConfig cfg;
  cfg.dimension = d;
  cfg.seed = 5;
  cfg.sampler.count = n;
  cfg.schedule = TimeSchedule{dt, 1.0, 1.0, 0.0, t_end, CadenceMode::every, every, 10.0};
  return cfg;
}

// Q = sum w |x - (t+alpha) v|^2 + (t+alpha)^2 PE, with PE and the softening
// sum accumulated pair by pair in long double.
struct NaiveVirial {
  long double q = 0, rhs = 0;
};

NaiveVirial naive_virial(const Ensemble& e, double eps) {
  const int d = e.dim();
  const long double omega = std::pow(std::numbers::pi_v<long double>, d / 2.0L) / std::tgamma(d / 2.0L + 1.0L);
  const long double s = e.shifted_time();
  long double m2 = 0, pe = 0, soft = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    long double r2 = 0;
    for (int a = 0; a < d; ++a) {
      const long double z = e.position(i)[a] - s * e.velocity(i)[a];
      r2 += z * z;
    }
    m2 += e.weight(i) * r2;
    for (std::size_t j = i + 1; j < e.size(); ++j) {
      long double dij = (long double)eps * eps;
      for (int a = 0; a < d; ++a) {
        const long double dx = e.position(i)[a] - e.position(j)[a];
        dij += dx * dx;
      }
      const long double ww = (long double)e.weight(i) * e.weight(j);
      pe += 2 * ww * std::pow(dij, (2.0L - d) / 2) / (d * (d - 2) * omega);
      soft += ww * eps * eps * std::pow(dij, -d / 2.0L) / (d * omega);
    }
  }
  return {m2 + s * s * pe, (4 - d) * s * pe + 2 * s * soft};
}

}  // namespace

TEST(Virial, MatchesNaiveOracle) {
  // Central differences of an independently evaluated Q against the
  // predicted derivative, on a short fixed-dt trajectory.
  const auto r = run(fixed_run(4, 48, 2e-3, 0.2));
  const auto rep = check_virial_identity(r, 1e-3);
  ASSERT_EQ(rep.q.size(), r.snapshots.size());
  double worst = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
    const auto nv = naive_virial(r.snapshots[k], r.softening);
    EXPECT_NEAR(rep.q[k], (double)nv.q, 1e-11 * (double)nv.q);
    EXPECT_NEAR(rep.rhs[k], (double)nv.rhs, 1e-10 * std::fabs((double)nv.rhs) + 1e-14);
    scale = std::max(scale, std::fabs((double)nv.rhs));
  }
  for (std::size_t k = 1; k + 1 < r.snapshots.size(); ++k) {
    const auto lo = naive_virial(r.snapshots[k - 1], r.softening), hi = naive_virial(r.snapshots[k + 1], r.softening);
    const double dq = (double)((hi.q - lo.q) / (r.snapshots[k + 1].time() - r.snapshots[k - 1].time()));
    worst = std::max(worst, std::fabs(dq - (double)naive_virial(r.snapshots[k], r.softening).rhs));
  }
  EXPECT_LE(worst / scale, 1e-3);
  EXPECT_TRUE(rep.pass);
}

TEST(Virial, ResidualShrinksWithStep) {
  const auto a = check_virial_identity(run(fixed_run(4, 32, 4e-2, 2.0)));
  const auto b = check_virial_identity(run(fixed_run(4, 32, 2e-2, 2.0)));
  EXPECT_LT(b.max_pointwise_residual, a.max_pointwise_residual);
}

TEST(Virial, NegativeDerivativeAboveFour) {
  const auto rep = check_virial_identity(run(fixed_run(5, 64, 2e-2, 2.0)));
  EXPECT_TRUE(rep.dq_negative_everywhere);
}

TEST(Virial, RejectsNonFixedSchedules) {
  auto cfg = fixed_run(4, 16, 1e-2, 0.5);
  cfg.schedule.cadence = CadenceMode::geometric;
  const auto r = run(cfg);
  try {
    check_virial_identity(r);
    FAIL();
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("fixed-dt required"), std::string::npos);
  }
  cfg = fixed_run(4, 16, 1e-2, 0.5);
  cfg.schedule.growth = 1.1;
  cfg.schedule.dt_max = 0.1;
  EXPECT_THROW(check_virial_identity(run(cfg)), PreconditionError);
}

TEST(Interpolation, RandomSuiteHolds) {
  const auto suite = moment_interpolation_suite(4, 1000, 3);
  EXPECT_EQ(suite.cases.size(), 1000u);
  EXPECT_EQ(suite.failures, 0u);
  EXPECT_LE(suite.max_ratio, 1.0 + 1e-12);
  EXPECT_TRUE(suite.pass);
  bool kinds[3] = {false, false, false};
  for (const auto& c : suite.cases) kinds[static_cast<int>(c.kind)] = true;
  EXPECT_TRUE(kinds[0] && kinds[1] && kinds[2]);
}

TEST(Interpolation, EqualityForSingleParticle) {
  const Ensemble e(3, 1.0, 0.0, {1.0, 2.0, 2.0}, {0.0, 0.0, 0.0}, {0.7});
  const auto rep = check_moment_interpolation(e, 4.0, 1.5, 2.5);
  EXPECT_NEAR(rep.ratio, 1.0, 1e-14);
  EXPECT_TRUE(rep.pass);
  EXPECT_THROW(check_moment_interpolation(e, 1.0, 2.0, 1.0), DomainError);
  EXPECT_THROW(check_moment_interpolation(e, 1.0, 0.0, 0.0), DomainError);
}

TEST(Interpolation, DeterministicReports) {
  const auto a = moment_interpolation_suite(3, 50, 9), b = moment_interpolation_suite(3, 50, 9);
  for (std::size_t k = 0; k < a.cases.size(); ++k) {
    EXPECT_EQ(a.cases[k].report.left, b.cases[k].report.left);
    EXPECT_EQ(a.cases[k].report.right, b.cases[k].report.right);
  }
}

TEST(Laplacian, ExponentsBalanceDimensions) {
  const double inf = std::numeric_limits<double>::infinity();
  for (int d : {3, 4, 5, 7})
    for (double p : {1.0, 1.5, 2.0})
      for (double q : {d + 0.5, 2.0 * d, inf}) {
        const auto [a, b] = inverse_laplacian_exponents(d, p, q);
        const double lp = -d * (1.0 - 1.0 / p), lq = std::isinf(q) ? -d : -d * (1.0 - 1.0 / q);
        EXPECT_NEAR(a * lp + b * lq, 1.0 - d, 1e-12);
        EXPECT_NEAR(a + b, 1.0, 1e-12);
      }
  EXPECT_THROW(inverse_laplacian_exponents(3, 0.5, inf), DomainError);
  EXPECT_THROW(inverse_laplacian_exponents(3, 3.0, inf), DomainError);
  EXPECT_THROW(inverse_laplacian_exponents(3, 1.5, 2.0), DomainError);
}

TEST(Laplacian, DilationInvariantForPowersOfTwo) {
  SamplerSpec s;
  s.dim = 3;
  s.alpha = 0.0;
  s.count = 40;
  const auto cloud = sample_initial(s, 4);
  const auto rep = check_gradient_inverse_laplacian(cloud, 1.5, std::numeric_limits<double>::infinity(),
                                                    {0.25, 0.5, 1.0, 2.0, 4.0}, 0.1);
  EXPECT_LE(rep.spread, 1e-12);
  EXPECT_TRUE(rep.pass);
  EXPECT_TRUE(inverse_laplacian_suite(4, 3, 32, 1.5, std::numeric_limits<double>::infinity(), 2).pass);
}

TEST(FieldMoment, RequiresLargeMoment) {
  SamplerSpec s;
  s.dim = 4;
  s.count = 20;
  const auto e = sample_initial(s, 1);
  EXPECT_THROW(check_field_moment_bound(e, Softening{0.1}, 12.0, ProbeSpec{}), PreconditionError);
  const auto rep = check_field_moment_bound(e, Softening{0.1}, 13.0, ProbeSpec{});
  EXPECT_GT(rep.ratio, 0.0);
}

TEST(SmallData, Preconditions) {
  auto cfg = fixed_run(4, 16, 0.1, 0.5);
  EXPECT_THROW(small_data_experiment(cfg, 12.0, 1e-2), PreconditionError);
  cfg.alpha = 0.0;
  EXPECT_THROW(small_data_experiment(cfg, 13.0, 1e-2), PreconditionError);
}

TEST(SmallData, RescaledMomentStaysSmall) {
  const auto rep = small_data_experiment(fixed_run(4, 64, 0.05, 1.0), 13.0, 1e-2);
  ASSERT_FALSE(rep.run.records.empty());
  EXPECT_NEAR(rep.run.records.front().mn, 1e-2, 1e-12);
  EXPECT_TRUE(rep.completed);
  EXPECT_TRUE(rep.pass);
  EXPECT_GT(rep.moment_derivative_ratio, 0.0);
  EXPECT_TRUE(std::isfinite(rep.moment_derivative_ratio));
}

TEST(Bootstrap, SyntheticSeries) {
  std::vector<DiagnosticsRecord> recs;
  for (int k = 0; k <= 60; ++k) {
    DiagnosticsRecord r;
    r.t = std::pow(10.0, k / 20.0) - 1.0;
    r.sup_e = 2.0 * std::pow(r.t + 1.0, -3.0);
    recs.push_back(r);
  }
  const auto rep = decay_bootstrap_report(recs, 1.0, 4, 1.0);
  EXPECT_NEAR(rep.a_tilde, 8.0 / 6.0, 1e-15);
  EXPECT_NEAR(rep.final_exponent, -3.0, 1e-10);
  EXPECT_TRUE(rep.early_beats_threshold);
  EXPECT_TRUE(rep.pass);
  EXPECT_THROW(decay_bootstrap_report(recs, 1.0, 4, 5.0), PreconditionError);
}

TEST(Bootstrap, ThresholdValues) {
  EXPECT_DOUBLE_EQ(DimensionConstants::of(3).a_tilde, 2.0);
  EXPECT_DOUBLE_EQ(DimensionConstants::of(5).a_tilde, 16.0 / 13.0);
}

TEST(L2Decay, SyntheticSeries) {
  std::vector<DiagnosticsRecord> recs;
  for (int k = 0; k <= 30; ++k) {
    DiagnosticsRecord r;
    r.t = k * 5.0;
    r.pe = std::pow(r.t + 1.0, -2.0);
    r.m2 = 4.0;
    recs.push_back(r);
  }
  const auto rep = check_l2_field_decay(recs, 1.0, 10.0, 100.0);
  ASSERT_TRUE(rep.fit.has_value());
  EXPECT_NEAR(rep.fit->exponent, -1.0, 1e-12);
  EXPECT_TRUE(rep.pass);
  recs[5].m2 = 10.0;
  EXPECT_FALSE(check_l2_field_decay(recs, 1.0, 10.0, 100.0).pass);
}
