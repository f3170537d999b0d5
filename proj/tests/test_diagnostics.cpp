#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mlkpde/diagnostics.hpp"
#include "mlkpde/report.hpp"

using namespace mlkpde;

namespace {

Problem small_problem(const std::string& preset, std::size_t s, std::size_t n_max) {
  return make_problem(preset, preset_by_name(preset).model(s), n_max, 1, 0.6);
}

}  // namespace

TEST(Sobol, MatchesReferenceValues) {
  const auto p = sobol_shifts(6, 5);
  const double expected[6][5] = {{0.5, 0.5, 0.5, 0.5, 0.5},
                                 {0.25, 0.75, 0.75, 0.75, 0.25},
                                 {0.75, 0.25, 0.25, 0.25, 0.75},
                                 {0.125, 0.625, 0.375, 0.125, 0.125},
                                 {0.625, 0.125, 0.875, 0.625, 0.625},
                                 {0.375, 0.375, 0.625, 0.875, 0.375}};
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t d = 0; d < 5; ++d) EXPECT_EQ(p[r][d], expected[r][d]) << r << "," << d;
}

TEST(Sobol, PointsAreDistinctAndInRange) {
  const auto p = sobol_shifts(64, 64);
  for (std::size_t r = 0; r < 64; ++r) {
    for (std::size_t d = 0; d < 64; ++d) {
      EXPECT_GT(p[r][d], 0.0 - 1e-300);
      EXPECT_LT(p[r][d], 1.0);
    }
    for (std::size_t q = 0; q < r; ++q) EXPECT_FALSE(std::equal(p[r].begin(), p[r].end(), p[q].begin()));
  }
  // Dimension one is the van der Corput sequence.
  EXPECT_EQ(p[4][0], 0.625);
  EXPECT_EQ(p[5][0], 0.375);
  EXPECT_THROW(sobol_shifts(4, 65), ParameterError);
  EXPECT_THROW(sobol_shifts(0, 4), ParameterError);
}

TEST(Fit, RecoversPowerLaw) {
  const std::vector<double> x{2, 4, 8, 16};
  std::vector<double> e;
  for (double v : x) e.push_back(8.0 * std::pow(v, -1.5));
  const auto fit = fit_rate(x, e);
  EXPECT_NEAR(fit.rate, 1.5, 1e-12);
  EXPECT_NEAR(fit.intercept, 3.0, 1e-12);
  EXPECT_THROW(fit_rate(std::vector<double>{1, 2}, std::vector<double>{1, 2}), ParameterError);
  EXPECT_THROW(fit_rate(std::vector<double>{1, 2, 3}, std::vector<double>{1, 0, 3}), DomainError);
  EXPECT_THROW(fit_rate(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}), DomainError);
}

TEST(Studies, FeStudyShape) {
  const auto problem = small_problem("easy", 4, 16);
  const std::vector<int> ms{2, 3, 4};
  const auto r = fe_error_study(problem, ms, 5, 16);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.study, "fe");
  EXPECT_EQ(r.rows[0].param, "h");
  EXPECT_DOUBLE_EQ(r.rows[1].value, 0.125);
  EXPECT_GT(r.rows[0].error, r.rows[2].error);
  EXPECT_GT(r.fits.at("beta"), 1.5);
  EXPECT_THROW(fe_error_study(problem, ms, 4, 16), ParameterError);
}

TEST(Studies, TruncationStudyDecreases) {
  const auto problem = small_problem("easy", 16, 16);
  const std::vector<std::size_t> ss{2, 4, 8};
  const auto r = truncation_study(problem, ss, 3, 16);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_GT(r.rows[0].error, r.rows[1].error);
  EXPECT_GT(r.rows[1].error, r.rows[2].error);
  EXPECT_GT(r.fits.at("kappa"), 1.0);
  const std::vector<std::size_t> bad{4, 16};
  EXPECT_THROW(truncation_study(problem, bad, 3, 16), ParameterError);
}

TEST(Studies, SingleLevelEstimatorMatchesBruteForce) {
  const auto problem = small_problem("hard", 4, 16);
  const std::vector<std::size_t> ns{4, 8, 16};
  const int m = 3;
  const std::size_t shifts_count = 3;
  const auto r = sl_error_study(problem, ns, m, shifts_count);
  ASSERT_EQ(r.rows.size(), 3u);
  const MeshLevel mesh(m);
  const Assembler assembler(mesh, problem.model);
  const auto shifts = sobol_shifts(shifts_count, 4);
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const auto sl = build_single_level(problem.lattice, ns[i], problem.kernel, mesh, problem.model);
    double sum = 0.0;
    for (std::size_t q = 0; q < shifts_count; ++q) {
      const auto pts = shift_points(sl.points, shifts[q]);
      for (std::size_t k = 0; k < pts.size(); ++k) {
        const auto exact = solve_fe(mesh, assembler.assemble(pts[k]));
        FESolution approx(mesh, evaluate_nodal(sl.coeffs, sl.points, sl.kernel, pts[k]));
        sum += std::pow(l2_diff(exact, approx), 2);
      }
    }
    const double brute = std::sqrt(sum / double(shifts_count * ns[i]));
    EXPECT_NEAR(r.rows[i].error, brute, 1e-9 * brute);
    EXPECT_EQ(r.rows[i].value, double(ns[i]));
  }
  EXPECT_TRUE(r.fits.count("mu"));
  EXPECT_THROW(sl_error_study(problem, std::vector<std::size_t>{4, 32}, m, 2), InvalidDivisor);
}

TEST(Studies, LevelStudyKeys) {
  const auto problem = small_problem("easy", 4, 32);
  const std::vector<std::size_t> ns{8, 16, 32};
  const auto r = level_difference_study(problem, 2, 2, ns, 2);
  EXPECT_EQ(r.rows.size(), 9u);
  EXPECT_EQ(r.rows[3].param, "l=1");
  for (const char* key : {"mu_l0", "mu_l1", "mu_l2", "mu_ml_mean", "decay_l1_N32", "decay_l2_N8"})
    EXPECT_TRUE(r.fits.count(key)) << key;
  EXPECT_GT(r.fits.at("decay_l2_N32"), 1.0);
}

TEST(Studies, PairingTables) {
  const auto easy = full_scale_pairings("easy");
  ASSERT_EQ(easy.size(), 6u);
  EXPECT_EQ(easy.back().n, 8192u);
  const auto levels = levels_from_pairings(easy, 2);
  ASSERT_EQ(levels.size(), 3u);
  EXPECT_EQ(levels[0].n, 512u);
  EXPECT_EQ(levels[0].mesh_level, 3);
  EXPECT_EQ(levels[2].n, 64u);
  EXPECT_EQ(levels[2].mesh_level, 5);
  EXPECT_THROW(levels_from_pairings(default_pairings("hard"), 3), ParameterError);
}

TEST(Studies, CostStudyRowsAndFits) {
  const auto problem = small_problem("easy", 4, 64);
  const std::vector<Pairing> pairings{{2, 16}, {3, 32}, {4, 64}};
  const auto r = cost_comparison_study(problem, pairings, 2, 5);
  ASSERT_EQ(r.rows.size(), 6u);
  EXPECT_EQ(r.rows[0].param, "SL");
  EXPECT_EQ(r.rows[3].param, "ML");
  // L = 0 is the coarsest single-level interpolant.
  EXPECT_NEAR(r.rows[3].error, r.rows[0].error, 1e-12 * r.rows[0].error);
  for (const char* key : {"sl_cost_exponent", "ml_cost_exponent", "sl_cost_at_ml_error", "ml_to_sl_cost_ratio"})
    EXPECT_TRUE(r.fits.count(key)) << key;
  const std::vector<Pairing> bad{{2, 16}, {4, 32}};
  EXPECT_THROW(cost_comparison_study(problem, bad, 2, 5), ParameterError);
}

TEST(Report, CsvSchema) {
  StudyResult r{"sl", "easy", {{"N", 16, 0.5, 0.25}, {"N", 32, 0.125, 1e-3}}, {{"mu", 2.0}}};
  const auto csv = to_csv(r);
  EXPECT_EQ(csv,
            "study,preset,param,value,error,cpu_seconds\n"
            "sl,easy,N,16,0.5,0.25\n"
            "sl,easy,N,32,0.125,0.001\n");
}

TEST(Studies, SingleLevelAgreesWithLevelZeroDifference) {
  const auto problem = small_problem("easy", 4, 32);
  const std::vector<std::size_t> ns{8, 16, 32};
  const auto sl = sl_error_study(problem, ns, 3, 3);
  const auto level = level_difference_study(problem, 3, 1, ns, 3);
  for (std::size_t i = 0; i < ns.size(); ++i) {
    ASSERT_EQ(level.rows[i].param, "l=0");
    EXPECT_NEAR(sl.rows[i].error, level.rows[i].error, 1e-8 * sl.rows[i].error);
  }
}

TEST(Studies, DeterministicAcrossRunsAndThreadCounts) {
  auto strip = [](const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
  };
  const auto problem = small_problem("hard", 6, 64);
  const std::vector<std::size_t> ns{8, 16, 32, 64};
  set_thread_count(1);
  const auto a = to_csv(sl_error_study(problem, ns, 3, 2));
  set_thread_count(3);
  const auto b = to_csv(sl_error_study(problem, ns, 3, 2));
  set_thread_count(0);
  EXPECT_EQ(strip(a), strip(b));
}
