#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mlkpde/diagnostics.hpp"
#include "mlkpde/serialization.hpp"

using namespace mlkpde;

namespace {

std::filesystem::path temp_dir() {
  const char* env = std::getenv("MLKPDE_TEST_TMP");
  std::filesystem::path dir = env ? env : std::filesystem::temp_directory_path() / "mlkpde_serialization";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Serialization, RoundTripPreservesEvaluation) {
  const auto problem = make_problem("easy", easy_preset().model(6), 64, 2, 0.6);
  const std::vector<LevelSpec> levels{{64, 2}, {16, 3}, {8, 4}};
  const auto ml = build_multilevel(problem.lattice, levels, problem.kernel, problem.model);
  const auto path = (temp_dir() / "ml.bin").string();
  save_approximation(ml, path);
  const auto back = load_approximation(path);
  ASSERT_EQ(back.levels.size(), 3u);
  EXPECT_EQ(back.kernel.alpha(), 2);
  EXPECT_EQ(back.points, ml.points);
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_EQ(back.levels[l].n, ml.levels[l].n);
    EXPECT_EQ(back.levels[l].mesh_level, ml.levels[l].mesh_level);
    EXPECT_EQ(back.levels[l].coeffs.data(), ml.levels[l].coeffs.data());
  }
  const std::vector<double> y{0.1, 0.9, 0.3, 0.7, 0.5, 0.2};
  EXPECT_EQ(evaluate(back, 0.3, 0.8, y), evaluate(ml, 0.3, 0.8, y));

  // Header layout: magic, version, L, s, alpha, then (N_l, m_l) pairs.
  std::ifstream in(path, std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  EXPECT_EQ(std::string(magic, 4), "MLKA");
  std::uint32_t header[4];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  EXPECT_EQ(header[0], 1u);
  EXPECT_EQ(header[1], 2u);
  EXPECT_EQ(header[2], 6u);
  EXPECT_EQ(header[3], 2u);
  std::uint64_t n0;
  in.read(reinterpret_cast<char*>(&n0), sizeof(n0));
  EXPECT_EQ(n0, 64u);
  const auto expected_size = 4 + 16 + 3 * 12 + 6 * 8 + 6 * 8 + 8 * (64 * 9 + 16 * 49 + 8 * 225);
  EXPECT_EQ(std::filesystem::file_size(path), static_cast<std::uintmax_t>(expected_size));
}

TEST(Serialization, RejectsCorruptFiles) {
  const auto dir = temp_dir();
  EXPECT_THROW(load_approximation((dir / "none.bin").string()), ParameterError);
  const auto bad_magic = (dir / "bad_magic.bin").string();
  std::ofstream(bad_magic, std::ios::binary) << "XXXXabcdefgh";
  EXPECT_THROW(load_approximation(bad_magic), ParameterError);

  const auto problem = make_problem("easy", easy_preset().model(4), 16, 1, 0.6);
  const auto ml = build_multilevel(problem.lattice, std::vector<LevelSpec>{{16, 2}}, problem.kernel, problem.model);
  const auto good = (dir / "good.bin").string();
  save_approximation(ml, good);
  const auto truncated = (dir / "truncated.bin").string();
  std::filesystem::copy_file(good, truncated, std::filesystem::copy_options::overwrite_existing);
  std::filesystem::resize_file(truncated, std::filesystem::file_size(good) - 8);
  EXPECT_THROW(load_approximation(truncated), ParameterError);

  const auto wrong_version = (dir / "version.bin").string();
  std::filesystem::copy_file(good, wrong_version, std::filesystem::copy_options::overwrite_existing);
  {
    std::fstream f(wrong_version, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const std::uint32_t v = 7;
    f.write(reinterpret_cast<const char*>(&v), 4);
  }
  EXPECT_THROW(load_approximation(wrong_version), ParameterError);
}
