#include "hardsum/hard_instances.hpp"
#include "hardsum/optimizers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include <unistd.h>

using namespace hardsum;

namespace {

const double kE = std::exp(1.0);
const double kPi = std::acos(-1.0);

HardInstanceSpec small_deterministic(int p, Index n, Index k, Index budget) {
  return deterministic_params(p, n, 192.0 * static_cast<double>(k + 1), chain_smoothness_constant(p), 1.0, budget);
}

}  // namespace

TEST(DeterministicParams, FirstOrderExample) {
  const HardInstanceSpec s = deterministic_params(1, 1, 384.0, chain_smoothness_constant(1), 1.0, 0);
  EXPECT_EQ(s.chain_length + 1, 2);
  EXPECT_NEAR(s.sigma, 4.0, 1e-12);
  EXPECT_NEAR(s.lambda, 1.0, 1e-12);
  EXPECT_NEAR(s.scale, s.lambda * s.sigma * s.sigma, 1e-9);
}

TEST(DeterministicParams, RefusesTooSmallGap) {
  try {
    deterministic_params(1, 1, 192.0, chain_smoothness_constant(1), 1.0, 0);
    FAIL() << "expected InstanceTooSmall";
  } catch (const InstanceTooSmall& e) {
    EXPECT_NEAR(e.minimal_gap(), 384.0, 1e-6);
  }
}

TEST(DeterministicParams, SecondOrderExample) {
  const HardInstanceSpec s = deterministic_params(2, 1, 960.0, chain_smoothness_constant(2), 1.0, 0);
  EXPECT_EQ(s.chain_length + 1, 5);
  EXPECT_NEAR(s.sigma, 2.0, 1e-12);
}

TEST(DeterministicParams, DimensionCoversBudget) {
  const HardInstanceSpec s = deterministic_params(1, 4, 384.0, chain_smoothness_constant(1), 1.0, 50);
  EXPECT_EQ(s.d, s.chain_length + 1 + 50);
}

TEST(RandomizedParams, IndividualExample) {
  const HardInstanceSpec s =
      randomized_params(InstanceMode::RandomizedIndividual, 1, 4, 768.0, kDefaultHatEll1, 1.0, kDefaultHatEll1);
  EXPECT_EQ(s.chain_length, 1);
  EXPECT_NEAR(s.sigma, 8.0, 1e-12);
  EXPECT_EQ(s.d, 4 * 4 * 1);
  EXPECT_FALSE(s.warnings.empty());
}

TEST(RandomizedParams, ThirdMomentExample) {
  const HardInstanceSpec s =
      randomized_params(InstanceMode::RandomizedThirdMoment, 2, 1, 96.0, kDefaultHatEll2, 1.0, kDefaultHatEll2);
  EXPECT_EQ(s.chain_length, 1);
  EXPECT_NEAR(s.sigma, 2.0, 1e-12);
}

TEST(RandomizedParams, RejectsBadInputs) {
  EXPECT_THROW(randomized_params(InstanceMode::RandomizedThirdMoment, 2, 1, 90.0, kDefaultHatEll2, 1.0,
                                 kDefaultHatEll2),
               InstanceTooSmall);
  EXPECT_THROW(randomized_params(InstanceMode::RandomizedThirdMoment, 1, 1, 96.0, 1.0, 1.0, 1.0),
               std::invalid_argument);
  EXPECT_THROW(randomized_params(InstanceMode::RandomizedIndividual, 1, 4, 768.0, kDefaultHatEll1, 1.0,
                                 kDefaultHatEll1, 1.0, Index{18}),
               std::invalid_argument);
  EXPECT_THROW(randomized_params(InstanceMode::RandomizedIndividual, 1, 4, 768.0, kDefaultHatEll1, 1.0,
                                 kDefaultHatEll1, 1.0, Index{12}),
               std::invalid_argument);
}

TEST(InstanceMode, NamesRoundTrip) {
  for (InstanceMode m :
       {InstanceMode::Deterministic, InstanceMode::RandomizedIndividual, InstanceMode::RandomizedThirdMoment}) {
    EXPECT_EQ(instance_mode_from_string(to_string(m)), m);
  }
  EXPECT_THROW(instance_mode_from_string("nope"), std::invalid_argument);
}

TEST(ResistingOracle, FirstLinkHasFirstHalfOfComponents) {
  const HardInstanceSpec s = small_deterministic(1, 5, 2, 10);
  const ResistingOracle o(s, Rng(1));
  for (Index i = 0; i < 5; ++i) EXPECT_EQ(o.delta(i, 1), i < 3) << i;
  EXPECT_THROW(o.delta(0, 2), std::logic_error);
}

TEST(ResistingOracle, GradientAtOriginMatchesFirstLink) {
  for (Index n : {1, 4, 5}) {
    const HardInstanceSpec s = small_deterministic(1, n, 2, 10);
    ResistingOracle o(s, Rng(2));
    const double expected = static_cast<double>((n + 1) / 2) / static_cast<double>(n) * s.lambda * s.sigma * std::sqrt(kE);
    EXPECT_NEAR(o.measure(Vector::Zero(s.d), 1).gradient.norm(), expected, 1e-9 * expected) << n;
  }
}

TEST(ResistingOracle, CertificateNeedsFinalization) {
  const HardInstanceSpec s = small_deterministic(1, 2, 2, 10);
  ResistingOracle o(s, Rng(3));
  EXPECT_THROW(resisting_certificate(o), std::logic_error);
  EXPECT_THROW(replay_archive(o), std::logic_error);
}

TEST(ResistingOracle, EmptyRunIsVacuous) {
  const HardInstanceSpec s = small_deterministic(1, 2, 2, 10);
  ResistingOracle o(s, Rng(4));
  o.finalize();
  const ResistingCertificate c = resisting_certificate(o);
  EXPECT_TRUE(c.gradient_norms.empty());
  EXPECT_TRUE(c.all_exceed);
  EXPECT_EQ(o.round_close_queries().size(), static_cast<size_t>(s.chain_length));
}

TEST(ResistingOracle, RoundClosesAfterHalfOfDistinctComponents) {
  const HardInstanceSpec s = small_deterministic(1, 4, 3, 20);
  ResistingOracle o(s, Rng(5));
  const Vector x = Vector::Zero(s.d);
  EXPECT_EQ(o.round(), 2);
  o.query(0, x, 1);
  o.query(0, x, 1);
  EXPECT_EQ(o.round(), 2);
  o.query(3, x, 1);
  EXPECT_EQ(o.round(), 3);
  ASSERT_EQ(o.round_close_queries().size(), 1u);
  EXPECT_EQ(o.round_close_queries()[0], 3u);
  // Components not queried during round 2 carry link 2.
  EXPECT_FALSE(o.delta(0, 2));
  EXPECT_TRUE(o.delta(1, 2));
  EXPECT_TRUE(o.delta(2, 2));
  EXPECT_FALSE(o.delta(3, 2));
}

TEST(ResistingOracle, GradientDescentRunKeepsLargeGradients) {
  const Index n = 4, k = 3;
  const HardInstanceSpec s = small_deterministic(1, n, k, n * (k + 3));
  ResistingOracle o(s, Rng(6), 1.0);
  const double step = s.sigma * s.sigma / (20.0 * s.scale);
  baseline_full_gd(o, Vector::Zero(s.d), step, static_cast<std::uint64_t>(n * (k + 3)));
  o.finalize();
  const ResistingCertificate c = resisting_certificate(o);
  EXPECT_FALSE(c.gradient_norms.empty());
  EXPECT_TRUE(c.all_exceed) << c.min_norm << " vs " << c.bound;
  const ReplayReport r = replay_archive(o);
  EXPECT_LE(r.max_relative_error, 1e-10);
  EXPECT_LE(r.max_late_overlap, 1e-10);
  EXPECT_LE(r.max_final_overlap, 1e-10);
  EXPECT_FALSE(o.ledger().first_hit.has_value());
}

TEST(ResistingOracle, DirectionsAreOrthonormal) {
  const HardInstanceSpec s = small_deterministic(2, 3, 4, 10);
  ResistingOracle o(s, Rng(7));
  o.finalize();
  const Matrix v = o.directions();
  ASSERT_EQ(v.cols(), s.chain_length + 1);
  EXPECT_LE(max_abs(v.transpose() * v - Matrix::Identity(v.cols(), v.cols())), 1e-12);
}

TEST(RandomizedInstance, ValueAtOrigin) {
  const HardInstanceSpec s =
      randomized_params(InstanceMode::RandomizedIndividual, 1, 4, 768.0, kDefaultHatEll1, 1.0, kDefaultHatEll1);
  Rng rng(8);
  const RandomizedHardInstance f = sample_randomized_instance(s, rng);
  const double expected = -s.lambda * s.sigma * s.sigma * std::sqrt(kPi * kE / 2.0);
  for (Index i = 0; i < s.n; ++i) EXPECT_NEAR(f.component(i, Vector::Zero(s.d), 0).value, expected, 1e-9 * std::abs(expected));
  EXPECT_NEAR(f.full(Vector::Zero(s.d), 0).value, expected, 1e-9 * std::abs(expected));
}

TEST(RandomizedInstance, UnscaledGradientAtOrigin) {
  for (Index n : {1, 4, 9}) {
    const HardInstanceSpec s = randomized_params(InstanceMode::RandomizedIndividual, 1, n, 192.0 * n * 2,
                                                 kDefaultHatEll1, 1.0, kDefaultHatEll1);
    Rng rng(9);
    const RandomizedHardInstance f = sample_randomized_instance(s, rng).unscaled();
    const double norm = f.full(Vector::Zero(s.d), 1).gradient.norm();
    EXPECT_NEAR(norm, std::sqrt(kE / static_cast<double>(n)), 1e-12);
    EXPECT_GT(norm, 1.0 / (4.0 * std::sqrt(static_cast<double>(n))));
  }
}

TEST(RandomizedInstance, ComponentsActOnTheirOwnBlock) {
  const HardInstanceSpec s = randomized_params(InstanceMode::RandomizedIndividual, 1, 3, 192.0 * 3 * 2,
                                               kDefaultHatEll1, 1.0, kDefaultHatEll1);
  Rng rng(10);
  const RandomizedHardInstance f = sample_randomized_instance(s, rng);
  const Vector x = gaussian_vector(s.d, rng);
  const Vector g = f.component(1, x, 1).gradient;
  const Index m = f.block_dim();
  EXPECT_EQ(g.head(m).norm(), 0.0);
  EXPECT_EQ(g.tail(m).norm(), 0.0);
  EXPECT_GT(g.segment(m, m).norm(), 0.0);
}

TEST(RandomizedInstance, HaarRotationKeepsGradientNorms) {
  const HardInstanceSpec s = randomized_params(InstanceMode::RandomizedIndividual, 1, 2, 192.0 * 2 * 2,
                                               kDefaultHatEll1, 1.0, kDefaultHatEll1);
  Rng rng(11);
  const RandomizedHardInstance plain = sample_randomized_instance(s, rng);
  const RandomizedHardInstance rotated(s, plain.basis(), sample_orthonormal_columns(s.d, s.d, rng));
  ASSERT_TRUE(rotated.has_rotation());
  const Vector y = gaussian_vector(s.d, rng);
  Vector x = Vector::Zero(s.d);
  for (Index i = 0; i < s.n; ++i) x += rotated.from_block(i, plain.to_block(i, y));
  EXPECT_NEAR(rotated.full(x, 0).value, plain.full(y, 0).value, 1e-9 * std::abs(plain.full(y, 0).value));
  EXPECT_NEAR(rotated.full(x, 1).gradient.norm(), plain.full(y, 1).gradient.norm(), 1e-9);
}

TEST(RandomizedInstance, RejectsMismatchedShapes) {
  HardInstanceSpec s = randomized_params(InstanceMode::RandomizedIndividual, 1, 2, 192.0 * 2 * 2,
                                         kDefaultHatEll1, 1.0, kDefaultHatEll1);
  Rng rng(12);
  s.d = 9;
  EXPECT_THROW(sample_randomized_instance(s, rng), std::invalid_argument);
  s.d = 2;
  EXPECT_THROW(sample_randomized_instance(s, rng), std::invalid_argument);
}

TEST(BasisFile, RoundTripIsExact) {
  const HardInstanceSpec s = randomized_params(InstanceMode::RandomizedIndividual, 1, 2, 192.0 * 2 * 2,
                                               kDefaultHatEll1, 1.0, kDefaultHatEll1, 1.0, Index{12});
  Rng rng(13);
  const RandomizedHardInstance f = sample_randomized_instance(s, rng);
  const std::string path =
      (std::filesystem::temp_directory_path() / ("hardsum_basis_" + std::to_string(::getpid()) + ".bin")).string();
  write_basis_file(path, f);
  const BasisFile b = read_basis_file(path);
  std::remove(path.c_str());
  EXPECT_EQ(b.d, 12u);
  EXPECT_EQ(b.n, 2u);
  EXPECT_EQ(b.k, static_cast<std::uint32_t>(s.chain_length));
  ASSERT_EQ(b.basis.rows(), f.basis().rows());
  ASSERT_EQ(b.basis.cols(), f.basis().cols());
  EXPECT_EQ((b.basis - f.basis().matrix()).norm(), 0.0);
}

TEST(BasisFile, RejectsForeignFile) {
  const std::string path =
      (std::filesystem::temp_directory_path() / ("hardsum_junk_" + std::to_string(::getpid()) + ".bin")).string();
  {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    std::fputs("not a basis", fp);
    std::fclose(fp);
  }
  EXPECT_THROW(read_basis_file(path), std::runtime_error);
  std::remove(path.c_str());
}
