#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "spurious_lens/error.hpp"
#include "spurious_lens/parallel.hpp"
#include "spurious_lens/synthetic_data.hpp"

namespace spurious_lens {
namespace {

GenerativeConfig small_config() {
  GenerativeConfig c;
  c.n = 100;
  c.d_I = 8;
  c.d_T = 6;
  return c;
}

double orthonormality_error(const Dictionary& d) {
  return (d.entries.transpose() * d.entries - Eigen::Matrix2d::Identity())
      .cwiseAbs()
      .maxCoeff();
}

TEST(MakeDictionary, SquareCaseIsOrthogonal) {
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    EXPECT_LE(orthonormality_error(make_dictionary(2, seed)), 1e-10);
  }
}

TEST(MakeDictionary, DeterministicAndUnitColumns) {
  const Dictionary a = make_dictionary(16, 7);
  const Dictionary b = make_dictionary(16, 7);
  EXPECT_EQ(a, b);
  EXPECT_NEAR(a.entries.col(0).norm(), 1.0, 1e-12);
  EXPECT_NEAR(a.entries.col(1).norm(), 1.0, 1e-12);
  EXPECT_NEAR(a.entries.col(0).dot(a.entries.col(1)), 0.0, 1e-10);
  EXPECT_FALSE(make_dictionary(16, 8) == a);
}

TEST(MakeDictionary, OrthonormalAcrossSeedsAndDims) {
  for (int d : {2, 3, 16, 64, 257}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      ASSERT_LE(orthonormality_error(make_dictionary(d, seed)), 1e-10)
          << "d=" << d << " seed=" << seed;
    }
  }
}

TEST(MakeDictionary, RejectsSmallDimension) {
  try {
    make_dictionary(1, 0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidDimension);
  }
}

TEST(GenerativeConfig, Validation) {
  GenerativeConfig ok;
  EXPECT_NO_THROW(ok.validate());

  auto expect_invalid = [](GenerativeConfig c) {
    try {
      c.validate();
      ADD_FAILURE() << "expected invalid config";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidConfig);
    }
  };
  GenerativeConfig c = ok;
  c.p_spu = 0.49;
  expect_invalid(c);
  c = ok;
  c.p_spu = 1.01;
  expect_invalid(c);
  c = ok;
  c.sigma_inv = -0.1;
  expect_invalid(c);
  c = ok;
  c.n = 1;
  expect_invalid(c);
  c = ok;
  c.d_I = 1;
  expect_invalid(c);
  c = ok;
  c.h = 1;
  expect_invalid(c);
  c = ok;
  c.rho = 0.0;
  expect_invalid(c);
  c = ok;
  c.latent_dim = 3;
  expect_invalid(c);
  c = ok;
  c.mode = GenerationMode::kTheoremExact;
  c.mu_inv = 2.0;
  expect_invalid(c);
}

TEST(SampleLatent, NoiselessMeans) {
  GenerativeConfig c;
  c.sigma_inv = 0.0;
  c.sigma_spu = 0.0;
  c.mu_inv = 1.0;
  c.mu_spu = 2.0;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    c.mode = GenerationMode::kDef1;
    LatentDraw d = sample_latent(c, rng);
    EXPECT_EQ(d.z(0), d.label * 1.0);
    EXPECT_EQ(d.z(1), d.attribute * 2.0);
    c.mode = GenerationMode::kTheoremExact;
    d = sample_latent(c, rng);
    EXPECT_EQ(d.z(0), d.label * 1.0);
    EXPECT_EQ(d.z(1), d.attribute * 1.0);
  }
}

TEST(SampleLatent, LabelBalanceAndAttributeCorrelation) {
  GenerativeConfig c;
  c.p_spu = 0.95;
  constexpr int kDraws = 100000;
  std::mt19937_64 rng(11);
  int positive = 0, agree = 0;
  for (int i = 0; i < kDraws; ++i) {
    const LatentDraw d = sample_latent(c, rng);
    positive += d.label == 1;
    agree += d.attribute == d.label;
  }
  EXPECT_LE(std::abs(positive / double(kDraws) - 0.5), 0.01);
  const double window = 3.0 * std::sqrt(0.95 * 0.05 / kDraws);
  EXPECT_LE(std::abs(agree / double(kDraws) - 0.95), window);
  EXPECT_GE(agree / double(kDraws), 0.945);
  EXPECT_LE(agree / double(kDraws), 0.955);
}

// (y, a, z) -> (-y, -a, -z) preserves the law, so y * z_inv and a * z_spu have
// the configured means regardless of sign.
TEST(SampleLatent, FlipSymmetryMeans) {
  for (auto mode : {GenerationMode::kDef1, GenerationMode::kTheoremExact}) {
    GenerativeConfig c;
    c.mode = mode;
    c.mu_inv = 1.0;
    c.mu_spu = 1.5;
    c.sigma_inv = 0.8;
    c.sigma_spu = 0.4;
    c.p_spu = 0.8;
    constexpr int kDraws = 100000;
    std::mt19937_64 rng(5);
    double sum_inv = 0.0, sum_spu = 0.0;
    for (int i = 0; i < kDraws; ++i) {
      const LatentDraw d = sample_latent(c, rng);
      sum_inv += d.label * d.z(0);
      sum_spu += d.attribute * d.z(1);
    }
    const double spu_mean = mode == GenerationMode::kDef1 ? c.mu_spu : 1.0;
    EXPECT_LE(std::abs(sum_inv / kDraws - c.mu_inv), 3.0 * c.sigma_inv / std::sqrt(kDraws));
    EXPECT_LE(std::abs(sum_spu / kDraws - spu_mean), 3.0 * c.sigma_spu / std::sqrt(kDraws));
  }
}

TEST(SampleDataset, NoiselessIdentityDictionaryReproducesLatent) {
  GenerativeConfig c = small_config();
  c.d_I = 2;
  c.d_T = 2;
  c.sigma_xi = 0.0;
  Dictionary identity;
  identity.entries = Eigen::Matrix2d::Identity();
  const SyntheticDataset ds = sample_dataset(c, 4, identity, identity);
  ASSERT_EQ(ds.size(), 100u);
  for (const auto& s : ds.samples) {
    EXPECT_EQ(s.x_image, Eigen::VectorXd(s.z));
    EXPECT_EQ(s.x_text, Eigen::VectorXd(s.z));
  }
}

TEST(SampleDataset, DeterministicGivenSeed) {
  const GenerativeConfig c = small_config();
  const SyntheticDataset a = sample_dataset(c, 42);
  const SyntheticDataset b = sample_dataset(c, 42);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(a.dict_image, b.dict_image);
  EXPECT_EQ(a.dict_text, b.dict_text);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.samples[i].x_image, b.samples[i].x_image);
    EXPECT_EQ(a.samples[i].x_text, b.samples[i].x_text);
    EXPECT_EQ(a.samples[i].label, b.samples[i].label);
    EXPECT_EQ(a.samples[i].attribute, b.samples[i].attribute);
  }
  const SyntheticDataset other = sample_dataset(c, 43);
  EXPECT_NE(a.samples[0].x_image, other.samples[0].x_image);
}

TEST(SampleDataset, IndependentOfWorkerCount) {
  GenerativeConfig c = small_config();
  c.n = 3 * static_cast<int>(kSampleChunk) + 17;
  set_worker_count_override(1);
  const SyntheticDataset serial = sample_dataset(c, 9);
  set_worker_count_override(4);
  const SyntheticDataset parallel = sample_dataset(c, 9);
  set_worker_count_override(std::nullopt);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    ASSERT_EQ(serial.samples[i].x_image, parallel.samples[i].x_image) << i;
    ASSERT_EQ(serial.samples[i].x_text, parallel.samples[i].x_text) << i;
  }
}

TEST(SampleDataset, ObservationNoiseEnergy) {
  GenerativeConfig c;
  c.sigma_xi = 1.0;
  c.d_I = 64;
  c.d_T = 8;
  c.n = 10000;
  const SyntheticDataset ds = sample_dataset(c, 21);
  double mean_sq = 0.0;
  for (const auto& s : ds.samples) {
    mean_sq += (s.x_image - ds.dict_image.entries * s.z).squaredNorm();
  }
  mean_sq /= c.n;
  EXPECT_NEAR(mean_sq, 1.0, 0.05);
}

TEST(SampleDataset, RejectsMismatchedDictionaries) {
  const GenerativeConfig c = small_config();
  EXPECT_THROW(sample_dataset(c, 0, make_dictionary(5, 0), make_dictionary(6, 0)),
               Error);
}

TEST(OodConfig, ReplacesOnlyTheCorrelation) {
  GenerativeConfig c = small_config();
  c.p_spu = 0.95;
  const GenerativeConfig ood = ood_config(c);
  EXPECT_EQ(ood.p_spu, 0.5);
  GenerativeConfig expected = c;
  expected.p_spu = 0.5;
  EXPECT_EQ(ood, expected);
  EXPECT_EQ(ood_config(ood), ood);

  GenerativeConfig half = small_config();
  half.p_spu = 0.5;
  EXPECT_EQ(ood_config(half), half);
}

TEST(WriteDatasetCsv, HeaderAndRowCount) {
  GenerativeConfig c = small_config();
  c.n = 3;
  c.d_I = 2;
  c.d_T = 3;
  std::ostringstream out;
  write_dataset_csv(sample_dataset(c, 1), out);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "sample_index,y,a,z_inv,z_spu,x_I_0,x_I_1,x_T_0,x_T_1,x_T_2");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 3);
}

}  // namespace
}  // namespace spurious_lens
