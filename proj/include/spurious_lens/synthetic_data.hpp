#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spurious_lens {

using Label = int;  // always -1 or +1 in the Gaussian model

// Def1 draws z_spu ~ N(mu_spu * a, sigma_spu^2). TheoremExact draws
// z_spu ~ N(a, sigma_spu^2) and keeps mu_spu only in the alignment weight
// 2 * mu_spu * p_spu - 1, which is the parametrization the error-event
// margin is written in.
enum class GenerationMode { kDef1, kTheoremExact };

const char* to_string(GenerationMode mode);
GenerationMode generation_mode_from_string(const std::string& name);

struct GenerativeConfig {
  double mu_inv = 1.0;
  double mu_spu = 1.0;
  double sigma_inv = 1.0;
  double sigma_spu = 0.5;
  double sigma_xi = 0.1;
  double p_spu = 0.9;
  int n = 1000;
  int d_I = 16;
  int d_T = 16;
  int latent_dim = 2;
  int h = 4;
  double rho = 1.0;
  GenerationMode mode = GenerationMode::kDef1;

  // Throws Error(kInvalidConfig) naming the first violated constraint.
  void validate() const;

  bool operator==(const GenerativeConfig&) const = default;
};

// d x 2 matrix with orthonormal columns.
struct Dictionary {
  Eigen::Matrix<double, Eigen::Dynamic, 2> entries;

  Eigen::Index dim() const { return entries.rows(); }
  bool operator==(const Dictionary& other) const {
    return entries == other.entries;
  }
};

struct LatentDraw {
  Eigen::Vector2d z;
  Label label = 1;
  Label attribute = 1;
};

struct PairedSample {
  Eigen::VectorXd x_image;
  Eigen::VectorXd x_text;
  Label label = 1;
  Label attribute = 1;
  Eigen::Vector2d z;
};

struct SyntheticDataset {
  GenerativeConfig config;
  std::uint64_t seed = 0;
  std::vector<PairedSample> samples;
  Dictionary dict_image;
  Dictionary dict_text;

  std::size_t size() const { return samples.size(); }
};

// Gram-Schmidt on two seeded Gaussian vectors. Throws kInvalidDimension for
// d < 2.
Dictionary make_dictionary(int d, std::uint64_t seed);

LatentDraw sample_latent(const GenerativeConfig& config, std::mt19937_64& rng);

// Draws both dictionaries from the seed, then the samples.
SyntheticDataset sample_dataset(const GenerativeConfig& config,
                                std::uint64_t seed);

// Samples with caller-provided dictionaries, so a test set can share the
// training set's embedding of the latent space.
SyntheticDataset sample_dataset(const GenerativeConfig& config,
                                std::uint64_t seed,
                                const Dictionary& dict_image,
                                const Dictionary& dict_text);

// The OOD test distribution: p_spu = 1/2, everything else unchanged.
GenerativeConfig ood_config(const GenerativeConfig& config);

// Columns: sample_index, y, a, z_inv, z_spu, x_I_*, x_T_*.
void write_dataset_csv(const SyntheticDataset& dataset, std::ostream& out);

}  // namespace spurious_lens
