#include "spurious_lens/synthetic_data.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "spurious_lens/error.hpp"
#include "spurious_lens/parallel.hpp"

namespace spurious_lens {
namespace {

constexpr std::uint64_t kStreamDictImage = 1;
constexpr std::uint64_t kStreamDictText = 2;
constexpr std::uint64_t kStreamSamples = 3;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidConfig, "invalid config: " + what);
}

}  // namespace

const char* to_string(GenerationMode mode) {
  return mode == GenerationMode::kDef1 ? "Def1" : "TheoremExact";
}

GenerationMode generation_mode_from_string(const std::string& name) {
  if (name == "Def1") return GenerationMode::kDef1;
  if (name == "TheoremExact") return GenerationMode::kTheoremExact;
  throw Error(ErrorCode::kInvalidConfig,
              "invalid config: unknown mode '" + name +
                  "' (expected Def1 or TheoremExact)");
}

void GenerativeConfig::validate() const {
  require(std::isfinite(mu_inv) && std::isfinite(mu_spu), "means must be finite");
  require(p_spu >= 0.5 && p_spu <= 1.0, "p_spu must lie in [0.5, 1]");
  require(sigma_inv >= 0.0 && sigma_spu >= 0.0 && sigma_xi >= 0.0,
          "standard deviations must be >= 0");
  require(std::isfinite(sigma_inv) && std::isfinite(sigma_spu) &&
              std::isfinite(sigma_xi),
          "standard deviations must be finite");
  require(n >= 2, "n must be >= 2");
  require(latent_dim == 2, "latent_dim is fixed to 2");
  require(d_I >= latent_dim, "d_I must be >= latent_dim");
  require(d_T >= latent_dim, "d_T must be >= latent_dim");
  require(h >= latent_dim, "h must be >= latent_dim");
  require(rho > 0.0 && std::isfinite(rho), "rho must be > 0");
  if (mode == GenerationMode::kTheoremExact) {
    require(mu_inv == 1.0, "TheoremExact mode requires mu_inv = 1");
  }
}

Dictionary make_dictionary(int d, std::uint64_t seed) {
  if (d < 2) {
    throw Error(ErrorCode::kInvalidDimension,
                "dictionary dimension must be >= 2, got " + std::to_string(d));
  }
  auto rng = make_engine(seed, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Dictionary dict;
  dict.entries.resize(d, 2);
  for (;;) {
    for (int c = 0; c < 2; ++c)
      for (int r = 0; r < d; ++r) dict.entries(r, c) = gauss(rng);

    Eigen::VectorXd u = dict.entries.col(0);
    Eigen::VectorXd v = dict.entries.col(1);
    const double u_norm = u.norm();
    if (u_norm < 1e-8) continue;
    u /= u_norm;
    // Two passes keep the columns orthogonal to machine precision.
    for (int pass = 0; pass < 2; ++pass) v -= u.dot(v) * u;
    const double v_norm = v.norm();
    if (v_norm < 1e-8) continue;
    dict.entries.col(0) = u;
    dict.entries.col(1) = v / v_norm;
    return dict;
  }
}

LatentDraw sample_latent(const GenerativeConfig& config, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution agree(config.p_spu);
  std::normal_distribution<double> gauss(0.0, 1.0);

  LatentDraw draw;
  draw.label = coin(rng) ? 1 : -1;
  draw.attribute = agree(rng) ? draw.label : -draw.label;
  const double g1 = gauss(rng);
  const double g2 = gauss(rng);
  const double spu_mean = config.mode == GenerationMode::kDef1
                              ? config.mu_spu * draw.attribute
                              : static_cast<double>(draw.attribute);
  draw.z << config.mu_inv * draw.label + config.sigma_inv * g1,
      spu_mean + config.sigma_spu * g2;
  return draw;
}

SyntheticDataset sample_dataset(const GenerativeConfig& config,
                                std::uint64_t seed) {
  config.validate();
  const Dictionary dict_image =
      make_dictionary(config.d_I, derive_seed(seed, kStreamDictImage));
  const Dictionary dict_text =
      make_dictionary(config.d_T, derive_seed(seed, kStreamDictText));
  return sample_dataset(config, seed, dict_image, dict_text);
}

SyntheticDataset sample_dataset(const GenerativeConfig& config,
                                std::uint64_t seed,
                                const Dictionary& dict_image,
                                const Dictionary& dict_text) {
  config.validate();
  if (dict_image.dim() != config.d_I || dict_text.dim() != config.d_T) {
    throw Error(ErrorCode::kShapeMismatch,
                "dictionary dimensions do not match d_I/d_T");
  }

  SyntheticDataset dataset;
  dataset.config = config;
  dataset.seed = seed;
  dataset.dict_image = dict_image;
  dataset.dict_text = dict_text;

  const auto n = static_cast<std::size_t>(config.n);
  dataset.samples.resize(n);
  const std::size_t chunks = (n + kSampleChunk - 1) / kSampleChunk;
  const std::uint64_t sample_seed = derive_seed(seed, kStreamSamples);
  const double noise_image = config.sigma_xi / std::sqrt(double(config.d_I));
  const double noise_text = config.sigma_xi / std::sqrt(double(config.d_T));

  parallel_for_chunks(chunks, [&](std::size_t chunk) {
    auto rng = make_engine(sample_seed, chunk);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t end = std::min(n, (chunk + 1) * kSampleChunk);
    for (std::size_t i = chunk * kSampleChunk; i < end; ++i) {
      const LatentDraw draw = sample_latent(config, rng);
      PairedSample& s = dataset.samples[i];
      s.label = draw.label;
      s.attribute = draw.attribute;
      s.z = draw.z;
      s.x_image = dict_image.entries * draw.z;
      s.x_text = dict_text.entries * draw.z;
      for (Eigen::Index r = 0; r < s.x_image.size(); ++r)
        s.x_image(r) += noise_image * gauss(rng);
      for (Eigen::Index r = 0; r < s.x_text.size(); ++r)
        s.x_text(r) += noise_text * gauss(rng);
    }
  });
  return dataset;
}

GenerativeConfig ood_config(const GenerativeConfig& config) {
  GenerativeConfig ood = config;
  ood.p_spu = 0.5;
  return ood;
}

void write_dataset_csv(const SyntheticDataset& dataset, std::ostream& out) {
  const auto& cfg = dataset.config;
  out << "sample_index,y,a,z_inv,z_spu";
  for (int r = 0; r < cfg.d_I; ++r) out << ",x_I_" << r;
  for (int r = 0; r < cfg.d_T; ++r) out << ",x_T_" << r;
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& s = dataset.samples[i];
    out << i << ',' << s.label << ',' << s.attribute << ',' << s.z(0) << ','
        << s.z(1);
    for (Eigen::Index r = 0; r < s.x_image.size(); ++r) out << ',' << s.x_image(r);
    for (Eigen::Index r = 0; r < s.x_text.size(); ++r) out << ',' << s.x_text(r);
    out << '\n';
  }
}

}  // namespace spurious_lens
