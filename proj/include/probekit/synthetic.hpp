#pragma once

// Seeded generators that plant known order and preference structure, used as
// ground truth for the probes and metrics.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "probekit/activation_store.hpp"
#include "probekit/types.hpp"

namespace probekit {

// Seeded unit vector of length dim.
Vector random_unit_vector(int dim, std::uint64_t seed);
// Unit vector from `seed` with its component along `reference` removed.
Vector orthogonal_unit_vector(const Vector& reference, std::uint64_t seed);

struct PlantedOrderSpec {
  int hidden_dim = 64;
  int items = 8;       // W
  int instances = 200;  // N
  std::optional<Vector> signal_direction;  // unit; drawn from seed when unset
  double noise_sigma = 0.0;
  double rank_spacing = 1.0;
  // Norm of a fixed offset orthogonal to the signal direction, shared by every
  // item. Keeps planted items off a ray through the origin so angular
  // distances also vary with rank.
  double offset_norm = 4.0;
  std::uint64_t seed = 0;
  std::string task_id = "planted-order";
};

// Item with rank r: offset + r * rank_spacing * signal_direction + noise.
// Items appear in seeded random order within each instance.
std::vector<RankedInstance> gen_planted_order(const PlantedOrderSpec& spec);

// Signal direction and offset that gen_planted_order uses for this spec.
Vector planted_signal_direction(const PlantedOrderSpec& spec);
Vector planted_offset(const PlantedOrderSpec& spec);

// Gold ranks replaced by independent seeded random permutations.
std::vector<RankedInstance> shuffle_gold(std::vector<RankedInstance> instances, std::uint64_t seed);

struct PlantedPreferenceSpec {
  int hidden_dim = 32;
  int pairs = 500;
  std::optional<Vector> separator;  // unit; drawn from seed when unset
  double gap = 1.0;
  double noise_sigma = 1.0;
  double label_noise = 0.0;  // in [0, 0.5)
  std::uint64_t seed = 0;
  std::string task_id = "planted-preference";
};

// winner = base + gap * separator + noise, loser = base - gap * separator +
// noise, base ~ N(0, I), noise ~ N(0, sigma^2 I) with its separator component
// removed, so the pairs are separable before label noise. The winner lands in alpha or beta by coin flip, then
// the label flips with probability label_noise. Throws kInvalidConfig.
std::vector<PreferencePair> gen_planted_preference(const PlantedPreferenceSpec& spec);
Vector planted_separator(const PlantedPreferenceSpec& spec);

struct NumberPair {
  int a = 0;
  int b = 0;
  int winner = 0;  // the larger of a and b
};

// Uniform integer pairs in [low, high], resampled on a == b.
std::vector<NumberPair> gen_number_pairs(int count = 500, int low = -1000, int high = 1000,
                                         std::uint64_t seed = 0);

// Archive with every instance at a single layer.
ActivationArchive ranked_to_archive(const std::vector<RankedInstance>& instances, int layer_id,
                                    const std::string& task_id, const std::string& model_id = "synthetic");
ActivationArchive pairs_to_archive(const std::vector<PreferencePair>& pairs, int layer_id,
                                   const std::string& task_id, const std::string& model_id = "synthetic");

struct MultilayerSpec {
  PlantedOrderSpec order;
  int layers = 4;
  int signal_layer = 2;
  double layer_noise_sigma = 1.0;  // scale of the signal-free layers
};

// Layers 0..layers-1. The signal layer holds gen_planted_order embeddings;
// every other layer holds isotropic Gaussian noise with the same gold ranks.
ActivationArchive gen_multilayer_planted(const MultilayerSpec& spec);

struct PlantedGroupsSpec {
  int hidden_dim = 32;
  std::vector<std::string> group_names{"group_a", "group_b"};
  // Per-group shift along the direction; larger means preferred by a probe
  // aligned with the direction.
  std::vector<double> group_bias{0.0, 0.0};
  int words_per_group = 10;
  std::optional<Vector> direction;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;
  std::string task_id = "planted-groups";
};

// Unlabeled W = 2 instances for every cross-group word pair, with item_groups
// set and positions randomized.
ActivationArchive gen_planted_groups(const PlantedGroupsSpec& spec);

}  // namespace probekit
