#include "probekit/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "probekit/errors.hpp"
#include "probekit/random.hpp"

namespace probekit {
namespace {

// Substream ids; instance streams start at kInstanceStream.
constexpr std::uint64_t kDirectionStream = 100;
constexpr std::uint64_t kOffsetStream = 101;
constexpr std::uint64_t kInstanceStream = 1000;
constexpr std::uint64_t kLayerStream = 500000;

Vector gaussian_vector(int dim, double sigma, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = sigma * normal(rng);
  return v;
}

Vector checked_unit(const Vector& v, int dim, const char* what) {
  if (v.size() != dim) throw Error(ErrorCode::kInvalidConfig, std::string(what) + " has the wrong dimension");
  const double n = v.norm();
  if (!(n > 0.0)) throw Error(ErrorCode::kInvalidConfig, std::string(what) + " must be non-zero");
  return v / n;
}

InstanceTensor single_layer_tensor(const Matrix& embeddings) {
  InstanceTensor t(1, static_cast<int>(embeddings.rows()), static_cast<int>(embeddings.cols()));
  for (Eigen::Index j = 0; j < embeddings.rows(); ++j) {
    for (Eigen::Index d = 0; d < embeddings.cols(); ++d) {
      t.at(0, static_cast<int>(j), static_cast<int>(d)) = static_cast<float>(embeddings(j, d));
    }
  }
  return t;
}

std::vector<std::string> item_labels(const std::string& id, std::size_t count) {
  std::vector<std::string> labels;
  for (std::size_t j = 0; j < count; ++j) labels.push_back(id + "/item" + std::to_string(j));
  return labels;
}

}  // namespace

Vector random_unit_vector(int dim, std::uint64_t seed) {
  if (dim < 1) throw Error(ErrorCode::kInvalidConfig, "dimension must be positive");
  Rng rng(derive_seed(seed, kDirectionStream));
  Vector v;
  do {
    v = gaussian_vector(dim, 1.0, rng);
  } while (!(v.norm() > 1e-8));
  return v / v.norm();
}

Vector orthogonal_unit_vector(const Vector& reference, std::uint64_t seed) {
  const int dim = static_cast<int>(reference.size());
  if (dim < 2) throw Error(ErrorCode::kInvalidConfig, "orthogonal direction needs dimension >= 2");
  const Vector unit_ref = reference / reference.norm();
  Rng rng(derive_seed(seed, kOffsetStream));
  Vector v;
  do {
    v = gaussian_vector(dim, 1.0, rng);
    v -= v.dot(unit_ref) * unit_ref;
  } while (!(v.norm() > 1e-8));
  return v / v.norm();
}

Vector planted_signal_direction(const PlantedOrderSpec& spec) {
  if (spec.signal_direction) return checked_unit(*spec.signal_direction, spec.hidden_dim, "signal_direction");
  return random_unit_vector(spec.hidden_dim, spec.seed);
}

Vector planted_offset(const PlantedOrderSpec& spec) {
  if (spec.offset_norm == 0.0 || spec.hidden_dim < 2) return Vector::Zero(spec.hidden_dim);
  return spec.offset_norm * orthogonal_unit_vector(planted_signal_direction(spec), spec.seed);
}

std::vector<RankedInstance> gen_planted_order(const PlantedOrderSpec& spec) {
  if (spec.hidden_dim < 1 || spec.items < 2 || spec.instances < 0) {
    throw Error(ErrorCode::kInvalidConfig, "planted order needs H >= 1, W >= 2, N >= 0");
  }
  if (spec.noise_sigma < 0.0 || !(spec.rank_spacing > 0.0) || spec.offset_norm < 0.0) {
    throw Error(ErrorCode::kInvalidConfig, "planted order needs noise >= 0, spacing > 0, offset >= 0");
  }
  const Vector direction = planted_signal_direction(spec);
  const Vector offset = planted_offset(spec);
  std::vector<RankedInstance> out;
  out.reserve(static_cast<std::size_t>(spec.instances));
  for (int i = 0; i < spec.instances; ++i) {
    Rng rng(derive_seed(spec.seed, kInstanceStream + static_cast<std::uint64_t>(i)));
    Permutation ranks(static_cast<std::size_t>(spec.items));
    std::iota(ranks.begin(), ranks.end(), 1);
    std::shuffle(ranks.begin(), ranks.end(), rng);
    RankedInstance inst;
    inst.id = spec.task_id + "-" + std::to_string(i);
    inst.embeddings.resize(spec.items, spec.hidden_dim);
    for (int j = 0; j < spec.items; ++j) {
      const double r = static_cast<double>(ranks[static_cast<std::size_t>(j)]);
      inst.embeddings.row(j) =
          (offset + r * spec.rank_spacing * direction + gaussian_vector(spec.hidden_dim, spec.noise_sigma, rng))
              .transpose();
    }
    inst.gold_ranks = std::move(ranks);
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<RankedInstance> shuffle_gold(std::vector<RankedInstance> instances, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kInstanceStream));
  for (auto& inst : instances) std::shuffle(inst.gold_ranks.begin(), inst.gold_ranks.end(), rng);
  return instances;
}

Vector planted_separator(const PlantedPreferenceSpec& spec) {
  if (spec.separator) return checked_unit(*spec.separator, spec.hidden_dim, "separator");
  return random_unit_vector(spec.hidden_dim, spec.seed);
}

std::vector<PreferencePair> gen_planted_preference(const PlantedPreferenceSpec& spec) {
  if (spec.hidden_dim < 1 || spec.pairs < 0) throw Error(ErrorCode::kInvalidConfig, "planted preference needs H >= 1");
  if (spec.gap < 0.0 || spec.noise_sigma < 0.0) throw Error(ErrorCode::kInvalidConfig, "gap and noise must be >= 0");
  if (!(spec.label_noise >= 0.0 && spec.label_noise < 0.5)) {
    throw Error(ErrorCode::kInvalidConfig, "label_noise must lie in [0, 0.5)");
  }
  const Vector separator = planted_separator(spec);
  std::vector<PreferencePair> out;
  out.reserve(static_cast<std::size_t>(spec.pairs));
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution flip(spec.label_noise);
  for (int i = 0; i < spec.pairs; ++i) {
    Rng rng(derive_seed(spec.seed, kInstanceStream + static_cast<std::uint64_t>(i)));
    const Vector base = gaussian_vector(spec.hidden_dim, 1.0, rng);
    Vector noise_w = gaussian_vector(spec.hidden_dim, spec.noise_sigma, rng);
    Vector noise_l = gaussian_vector(spec.hidden_dim, spec.noise_sigma, rng);
    noise_w -= noise_w.dot(separator) * separator;
    noise_l -= noise_l.dot(separator) * separator;
    const Vector winner = base + spec.gap * separator + noise_w;
    const Vector loser = base - spec.gap * separator + noise_l;
    PreferencePair p;
    p.id = spec.task_id + "-" + std::to_string(i);
    const bool winner_alpha = coin(rng);
    p.h_alpha = winner_alpha ? winner : loser;
    p.h_beta = winner_alpha ? loser : winner;
    p.winner = winner_alpha ? Side::kAlpha : Side::kBeta;
    if (flip(rng)) p.winner = p.winner == Side::kAlpha ? Side::kBeta : Side::kAlpha;
    p.source = LabelSource::kHuman;
    p.label_alpha = p.id + "/a";
    p.label_beta = p.id + "/b";
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<NumberPair> gen_number_pairs(int count, int low, int high, std::uint64_t seed) {
  if (!(low < high)) throw Error(ErrorCode::kInvalidConfig, "number pairs need low < high");
  if (count < 0) throw Error(ErrorCode::kInvalidConfig, "count must be >= 0");
  Rng rng(derive_seed(seed, 0));
  std::uniform_int_distribution<int> uniform(low, high);
  std::vector<NumberPair> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    NumberPair p;
    do {
      p.a = uniform(rng);
      p.b = uniform(rng);
    } while (p.a == p.b);
    p.winner = std::max(p.a, p.b);
    out.push_back(p);
  }
  return out;
}

ActivationArchive ranked_to_archive(const std::vector<RankedInstance>& instances, int layer_id,
                                    const std::string& task_id, const std::string& model_id) {
  ArchiveManifest m;
  m.model_id = model_id;
  m.hidden_dim = instances.empty() ? 1 : static_cast<int>(instances.front().embeddings.cols());
  m.layer_ids = {layer_id};
  std::vector<InstanceTensor> tensors;
  for (const auto& inst : instances) {
    InstanceMeta meta;
    meta.id = inst.id;
    meta.task_id = task_id;
    meta.item_labels = item_labels(inst.id, inst.gold_ranks.size());
    meta.gold = PermutationGold{inst.gold_ranks};
    m.instances.push_back(std::move(meta));
    tensors.push_back(single_layer_tensor(inst.embeddings));
  }
  return ActivationArchive::from_tensors(std::move(m), tensors);
}

ActivationArchive pairs_to_archive(const std::vector<PreferencePair>& pairs, int layer_id,
                                   const std::string& task_id, const std::string& model_id) {
  ArchiveManifest m;
  m.model_id = model_id;
  m.hidden_dim = pairs.empty() ? 1 : static_cast<int>(pairs.front().h_alpha.size());
  m.layer_ids = {layer_id};
  std::vector<InstanceTensor> tensors;
  for (const auto& p : pairs) {
    InstanceMeta meta;
    meta.id = p.id;
    meta.task_id = task_id;
    meta.item_labels = {p.label_alpha.empty() ? p.id + "/a" : p.label_alpha,
                        p.label_beta.empty() ? p.id + "/b" : p.label_beta};
    meta.gold = PreferenceGold{p.winner == Side::kAlpha ? 0 : 1, p.source};
    m.instances.push_back(std::move(meta));
    Matrix rows(2, p.h_alpha.size());
    rows.row(0) = p.h_alpha.transpose();
    rows.row(1) = p.h_beta.transpose();
    tensors.push_back(single_layer_tensor(rows));
  }
  return ActivationArchive::from_tensors(std::move(m), tensors);
}

ActivationArchive gen_multilayer_planted(const MultilayerSpec& spec) {
  if (spec.layers < 1 || spec.signal_layer < 0 || spec.signal_layer >= spec.layers) {
    throw Error(ErrorCode::kInvalidConfig, "signal_layer must lie within the layer count");
  }
  const std::vector<RankedInstance> planted = gen_planted_order(spec.order);
  const int h = spec.order.hidden_dim;
  ArchiveManifest m;
  m.model_id = "synthetic-multilayer";
  m.hidden_dim = h;
  for (int l = 0; l < spec.layers; ++l) m.layer_ids.push_back(l);
  std::vector<InstanceTensor> tensors;
  for (std::size_t i = 0; i < planted.size(); ++i) {
    const auto& inst = planted[i];
    InstanceMeta meta;
    meta.id = inst.id;
    meta.task_id = spec.order.task_id;
    meta.item_labels = item_labels(inst.id, inst.gold_ranks.size());
    meta.gold = PermutationGold{inst.gold_ranks};
    m.instances.push_back(std::move(meta));

    const int w = static_cast<int>(inst.embeddings.rows());
    InstanceTensor t(spec.layers, w, h);
    for (int l = 0; l < spec.layers; ++l) {
      Rng rng(derive_seed(spec.order.seed, kLayerStream + static_cast<std::uint64_t>(l) * 1000003u + i));
      for (int j = 0; j < w; ++j) {
        const Vector row = l == spec.signal_layer ? Vector(inst.embeddings.row(j).transpose())
                                                  : gaussian_vector(h, spec.layer_noise_sigma, rng);
        for (int d = 0; d < h; ++d) t.at(l, j, d) = static_cast<float>(row(d));
      }
    }
    tensors.push_back(std::move(t));
  }
  return ActivationArchive::from_tensors(std::move(m), tensors);
}

ActivationArchive gen_planted_groups(const PlantedGroupsSpec& spec) {
  const std::size_t n_groups = spec.group_names.size();
  if (n_groups < 2 || spec.group_bias.size() != n_groups) {
    throw Error(ErrorCode::kInvalidConfig, "need >= 2 groups with one bias each");
  }
  if (spec.words_per_group < 1) throw Error(ErrorCode::kInvalidConfig, "words_per_group must be >= 1");
  const Vector direction = spec.direction ? checked_unit(*spec.direction, spec.hidden_dim, "direction")
                                          : random_unit_vector(spec.hidden_dim, spec.seed);
  std::vector<std::vector<Vector>> words(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) {
    for (int w = 0; w < spec.words_per_group; ++w) {
      Rng rng(derive_seed(spec.seed, kInstanceStream + g * 100003u + static_cast<std::uint64_t>(w)));
      words[g].push_back(spec.group_bias[g] * direction + gaussian_vector(spec.hidden_dim, spec.noise_sigma, rng));
    }
  }
  ArchiveManifest m;
  m.model_id = "synthetic-groups";
  m.hidden_dim = spec.hidden_dim;
  m.layer_ids = {0};
  std::vector<InstanceTensor> tensors;
  Rng position_rng(derive_seed(spec.seed, kOffsetStream));
  std::bernoulli_distribution coin(0.5);
  for (std::size_t g = 0; g < n_groups; ++g) {
    for (std::size_t h = g + 1; h < n_groups; ++h) {
      for (int a = 0; a < spec.words_per_group; ++a) {
        for (int b = 0; b < spec.words_per_group; ++b) {
          const bool swap = coin(position_rng);
          const std::size_t first_group = swap ? h : g;
          const std::size_t second_group = swap ? g : h;
          const int first_word = swap ? b : a;
          const int second_word = swap ? a : b;
          InstanceMeta meta;
          meta.id = spec.task_id + "-" + std::to_string(tensors.size());
          meta.task_id = spec.task_id;
          meta.item_labels = {spec.group_names[first_group] + "/w" + std::to_string(first_word),
                              spec.group_names[second_group] + "/w" + std::to_string(second_word)};
          meta.item_groups = {spec.group_names[first_group], spec.group_names[second_group]};
          meta.gold = UnlabeledGold{"test"};
          m.instances.push_back(std::move(meta));
          Matrix rows(2, spec.hidden_dim);
          rows.row(0) = words[first_group][static_cast<std::size_t>(first_word)].transpose();
          rows.row(1) = words[second_group][static_cast<std::size_t>(second_word)].transpose();
          tensors.push_back(single_layer_tensor(rows));
        }
      }
    }
  }
  return ActivationArchive::from_tensors(std::move(m), tensors);
}

}  // namespace probekit
