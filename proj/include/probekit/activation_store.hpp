#pragma once

// Activation archives: a JSON manifest beside a raw blob of little-endian
// float32 values laid out (instance, layer, item, dim) row-major.
//
//   <name>.manifest.json   metadata, gold labels, byte offsets, checksum
//   <name>.blob            payloads, instance after instance
//
// Each instance payload holds |layer_ids| * W * H floats, where W is the
// number of items of that instance. The blob checksum is 64-bit FNV-1a over
// the blob bytes and is serialized as 16 lowercase hex digits.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "probekit/types.hpp"

namespace probekit {

inline constexpr int kArchiveFormatVersion = 1;

struct PermutationGold {
  Permutation ranks;
};

struct PreferenceGold {
  int winner_index = 0;  // 0 or 1
  LabelSource source = LabelSource::kHuman;
};

// No usable label: extractor abstentions, or controversial test pairs.
struct UnlabeledGold {
  std::string reason;
};

using GoldLabel = std::variant<PermutationGold, PreferenceGold, UnlabeledGold>;

struct InstanceMeta {
  std::string id;
  std::string task_id;
  std::vector<std::string> item_labels;
  GoldLabel gold;
  std::uint64_t byte_offset = 0;
  // Optional group name per item; empty when the archive carries no groups.
  std::vector<std::string> item_groups;

  std::size_t item_count() const { return item_labels.size(); }
};

struct ArchiveManifest {
  int format_version = kArchiveFormatVersion;
  std::string model_id;
  int hidden_dim = 0;
  std::vector<int> layer_ids;
  std::vector<InstanceMeta> instances;
  std::uint64_t blob_checksum = 0;
};

// One instance's activations, shape layers x items x dim, row-major.
struct InstanceTensor {
  int layers = 0;
  int items = 0;
  int dim = 0;
  std::vector<float> values;

  InstanceTensor() = default;
  InstanceTensor(int num_layers, int num_items, int hidden_dim)
      : layers(num_layers), items(num_items), dim(hidden_dim),
        values(static_cast<std::size_t>(num_layers) * num_items * hidden_dim, 0.0f) {}

  float& at(int layer_pos, int item, int d) {
    return values[(static_cast<std::size_t>(layer_pos) * items + item) * dim + d];
  }
  float at(int layer_pos, int item, int d) const {
    return values[(static_cast<std::size_t>(layer_pos) * items + item) * dim + d];
  }
};

std::uint64_t fnv1a64(std::span<const unsigned char> bytes);

// Immutable in-memory archive. Payload values are decoded from the blob bytes
// on access and widened to double.
class ActivationArchive {
 public:
  // Validates shapes and finiteness, assigns byte offsets in manifest order
  // and computes the checksum. Throws kInvalidShape.
  static ActivationArchive from_tensors(ArchiveManifest manifest,
                                        std::span<const InstanceTensor> tensors);

  // Validates the manifest against an existing blob. Throws kCorruptArchive or
  // kUnsupportedVersion.
  static ActivationArchive from_blob(ArchiveManifest manifest,
                                     std::vector<unsigned char> blob);

  const ArchiveManifest& manifest() const { return manifest_; }
  std::span<const unsigned char> blob() const { return blob_; }

  int hidden_dim() const { return manifest_.hidden_dim; }
  std::size_t instance_count() const { return manifest_.instances.size(); }

  // Position of layer_id inside layer_ids. Throws kLayerNotFound.
  std::size_t layer_position(int layer_id) const;

  float raw_value(std::size_t instance, std::size_t layer_pos, std::size_t item,
                  std::size_t d) const;
  Vector item_vector(std::size_t instance, int layer_id, std::size_t item) const;
  // W x H slice of one instance at one layer.
  Matrix layer_slice(std::size_t instance, int layer_id) const;

 private:
  ActivationArchive(ArchiveManifest manifest, std::vector<unsigned char> blob)
      : manifest_(std::move(manifest)), blob_(std::move(blob)) {}

  ArchiveManifest manifest_;
  std::vector<unsigned char> blob_;
};

std::filesystem::path manifest_path(const std::filesystem::path& prefix);
std::filesystem::path blob_path(const std::filesystem::path& prefix);

// Writes <prefix>.manifest.json and <prefix>.blob. Throws kInvalidShape or
// kIoError.
void write_archive(const ArchiveManifest& manifest,
                   std::span<const InstanceTensor> tensors,
                   const std::filesystem::path& prefix);
void write_archive(const ActivationArchive& archive, const std::filesystem::path& prefix);

// Reads and verifies an archive. Throws kIoError, kCorruptArchive or
// kUnsupportedVersion.
ActivationArchive read_archive(const std::filesystem::path& prefix);

std::string manifest_to_json_text(const ArchiveManifest& manifest);
ArchiveManifest manifest_from_json_text(const std::string& text);

// Pairs whose items carry group names, used for bias tests.
struct GroupedPair {
  std::string id;
  std::string labels[2];
  std::string groups[2];
  Vector embeddings[2];
};

struct LayerSlice {
  std::vector<RankedInstance> ranked;
  std::vector<PreferencePair> pairs;
  std::vector<GroupedPair> grouped;  // W = 2 instances with item_groups
};

// Slices every instance (manifest order) whose task matches the filter.
// Permutation gold yields RankedInstance, preference gold yields
// PreferencePair. Any W = 2 instance with item_groups also yields a
// GroupedPair. Unlabeled instances are excluded from training outputs.
LayerSlice slice_layer(const ActivationArchive& archive, int layer_id,
                       const std::optional<std::string>& task_filter = std::nullopt);

// Layer at position floor(|layer_ids| / 2).
int middle_layer(const ArchiveManifest& manifest);

}  // namespace probekit
