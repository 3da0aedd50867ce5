#include "probekit/activation_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "json.hpp"

#include "probekit/errors.hpp"

namespace probekit {
namespace {

using nlohmann::json;

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t payload_bytes(const InstanceMeta& meta, std::size_t layer_count, int hidden_dim) {
  return static_cast<std::uint64_t>(layer_count) * meta.item_count() *
         static_cast<std::uint64_t>(hidden_dim) * sizeof(float);
}

void put_float_le(float value, unsigned char* out) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
  for (int b = 0; b < 4; ++b) out[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFFu);
}

float get_float_le(const unsigned char* in) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(in[b]) << (8 * b);
  return std::bit_cast<float>(bits);
}

std::string checksum_hex(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xF];
    value >>= 4;
  }
  return out;
}

std::uint64_t parse_checksum_hex(const std::string& text) {
  if (text.size() != 16) throw Error(ErrorCode::kCorruptArchive, "blob_checksum must be 16 hex digits");
  std::uint64_t value = 0;
  for (char ch : text) {
    int digit;
    if (ch >= '0' && ch <= '9') digit = ch - '0';
    else if (ch >= 'a' && ch <= 'f') digit = ch - 'a' + 10;
    else if (ch >= 'A' && ch <= 'F') digit = ch - 'A' + 10;
    else throw Error(ErrorCode::kCorruptArchive, "blob_checksum is not hex");
    value = (value << 4) | static_cast<std::uint64_t>(digit);
  }
  return value;
}

std::string source_name(LabelSource source) {
  return source == LabelSource::kModel ? "model" : "human";
}

LabelSource parse_source(const std::string& text) {
  if (text == "model") return LabelSource::kModel;
  if (text == "human") return LabelSource::kHuman;
  throw Error(ErrorCode::kCorruptArchive, "unknown label source '" + text + "'");
}

json gold_to_json(const GoldLabel& gold) {
  return std::visit(
      [](const auto& g) -> json {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, PermutationGold>) {
          return json{{"kind", "permutation"}, {"ranks", g.ranks}};
        } else if constexpr (std::is_same_v<T, PreferenceGold>) {
          return json{{"kind", "preference"},
                      {"winner_index", g.winner_index},
                      {"source", source_name(g.source)}};
        } else {
          return json{{"kind", "unlabeled"}, {"reason", g.reason}};
        }
      },
      gold);
}

GoldLabel gold_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "permutation") return PermutationGold{j.at("ranks").get<Permutation>()};
  if (kind == "preference") {
    return PreferenceGold{j.at("winner_index").get<int>(),
                          parse_source(j.at("source").get<std::string>())};
  }
  if (kind == "unlabeled") return UnlabeledGold{j.value("reason", std::string())};
  throw Error(ErrorCode::kCorruptArchive, "unknown gold kind '" + kind + "'");
}

// Structural checks shared by the writer and reader.
void validate_manifest(const ArchiveManifest& m, ErrorCode code) {
  if (m.hidden_dim <= 0) throw Error(code, "hidden_dim must be positive");
  for (std::size_t i = 0; i < m.layer_ids.size(); ++i) {
    if (m.layer_ids[i] < 0) throw Error(code, "layer ids must be non-negative");
    if (i > 0 && m.layer_ids[i] <= m.layer_ids[i - 1]) {
      throw Error(code, "layer_ids must be strictly ascending");
    }
  }
  std::set<std::string> ids;
  for (const auto& inst : m.instances) {
    if (!ids.insert(inst.id).second) throw Error(code, "duplicate instance id '" + inst.id + "'");
    const std::size_t w = inst.item_count();
    if (w < 2) throw Error(code, "instance '" + inst.id + "' has fewer than 2 items");
    if (!inst.item_groups.empty() && inst.item_groups.size() != w) {
      throw Error(code, "instance '" + inst.id + "' item_groups length differs from W");
    }
    if (const auto* perm = std::get_if<PermutationGold>(&inst.gold)) {
      if (perm->ranks.size() != w || !is_permutation_of_ranks(perm->ranks)) {
        throw Error(code, "instance '" + inst.id + "' ranks are not a bijection onto 1..W");
      }
    } else if (const auto* pref = std::get_if<PreferenceGold>(&inst.gold)) {
      if (w != 2) throw Error(code, "instance '" + inst.id + "' preference gold requires W = 2");
      if (pref->winner_index != 0 && pref->winner_index != 1) {
        throw Error(code, "instance '" + inst.id + "' winner_index must be 0 or 1");
      }
    }
  }
}

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIoError, "read failed for " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  out.flush();
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

}  // namespace

bool is_permutation_of_ranks(const Permutation& ranks) {
  std::vector<bool> seen(ranks.size() + 1, false);
  for (int r : ranks) {
    if (r < 1 || static_cast<std::size_t>(r) > ranks.size() || seen[static_cast<std::size_t>(r)]) {
      return false;
    }
    seen[static_cast<std::size_t>(r)] = true;
  }
  return true;
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t hash = kFnvOffset;
  for (unsigned char b : bytes) {
    hash ^= b;
    hash *= kFnvPrime;
  }
  return hash;
}

ActivationArchive ActivationArchive::from_tensors(ArchiveManifest manifest,
                                                  std::span<const InstanceTensor> tensors) {
  if (manifest.format_version != kArchiveFormatVersion) {
    throw Error(ErrorCode::kUnsupportedVersion,
                "format_version " + std::to_string(manifest.format_version));
  }
  validate_manifest(manifest, ErrorCode::kInvalidShape);
  if (tensors.size() != manifest.instances.size()) {
    throw Error(ErrorCode::kInvalidShape, "tensor count differs from instance count");
  }
  const std::size_t layer_count = manifest.layer_ids.size();
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& t = tensors[i];
    const auto& meta = manifest.instances[i];
    if (static_cast<std::size_t>(t.layers) != layer_count ||
        static_cast<std::size_t>(t.items) != meta.item_count() || t.dim != manifest.hidden_dim ||
        t.values.size() != static_cast<std::size_t>(t.layers) * t.items * t.dim) {
      throw Error(ErrorCode::kInvalidShape, "tensor shape mismatch for instance '" + meta.id + "'");
    }
    for (float v : t.values) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kInvalidShape, "non-finite value in instance '" + meta.id + "'");
      }
    }
    total += payload_bytes(meta, layer_count, manifest.hidden_dim);
  }

  std::vector<unsigned char> blob(static_cast<std::size_t>(total));
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    manifest.instances[i].byte_offset = offset;
    unsigned char* out = blob.data() + offset;
    for (float v : tensors[i].values) {
      put_float_le(v, out);
      out += sizeof(float);
    }
    offset += payload_bytes(manifest.instances[i], layer_count, manifest.hidden_dim);
  }
  manifest.blob_checksum = fnv1a64(blob);
  return ActivationArchive(std::move(manifest), std::move(blob));
}

ActivationArchive ActivationArchive::from_blob(ArchiveManifest manifest,
                                               std::vector<unsigned char> blob) {
  if (manifest.format_version != kArchiveFormatVersion) {
    throw Error(ErrorCode::kUnsupportedVersion,
                "format_version " + std::to_string(manifest.format_version));
  }
  validate_manifest(manifest, ErrorCode::kCorruptArchive);
  const std::size_t layer_count = manifest.layer_ids.size();
  std::uint64_t total = 0;
  for (const auto& meta : manifest.instances) {
    const std::uint64_t size = payload_bytes(meta, layer_count, manifest.hidden_dim);
    if (meta.byte_offset + size > blob.size()) {
      throw Error(ErrorCode::kCorruptArchive, "instance '" + meta.id + "' overruns the blob");
    }
    total += size;
  }
  if (total != blob.size()) {
    throw Error(ErrorCode::kCorruptArchive, "blob length " + std::to_string(blob.size()) +
                                                " differs from payload total " + std::to_string(total));
  }
  if (fnv1a64(blob) != manifest.blob_checksum) {
    throw Error(ErrorCode::kCorruptArchive, "blob checksum mismatch");
  }
  return ActivationArchive(std::move(manifest), std::move(blob));
}

std::size_t ActivationArchive::layer_position(int layer_id) const {
  const auto& ids = manifest_.layer_ids;
  auto it = std::lower_bound(ids.begin(), ids.end(), layer_id);
  if (it == ids.end() || *it != layer_id) {
    throw Error(ErrorCode::kLayerNotFound, "layer " + std::to_string(layer_id) + " not in archive");
  }
  return static_cast<std::size_t>(it - ids.begin());
}

float ActivationArchive::raw_value(std::size_t instance, std::size_t layer_pos, std::size_t item,
                                   std::size_t d) const {
  const auto& meta = manifest_.instances.at(instance);
  const std::size_t h = static_cast<std::size_t>(manifest_.hidden_dim);
  const std::size_t index = (layer_pos * meta.item_count() + item) * h + d;
  return get_float_le(blob_.data() + meta.byte_offset + index * sizeof(float));
}

Vector ActivationArchive::item_vector(std::size_t instance, int layer_id, std::size_t item) const {
  const std::size_t pos = layer_position(layer_id);
  Vector v(manifest_.hidden_dim);
  for (int d = 0; d < manifest_.hidden_dim; ++d) {
    v(d) = static_cast<double>(raw_value(instance, pos, item, static_cast<std::size_t>(d)));
  }
  return v;
}

Matrix ActivationArchive::layer_slice(std::size_t instance, int layer_id) const {
  const std::size_t pos = layer_position(layer_id);
  const auto& meta = manifest_.instances.at(instance);
  Matrix m(static_cast<Eigen::Index>(meta.item_count()), manifest_.hidden_dim);
  for (std::size_t j = 0; j < meta.item_count(); ++j) {
    for (int d = 0; d < manifest_.hidden_dim; ++d) {
      m(static_cast<Eigen::Index>(j), d) =
          static_cast<double>(raw_value(instance, pos, j, static_cast<std::size_t>(d)));
    }
  }
  return m;
}

std::filesystem::path manifest_path(const std::filesystem::path& prefix) {
  return std::filesystem::path(prefix.string() + ".manifest.json");
}

std::filesystem::path blob_path(const std::filesystem::path& prefix) {
  return std::filesystem::path(prefix.string() + ".blob");
}

std::string manifest_to_json_text(const ArchiveManifest& m) {
  json instances = json::array();
  for (const auto& inst : m.instances) {
    json j{{"id", inst.id},
           {"task_id", inst.task_id},
           {"item_labels", inst.item_labels},
           {"gold", gold_to_json(inst.gold)},
           {"byte_offset", inst.byte_offset}};
    if (!inst.item_groups.empty()) j["item_groups"] = inst.item_groups;
    instances.push_back(std::move(j));
  }
  json root{{"format_version", m.format_version},
            {"model_id", m.model_id},
            {"hidden_dim", m.hidden_dim},
            {"layer_ids", m.layer_ids},
            {"instances", std::move(instances)},
            {"blob_checksum", checksum_hex(m.blob_checksum)}};
  return root.dump(2) + "\n";
}

ArchiveManifest manifest_from_json_text(const std::string& text) {
  try {
    const json root = json::parse(text);
    ArchiveManifest m;
    m.format_version = root.at("format_version").get<int>();
    if (m.format_version != kArchiveFormatVersion) {
      throw Error(ErrorCode::kUnsupportedVersion,
                  "format_version " + std::to_string(m.format_version));
    }
    m.model_id = root.at("model_id").get<std::string>();
    m.hidden_dim = root.at("hidden_dim").get<int>();
    m.layer_ids = root.at("layer_ids").get<std::vector<int>>();
    m.blob_checksum = parse_checksum_hex(root.at("blob_checksum").get<std::string>());
    for (const auto& j : root.at("instances")) {
      InstanceMeta inst;
      inst.id = j.at("id").get<std::string>();
      inst.task_id = j.at("task_id").get<std::string>();
      inst.item_labels = j.at("item_labels").get<std::vector<std::string>>();
      inst.gold = gold_from_json(j.at("gold"));
      inst.byte_offset = j.at("byte_offset").get<std::uint64_t>();
      if (j.contains("item_groups")) inst.item_groups = j["item_groups"].get<std::vector<std::string>>();
      m.instances.push_back(std::move(inst));
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptArchive, std::string("malformed manifest: ") + e.what());
  }
}

void write_archive(const ActivationArchive& archive, const std::filesystem::path& prefix) {
  const std::string text = manifest_to_json_text(archive.manifest());
  write_file_bytes(blob_path(prefix), archive.blob().data(), archive.blob().size());
  write_file_bytes(manifest_path(prefix), text.data(), text.size());
}

void write_archive(const ArchiveManifest& manifest, std::span<const InstanceTensor> tensors,
                   const std::filesystem::path& prefix) {
  write_archive(ActivationArchive::from_tensors(manifest, tensors), prefix);
}

ActivationArchive read_archive(const std::filesystem::path& prefix) {
  const auto manifest_bytes = read_file_bytes(manifest_path(prefix));
  ArchiveManifest manifest =
      manifest_from_json_text(std::string(manifest_bytes.begin(), manifest_bytes.end()));
  return ActivationArchive::from_blob(std::move(manifest), read_file_bytes(blob_path(prefix)));
}

LayerSlice slice_layer(const ActivationArchive& archive, int layer_id,
                       const std::optional<std::string>& task_filter) {
  archive.layer_position(layer_id);
  LayerSlice out;
  const auto& instances = archive.manifest().instances;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& meta = instances[i];
    if (task_filter && meta.task_id != *task_filter) continue;
    Matrix slice = archive.layer_slice(i, layer_id);
    if (meta.item_count() == 2 && !meta.item_groups.empty()) {
      GroupedPair g;
      g.id = meta.id;
      for (int k = 0; k < 2; ++k) {
        g.labels[k] = meta.item_labels[static_cast<std::size_t>(k)];
        g.groups[k] = meta.item_groups[static_cast<std::size_t>(k)];
        g.embeddings[k] = slice.row(k).transpose();
      }
      out.grouped.push_back(std::move(g));
    }
    if (const auto* perm = std::get_if<PermutationGold>(&meta.gold)) {
      out.ranked.push_back(RankedInstance{meta.id, std::move(slice), perm->ranks});
    } else if (const auto* pref = std::get_if<PreferenceGold>(&meta.gold)) {
      PreferencePair p;
      p.id = meta.id;
      p.h_alpha = slice.row(0).transpose();
      p.h_beta = slice.row(1).transpose();
      p.winner = pref->winner_index == 0 ? Side::kAlpha : Side::kBeta;
      p.source = pref->source;
      p.label_alpha = meta.item_labels[0];
      p.label_beta = meta.item_labels[1];
      out.pairs.push_back(std::move(p));
    }
  }
  return out;
}

int middle_layer(const ArchiveManifest& manifest) {
  if (manifest.layer_ids.empty()) throw Error(ErrorCode::kLayerNotFound, "archive has no layers");
  return manifest.layer_ids[manifest.layer_ids.size() / 2];
}

}  // namespace probekit
