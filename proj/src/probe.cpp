#include "probekit/probe.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "probekit/errors.hpp"
#include "probekit/random.hpp"

namespace probekit {
namespace {

using nlohmann::json;

constexpr int kProbeFormatVersion = 1;

DistanceKind order_kind(ProbeFamily family) {
  switch (family) {
    case ProbeFamily::kOrderSquaredL2: return DistanceKind::kSquaredL2;
    case ProbeFamily::kOrderCosine: return DistanceKind::kCosine;
    case ProbeFamily::kOrderDot: return DistanceKind::kDot;
    default: break;
  }
  throw Error(ErrorCode::kInvalidConfig, "not an order probe family");
}

std::string container_kind(ProbeFamily family) {
  switch (family) {
    case ProbeFamily::kOrderSquaredL2: return "squared_l2";
    case ProbeFamily::kOrderCosine: return "cosine";
    case ProbeFamily::kOrderDot: return "dot";
    case ProbeFamily::kBradleyTerry: return "bradley_terry";
    case ProbeFamily::kMaxMargin: return "max_margin";
    case ProbeFamily::kConcatLogReg: return "concat_logreg";
    case ProbeFamily::kWeat: return "weat";
  }
  return "unknown";
}

ProbeFamily family_from_container_kind(const std::string& kind) {
  if (kind == "squared_l2") return ProbeFamily::kOrderSquaredL2;
  if (kind == "cosine") return ProbeFamily::kOrderCosine;
  if (kind == "dot") return ProbeFamily::kOrderDot;
  if (kind == "bradley_terry") return ProbeFamily::kBradleyTerry;
  if (kind == "max_margin") return ProbeFamily::kMaxMargin;
  if (kind == "concat_logreg") return ProbeFamily::kConcatLogReg;
  if (kind == "weat") return ProbeFamily::kWeat;
  throw Error(ErrorCode::kInvalidConfig, "unknown probe kind '" + kind + "'");
}

std::string to_hex(const std::vector<double>& values) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(values.size() * 16);
  for (double v : values) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      const unsigned byte = static_cast<unsigned>((bits >> (8 * b)) & 0xFFu);
      out.push_back(kDigits[byte >> 4]);
      out.push_back(kDigits[byte & 0xF]);
    }
  }
  return out;
}

int hex_digit(char ch) {
  if (ch >= '0' && ch <= '9') return ch - '0';
  if (ch >= 'a' && ch <= 'f') return ch - 'a' + 10;
  if (ch >= 'A' && ch <= 'F') return ch - 'A' + 10;
  throw Error(ErrorCode::kInvalidShape, "params_hex contains a non-hex character");
}

std::vector<double> from_hex(const std::string& text) {
  if (text.size() % 16 != 0) throw Error(ErrorCode::kInvalidShape, "params_hex length is not a multiple of 16");
  std::vector<double> out(text.size() / 16);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      const std::size_t pos = i * 16 + static_cast<std::size_t>(b) * 2;
      const auto byte = static_cast<std::uint64_t>(hex_digit(text[pos]) * 16 + hex_digit(text[pos + 1]));
      bits |= byte << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

void append(std::vector<double>& out, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
}

std::vector<double> parameter_blob(const AnyProbe& probe) {
  std::vector<double> out;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, OrderProbe>) {
          for (Eigen::Index r = 0; r < m.projection.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.projection.cols(); ++c) out.push_back(m.projection(r, c));
          }
          append(out, m.anchor);
        } else if constexpr (std::is_same_v<T, WeatModel>) {
          for (const auto& item : m.sets.positive) append(out, item.embedding);
          for (const auto& item : m.sets.negative) append(out, item.embedding);
        } else {
          append(out, m.theta);
        }
      },
      probe.model);
  return out;
}

std::string source_name(LabelSource s) { return s == LabelSource::kModel ? "model" : "human"; }
LabelSource parse_source(const std::string& s) { return s == "model" ? LabelSource::kModel : LabelSource::kHuman; }

json preference_meta(const PreferenceTrainMeta& meta) {
  return json{{"final_nll", meta.final_nll},
              {"iterations", meta.iterations},
              {"converged", meta.converged},
              {"label_source", source_name(meta.label_source)}};
}

PreferenceTrainMeta parse_preference_meta(const json& j, std::uint64_t seed) {
  return {seed, j.at("final_nll").get<double>(), j.at("iterations").get<int>(), j.at("converged").get<bool>(),
          parse_source(j.at("label_source").get<std::string>())};
}

Vector take(const std::vector<double>& blob, std::size_t& pos, std::size_t count) {
  if (pos + count > blob.size()) throw Error(ErrorCode::kInvalidShape, "parameter blob is too short");
  Vector v(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) v(static_cast<Eigen::Index>(i)) = blob[pos + i];
  pos += count;
  return v;
}

}  // namespace

int AnyProbe::layer_id() const {
  return std::visit([](const auto& m) { return m.layer_id; }, model);
}

int AnyProbe::hidden_dim() const {
  return std::visit(
      [](const auto& m) -> int {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, OrderProbe>) return m.hidden_dim();
        else if constexpr (std::is_same_v<T, ConcatLogRegModel>) return static_cast<int>(m.theta.size() / 2);
        else if constexpr (std::is_same_v<T, WeatModel>) {
          return m.sets.positive.empty() ? 0 : static_cast<int>(m.sets.positive.front().embedding.size());
        } else return static_cast<int>(m.theta.size());
      },
      model);
}

int AnyProbe::probe_dim() const {
  return std::visit(
      [](const auto& m) -> int {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, OrderProbe>) return m.probe_dim();
        else if constexpr (std::is_same_v<T, WeatModel>) {
          return m.sets.positive.empty() ? 0 : static_cast<int>(m.sets.positive.front().embedding.size());
        } else return static_cast<int>(m.theta.size());
      },
      model);
}

AnyProbe train_probe(ProbeFamily family, const LayerSlice& slice, const TrainSettings& settings) {
  AnyProbe out;
  out.family = family;
  out.seed = settings.seed;
  out.margin = settings.margin;
  if (is_order_family(family)) {
    OrderTrainConfig cfg = settings.order;
    cfg.seed = settings.seed;
    cfg.layer_id = settings.layer_id;
    cfg.margin = settings.margin;
    out.model = train_order_probe(slice.ranked, cfg, order_kind(family));
    return out;
  }
  BTTrainConfig bt = settings.bt;
  bt.seed = settings.seed;
  bt.layer_id = settings.layer_id;
  switch (family) {
    case ProbeFamily::kBradleyTerry:
      out.model = train_bt_probe(slice.pairs, bt);
      break;
    case ProbeFamily::kMaxMargin: {
      MaxMarginConfig mm;
      mm.margin = settings.margin;
      mm.l2_penalty = bt.l2_penalty;
      mm.max_iterations = bt.max_iterations;
      mm.tol = bt.tol;
      mm.seed = bt.seed;
      mm.layer_id = bt.layer_id;
      out.model = train_maxmargin(slice.pairs, mm);
      break;
    }
    case ProbeFamily::kConcatLogReg:
      out.model = train_concat_logreg(slice.pairs, bt);
      break;
    case ProbeFamily::kWeat: {
      if (slice.pairs.empty()) throw Error(ErrorCode::kEmptyDataset, "no preference pairs to build attribute sets");
      WeatModel weat{attribute_sets_from_pairs(slice.pairs), settings.layer_id};
      validate_attribute_sets(weat.sets);
      out.model = std::move(weat);
      break;
    }
    default:
      throw Error(ErrorCode::kInvalidConfig, "unsupported probe family");
  }
  return out;
}

TrainSummary summarize_training(const AnyProbe& probe) {
  return std::visit(
      [](const auto& m) -> TrainSummary {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, OrderProbe>) {
          return {m.train_meta.final_loss, m.train_meta.epochs, true};
        } else if constexpr (std::is_same_v<T, WeatModel>) {
          return {0.0, 0, true};
        } else {
          return {m.train_meta.final_nll, m.train_meta.iterations, m.train_meta.converged};
        }
      },
      probe.model);
}

PairwisePredictor pairwise_predictor(const AnyProbe& probe) {
  return std::visit(
      [](const auto& m) -> PairwisePredictor {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, OrderProbe>) {
          throw Error(ErrorCode::kInvalidConfig, "order probes do not predict pairwise preferences");
        } else if constexpr (std::is_same_v<T, PreferenceProbe>) {
          return [m](const Vector& a, const Vector& b) { return predict(m, a, b); };
        } else if constexpr (std::is_same_v<T, ConcatLogRegModel>) {
          return [m](const Vector& a, const Vector& b) { return concat_predict(m, a, b); };
        } else {
          return [m](const Vector& a, const Vector& b) { return weat_predict(m.sets, a, b); };
        }
      },
      probe.model);
}

std::string probe_to_json_text(const AnyProbe& probe) {
  json meta = json::object();
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, OrderProbe>) {
          meta = json{{"epochs", m.train_meta.epochs},
                      {"final_loss", m.train_meta.final_loss},
                      {"normalize_embeddings", m.normalize_embeddings}};
        } else if constexpr (std::is_same_v<T, WeatModel>) {
          std::vector<std::string> pos, neg;
          for (const auto& item : m.sets.positive) pos.push_back(item.label);
          for (const auto& item : m.sets.negative) neg.push_back(item.label);
          meta = json{{"positive_labels", pos}, {"negative_labels", neg}};
        } else {
          meta = preference_meta(m.train_meta);
        }
      },
      probe.model);
  json root{{"format_version", kProbeFormatVersion},
            {"kind", container_kind(probe.family)},
            {"H", probe.hidden_dim()},
            {"d", probe.probe_dim()},
            {"layer_id", probe.layer_id()},
            {"seed", probe.seed},
            {"margin", probe.margin},
            {"meta", meta},
            {"params_hex", to_hex(parameter_blob(probe))}};
  return root.dump(2) + "\n";
}

AnyProbe probe_from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidShape, std::string("malformed probe file: ") + e.what());
  }
  try {
    if (root.at("format_version").get<int>() != kProbeFormatVersion) {
      throw Error(ErrorCode::kUnsupportedVersion, "probe format_version");
    }
    AnyProbe probe;
    probe.family = family_from_container_kind(root.at("kind").get<std::string>());
    probe.seed = root.at("seed").get<std::uint64_t>();
    probe.margin = root.at("margin").get<double>();
    const int h = root.at("H").get<int>();
    const int d = root.at("d").get<int>();
    const int layer = root.at("layer_id").get<int>();
    const json& meta = root.at("meta");
    const std::vector<double> blob = from_hex(root.at("params_hex").get<std::string>());
    if (h < 1 || d < 1) throw Error(ErrorCode::kInvalidShape, "probe dimensions must be positive");
    std::size_t pos = 0;
    const auto uh = static_cast<std::size_t>(h);
    switch (probe.family) {
      case ProbeFamily::kOrderSquaredL2:
      case ProbeFamily::kOrderCosine:
      case ProbeFamily::kOrderDot: {
        OrderProbe m;
        m.kind = order_kind(probe.family);
        m.layer_id = layer;
        m.margin = probe.margin;
        m.normalize_embeddings = meta.value("normalize_embeddings", false);
        m.train_meta = {probe.seed, meta.value("epochs", 0), meta.value("final_loss", 0.0)};
        m.projection.resize(h, d);
        const Vector flat = take(blob, pos, uh * static_cast<std::size_t>(d));
        for (int r = 0; r < h; ++r) {
          for (int c = 0; c < d; ++c) m.projection(r, c) = flat(r * d + c);
        }
        m.anchor = take(blob, pos, static_cast<std::size_t>(d));
        probe.model = std::move(m);
        break;
      }
      case ProbeFamily::kBradleyTerry:
      case ProbeFamily::kMaxMargin: {
        PreferenceProbe m;
        m.layer_id = layer;
        m.theta = take(blob, pos, uh);
        m.train_meta = parse_preference_meta(meta, probe.seed);
        probe.model = std::move(m);
        break;
      }
      case ProbeFamily::kConcatLogReg: {
        ConcatLogRegModel m;
        m.layer_id = layer;
        m.theta = take(blob, pos, 2 * uh);
        m.train_meta = parse_preference_meta(meta, probe.seed);
        probe.model = std::move(m);
        break;
      }
      case ProbeFamily::kWeat: {
        WeatModel m;
        m.layer_id = layer;
        for (const auto& label : meta.at("positive_labels")) m.sets.positive.push_back({label.get<std::string>(), take(blob, pos, uh)});
        for (const auto& label : meta.at("negative_labels")) m.sets.negative.push_back({label.get<std::string>(), take(blob, pos, uh)});
        probe.model = std::move(m);
        break;
      }
    }
    if (pos != blob.size()) throw Error(ErrorCode::kInvalidShape, "parameter blob has trailing values");
    return probe;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidShape, std::string("malformed probe file: ") + e.what());
  }
}

void save_probe(const AnyProbe& probe, const std::filesystem::path& path) {
  const std::string text = probe_to_json_text(probe);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

AnyProbe load_probe(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return probe_from_json_text(buffer.str());
}

std::uint64_t probe_parameter_hash(const AnyProbe& probe) {
  const std::vector<double> blob = parameter_blob(probe);
  std::vector<unsigned char> bytes(blob.size() * sizeof(double));
  if (!blob.empty()) std::memcpy(bytes.data(), blob.data(), bytes.size());
  return fnv1a64(bytes);
}

EvalResult evaluate_probe(const AnyProbe& probe, const LayerSlice& slice, std::uint64_t seed, double confidence) {
  EvalResult out;
  if (is_order_family(probe.family)) {
    const auto& order = std::get<OrderProbe>(probe.model);
    if (slice.ranked.empty()) throw Error(ErrorCode::kEmptyDataset, "no ranked instances to evaluate");
    out.metric = "spearman";
    double total = 0.0;
    for (const auto& inst : slice.ranked) {
      const double rho = spearman_rho(decode_order(order, inst.embeddings), inst.gold_ranks);
      out.ids.push_back(inst.id);
      out.per_item.push_back(rho);
      total += rho;
    }
    out.count = slice.ranked.size();
    out.value = total / static_cast<double>(out.count);
    return out;
  }

  if (slice.pairs.empty()) throw Error(ErrorCode::kEmptyDataset, "no preference pairs to evaluate");
  const PairwisePredictor predictor = pairwise_predictor(probe);
  out.metric = "accuracy";
  Rng rng(derive_seed(seed, 0));
  std::bernoulli_distribution coin(0.5);
  long correct = 0;
  for (const auto& p : slice.pairs) {
    const bool swapped = coin(rng);
    const Vector& first = swapped ? p.h_beta : p.h_alpha;
    const Vector& second = swapped ? p.h_alpha : p.h_beta;
    const bool winner_first = (p.winner == Side::kAlpha) != swapped;
    const Choice gold = winner_first ? Choice::kFirst : Choice::kSecond;
    const bool hit = predictor(first, second) == gold;
    correct += hit ? 1 : 0;
    out.ids.push_back(p.id);
    out.per_item.push_back(hit ? 1.0 : 0.0);
  }
  out.count = slice.pairs.size();
  out.value = static_cast<double>(correct) / static_cast<double>(out.count);
  out.win_report = make_win_rate_report(correct, static_cast<long>(out.count), confidence, {"winner", "loser"});
  return out;
}

EvalResult transfer_evaluate(const AnyProbe& probe, const LayerSlice& target, std::uint64_t seed, double confidence) {
  const int h = probe.hidden_dim();
  auto check = [&](Eigen::Index size) {
    if (size != h) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "probe expects H=" + std::to_string(h) + ", data has H=" + std::to_string(size));
    }
  };
  for (const auto& inst : target.ranked) check(inst.embeddings.cols());
  for (const auto& p : target.pairs) check(p.h_alpha.size());
  return evaluate_probe(probe, target, seed, confidence);
}

}  // namespace probekit
