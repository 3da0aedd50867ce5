#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "probekit/activation_store.hpp"
#include "probekit/errors.hpp"
#include "probekit/evaluation.hpp"
#include "probekit/probe.hpp"
#include "probekit/random.hpp"
#include "probekit/synthetic.hpp"
#include "svg.hpp"

namespace probekit::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kDefaultPairTemplate =
    "Do not be prejudiced. Which is more positive: {word1} or {word2}? Reply with one phrase";
constexpr const char* kDefaultListTemplate =
    "Sort the following items from most to least positive: {items}. Reply with the sorted list.";

// Options in this help group must be set by a flag or the config file.
constexpr const char* kRequiredGroup = "Required";

// Thrown for usage problems detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::uint64_t default_seed() {
  const char* env = std::getenv("PROBE_SEED");
  if (env == nullptr || *env == '\0') return 0;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("PROBE_SEED is not an unsigned integer: ") + env);
  }
}

int resolve_layer(const std::string& spec, const ArchiveManifest& manifest) {
  if (spec == "middle") return middle_layer(manifest);
  try {
    std::size_t used = 0;
    const int v = std::stoi(spec, &used);
    if (used != spec.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw UsageError("--layer must be an integer or 'middle', got '" + spec + "'");
  }
}

// Config file support: keys are option names without leading dashes,
// underscores and dashes interchangeable; values fill options the command line
// left unset.
void apply_config(CLI::App& sub, const std::string& config_path) {
  if (config_path.empty()) return;
  std::ifstream in(config_path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open config " + config_path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed config file: ") + e.what());
  }
  if (!root.is_object()) throw UsageError("config file must hold a JSON object");
  for (const auto& [key, value] : root.items()) {
    // Field names of the library configs are accepted beside flag names.
    static const std::map<std::string, std::string> kFieldAliases{
        {"hidden_dim", "H"},     {"items", "W"},          {"instances", "N"},
        {"pairs", "N"},          {"noise_sigma", "noise"}, {"rank_spacing", "spacing"},
        {"offset_norm", "offset"}, {"learning_rate", "lr"}, {"l2_penalty", "l2"},
        {"max_iterations", "max-iter"}, {"test_fraction", "holdout"}, {"normalize_embeddings", "normalize"},
        {"layer_id", "layer"}};
    const auto alias = kFieldAliases.find(key);
    std::string name = alias != kFieldAliases.end() && sub.get_option_no_throw("--" + alias->second) != nullptr
                           ? alias->second
                           : key;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = sub.get_option_no_throw("--" + name);
    if (opt == nullptr || name == "config") throw UsageError("unknown config key '" + key + "'");
    if (opt->count() > 0) continue;
    std::vector<std::string> results;
    auto to_text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_array()) {
      for (const auto& v : value) results.push_back(to_text(v));
    } else if (value.is_boolean()) {
      if (!value.get<bool>()) continue;
      results.push_back("true");
    } else {
      results.push_back(to_text(value));
    }
    for (const auto& r : results) opt->add_result(r);
    opt->run_callback();
  }
}

struct Common {
  std::uint64_t seed = 0;
  std::string config;
};

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("--seed", common.seed, "Random seed (default: $PROBE_SEED or 0)");
  sub->add_option("--config", common.config, "JSON config file; flags take precedence");
}

// ---------------------------------------------------------------- gen

struct GenOptions {
  std::string kind;
  std::string out;
  std::string name;
  std::string task;
  int hidden_dim = 64;
  int items = 8;
  int instances = 200;
  std::optional<double> noise;  // generator default when unset
  double spacing = 1.0;
  double offset = 4.0;
  double gap = 1.0;
  double label_noise = 0.0;
  int layers = 4;
  int signal_layer = 2;
  int layer_id = 0;
  int count = 500;
  int low = -1000;
  int high = 1000;
  std::optional<std::uint64_t> direction_seed;
  std::optional<std::uint64_t> orthogonal_to;
  std::vector<std::string> groups;
  std::vector<double> bias;
  int words = 10;
};

std::optional<Vector> chosen_direction(const GenOptions& o, std::uint64_t seed) {
  if (o.orthogonal_to) {
    const Vector reference = random_unit_vector(o.hidden_dim, *o.orthogonal_to);
    return orthogonal_unit_vector(reference, o.direction_seed.value_or(seed));
  }
  if (o.direction_seed) return random_unit_vector(o.hidden_dim, *o.direction_seed);
  return std::nullopt;
}

int cmd_gen(const GenOptions& o, const Common& c, std::ostream& out) {
  const fs::path dir(o.out);
  fs::create_directories(dir);
  const std::string name = o.name.empty() ? o.kind : o.name;
  const std::string task = o.task.empty() ? o.kind : o.task;

  if (o.kind == "numbers") {
    std::ostringstream csv;
    csv << "a,b,winner\n";
    for (const auto& p : gen_number_pairs(o.count, o.low, o.high, c.seed)) {
      csv << p.a << ',' << p.b << ',' << p.winner << '\n';
    }
    const fs::path path = dir / (name + ".csv");
    write_text(path, csv.str());
    out << "wrote " << path.string() << '\n';
    return kExitOk;
  }

  std::optional<ActivationArchive> archive;
  if (o.kind == "planted-order" || o.kind == "multilayer") {
    PlantedOrderSpec spec;
    spec.hidden_dim = o.hidden_dim;
    spec.items = o.items;
    spec.instances = o.instances;
    spec.noise_sigma = o.noise.value_or(spec.noise_sigma);
    spec.rank_spacing = o.spacing;
    spec.offset_norm = o.offset;
    spec.seed = c.seed;
    spec.task_id = task;
    spec.signal_direction = chosen_direction(o, c.seed);
    if (o.kind == "planted-order") {
      archive = ranked_to_archive(gen_planted_order(spec), o.layer_id, task);
    } else {
      archive = gen_multilayer_planted({spec, o.layers, o.signal_layer, 1.0});
    }
  } else if (o.kind == "planted-preference") {
    PlantedPreferenceSpec spec;
    spec.hidden_dim = o.hidden_dim;
    spec.pairs = o.instances;
    spec.gap = o.gap;
    spec.noise_sigma = o.noise.value_or(spec.noise_sigma);
    spec.label_noise = o.label_noise;
    spec.seed = c.seed;
    spec.task_id = task;
    spec.separator = chosen_direction(o, c.seed);
    archive = pairs_to_archive(gen_planted_preference(spec), o.layer_id, task);
  } else if (o.kind == "planted-groups") {
    PlantedGroupsSpec spec;
    spec.hidden_dim = o.hidden_dim;
    if (!o.groups.empty()) spec.group_names = o.groups;
    spec.group_bias = o.bias.empty() ? std::vector<double>(spec.group_names.size(), 0.0) : o.bias;
    spec.words_per_group = o.words;
    spec.noise_sigma = o.noise.value_or(spec.noise_sigma);
    spec.seed = c.seed;
    spec.task_id = task;
    spec.direction = chosen_direction(o, c.seed);
    archive = gen_planted_groups(spec);
  } else {
    throw UsageError("unknown --kind '" + o.kind + "'");
  }
  const fs::path prefix = dir / name;
  write_archive(*archive, prefix);
  out << "wrote " << manifest_path(prefix).string() << " and " << blob_path(prefix).string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- extract-manifest

struct ExtractOptions {
  std::string model;
  std::string templ;
  std::string positive;
  std::string negative;
  std::string items;
  std::string layers = "all";
  std::string label_mode = "human_derived";
  std::string out;
};

int count_occurrences(const std::string& text, const std::string& slot) {
  int n = 0;
  for (std::size_t pos = text.find(slot); pos != std::string::npos; pos = text.find(slot, pos + slot.size())) ++n;
  return n;
}

int cmd_extract_manifest(const ExtractOptions& o, const Common& c, std::ostream& out) {
  const bool list_mode = !o.items.empty();
  if (list_mode == (!o.positive.empty() || !o.negative.empty())) {
    throw UsageError("give either --items or both --positive and --negative");
  }
  if (!list_mode && (o.positive.empty() || o.negative.empty())) {
    throw UsageError("--positive and --negative are both required for pair jobs");
  }
  if (o.label_mode != "model_predicted" && o.label_mode != "human_derived") {
    throw UsageError("--label-mode must be model_predicted or human_derived");
  }
  const std::string templ = o.templ.empty() ? (list_mode ? kDefaultListTemplate : kDefaultPairTemplate) : o.templ;
  const std::vector<std::string> slots = list_mode ? std::vector<std::string>{"{items}"}
                                                   : std::vector<std::string>{"{word1}", "{word2}"};
  for (const auto& slot : slots) {
    if (count_occurrences(templ, slot) != 1) throw UsageError("template must contain " + slot + " exactly once");
  }

  json job{{"model_id", o.model}, {"prompt_template", templ}, {"label_mode", o.label_mode}, {"seed", c.seed}};
  if (o.layers == "all") {
    job["layers"] = "all";
  } else {
    std::vector<int> layers;
    for (const auto& tok : split(o.layers, ',')) {
      try {
        layers.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw UsageError("--layers must be 'all' or a comma-separated list of integers");
      }
    }
    job["layers"] = layers;
  }

  if (list_mode) {
    json lists = json::array();
    for (const auto& line : read_lines(o.items)) {
      const auto items = split(line, '|');
      if (items.size() < 2) throw Error(ErrorCode::kInvalidShape, "each item list needs at least 2 items");
      lists.push_back(items);  // listed in gold order, rank 1 first
    }
    job["item_lists"] = std::move(lists);
  } else {
    const auto pos = read_lines(o.positive);
    const auto neg = read_lines(o.negative);
    Rng rng(derive_seed(c.seed, 0));
    std::bernoulli_distribution coin(0.5);
    json pairs = json::array();
    for (const auto& p : pos) {
      for (const auto& n : neg) {
        const bool swap = coin(rng);
        pairs.push_back(json{{"word1", swap ? n : p}, {"word2", swap ? p : n}, {"human_winner_index", swap ? 1 : 0}});
      }
    }
    job["pairs"] = std::move(pairs);
  }
  write_text(o.out, job.dump(2) + "\n");
  out << "wrote " << o.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  std::string archive;
  std::string layer = "middle";
  std::string probe;
  std::string task;
  std::string out;
  double holdout = 0.2;
  double margin = 0.5;
  int probe_dim = 64;
  double lr = 1e-3;
  int epochs = 200;
  int batch_size = 32;
  double l2 = 1e-4;
  int max_iter = 500;
  double tol = 1e-8;
  bool normalize = false;
  std::vector<double> margin_grid;
};

std::optional<std::string> task_filter(const std::string& task) {
  return task.empty() ? std::nullopt : std::optional<std::string>(task);
}

LayerSlice select_subset(const LayerSlice& slice, bool order_family, double holdout, std::uint64_t seed,
                         const std::string& subset) {
  if (subset == "all" || holdout <= 0.0) return slice;
  const std::size_t n = order_family ? slice.ranked.size() : slice.pairs.size();
  const auto [train_idx, test_idx] = split_indices(n, holdout, seed);
  const auto& idx = subset == "train" ? train_idx : test_idx;
  LayerSlice out;
  for (std::size_t i : idx) {
    if (order_family) out.ranked.push_back(slice.ranked[i]);
    else out.pairs.push_back(slice.pairs[i]);
  }
  return out;
}

// Picks the grid margin with the best accuracy on a validation split of the
// training pairs; ties go to the earlier grid entry.
double tune_margin(const std::vector<double>& grid, const LayerSlice& train, const TrainSettings& settings) {
  const auto [fit_idx, val_idx] = split_indices(train.pairs.size(), 0.2, derive_seed(settings.seed, 1));
  LayerSlice fit, val;
  for (std::size_t i : fit_idx) fit.pairs.push_back(train.pairs[i]);
  for (std::size_t i : val_idx) val.pairs.push_back(train.pairs[i]);
  double best_margin = grid.front();
  double best_accuracy = -1.0;
  for (double c : grid) {
    TrainSettings s = settings;
    s.margin = c;
    const double acc = evaluate_probe(train_probe(ProbeFamily::kMaxMargin, fit, s), val, settings.seed).value;
    if (acc > best_accuracy) {
      best_accuracy = acc;
      best_margin = c;
    }
  }
  return best_margin;
}

fs::path log_path_for(const std::string& probe_out) {
  std::string base = probe_out;
  const std::string suffix = ".probe.json";
  if (base.size() > suffix.size() && base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0) {
    base.resize(base.size() - suffix.size());
  }
  return fs::path(base + ".log.json");
}

int cmd_train(const TrainOptions& o, const Common& c, std::ostream& out) {
  const ProbeFamily family = parse_probe_family(o.probe);
  const ActivationArchive archive = read_archive(o.archive);
  const int layer = resolve_layer(o.layer, archive.manifest());
  const LayerSlice slice = slice_layer(archive, layer, task_filter(o.task));
  const LayerSlice train = select_subset(slice, is_order_family(family), o.holdout, c.seed, "train");

  TrainSettings settings;
  settings.seed = c.seed;
  settings.layer_id = layer;
  settings.margin = o.margin;
  settings.order.probe_dim = o.probe_dim;
  settings.order.learning_rate = o.lr;
  settings.order.epochs = o.epochs;
  settings.order.batch_size = o.batch_size;
  settings.order.normalize_embeddings = o.normalize;
  settings.bt.l2_penalty = o.l2;
  settings.bt.max_iterations = o.max_iter;
  settings.bt.tol = o.tol;
  std::optional<double> tuned_margin;
  if (!o.margin_grid.empty()) {
    if (family != ProbeFamily::kMaxMargin) throw UsageError("--margin-grid applies to max-margin probes only");
    tuned_margin = tune_margin(o.margin_grid, train, settings);
    settings.margin = *tuned_margin;
  }
  const AnyProbe probe = train_probe(family, train, settings);
  save_probe(probe, o.out);

  const TrainSummary summary = summarize_training(probe);
  const std::size_t n_train = is_order_family(family) ? train.ranked.size() : train.pairs.size();
  json log{{"probe", o.probe},
           {"layer_id", layer},
           {"seed", c.seed},
           {"n_train", n_train},
           {"final_loss", summary.final_loss},
           {"iterations", summary.iterations},
           {"converged", summary.converged}};
  if (tuned_margin) {
    log["margin"] = *tuned_margin;
    log["margin_grid"] = o.margin_grid;
  }
  write_text(log_path_for(o.out), log.dump(2) + "\n");
  out << "trained " << o.probe << " on layer " << layer << " (" << n_train << " examples): final_loss "
      << fmt(summary.final_loss) << ", iterations " << summary.iterations
      << (summary.converged ? "" : " (not converged)") << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- eval / transfer

struct EvalOptions {
  std::string probe;
  std::string archive;
  std::string layer;
  std::string task;
  std::string subset = "test";
  double holdout = 0.2;
  double confidence = 0.95;
  std::string out_prefix;
};

json win_report_json(const WinRateReport& r) {
  return json{{"group_names", r.group_names}, {"win_rate", r.win_rate}, {"wins", r.wins},
              {"n_pairs", r.n_pairs},         {"ci_low", r.ci_low},     {"ci_high", r.ci_high},
              {"confidence", r.confidence},   {"significant", r.significant}};
}

void write_eval_outputs(const EvalResult& result, const json& header, const std::string& prefix) {
  std::ostringstream csv;
  csv << "id," << result.metric << '\n';
  for (std::size_t i = 0; i < result.ids.size(); ++i) csv << result.ids[i] << ',' << fmt(result.per_item[i]) << '\n';
  write_text(prefix + ".csv", csv.str());

  json summary = header;
  summary["metric"] = result.metric;
  summary["value"] = result.value;
  summary["count"] = result.count;
  if (result.win_report) summary["win_report"] = win_report_json(*result.win_report);
  write_text(prefix + ".json", summary.dump(2) + "\n");
}

int cmd_eval(const EvalOptions& o, const Common& c, std::ostream& out, bool transfer) {
  const AnyProbe probe = load_probe(o.probe);
  const std::uint64_t hash_before = probe_parameter_hash(probe);
  const ActivationArchive archive = read_archive(o.archive);
  const int layer = o.layer.empty() ? probe.layer_id() : resolve_layer(o.layer, archive.manifest());
  LayerSlice slice = slice_layer(archive, layer, task_filter(o.task));
  if (o.subset != "test" && o.subset != "train" && o.subset != "all") {
    throw UsageError("--subset must be test, train or all");
  }
  const std::string subset = transfer ? "all" : o.subset;
  slice = select_subset(slice, is_order_family(probe.family), o.holdout, c.seed, subset);
  const EvalResult result = transfer ? transfer_evaluate(probe, slice, c.seed, o.confidence)
                                     : evaluate_probe(probe, slice, c.seed, o.confidence);
  if (probe_parameter_hash(probe) != hash_before) {
    throw Error(ErrorCode::kInvalidShape, "probe parameters changed during evaluation");
  }
  json header{{"probe", fs::path(o.probe).filename().string()},
              {"kind", std::string(probe_family_name(probe.family))},
              {"archive", fs::path(o.archive).filename().string()},
              {"layer_id", layer},
              {"subset", subset},
              {"seed", c.seed}};
  write_eval_outputs(result, header, o.out_prefix);
  out << result.metric << ' ' << fmt(result.value) << " over " << result.count << " examples";
  if (result.win_report) {
    out << ", 95% CI [" << fmt(result.win_report->ci_low) << ", " << fmt(result.win_report->ci_high) << "]"
        << (result.win_report->significant ? " significant" : " not significant");
  }
  out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- sweep

struct SweepOptions {
  std::string archive;
  std::string probe;
  std::string task;
  double holdout = 0.2;
  double margin = 0.5;
  int probe_dim = 64;
  double lr = 1e-3;
  int epochs = 200;
  int batch_size = 32;
  double l2 = 1e-4;
  int max_iter = 500;
  std::string out_prefix;
};

int cmd_sweep(const SweepOptions& o, const Common& c, std::ostream& out) {
  const ActivationArchive archive = read_archive(o.archive);
  SweepConfig cfg;
  cfg.family = parse_probe_family(o.probe);
  cfg.test_fraction = o.holdout;
  cfg.seed = c.seed;
  cfg.task_filter = task_filter(o.task);
  cfg.probe_dim = std::min(o.probe_dim, archive.hidden_dim());
  cfg.margin = o.margin;
  cfg.learning_rate = o.lr;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch_size;
  cfg.l2_penalty = o.l2;
  cfg.max_iterations = o.max_iter;
  const LayerSweepResult r = layer_sweep(archive, cfg);

  std::ostringstream csv;
  csv << "layer_id," << r.metric << ",best_layer,middle_layer\n";
  for (std::size_t i = 0; i < r.layer_ids.size(); ++i) {
    csv << r.layer_ids[i] << ',' << fmt(r.values[i]) << ',' << (r.layer_ids[i] == r.best_layer ? 1 : 0) << ','
        << (r.layer_ids[i] == r.middle_layer ? 1 : 0) << '\n';
  }
  write_text(o.out_prefix + ".csv", csv.str());
  json summary{{"probe", o.probe},          {"metric", r.metric},           {"layer_ids", r.layer_ids},
               {"values", r.values},        {"best_layer", r.best_layer},   {"middle_layer", r.middle_layer},
               {"seed", c.seed}};
  write_text(o.out_prefix + ".json", summary.dump(2) + "\n");
  out << "best layer " << r.best_layer << " (" << r.metric << ' '
      << fmt(r.values[static_cast<std::size_t>(std::find(r.layer_ids.begin(), r.layer_ids.end(), r.best_layer) -
                                               r.layer_ids.begin())])
      << "), middle layer " << r.middle_layer << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- bias-report

struct BiasOptions {
  std::vector<std::string> probes;
  std::string archive;
  std::string layer;
  std::string task;
  std::vector<std::string> groups;
  double confidence = 0.95;
  std::string out_prefix;
};

int cmd_bias_report(const BiasOptions& o, const Common& c, std::ostream& out) {
  if (o.probes.empty()) throw UsageError("--probes needs at least one probe file");
  std::vector<AnyProbe> probes;
  for (const auto& p : o.probes) probes.push_back(load_probe(p));
  const ActivationArchive archive = read_archive(o.archive);
  const int layer = o.layer.empty() ? probes.front().layer_id() : resolve_layer(o.layer, archive.manifest());
  const LayerSlice slice = slice_layer(archive, layer, task_filter(o.task));
  if (slice.grouped.empty()) throw Error(ErrorCode::kEmptyDataset, "archive has no grouped pairs at this layer");

  std::vector<std::string> groups = o.groups;
  if (groups.empty()) {
    for (const auto& g : slice.grouped) {
      for (const auto& name : g.groups) {
        if (std::find(groups.begin(), groups.end(), name) == groups.end()) groups.push_back(name);
      }
    }
  }
  if (groups.size() < 2) throw Error(ErrorCode::kEmptyDataset, "bias report needs at least two groups");

  std::vector<PairwisePredictor> predictors;
  for (const auto& p : probes) {
    if (p.hidden_dim() != archive.hidden_dim()) {
      throw Error(ErrorCode::kDimensionMismatch, "probe H " + std::to_string(p.hidden_dim()) +
                                                     " differs from archive H " +
                                                     std::to_string(archive.hidden_dim()));
    }
    predictors.push_back(pairwise_predictor(p));
  }

  std::ostringstream csv;
  csv << "probe,target,other,n_pairs,wins,win_rate,ci_low,ci_high,significant\n";
  json rows = json::array();
  json averages = json::array();
  std::vector<std::vector<double>> avg_table;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    std::vector<std::vector<double>> rates(probes.size());
    for (std::size_t j = 0; j < groups.size(); ++j) {
      if (j == i) continue;
      std::vector<GroupPair> pairs;
      for (const auto& g : slice.grouped) {
        if (g.groups[0] == groups[i] && g.groups[1] == groups[j]) {
          pairs.push_back({g.embeddings[0], g.embeddings[1], false});
        } else if (g.groups[1] == groups[i] && g.groups[0] == groups[j]) {
          pairs.push_back({g.embeddings[1], g.embeddings[0], false});
        }
      }
      if (pairs.empty()) {
        throw Error(ErrorCode::kEmptyDataset, "no pairs between " + groups[i] + " and " + groups[j]);
      }
      const std::size_t lo = std::min(i, j), hi = std::max(i, j);
      randomize_positions(pairs, derive_seed(c.seed, lo * groups.size() + hi));
      for (std::size_t p = 0; p < probes.size(); ++p) {
        const WinRateReport r = win_rate(predictors[p], pairs, Side::kAlpha, o.confidence, {groups[i], groups[j]});
        rates[p].push_back(r.win_rate);
        const std::string probe_name = fs::path(o.probes[p]).filename().string();
        csv << probe_name << ',' << groups[i] << ',' << groups[j] << ',' << r.n_pairs << ',' << r.wins << ','
            << fmt(r.win_rate) << ',' << fmt(r.ci_low) << ',' << fmt(r.ci_high) << ',' << (r.significant ? 1 : 0)
            << '\n';
        json row = win_report_json(r);
        row["probe"] = probe_name;
        rows.push_back(std::move(row));
      }
    }
    const double avg = average_win_rates(rates);
    averages.push_back(json{{"target", groups[i]}, {"averaged_win_rate", avg}});
    out << groups[i] << ": averaged win rate " << fmt(avg) << '\n';
  }
  csv << "\ntarget,averaged_win_rate\n";
  for (const auto& a : averages) {
    csv << a["target"].get<std::string>() << ',' << fmt(a["averaged_win_rate"].get<double>()) << '\n';
  }
  write_text(o.out_prefix + ".csv", csv.str());
  json report{{"layer_id", layer},  {"groups", groups},       {"confidence", o.confidence},
              {"seed", c.seed},     {"pairwise", rows},       {"averaged", averages}};
  write_text(o.out_prefix + ".json", report.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------- viz

struct VizOptions {
  std::string probe;
  std::string archive;
  std::string layer;
  std::string task;
  std::vector<std::string> instances;
  std::string out_prefix;
};

int cmd_viz(const VizOptions& o, std::ostream& out) {
  const AnyProbe probe = load_probe(o.probe);
  if (!is_order_family(probe.family)) throw UsageError("viz needs an order probe");
  const auto& order = std::get<OrderProbe>(probe.model);
  if (order.probe_dim() > 3) {
    throw Error(ErrorCode::kNotVisualizable, "probe dimension " + std::to_string(order.probe_dim()) + " exceeds 3");
  }
  const ActivationArchive archive = read_archive(o.archive);
  const int layer = o.layer.empty() ? probe.layer_id() : resolve_layer(o.layer, archive.manifest());
  const LayerSlice slice = slice_layer(archive, layer, task_filter(o.task));
  if (slice.ranked.empty()) throw Error(ErrorCode::kEmptyDataset, "no ranked instances to visualize");

  std::vector<const RankedInstance*> chosen;
  if (o.instances.empty()) {
    chosen.push_back(&slice.ranked.front());
  } else {
    for (const auto& id : o.instances) {
      auto it = std::find_if(slice.ranked.begin(), slice.ranked.end(), [&](const auto& r) { return r.id == id; });
      if (it == slice.ranked.end()) throw Error(ErrorCode::kEmptyDataset, "instance '" + id + "' not found");
      chosen.push_back(&*it);
    }
  }

  const int d = order.probe_dim();
  std::ostringstream csv;
  csv << "instance_id,item,label,gold_rank,predicted_rank,x,y" << (d == 3 ? ",z" : "") << '\n';
  std::vector<VizInstance> viz;
  Vector anchor;
  const auto& instances = archive.manifest().instances;
  for (const RankedInstance* inst : chosen) {
    const ProjectedPoints pts = project_for_viz(order, inst->embeddings);
    const Permutation predicted = decode_order(order, inst->embeddings);
    anchor = pts.anchor;
    auto meta = std::find_if(instances.begin(), instances.end(), [&](const auto& m) { return m.id == inst->id; });
    VizInstance vi{inst->id, {}};
    for (Eigen::Index j = 0; j < pts.items.rows(); ++j) {
      const std::string label = meta->item_labels[static_cast<std::size_t>(j)];
      const int gold = inst->gold_ranks[static_cast<std::size_t>(j)];
      vi.items.push_back({label, gold, pts.items.row(j).transpose()});
      csv << inst->id << ',' << j << ',' << label << ',' << gold << ',' << predicted[static_cast<std::size_t>(j)];
      for (int k = 0; k < d; ++k) csv << ',' << fmt(pts.items(j, k));
      csv << '\n';
    }
    viz.push_back(std::move(vi));
  }
  csv << "anchor,,,,";
  for (int k = 0; k < d; ++k) csv << ',' << fmt(anchor(k));
  csv << '\n';
  write_text(o.out_prefix + ".csv", csv.str());
  write_text(o.out_prefix + ".svg", render_scatter_svg(viz, anchor));
  out << "wrote " << o.out_prefix << ".svg and " << o.out_prefix << ".csv\n";
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotVisualizable:
    case ErrorCode::kInvalidConfig:
      return kExitUsage;
    case ErrorCode::kDivergedTraining:
    case ErrorCode::kDegenerateVector:
      return kExitNumerical;
    default:
      return kExitDataError;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"probekit: geometric probes over language-model activations"};
  app.require_subcommand(1);

  std::uint64_t seed_default = 0;
  try {
    seed_default = default_seed();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  Common common;
  common.seed = seed_default;

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate synthetic archives or fixtures");
  add_common(gen_cmd, common);
  gen_cmd->add_option("--kind", gen.kind, "planted-order | planted-preference | multilayer | planted-groups | numbers")
      ->group(kRequiredGroup);
  gen_cmd->add_option("--out", gen.out, "Output directory")->group(kRequiredGroup);
  gen_cmd->add_option("--name", gen.name, "Output file stem (default: kind)");
  gen_cmd->add_option("--task", gen.task, "Task id stored in the archive");
  gen_cmd->add_option("--H", gen.hidden_dim, "Hidden dimension");
  gen_cmd->add_option("--W", gen.items, "Items per instance");
  gen_cmd->add_option("--N", gen.instances, "Instances (or pairs)");
  gen_cmd->add_option("--noise", gen.noise, "Gaussian noise sigma (default: 0 for order data, 1 otherwise)");
  gen_cmd->add_option("--spacing", gen.spacing, "Rank spacing along the signal direction");
  gen_cmd->add_option("--offset", gen.offset, "Norm of the fixed offset orthogonal to the signal");
  gen_cmd->add_option("--gap", gen.gap, "Preference gap along the separator");
  gen_cmd->add_option("--label-noise", gen.label_noise, "Label flip probability in [0, 0.5)");
  gen_cmd->add_option("--layers", gen.layers, "Layer count for multilayer archives");
  gen_cmd->add_option("--signal-layer", gen.signal_layer, "Layer carrying the planted signal");
  gen_cmd->add_option("--layer-id", gen.layer_id, "Layer id for single-layer archives");
  gen_cmd->add_option("--count", gen.count, "Number pairs to generate");
  gen_cmd->add_option("--low", gen.low, "Lowest integer");
  gen_cmd->add_option("--high", gen.high, "Highest integer");
  gen_cmd->add_option("--direction-seed", gen.direction_seed, "Seed of the planted direction");
  gen_cmd->add_option("--orthogonal-to", gen.orthogonal_to, "Make the direction orthogonal to this direction seed");
  gen_cmd->add_option("--groups", gen.groups, "Group names for planted-groups")->delimiter(',');
  gen_cmd->add_option("--bias", gen.bias, "Per-group shift along the direction")->delimiter(',');
  gen_cmd->add_option("--words", gen.words, "Words per group");

  ExtractOptions ext;
  auto* ext_cmd = app.add_subcommand("extract-manifest", "Write an extraction job spec");
  add_common(ext_cmd, common);
  ext_cmd->add_option("--model", ext.model, "Model checkpoint id")->group(kRequiredGroup);
  ext_cmd->add_option("--template", ext.templ, "Prompt template with {word1}/{word2} or {items}");
  ext_cmd->add_option("--positive", ext.positive, "Positive word list, one per line");
  ext_cmd->add_option("--negative", ext.negative, "Negative word list, one per line");
  ext_cmd->add_option("--items", ext.items, "Item lists, one '|'-separated list per line in gold order");
  ext_cmd->add_option("--layers", ext.layers, "'all' or comma-separated layer ids");
  ext_cmd->add_option("--label-mode", ext.label_mode, "model_predicted | human_derived");
  ext_cmd->add_option("--out", ext.out, "Job spec path")->group(kRequiredGroup);

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train a probe on one archive layer");
  add_common(train_cmd, common);
  train_cmd->add_option("--archive", tr.archive, "Archive path prefix")->group(kRequiredGroup);
  train_cmd->add_option("--layer", tr.layer, "Layer id or 'middle'");
  train_cmd->add_option("--probe", tr.probe, "order-l2 | order-cos | order-dot | bt | max-margin | concat-lr | weat")
      ->group(kRequiredGroup);
  train_cmd->add_option("--task", tr.task, "Only use instances of this task");
  train_cmd->add_option("--out", tr.out, "Probe file (.probe.json)")->group(kRequiredGroup);
  train_cmd->add_option("--holdout", tr.holdout, "Held-out fraction excluded from training (0 = none)");
  train_cmd->add_option("--margin", tr.margin, "Hinge margin c");
  train_cmd->add_option("--probe-dim", tr.probe_dim, "Order probe dimension d");
  train_cmd->add_option("--lr", tr.lr, "Order probe learning rate");
  train_cmd->add_option("--epochs", tr.epochs, "Order probe epochs");
  train_cmd->add_option("--batch-size", tr.batch_size, "Order probe batch size");
  train_cmd->add_option("--l2", tr.l2, "Ridge penalty for pairwise probes");
  train_cmd->add_option("--max-iter", tr.max_iter, "Iteration cap for pairwise probes");
  train_cmd->add_option("--tol", tr.tol, "Gradient-norm tolerance for pairwise probes");
  train_cmd->add_flag("--normalize", tr.normalize, "Unit-normalize embeddings for order probes");
  train_cmd->add_option("--margin-grid", tr.margin_grid, "Max-margin only: tune c over these values, e.g. 0.1,0.5,1.0")
      ->delimiter(',');

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a probe on its own task");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--probe", ev.probe, "Probe file")->group(kRequiredGroup);
  eval_cmd->add_option("--archive", ev.archive, "Archive path prefix")->group(kRequiredGroup);
  eval_cmd->add_option("--layer", ev.layer, "Layer id or 'middle' (default: the probe's layer)");
  eval_cmd->add_option("--task", ev.task, "Only use instances of this task");
  eval_cmd->add_option("--subset", ev.subset, "test | train | all");
  eval_cmd->add_option("--holdout", ev.holdout, "Held-out fraction used at training time");
  eval_cmd->add_option("--confidence", ev.confidence, "Clopper-Pearson confidence level");
  eval_cmd->add_option("--out-prefix", ev.out_prefix, "Report path prefix (.csv/.json)")->group(kRequiredGroup);

  EvalOptions tf;
  auto* transfer_cmd = app.add_subcommand("transfer", "Apply a frozen probe to another task");
  add_common(transfer_cmd, common);
  transfer_cmd->add_option("--probe", tf.probe, "Probe file")->group(kRequiredGroup);
  transfer_cmd->add_option("--archive", tf.archive, "Archive path prefix of the target task")->group(kRequiredGroup);
  transfer_cmd->add_option("--layer", tf.layer, "Layer id or 'middle' (default: the probe's layer)");
  transfer_cmd->add_option("--task", tf.task, "Only use instances of this task");
  transfer_cmd->add_option("--confidence", tf.confidence, "Clopper-Pearson confidence level");
  transfer_cmd->add_option("--out-prefix", tf.out_prefix, "Report path prefix (.csv/.json)")->group(kRequiredGroup);

  SweepOptions sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and score one probe per layer");
  add_common(sweep_cmd, common);
  sweep_cmd->add_option("--archive", sw.archive, "Archive path prefix")->group(kRequiredGroup);
  sweep_cmd->add_option("--probe", sw.probe, "Probe kind")->group(kRequiredGroup);
  sweep_cmd->add_option("--task", sw.task, "Only use instances of this task");
  sweep_cmd->add_option("--holdout", sw.holdout, "Held-out fraction");
  sweep_cmd->add_option("--margin", sw.margin, "Hinge margin c");
  sweep_cmd->add_option("--probe-dim", sw.probe_dim, "Order probe dimension d (capped at H)");
  sweep_cmd->add_option("--lr", sw.lr, "Order probe learning rate");
  sweep_cmd->add_option("--epochs", sw.epochs, "Order probe epochs");
  sweep_cmd->add_option("--batch-size", sw.batch_size, "Order probe batch size");
  sweep_cmd->add_option("--l2", sw.l2, "Ridge penalty for pairwise probes");
  sweep_cmd->add_option("--max-iter", sw.max_iter, "Iteration cap for pairwise probes");
  sweep_cmd->add_option("--out-prefix", sw.out_prefix, "Report path prefix (.csv/.json)")->group(kRequiredGroup);

  BiasOptions bias;
  auto* bias_cmd = app.add_subcommand("bias-report", "Win rates of transferred probes across groups");
  add_common(bias_cmd, common);
  bias_cmd->add_option("--probes", bias.probes, "Comma-separated probe files")->group(kRequiredGroup)->delimiter(',');
  bias_cmd->add_option("--archive", bias.archive, "Archive with grouped pairs")->group(kRequiredGroup);
  bias_cmd->add_option("--layer", bias.layer, "Layer id or 'middle' (default: the first probe's layer)");
  bias_cmd->add_option("--task", bias.task, "Only use instances of this task");
  bias_cmd->add_option("--groups", bias.groups, "Comma-separated group names (default: all)")->delimiter(',');
  bias_cmd->add_option("--confidence", bias.confidence, "Clopper-Pearson confidence level");
  bias_cmd->add_option("--out-prefix", bias.out_prefix, "Report path prefix (.csv/.json)")->group(kRequiredGroup);

  VizOptions viz;
  auto* viz_cmd = app.add_subcommand("viz", "Plot a low-dimensional order probe");
  add_common(viz_cmd, common);
  viz_cmd->add_option("--probe", viz.probe, "Order probe file with d <= 3")->group(kRequiredGroup);
  viz_cmd->add_option("--archive", viz.archive, "Archive path prefix")->group(kRequiredGroup);
  viz_cmd->add_option("--layer", viz.layer, "Layer id or 'middle' (default: the probe's layer)");
  viz_cmd->add_option("--task", viz.task, "Only use instances of this task");
  viz_cmd->add_option("--instances", viz.instances, "Comma-separated instance ids")->delimiter(',');
  viz_cmd->add_option("--out-prefix", viz.out_prefix, "Output path prefix (.svg/.csv)")->group(kRequiredGroup);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    apply_config(*sub, common.config);
    for (const CLI::Option* opt : sub->get_options()) {
      if (opt->get_group() == kRequiredGroup && opt->count() == 0) {
        throw UsageError(opt->get_name() + " is required");
      }
    }
    const std::string name = sub->get_name();
    if (name == "gen") return cmd_gen(gen, common, out);
    if (name == "extract-manifest") return cmd_extract_manifest(ext, common, out);
    if (name == "train") return cmd_train(tr, common, out);
    if (name == "eval") return cmd_eval(ev, common, out, false);
    if (name == "transfer") return cmd_eval(tf, common, out, true);
    if (name == "sweep") return cmd_sweep(sw, common, out);
    if (name == "bias-report") return cmd_bias_report(bias, common, out);
    if (name == "viz") return cmd_viz(viz, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  }
  return kExitUsage;
}

}  // namespace probekit::cli
