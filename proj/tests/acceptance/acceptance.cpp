// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "oracles.hpp"
#include "probekit/activation_store.hpp"
#include "probekit/baselines.hpp"
#include "probekit/errors.hpp"
#include "probekit/evaluation.hpp"
#include "probekit/order_probe.hpp"
#include "probekit/preference_probe.hpp"
#include "probekit/probe.hpp"
#include "probekit/synthetic.hpp"

using namespace probekit;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), pattern, args...);
  return buf;
}

Vector gaussian(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  return Vector::NullaryExpr(n, [&] { return g(rng); });
}

// ------------------------------------------------------------------ gradients

Outcome gradient_correctness() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20240601);
  constexpr int kCases = 1000;
  constexpr double kTol = 1e-4;
  constexpr double kFloor = 1e-8;
  double worst_distance = 0, worst_order = 0, worst_bt = 0, worst_mm = 0;
  int failures = 0;

  for (DistanceKind kind : {DistanceKind::kSquaredL2, DistanceKind::kCosine, DistanceKind::kDot}) {
    for (int c = 0; c < kCases; ++c) {
      const Vector u = gaussian(5, rng), v = gaussian(5, rng);
      const auto g = distance_grad(kind, u, v);
      const auto fu = oracle::fd_gradient([&](const Vector& x) { return distance(kind, x, v); }, u);
      const auto fv = oracle::fd_gradient([&](const Vector& x) { return distance(kind, u, x); }, v);
      const double err = std::max(oracle::relative_error(g.du, fu, kFloor), oracle::relative_error(g.dv, fv, kFloor));
      worst_distance = std::max(worst_distance, err);
      failures += err > kTol;
    }
  }

  const DistanceKind kinds[] = {DistanceKind::kSquaredL2, DistanceKind::kCosine, DistanceKind::kDot};
  for (int c = 0; c < kCases; ++c) {
    const int h = 6, d = 3, w = 4;
    OrderProbe p;
    p.kind = kinds[c % 3];
    p.projection = Matrix::NullaryExpr(h, d, [&] { return gaussian(1, rng)(0); });
    p.anchor = gaussian(d, rng);
    std::vector<RankedInstance> batch(2);
    for (auto& inst : batch) {
      inst.embeddings = Matrix::NullaryExpr(w, h, [&] { return gaussian(1, rng)(0); });
      inst.gold_ranks.resize(w);
      std::iota(inst.gold_ranks.begin(), inst.gold_ranks.end(), 1);
      std::shuffle(inst.gold_ranks.begin(), inst.gold_ranks.end(), rng);
    }
    const auto obj = order_objective(p, batch, 0.5, 1e-4);
    Vector flat(h * d + d), analytic(h * d + d);
    flat << Eigen::Map<const Vector>(p.projection.data(), h * d), p.anchor;
    analytic << Eigen::Map<const Vector>(obj.grad_projection.data(), h * d), obj.grad_anchor;
    const auto fd = oracle::fd_gradient(
        [&](const Vector& x) {
          OrderProbe q = p;
          q.projection = Eigen::Map<const Matrix>(x.data(), h, d);
          q.anchor = x.tail(d);
          return order_objective(q, batch, 0.5, 1e-4).value;
        },
        flat);
    const double err = oracle::relative_error(analytic, fd, kFloor);
    worst_order = std::max(worst_order, err);
    failures += err > kTol;
  }

  for (int c = 0; c < kCases; ++c) {
    std::vector<PreferencePair> pairs(8);
    std::bernoulli_distribution coin(0.5);
    for (auto& pr : pairs) {
      pr.h_alpha = gaussian(6, rng);
      pr.h_beta = gaussian(6, rng);
      pr.winner = coin(rng) ? Side::kAlpha : Side::kBeta;
    }
    const Vector theta = gaussian(6, rng);
    const auto bt = bt_objective(theta, pairs, 1e-2);
    const auto fd_bt =
        oracle::fd_gradient([&](const Vector& x) { return bt_objective(x, pairs, 1e-2).value; }, theta);
    const double err_bt = oracle::relative_error(bt.gradient, fd_bt, kFloor);
    worst_bt = std::max(worst_bt, err_bt);
    failures += err_bt > kTol;

    const auto mm = maxmargin_objective(theta, pairs, 0.5, 1e-2);
    const auto fd_mm =
        oracle::fd_gradient([&](const Vector& x) { return maxmargin_objective(x, pairs, 0.5, 1e-2).value; }, theta);
    const double err_mm = oracle::relative_error(mm.gradient, fd_mm, kFloor);
    worst_mm = std::max(worst_mm, err_mm);
    failures += err_mm > kTol;
  }

  const double elapsed = seconds_since(start);
  return {failures == 0 && elapsed < 10.0,
          fmt("max rel err distance %.2e, order %.2e, BT %.2e, max-margin %.2e; %d failures; %.2fs", worst_distance,
              worst_order, worst_bt, worst_mm, failures, elapsed)};
}

// ------------------------------------------------------------------ order recovery

struct OrderRun {
  double held_out = 0;
  double seconds = 0;
};

OrderRun planted_order_run(DistanceKind kind, bool shuffled) {
  PlantedOrderSpec spec;
  spec.hidden_dim = 64;
  spec.items = 8;
  spec.instances = 200;
  spec.noise_sigma = 0.0;
  spec.seed = 7;
  auto data = gen_planted_order(spec);
  if (shuffled) data = shuffle_gold(std::move(data), 99);
  const auto [train, test] = train_test_split<RankedInstance>(data, 0.2, 7);
  OrderTrainConfig cfg;
  cfg.seed = 7;
  const auto start = Clock::now();
  const OrderProbe probe = train_order_probe(train, cfg, kind);
  OrderRun run;
  run.seconds = seconds_since(start);
  for (const auto& inst : test) run.held_out += spearman_rho(decode_order(probe, inst.embeddings), inst.gold_ranks);
  run.held_out /= static_cast<double>(test.size());
  return run;
}

Outcome planted_order_recovery() {
  const auto dot = planted_order_run(DistanceKind::kDot, false);
  const auto cos = planted_order_run(DistanceKind::kCosine, false);
  const auto l2 = planted_order_run(DistanceKind::kSquaredL2, false);
  const bool pass = dot.held_out >= 0.99 && cos.held_out >= 0.99 && l2.held_out >= 0.95 && dot.seconds < 60 &&
                    cos.seconds < 60 && l2.seconds < 60;
  return {pass, fmt("held-out rho dot %.4f (%.1fs), cosine %.4f (%.1fs), squared-L2 %.4f (%.1fs)", dot.held_out,
                    dot.seconds, cos.held_out, cos.seconds, l2.held_out, l2.seconds)};
}

Outcome anti_expressivity() {
  const auto dot = planted_order_run(DistanceKind::kDot, true);
  const auto cos = planted_order_run(DistanceKind::kCosine, true);
  const auto l2 = planted_order_run(DistanceKind::kSquaredL2, true);
  const bool pass = std::abs(dot.held_out) <= 0.2 && std::abs(cos.held_out) <= 0.2 && std::abs(l2.held_out) <= 0.2;
  return {pass, fmt("shuffled-rank held-out rho dot %.4f, cosine %.4f, squared-L2 %.4f", dot.held_out, cos.held_out,
                    l2.held_out)};
}

// ------------------------------------------------------------------ BT convexity

Outcome bt_convexity() {
  PlantedPreferenceSpec spec;
  spec.hidden_dim = 32;
  spec.pairs = 600;
  spec.label_noise = 0.2;
  spec.seed = 31;
  const auto all = gen_planted_preference(spec);
  const std::vector<PreferencePair> train(all.begin(), all.begin() + 500);
  const std::vector<PreferencePair> test(all.begin() + 500, all.end());
  BTTrainConfig a, b;
  a.seed = 1;
  b.seed = 987654321;
  const auto pa = train_bt_probe(train, a);
  const auto pb = train_bt_probe(train, b);
  const double gap = std::abs(pa.train_meta.final_nll - pb.train_meta.final_nll);
  int disagreements = 0;
  for (const auto& p : test) disagreements += predict(pa, p.h_alpha, p.h_beta) != predict(pb, p.h_alpha, p.h_beta);
  return {gap <= 1e-6 && disagreements == 0,
          fmt("final penalized NLL %.10f vs %.10f (diff %.2e), %d/100 prediction disagreements",
              pa.train_meta.final_nll, pb.train_meta.final_nll, gap, disagreements)};
}

// ------------------------------------------------------------------ statistics

Outcome statistics_oracles() {
  std::vector<int> base{1, 2, 3, 4, 5};
  std::vector<std::vector<int>> perms;
  do perms.push_back(base);
  while (std::next_permutation(base.begin(), base.end()));
  long spearman_mismatch = 0;
  for (const auto& p : perms) {
    for (const auto& g : perms) {
      const double got = spearman_rho(p, g);
      if (got != oracle::rank_formula(p, g) || std::abs(got - oracle::pearson_of_ranks(p, g)) > 1e-12) {
        ++spearman_mismatch;
      }
    }
  }

  double worst_cp = 0;
  for (long n = 1; n <= 30; ++n) {
    for (long k = 0; k <= n; ++k) {
      const auto ref = oracle::clopper_pearson(k, n, 0.95);
      const Interval got = clopper_pearson(k, n, 0.95);
      worst_cp = std::max({worst_cp, std::abs(got.low - ref.first), std::abs(got.high - ref.second)});
    }
  }

  std::mt19937_64 rng(5150);
  std::binomial_distribution<long> binom(50, 0.5);
  int covered = 0;
  constexpr int kSims = 10000;
  for (int s = 0; s < kSims; ++s) {
    const Interval ci = clopper_pearson(binom(rng), 50, 0.95);
    covered += ci.low <= 0.5 && 0.5 <= ci.high;
  }
  const double coverage = static_cast<double>(covered) / kSims;
  return {perms.size() == 120 && spearman_mismatch == 0 && worst_cp <= 1e-4 && coverage >= 0.94,
          fmt("%zu permutations, %ld Spearman mismatches over all %zu pairs; max CP deviation %.2e for n <= 30; "
              "coverage %.4f at n=50",
              perms.size(), spearman_mismatch, perms.size() * perms.size(), worst_cp, coverage)};
}

// ------------------------------------------------------------------ WEAT

Outcome weat_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> size(1, 5);
  std::uniform_int_distribution<int> dim(2, 8);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const int h = dim(rng);
    std::vector<Vector> pos(static_cast<std::size_t>(size(rng))), neg(static_cast<std::size_t>(size(rng)));
    AttributeWordSets sets;
    for (std::size_t i = 0; i < pos.size(); ++i) {
      pos[i] = gaussian(h, rng);
      sets.positive.push_back({"p" + std::to_string(i), pos[i]});
    }
    for (std::size_t i = 0; i < neg.size(); ++i) {
      neg[i] = gaussian(h, rng);
      sets.negative.push_back({"n" + std::to_string(i), neg[i]});
    }
    const Vector w1 = gaussian(h, rng), w2 = t % 50 == 0 ? w1 : gaussian(h, rng);
    const bool expect_first = oracle::weat_prefers_first(pos, neg, w1, w2);
    mismatches += (weat_predict(sets, w1, w2) == Choice::kFirst) != expect_first;
  }
  return {mismatches == 0, fmt("1000 trials, %d mismatches", mismatches)};
}

// ------------------------------------------------------------------ transfer

LayerSlice preference_task(std::uint64_t seed, const Vector& separator, int pairs) {
  PlantedPreferenceSpec spec;
  spec.hidden_dim = 32;
  spec.pairs = pairs;
  spec.separator = separator;
  spec.seed = seed;
  LayerSlice s;
  s.pairs = gen_planted_preference(spec);
  return s;
}

Outcome transfer_behavior() {
  TrainSettings settings;
  const Vector shared = random_unit_vector(32, 1001);
  const AnyProbe probe_a = train_probe(ProbeFamily::kBradleyTerry, preference_task(1, shared, 500), settings);
  const auto hash = probe_parameter_hash(probe_a);
  const double shared_acc = transfer_evaluate(probe_a, preference_task(2, shared, 500), 2).value;

  int contains_half = 0;
  constexpr int kRuns = 50;
  for (int r = 0; r < kRuns; ++r) {
    const std::uint64_t seed = 5000 + static_cast<std::uint64_t>(r);
    const Vector dir_a = random_unit_vector(32, seed);
    const Vector dir_b = orthogonal_unit_vector(dir_a, seed + 100000);
    settings.seed = seed;
    const AnyProbe pa = train_probe(ProbeFamily::kBradleyTerry, preference_task(seed, dir_a, 300), settings);
    const auto result = transfer_evaluate(pa, preference_task(seed + 1000000, dir_b, 200), seed);
    contains_half += !result.win_report->significant;
  }
  const double rate = static_cast<double>(contains_half) / kRuns;
  const bool frozen = probe_parameter_hash(probe_a) == hash;
  return {shared_acc >= 0.95 && rate >= 0.90 && frozen,
          fmt("shared-direction transfer accuracy %.4f; orthogonal CI contains 0.5 in %d/%d runs; probe frozen: %s",
              shared_acc, contains_half, kRuns, frozen ? "yes" : "no")};
}

// ------------------------------------------------------------------ layer sweep

Outcome layer_sweep_oracle() {
  int hits = 0;
  constexpr int kRuns = 20;
  std::string bests;
  for (int r = 0; r < kRuns; ++r) {
    MultilayerSpec spec;
    spec.order.hidden_dim = 32;
    spec.order.items = 6;
    spec.order.instances = 100;
    spec.order.noise_sigma = 0.1;
    spec.order.seed = 300 + static_cast<std::uint64_t>(r);
    spec.layers = 4;
    spec.signal_layer = 2;
    const auto archive = gen_multilayer_planted(spec);
    SweepConfig cfg;
    cfg.family = ProbeFamily::kOrderDot;
    cfg.probe_dim = 16;
    cfg.seed = spec.order.seed;
    const auto result = layer_sweep(archive, cfg);
    hits += result.best_layer == 2;
    bests += std::to_string(result.best_layer);
  }
  return {hits >= 19, fmt("best_layer = 2 in %d/%d runs (bests %s)", hits, kRuns, bests.c_str())};
}

// ------------------------------------------------------------------ format

std::vector<unsigned char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Outcome format_round_trip() {
  const auto dir = oracle::scratch_dir("acceptance_format");
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> n_inst(1, 6), n_layers(1, 5), n_items(2, 6), hidden(1, 12);
  std::normal_distribution<float> value(0.0f, 3.0f);
  int exact = 0, detected = 0;
  constexpr int kCases = 200;
  for (int c = 0; c < kCases; ++c) {
    ArchiveManifest m;
    m.model_id = "roundtrip-" + std::to_string(c);
    m.hidden_dim = hidden(rng);
    const int layers = n_layers(rng);
    for (int l = 0; l < layers; ++l) m.layer_ids.push_back(4 * l + c % 3);
    std::vector<InstanceTensor> tensors;
    const int instances = n_inst(rng);
    for (int i = 0; i < instances; ++i) {
      const int w = n_items(rng);
      InstanceMeta meta;
      meta.id = "i" + std::to_string(i);
      meta.task_id = "t" + std::to_string(i % 2);
      for (int j = 0; j < w; ++j) meta.item_labels.push_back("w" + std::to_string(j) + " \"quoted\" é");
      if (w == 2 && i % 2 == 0) {
        meta.gold = PreferenceGold{i % 4 == 0 ? 0 : 1, i % 3 == 0 ? LabelSource::kModel : LabelSource::kHuman};
      } else {
        Permutation ranks(static_cast<std::size_t>(w));
        std::iota(ranks.begin(), ranks.end(), 1);
        std::shuffle(ranks.begin(), ranks.end(), rng);
        meta.gold = PermutationGold{ranks};
      }
      m.instances.push_back(meta);
      InstanceTensor t(layers, w, m.hidden_dim);
      for (auto& x : t.values) x = value(rng);
      tensors.push_back(t);
    }
    const fs::path prefix = dir / ("case" + std::to_string(c));
    write_archive(m, tensors, prefix);
    const ActivationArchive back = read_archive(prefix);
    bool same = back.manifest().instances.size() == tensors.size() && back.manifest().layer_ids == m.layer_ids &&
                back.manifest().model_id == m.model_id;
    for (std::size_t i = 0; same && i < tensors.size(); ++i) {
      const auto& t = tensors[i];
      same = back.manifest().instances[i].item_labels == m.instances[i].item_labels;
      for (int l = 0; same && l < t.layers; ++l)
        for (int j = 0; same && j < t.items; ++j)
          for (int d = 0; same && d < t.dim; ++d) {
            const float got = back.raw_value(i, static_cast<std::size_t>(l), static_cast<std::size_t>(j),
                                             static_cast<std::size_t>(d));
            same = std::memcmp(&got, &t.values[(static_cast<std::size_t>(l) * t.items + j) * t.dim + d],
                               sizeof(float)) == 0;
          }
    }
    exact += same;

    auto blob = read_bytes(blob_path(prefix));
    std::uniform_int_distribution<std::size_t> pos(0, blob.size() - 1);
    std::uniform_int_distribution<int> bit(0, 7);
    blob[pos(rng)] ^= static_cast<unsigned char>(1u << bit(rng));
    write_bytes(blob_path(prefix), blob);
    try {
      read_archive(prefix);
    } catch (const Error& e) {
      detected += e.code() == ErrorCode::kCorruptArchive;
    }
  }
  return {exact == kCases && detected == kCases,
          fmt("%d/%d bit-exact round-trips, %d/%d corrupted blobs detected", exact, kCases, detected, kCases)};
}

// ------------------------------------------------------------------ CLI reproducibility

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "probekit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = probekit::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::fprintf(stderr, "command failed (%d): %s\n", code, err.str().c_str());
  return code;
}

// Runs every subcommand once into dir; returns the number of failed commands.
int cli_pipeline(const fs::path& dir) {
  const std::string d = dir.string();
  auto p = [&](const std::string& name) { return (dir / name).string(); };
  int failed = 0;
  auto run = [&](std::vector<std::string> args) {
    args.push_back("--seed");
    args.push_back("13");
    failed += run_cli(std::move(args)) != 0;
  };
  std::ofstream(dir / "pos.txt") << "kind\ngenerous\nhonest\n";
  std::ofstream(dir / "neg.txt") << "cruel\ndishonest\n";
  std::ofstream(dir / "lists.txt") << "tiny|small|large|huge\n";

  run({"gen", "--kind", "planted-order", "--H", "16", "--W", "5", "--N", "40", "--noise", "0.1", "--out", d});
  run({"gen", "--kind", "planted-preference", "--H", "16", "--N", "120", "--direction-seed", "4", "--out", d,
       "--name", "pref"});
  run({"gen", "--kind", "planted-preference", "--H", "16", "--N", "60", "--orthogonal-to", "4", "--out", d,
       "--name", "ortho"});
  run({"gen", "--kind", "multilayer", "--H", "16", "--W", "5", "--N", "40", "--noise", "0.1", "--out", d,
       "--name", "layers"});
  run({"gen", "--kind", "planted-groups", "--H", "16", "--groups", "a,b,c", "--bias", "0.5,0,-0.5",
       "--direction-seed", "4", "--words", "5", "--out", d, "--name", "groups"});
  run({"gen", "--kind", "numbers", "--count", "500", "--out", d});
  run({"extract-manifest", "--model", "some/model", "--positive", p("pos.txt"), "--negative", p("neg.txt"), "--out",
       p("job_pairs.json")});
  run({"extract-manifest", "--model", "some/model", "--items", p("lists.txt"), "--layers", "0,6,12", "--out",
       p("job_lists.json")});

  for (const std::string kind : {"order-l2", "order-cos", "order-dot"}) {
    run({"train", "--archive", p("planted-order"), "--probe", kind, "--probe-dim", "8", "--epochs", "40", "--out",
         p(kind + ".probe.json")});
    run({"eval", "--probe", p(kind + ".probe.json"), "--archive", p("planted-order"), "--out-prefix",
         p("eval_" + kind)});
  }
  run({"train", "--archive", p("planted-order"), "--probe", "order-l2", "--probe-dim", "2", "--epochs", "40",
       "--out", p("viz.probe.json")});
  run({"viz", "--probe", p("viz.probe.json"), "--archive", p("planted-order"), "--out-prefix", p("viz")});

  for (const std::string kind : {"bt", "max-margin", "concat-lr", "weat"}) {
    run({"train", "--archive", p("pref"), "--probe", kind, "--out", p(kind + ".probe.json")});
    run({"eval", "--probe", p(kind + ".probe.json"), "--archive", p("pref"), "--out-prefix", p("eval_" + kind)});
    run({"transfer", "--probe", p(kind + ".probe.json"), "--archive", p("ortho"), "--out-prefix",
         p("transfer_" + kind)});
  }
  run({"sweep", "--archive", p("layers"), "--probe", "order-dot", "--probe-dim", "8", "--epochs", "40",
       "--out-prefix", p("sweep")});
  run({"bias-report", "--probes", p("bt.probe.json") + "," + p("max-margin.probe.json"), "--archive", p("groups"),
       "--out-prefix", p("bias")});
  return failed;
}

Outcome cli_reproducibility() {
  const auto a = oracle::scratch_dir("acceptance_cli_a");
  const auto b = oracle::scratch_dir("acceptance_cli_b");
  const int failed = cli_pipeline(a) + cli_pipeline(b);
  int compared = 0, differing = 0;
  std::string first_diff;
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto ext = entry.path().extension().string();
    if (ext != ".csv" && ext != ".json" && ext != ".svg" && ext != ".blob") continue;
    ++compared;
    const auto other = b / entry.path().filename();
    if (!fs::exists(other) || read_bytes(entry.path()) != read_bytes(other)) {
      ++differing;
      if (first_diff.empty()) first_diff = entry.path().filename().string();
    }
  }
  return {failed == 0 && differing == 0 && compared > 30,
          fmt("%d failed commands; %d output files compared, %d differ%s%s", failed, compared, differing,
              first_diff.empty() ? "" : ", first: ", first_diff.c_str())};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {"gradient correctness", gradient_correctness},
      {"planted-order recovery", planted_order_recovery},
      {"anti-expressivity control", anti_expressivity},
      {"BT convexity/determinism", bt_convexity},
      {"statistics oracles", statistics_oracles},
      {"WEAT oracle equivalence", weat_oracle},
      {"transfer behavior", transfer_behavior},
      {"layer sweep oracle", layer_sweep_oracle},
      {"format round-trip", format_round_trip},
      {"CLI reproducibility", cli_reproducibility},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failures);
  return failures == 0 ? 0 : 1;
}
