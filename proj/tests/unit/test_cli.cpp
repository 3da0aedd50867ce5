#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "probekit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.code = probekit::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_CASE("gen requires --out") {
  const auto r = run_cli({"gen", "--kind", "planted-order"});
  CHECK(r.code == 2);
}

TEST_CASE("unknown subcommands and flags are usage errors") {
  CHECK(run_cli({"frobnicate"}).code == 2);
  CHECK(run_cli({"gen", "--kind", "planted-order", "--out", "x", "--bogus", "1"}).code == 2);
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"--help"}).code == 0);
}

TEST_CASE("gen writes archives and the numbers fixture") {
  const auto dir = oracle::scratch_dir("cli_gen");
  auto r = run_cli({"gen", "--kind", "planted-order", "--H", "64", "--W", "8", "--N", "200", "--noise", "0.1",
                    "--seed", "7", "--out", dir.string()});
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "planted-order.manifest.json"));
  CHECK(fs::file_size(dir / "planted-order.blob") == 200u * 8 * 64 * 4);

  r = run_cli({"gen", "--kind", "numbers", "--count", "500", "--out", dir.string()});
  CHECK(r.code == 0);
  std::istringstream csv(slurp(dir / "numbers.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 500);
  CHECK(run_cli({"gen", "--kind", "nonsense", "--out", dir.string()}).code == 2);
}

TEST_CASE("train order-dot on planted data logs near-zero loss") {
  const auto dir = oracle::scratch_dir("cli_train");
  REQUIRE(run_cli({"gen", "--kind", "planted-order", "--H", "16", "--W", "5", "--N", "40", "--seed", "2", "--out",
                   dir.string()})
              .code == 0);
  const auto probe = (dir / "dot.probe.json").string();
  const auto r = run_cli({"train", "--archive", (dir / "planted-order").string(), "--layer", "0", "--probe",
                          "order-dot", "--probe-dim", "8", "--out", probe});
  CHECK(r.code == 0);
  const auto log = read_json(dir / "dot.log.json");
  CHECK(log["final_loss"].get<double>() <= 1e-3);
  CHECK(log["n_train"].get<int>() == 32);

  const auto e = run_cli({"eval", "--probe", probe, "--archive", (dir / "planted-order").string(), "--out-prefix",
                          (dir / "eval").string()});
  CHECK(e.code == 0);
  CHECK(read_json(dir / "eval.json")["value"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("error classes map to exit codes") {
  const auto dir = oracle::scratch_dir("cli_errors");
  CHECK(run_cli({"train", "--archive", (dir / "missing").string(), "--probe", "bt", "--out",
                 (dir / "p.json").string()})
            .code == 1);
  REQUIRE(run_cli({"gen", "--kind", "planted-order", "--H", "8", "--W", "3", "--N", "10", "--out", dir.string()})
              .code == 0);
  const auto archive = (dir / "planted-order").string();
  // d > H is a configuration error.
  CHECK(run_cli({"train", "--archive", archive, "--probe", "order-l2", "--probe-dim", "16", "--out",
                 (dir / "p.json").string()})
            .code == 2);
  CHECK(run_cli({"train", "--archive", archive, "--layer", "3", "--probe", "order-l2", "--out",
                 (dir / "p.json").string()})
            .code == 1);
  CHECK(run_cli({"train", "--archive", archive, "--layer", "middle", "--probe", "order-l2", "--probe-dim", "4",
                 "--lr", "1e300", "--epochs", "3", "--out", (dir / "p.json").string()})
            .code == 3);
}

TEST_CASE("config file values sit between flags and defaults") {
  const auto dir = oracle::scratch_dir("cli_config");
  const auto cfg = dir / "cfg.json";
  std::ofstream(cfg) << R"({"H": 6, "W": 3, "N": 5, "out": ")" << dir.string() << R"(", "name": "fromcfg"})";
  CHECK(run_cli({"gen", "--kind", "planted-order", "--config", cfg.string(), "--W", "4"}).code == 0);
  const auto m = read_json(dir / "fromcfg.manifest.json");
  CHECK(m["hidden_dim"].get<int>() == 6);
  CHECK(m["instances"].size() == 5);
  CHECK(m["instances"][0]["item_labels"].size() == 4);

  std::ofstream(dir / "bad.json") << R"({"not_an_option": 1})";
  CHECK(run_cli({"gen", "--kind", "planted-order", "--out", dir.string(), "--config", (dir / "bad.json").string()})
            .code == 2);
}

TEST_CASE("PROBE_SEED supplies the default seed") {
  const auto dir = oracle::scratch_dir("cli_seed");
  ::setenv("PROBE_SEED", "11", 1);
  CHECK(run_cli({"gen", "--kind", "planted-order", "--H", "4", "--W", "3", "--N", "3", "--out", dir.string(),
                 "--name", "env"})
            .code == 0);
  ::unsetenv("PROBE_SEED");
  CHECK(run_cli({"gen", "--kind", "planted-order", "--H", "4", "--W", "3", "--N", "3", "--out", dir.string(),
                 "--name", "flag", "--seed", "11"})
            .code == 0);
  CHECK(slurp(dir / "env.blob") == slurp(dir / "flag.blob"));
  ::setenv("PROBE_SEED", "abc", 1);
  CHECK(run_cli({"gen", "--kind", "planted-order", "--out", dir.string()}).code == 2);
  ::unsetenv("PROBE_SEED");
}

TEST_CASE("viz draws items plus the anchor and refuses wide probes") {
  const auto dir = oracle::scratch_dir("cli_viz");
  REQUIRE(run_cli({"gen", "--kind", "planted-order", "--H", "8", "--W", "5", "--N", "10", "--out", dir.string()})
              .code == 0);
  const auto archive = (dir / "planted-order").string();
  for (const std::string d : {"2", "3"}) {
    const auto probe = (dir / ("p" + d + ".probe.json")).string();
    REQUIRE(run_cli({"train", "--archive", archive, "--probe", "order-l2", "--probe-dim", d, "--epochs", "10",
                     "--out", probe})
                .code == 0);
    REQUIRE(run_cli({"viz", "--probe", probe, "--archive", archive, "--out-prefix", (dir / ("v" + d)).string()})
                .code == 0);
    const std::string svg = slurp(dir / ("v" + d + ".svg"));
    std::size_t points = 0;
    for (auto pos = svg.find("class=\"item\""); pos != std::string::npos; pos = svg.find("class=\"item\"", pos + 1))
      ++points;
    std::size_t anchors = 0;
    for (auto pos = svg.find("class=\"anchor\""); pos != std::string::npos;
         pos = svg.find("class=\"anchor\"", pos + 1))
      ++anchors;
    const std::size_t panels = d == "2" ? 1 : 2;
    CHECK(points == 5 * panels);
    CHECK(anchors == panels);
  }
  const auto wide = (dir / "wide.probe.json").string();
  REQUIRE(run_cli({"train", "--archive", archive, "--probe", "order-dot", "--probe-dim", "8", "--epochs", "5",
                   "--out", wide})
              .code == 0);
  CHECK(run_cli({"viz", "--probe", wide, "--archive", archive, "--out-prefix", (dir / "vw").string()}).code == 2);
}

TEST_CASE("bias report averages over probes") {
  const auto dir = oracle::scratch_dir("cli_bias");
  const auto run_ok = [](std::vector<std::string> args) { REQUIRE(run_cli(std::move(args)).code == 0); };
  run_ok({"gen", "--kind", "planted-preference", "--H", "8", "--N", "80", "--direction-seed", "3", "--out",
          dir.string(), "--name", "pref"});
  run_ok({"gen", "--kind", "planted-groups", "--H", "8", "--groups", "x,y", "--bias", "0.3,0", "--direction-seed",
          "3", "--words", "6", "--out", dir.string(), "--name", "groups"});
  std::vector<std::string> probes;
  for (const std::string kind : {"bt", "max-margin", "concat-lr"}) {
    probes.push_back((dir / (kind + ".probe.json")).string());
    run_ok({"train", "--archive", (dir / "pref").string(), "--probe", kind, "--out", probes.back()});
  }
  run_ok({"bias-report", "--probes", probes[0] + "," + probes[1] + "," + probes[2], "--archive",
          (dir / "groups").string(), "--out-prefix", (dir / "bias").string()});
  const auto report = read_json(dir / "bias.json");
  double sum = 0.0;
  int count = 0;
  for (const auto& row : report["pairwise"]) {
    if (row["group_names"][0] == "x") {
      sum += row["win_rate"].get<double>();
      ++count;
    }
  }
  CHECK(count == 3);
  CHECK(report["averaged"][0]["target"] == "x");
  CHECK(report["averaged"][0]["averaged_win_rate"].get<double>() == doctest::Approx(sum / 3.0));
  CHECK(report["averaged"][0]["averaged_win_rate"].get<double>() +
            report["averaged"][1]["averaged_win_rate"].get<double>() ==
        doctest::Approx(1.0));
}

TEST_CASE("extract-manifest validates template slots") {
  const auto dir = oracle::scratch_dir("cli_extract");
  std::ofstream(dir / "pos.txt") << "happy\njoyful\n";
  std::ofstream(dir / "neg.txt") << "sad\n";
  const auto job = (dir / "job.json").string();
  CHECK(run_cli({"extract-manifest", "--model", "m", "--positive", (dir / "pos.txt").string(), "--negative",
                 (dir / "neg.txt").string(), "--out", job})
            .code == 0);
  const auto j = read_json(job);
  CHECK(j["pairs"].size() == 2);
  for (const auto& p : j["pairs"]) {
    const int w = p["human_winner_index"].get<int>();
    CHECK(p[w == 0 ? "word1" : "word2"] != "sad");
  }
  CHECK(run_cli({"extract-manifest", "--model", "m", "--positive", (dir / "pos.txt").string(), "--negative",
                 (dir / "neg.txt").string(), "--template", "{word1} {word1} {word2}", "--out", job})
            .code == 2);
  std::ofstream(dir / "lists.txt") << "one|two|three|four\n";
  CHECK(run_cli({"extract-manifest", "--model", "m", "--items", (dir / "lists.txt").string(), "--out", job}).code ==
        0);
  CHECK(read_json(job)["item_lists"][0].size() == 4);
}

TEST_CASE("max-margin margin grid is tuned and logged") {
  const auto dir = oracle::scratch_dir("cli_grid");
  REQUIRE(run_cli({"gen", "--kind", "planted-preference", "--H", "8", "--N", "100", "--out", dir.string()}).code == 0);
  const auto archive = (dir / "planted-preference").string();
  CHECK(run_cli({"train", "--archive", archive, "--probe", "max-margin", "--margin-grid", "0.1,0.5,1.0", "--out",
                 (dir / "mm.probe.json").string()})
            .code == 0);
  const auto log = read_json(dir / "mm.log.json");
  const double chosen = log["margin"].get<double>();
  CHECK((chosen == 0.1 || chosen == 0.5 || chosen == 1.0));
  CHECK(run_cli({"train", "--archive", archive, "--probe", "bt", "--margin-grid", "0.1,0.5", "--out",
                 (dir / "bt.probe.json").string()})
            .code == 2);
}

TEST_CASE("config files accept library field names") {
  const auto dir = oracle::scratch_dir("cli_fields");
  std::ofstream(dir / "cfg.json") << R"({"hidden_dim": 5, "items": 3, "instances": 4, "noise_sigma": 0.2})";
  CHECK(run_cli({"gen", "--kind", "planted-order", "--out", dir.string(), "--config", (dir / "cfg.json").string()})
            .code == 0);
  const auto m = read_json(dir / "planted-order.manifest.json");
  CHECK(m["hidden_dim"].get<int>() == 5);
  CHECK(m["instances"].size() == 4);
}
