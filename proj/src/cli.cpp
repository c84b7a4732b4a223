#include "tcf/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tcf/backbone.hpp"
#include "tcf/complexity.hpp"
#include "tcf/csv.hpp"
#include "tcf/image.hpp"
#include "tcf/mta.hpp"
#include "tcf/report.hpp"

namespace tcf {

namespace {

namespace fs = std::filesystem;

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::pair<std::size_t, std::size_t> parse_size(const std::string& s) {
  const auto x = s.find_first_of("xX");
  if (x == std::string::npos) throw std::invalid_argument("--size must look like HxW, got '" + s + "'");
  try {
    std::size_t used = 0;
    const auto h = std::stoul(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument("");
    const auto w = std::stoul(s.substr(x + 1), &used);
    if (used != s.size() - x - 1) throw std::invalid_argument("");
    return {h, w};
  } catch (const std::exception&) {
    throw std::invalid_argument("--size must look like HxW, got '" + s + "'");
  }
}

struct ClusterArgs {
  std::string input, output;
  std::size_t clusters = 0;
  std::size_t knn = 5;
  std::size_t parts = 1;
};

void cmd_cluster(const ClusterArgs& a) {
  const CsvTable table = load_csv(a.input);
  const std::size_t n = table.values.dim(0);
  if (a.clusters < 1 || a.clusters > n) {
    throw std::invalid_argument("--clusters must lie in [1, " + std::to_string(n) + "]");
  }
  std::vector<std::int32_t> assignment;
  if (n == 1) {
    assignment = {0};
  } else if (a.parts == 1) {
    assignment = cluster_global(table.values, a.clusters, std::min(a.knn, n - 1)).assignment;
  } else {
    // Rows are laid out row-major on a square grid for spatial partitioning.
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
    if (side * side != n) throw std::invalid_argument("--parts needs a perfect-square row count, got " + std::to_string(n));
    const TokenSet tokens = grid_tokens(table.values, side, side);
    const double ratio = static_cast<double>(a.clusters) / static_cast<double>(n);
    assignment = cluster_local(tokens, a.parts, ratio, a.knn).assignment;
  }
  const std::string out = csv_with_column(table, "cluster", assignment);
  if (a.output.empty()) {
    std::cout << out;
  } else {
    write_text(a.output, out);
  }
}

struct RunArgs {
  std::string image, config, weights, report, overlay_dir, mta = "cr", attn_dump;
  std::optional<std::uint64_t> seed;
};

void cmd_run(const RunArgs& a) {
  ModelConfig config = load_config(a.config);
  if (a.seed) config.seed = *a.seed;
  const WeightStore store = a.weights.empty() ? generate_model_weights(config, config.seed) : load_weights(a.weights);
  const Model model(config, store);
  const Tensor image = load_ppm(a.image);

  MtaVariant variant;
  if (a.mta == "cr") variant = MtaVariant::CR;
  else if (a.mta == "sr") variant = MtaVariant::SR;
  else throw std::invalid_argument("--mta must be 'sr' or 'cr'");

  RunContext ctx;
  if (!a.attn_dump.empty()) {
    fs::create_directories(a.attn_dump);
    ctx.attention_sink = [dir = a.attn_dump](const std::string& name, const Tensor& w) {
      WeightStore one;
      one.insert("attention", w);
      save_weights(one, (fs::path(dir) / (name + ".tcfw")).string());
    };
  }
  const TokenPyramid pyramid = model.forward(image, &ctx);
  std::vector<float> logits = model.classify(pyramid);
  const MtaOutput mta = mta_forward(pyramid, variant, model.mta_weights(), config, &ctx);
  const TokenMapReport report = build_report(pyramid, &mta, variant, ctx.attention_macs, std::move(logits), config.seed);

  if (const auto parent = fs::path(a.report).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_text(a.report, report_to_json(report));
  if (!a.overlay_dir.empty()) {
    fs::create_directories(a.overlay_dir);
    for (const auto& st : report.stages) {
      const auto dir = fs::path(a.overlay_dir);
      save_token_overlay(report, st.stage, (dir / ("stage" + std::to_string(st.stage) + ".ppm")).string());
      save_ppm(render_density_map(st, report.map_h, report.map_w),
               (dir / ("density" + std::to_string(st.stage) + ".ppm")).string());
    }
  }
}

nlohmann::ordered_json cost_json(const ComplexityEstimate& e, const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["parts"] = c.ctm_parts;
  j["stage_tokens"] = e.stage_tokens;
  std::vector<std::uint64_t> per;
  for (const auto& ctm : e.ctm) per.push_back(ctm.dist_ops);
  j["ctm_dist_ops"] = per;
  j["dist_ops"] = e.dist_ops;
  j["attention_macs"] = e.attention_macs;
  return j;
}

void cmd_bench(const std::string& config_path, const std::string& size) {
  const ModelConfig local = load_config(config_path);
  const ModelConfig global = local.with_global_clustering();
  const auto [h, w] = parse_size(size);
  const auto el = estimate_complexity(local, h, w);
  const auto eg = estimate_complexity(global, h, w);

  nlohmann::ordered_json j;
  j["size"] = {h, w};
  j["global"] = cost_json(eg, global);
  j["local"] = cost_json(el, local);
  std::vector<double> per_ctm;
  for (std::size_t i = 0; i < el.ctm.size(); ++i) {
    per_ctm.push_back(static_cast<double>(eg.ctm[i].dist_ops) / static_cast<double>(el.ctm[i].dist_ops));
  }
  j["ctm_ratio"] = per_ctm;
  j["dist_ops_ratio"] = static_cast<double>(eg.dist_ops) / static_cast<double>(el.dist_ops);
  j["dist_ops_reduction"] = 1.0 - static_cast<double>(el.dist_ops) / static_cast<double>(eg.dist_ops);
  std::cout << j.dump(2) << '\n';
}

void cmd_gen_weights(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out) {
  const ModelConfig config = load_config(config_path);
  const WeightStore store = generate_model_weights(config, seed.value_or(config.seed));
  save_weights(store, out);
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(content_hash(store)));
  std::cout << "wrote " << store.size() << " tensors to " << out << " (fnv1a64 " << hash << ")\n";
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Token clustering transformer inference tools", "tcf"};
  app.require_subcommand(1);

  ClusterArgs ca;
  auto* cluster = app.add_subcommand("cluster", "DPC-kNN clustering of CSV rows");
  cluster->add_option("--input", ca.input, "CSV with a header row")->required();
  cluster->add_option("--clusters", ca.clusters, "number of clusters K")->required();
  cluster->add_option("--knn", ca.knn, "k for the kNN density (clamped to N-1)");
  cluster->add_option("--parts", ca.parts, "spatial parts (perfect square, rows on a square grid)");
  cluster->add_option("--output", ca.output, "output CSV (default stdout)");

  RunArgs ra;
  std::uint64_t run_seed = 0;
  auto* run = app.add_subcommand("run", "forward pass, token-map report and overlays");
  run->add_option("--image", ra.image, "binary PPM (P6) input")->required();
  run->add_option("--config", ra.config, "model config JSON")->required();
  run->add_option("--weights", ra.weights, "TCFW1 weights (generated from the seed when omitted)");
  auto* seed_opt = run->add_option("--seed", run_seed, "seed overriding the config");
  run->add_option("--report", ra.report, "report JSON path")->required();
  run->add_option("--overlay-dir", ra.overlay_dir, "directory for per-stage overlays");
  run->add_option("--mta", ra.mta, "MTA variant: sr or cr")->check(CLI::IsMember({"sr", "cr"}));
  run->add_option("--attn-dump", ra.attn_dump, "directory for raw attention weights");

  std::string bench_config, bench_size;
  auto* bench = app.add_subcommand("bench", "clustering and attention cost, global vs. configured parts");
  bench->add_option("--config", bench_config, "model config JSON")->required();
  bench->add_option("--size", bench_size, "input size HxW")->required();

  std::string gen_config, gen_out;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("gen-weights", "write deterministic fixture weights");
  gen->add_option("--config", gen_config, "model config JSON")->required();
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "weight seed (default: config seed)");
  gen->add_option("--out", gen_out, "output TCFW1 path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "tcf: error: " << one_line(e.what()) << '\n';
    return 1;
  }

  try {
    if (*cluster) {
      cmd_cluster(ca);
    } else if (*run) {
      if (*seed_opt) ra.seed = run_seed;
      cmd_run(ra);
    } else if (*bench) {
      cmd_bench(bench_config, bench_size);
    } else if (*gen) {
      cmd_gen_weights(gen_config, *gen_seed_opt ? std::optional<std::uint64_t>(gen_seed) : std::nullopt, gen_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "tcf: error: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("tcf");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace tcf
