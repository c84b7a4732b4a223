// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "gen.hpp"
#include "oracle_cluster.hpp"
#include "tcf/cli.hpp"
#include "tcf/complexity.hpp"
#include "tcf/image.hpp"
#include "tcf/mta.hpp"
#include "tcf/report.hpp"
#include "temp_dir.hpp"

using tcf::Tensor;
using tcf::TokenSet;

namespace {

constexpr std::uint64_t kTinyWeightsHash = 0xd3a1835072a3ee31ULL;

struct Outcome {
  bool pass = true;
  std::string detail;
  std::string failure;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) failure = what;
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const std::string kTiny = std::string(TCF_CONFIG_DIR) + "/tiny.json";

tcf::ClusterResult record_from(std::vector<std::int32_t> assignment, std::size_t k) {
  tcf::ClusterResult r;
  const std::size_t n = assignment.size();
  r.rho.assign(n, 1.0);
  r.delta.assign(n, 0.0);
  r.score.assign(n, 0.0);
  r.part_label.assign(n, 0);
  r.centers.assign(k, -1);
  for (std::size_t t = 0; t < n; ++t) r.centers[static_cast<std::size_t>(assignment[t])] = static_cast<std::int32_t>(t);
  r.assignment = std::move(assignment);
  return r;
}

std::vector<std::int32_t> random_assignment(std::mt19937_64& g, std::size_t n, std::size_t k) {
  std::vector<std::int32_t> a(n);
  for (std::size_t t = 0; t < n; ++t) a[t] = static_cast<std::int32_t>(t < k ? t : gen::uniform(g, 0, k - 1));
  std::shuffle(a.begin(), a.end(), g);
  return a;
}

Outcome oracle_equivalence() {
  Outcome o;
  std::mt19937_64 g(1001);
  const std::clock_t start = std::clock();
  double worst_rho = 0.0, worst_delta = 0.0;
  int instances = 0;
  for (; instances < 1000; ++instances) {
    const std::size_t n = gen::uniform(g, 2, 64), c = gen::uniform(g, 1, 16);
    const std::size_t k = gen::uniform(g, 1, n), knn = gen::uniform(g, 1, n - 1);
    const Tensor x = gen::features(g, n, c);
    const auto r = tcf::cluster_global(x, k, knn);
    const auto ref = oracle::cluster(gen::to_rows(x), static_cast<int>(k), static_cast<int>(knn));
    o.require(std::equal(r.centers.begin(), r.centers.end(), ref.centers.begin(), ref.centers.end()), "centers differ");
    o.require(std::equal(r.assignment.begin(), r.assignment.end(), ref.assignment.begin(), ref.assignment.end()),
              "assignment differs");
    for (std::size_t t = 0; t < n; ++t) {
      worst_rho = std::max(worst_rho, std::abs(r.rho[t] - ref.rho[t]));
      worst_delta = std::max(worst_delta, std::abs(r.delta[t] - ref.delta[t]));
    }
  }
  const double cpu = static_cast<double>(std::clock() - start) / CLOCKS_PER_SEC;
  o.require(worst_rho <= 1e-6 && worst_delta <= 1e-6, "rho/delta outside 1e-6");
  o.require(cpu < 30.0, "runtime over 30 s");
  o.detail = std::to_string(instances) + " instances, max |drho|=" + fmt("%.1e", worst_rho) +
             ", max |ddelta|=" + fmt("%.1e", worst_delta) + ", cpu " + fmt("%.2f", cpu) + " s";
  return o;
}

Outcome local_global_degeneracy() {
  Outcome o;
  std::mt19937_64 g(1002);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t h = gen::uniform(g, 1, 8), w = gen::uniform(g, 2, 8), n = h * w;
    const std::size_t k = gen::uniform(g, 1, n), knn = gen::uniform(g, 1, n - 1);
    const TokenSet t = gen::grid(g, h, w, gen::uniform(g, 1, 16));
    const double ratio = static_cast<double>(k) / static_cast<double>(n);
    const auto l = tcf::cluster_local(t, 1, ratio, knn);
    const auto r = tcf::cluster_global(t.features, k, knn);
    o.require(l.centers == r.centers && l.assignment == r.assignment, "centers/assignment differ");
    o.require(l.rho == r.rho && l.delta == r.delta && l.score == r.score, "rho/delta/score not bit-identical");
    o.require(l.dist_ops == r.dist_ops, "dist_ops differ");
  }
  o.detail = "100 instances bit-identical";
  return o;
}

Outcome complexity_law() {
  Outcome o;
  std::mt19937_64 g(1003);
  const TokenSet t = gen::grid(g, 32, 32, 64);
  const auto local = tcf::cluster_local(t, 16, 0.25, 5);
  const auto global = tcf::cluster_local(t, 1, 0.25, 5);
  o.require(local.dist_ops == 4194304, "local dist_ops != 4,194,304");
  o.require(global.dist_ops == 16 * local.dist_ops, "global/local != 16");

  const auto config = tcf::ModelConfig::tiny();
  const auto el = tcf::estimate_complexity(config, 512, 512);
  const auto eg = tcf::estimate_complexity(config.with_global_clustering(), 512, 512);
  const double reduction = 1.0 - static_cast<double>(el.dist_ops) / static_cast<double>(eg.dist_ops);
  const double ctm1 = static_cast<double>(eg.ctm[0].dist_ops) / static_cast<double>(el.ctm[0].dist_ops);
  o.require(ctm1 == 16.0, "CTM-1 ratio at 512x512 is not 16");
  o.require(reduction >= 0.80, "clustering reduction below 80%");

  // The analytic model behind bench must agree with the runtime counters.
  const tcf::Model model(config, fixtures::tiny_weights());
  const auto p = model.forward(fixtures::random_image(3, 64, 64));
  const auto e64 = tcf::estimate_complexity(config, 64, 64);
  o.require(p.dist_ops == e64.dist_ops, "runtime dist_ops disagree with the analytic estimate");

  o.detail = "local " + std::to_string(local.dist_ops) + ", global/local " +
             std::to_string(global.dist_ops / local.dist_ops) + ", 512x512 CTM-1 ratio " + fmt("%.0f", ctm1) +
             "x, reduction " + fmt("%.1f", 100.0 * reduction) + "%";
  return o;
}

Outcome merge_invariances() {
  Outcome o;
  std::mt19937_64 g(1004);
  std::uniform_real_distribution<float> feat(-1.0f, 1.0f), imp(-3.0f, 3.0f), shift(-5.0f, 5.0f);
  double worst_shift = 0.0, worst_mean = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = gen::uniform(g, 1, 16), c = gen::uniform(g, 1, 8);
    Tensor x({n, c});
    for (float& v : x.data()) v = feat(g);
    TokenSet t = tcf::grid_tokens(x, 1, n);
    const auto rec = record_from(std::vector<std::int32_t>(n, 0), 1);

    const TokenSet uniform = tcf::merge_tokens(t, rec);
    for (float& p : t.importance) p = imp(g);
    const TokenSet weighted = tcf::merge_tokens(t, rec);
    const float s = shift(g);
    for (float& p : t.importance) p += s;
    const TokenSet shifted = tcf::merge_tokens(t, rec);

    for (std::size_t ch = 0; ch < c; ++ch) {
      double mean = 0.0;
      float lo = INFINITY, hi = -INFINITY;
      for (std::size_t j = 0; j < n; ++j) {
        mean += x(j, ch);
        lo = std::min(lo, x(j, ch));
        hi = std::max(hi, x(j, ch));
      }
      mean /= static_cast<double>(n);
      const float y = weighted.features(0, ch);
      o.require(y >= lo && y <= hi, "merged value outside the member range");
      worst_shift = std::max(worst_shift, static_cast<double>(std::abs(y - shifted.features(0, ch))));
      worst_mean = std::max(worst_mean, std::abs(static_cast<double>(uniform.features(0, ch)) - mean));
    }
  }
  o.require(worst_shift < 1e-6, "importance shift changed the merge by >= 1e-6");
  o.require(worst_mean <= 1e-6, "uniform-importance merge differs from the mean");
  o.detail = "1000 clusters, max shift |dy|=" + fmt("%.1e", worst_shift) + ", max |mean err|=" +
             fmt("%.1e", worst_mean) + ", convex bounds exact";
  return o;
}

Outcome attention_checks() {
  Outcome o;
  std::mt19937_64 g(1005);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  auto rnd = [&](std::size_t r, std::size_t c) {
    Tensor t({r, c});
    for (float& v : t.data()) v = u(g);
    return t;
  };
  double worst_ref = 0.0, worst_sum = 0.0, min_dom = 1.0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t heads = gen::uniform(g, 1, 4), d = gen::uniform(g, 1, 8), c = heads * d;
    const std::size_t m = gen::uniform(g, 1, 12), n = gen::uniform(g, 1, 12);
    const Tensor q = rnd(m, c), k = rnd(n, c), v = rnd(n, c);
    Tensor w;
    const Tensor out = tcf::biased_attention(q, k, v, std::vector<float>(n, 0.0f), heads, &w);
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> l(n);
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::size_t t = 0; t < d; ++t) s += static_cast<double>(q(i, h * d + t)) * k(j, h * d + t);
          l[j] = s / std::sqrt(static_cast<double>(d));
        }
        const double mx = *std::max_element(l.begin(), l.end());
        double z = 0.0, sum = 0.0;
        for (double& e : l) z += (e = std::exp(e - mx));
        for (std::size_t j = 0; j < n; ++j) sum += w.data()[(h * m + i) * n + j];
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
        for (std::size_t t = 0; t < d; ++t) {
          double ref = 0.0;
          for (std::size_t j = 0; j < n; ++j) ref += l[j] / z * v(j, h * d + t);
          worst_ref = std::max(worst_ref, std::abs(ref - out(i, h * d + t)));
        }
      }
    }
    if (n >= 3) {
      std::vector<float> dom(n, 0.0f);
      dom[0] = 50.0f;
      Tensor wd;
      tcf::biased_attention(q, k, v, dom, heads, &wd);
      for (std::size_t r = 0; r < heads * m; ++r) min_dom = std::min(min_dom, static_cast<double>(wd.data()[r * n]));
    }
  }
  o.require(worst_ref < 1e-6, "p = 0 differs from unbiased attention");
  o.require(worst_sum < 1e-6, "attention rows do not sum to 1");
  o.require(min_dom >= 1.0 - 1e-9, "dominating logit holds less than 1 - 1e-9");
  o.detail = "max |out-ref|=" + fmt("%.1e", worst_ref) + ", max |rowsum-1|=" + fmt("%.1e", worst_sum) +
             ", min dominated weight " + fmt("%.12f", min_dom);
  return o;
}

Outcome upsampling_roundtrips() {
  Outcome o;
  const tcf::Model model(tcf::ModelConfig::tiny(), fixtures::tiny_weights());
  const auto p = model.forward(fixtures::random_image(6, 96, 96));
  for (std::size_t s = 0; s < 3; ++s) {
    const auto up = tcf::upsample_tokens(p.stages[s + 1], p.clusters[s], p.stages[s]);
    o.require(up.size() == p.stages[s].size(), "upsampled count differs from the pre-merge count");
    o.require(up.pixel_map == p.stages[s].pixel_map, "upsampled pixel_map differs");
    o.require(tcf::merge_tokens(up, p.clusters[s]).features == p.stages[s + 1].features,
              "merge after upsample is not exact on pipeline records");
  }
  std::mt19937_64 g(1006);
  std::normal_distribution<float> nd(0.0f, 2.0f);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t side = gen::uniform(g, 2, 8), n = side * side, k = gen::uniform(g, 1, n);
    TokenSet t = gen::grid(g, side, side, gen::uniform(g, 1, 8));
    for (float& v : t.importance) v = nd(g);
    const auto rec = record_from(random_assignment(g, n, k), k);
    const TokenSet m = tcf::merge_tokens(t, rec);
    const TokenSet up = tcf::upsample_tokens(m, rec, t);
    o.require(up.size() == n && up.pixel_map == t.pixel_map, "random upsample layout differs");
    o.require(tcf::merge_tokens(up, rec).features == m.features, "merge after upsample is not exact");
  }
  o.detail = "3 pipeline records + 200 random records exact";
  return o;
}

std::vector<std::size_t> counts(const tcf::TokenPyramid& p) {
  std::vector<std::size_t> c;
  for (const auto& s : p.stages) c.push_back(s.size());
  return c;
}

struct Run224 {
  tcf::TokenPyramid pyramid;
  tcf::MtaOutput cr, sr;
  tcf::RunContext cr_ctx;
  double seconds = 0.0;
};

const Run224& run224() {
  static const Run224 r = [] {
    Run224 out;
    const auto config = tcf::ModelConfig::tiny();
    const tcf::Model model(config, fixtures::tiny_weights());
    const Tensor img = fixtures::random_image(7, 224, 224);
    const auto t0 = std::chrono::steady_clock::now();
    out.pyramid = model.forward(img);
    out.cr = tcf::mta_forward(out.pyramid, tcf::MtaVariant::CR, model.mta_weights(), config, &out.cr_ctx);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.sr = tcf::mta_forward(out.pyramid, tcf::MtaVariant::SR, model.mta_weights(), config);
    return out;
  }();
  return r;
}

Outcome pipeline_geometry() {
  Outcome o;
  const auto& r = run224();
  o.require(counts(r.pyramid) == std::vector<std::size_t>{3136, 784, 196, 49}, "224x224 token counts");
  const std::size_t side[4] = {56, 28, 14, 7};
  for (const auto* m : {&r.cr, &r.sr}) {
    for (std::size_t s = 0; s < 4; ++s) {
      o.require(m->pyramid.levels[s].shape() == tcf::Shape{64, side[s], side[s]}, "MTA pyramid shape");
    }
  }
  const tcf::Model model(tcf::ModelConfig::tiny(), fixtures::tiny_weights());
  o.require(counts(model.forward(fixtures::random_image(8, 64, 64))) == std::vector<std::size_t>{256, 64, 16, 4},
            "64x64 token counts");
  o.require(r.seconds < 10.0, "224x224 forward took 10 s or more");
  const char* threads = std::getenv("TCF_THREADS");
  o.detail = "(3136, 784, 196, 49), D=64 pyramid 56/28/14/7, (256, 64, 16, 4); forward+MTA " +
             fmt("%.2f", r.seconds) + " s with TCF_THREADS=" + (threads ? threads : "unset");
  return o;
}

Outcome cr_mta_contract() {
  Outcome o;
  const auto& r = run224();
  std::size_t mta_blocks = 0;
  for (const auto& [name, kv] : r.cr_ctx.kv_counts) {
    if (name.rfind("mta.", 0) != 0) continue;
    ++mta_blocks;
    o.require(kv == 49, name + " used " + std::to_string(kv) + " key/value tokens");
  }
  o.require(mta_blocks == 4, "expected four MTA attention layers");
  const auto& p = r.pyramid;
  const auto& composed = r.cr.composed;
  for (std::size_t s = 0; s < 4; ++s) {
    const TokenSet red = tcf::cr_reduce(p.stages[s], composed.maps[s], composed.num_final);
    o.require(red.size() == 49, "CR output count");
    o.require(red.pixel_map == p.stages[3].pixel_map, "CR output distribution differs from stage 4");
    if (s < 3) {
      for (std::size_t t = 0; t < p.stages[s].size(); ++t) {
        const auto next = static_cast<std::size_t>(p.clusters[s].assignment[t]);
        o.require(composed.maps[s][t] == composed.maps[s + 1][next], "composition inconsistent");
      }
    }
  }
  o.detail = "4 CR-MTA blocks x 49 key/value tokens; CR layouts equal stage 4 at all stages";
  return o;
}

Outcome determinism() {
  Outcome o;
  fixtures::TempDir dir("acc");
  tcf::save_ppm(fixtures::random_image(9, 64, 64), dir.file("in.ppm"));
  for (const char* tag : {"a", "b"}) {
    const std::string t = tag;
    std::ostringstream sink;
    auto* old = std::cout.rdbuf(sink.rdbuf());
    const int code = tcf::run_cli({"run", "--image", dir.file("in.ppm"), "--config", kTiny, "--seed", "0",
                                   "--report", dir.file(t + ".json"), "--overlay-dir", dir.file("ov_" + t)});
    std::cout.rdbuf(old);
    o.require(code == 0, "run exited with " + std::to_string(code));
  }
  o.require(tcf::read_file_bytes(dir.file("a.json")) == tcf::read_file_bytes(dir.file("b.json")), "report bytes differ");
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.file("ov_a"))) {
    const auto other = dir.path() / "ov_b" / e.path().filename();
    o.require(tcf::read_file_bytes(e.path().string()) == tcf::read_file_bytes(other.string()),
              "overlay " + e.path().filename().string() + " differs");
    ++files;
  }
  o.require(files == 8, "expected 8 overlay files");

  std::ostringstream sink;
  auto* old = std::cout.rdbuf(sink.rdbuf());
  const int code = tcf::run_cli({"gen-weights", "--config", kTiny, "--seed", "0", "--out", dir.file("w.tcfw")});
  std::cout.rdbuf(old);
  o.require(code == 0, "gen-weights failed");
  const auto hash = tcf::content_hash(tcf::load_weights(dir.file("w.tcfw")));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  o.require(hash == kTinyWeightsHash, std::string("weight hash ") + buf + " differs from the recorded value");
  o.detail = "report + " + std::to_string(files) + " overlays byte-identical; tiny weights fnv1a64 " + buf;
  return o;
}

Outcome conservation() {
  Outcome o;
  const auto& r = run224();
  const std::size_t stem = 56 * 56;
  std::size_t sets = 0;
  auto check = [&](const TokenSet& t, const std::string& what) {
    const auto m = tcf::stage_token_map(t);
    o.require(std::accumulate(m.areas.begin(), m.areas.end(), std::size_t{0}) == stem, what + " areas");
    double weighted = 0.0;
    for (std::size_t px = 0; px < m.token_ids.size(); ++px) {
      const auto id = static_cast<std::size_t>(m.token_ids[px]);
      o.require(m.density[id] > 0.0, what + " density not positive");
      weighted += m.density[id] * static_cast<double>(m.areas[id]);
    }
    o.require(std::abs(weighted - static_cast<double>(stem)) < 1e-9, what + " density integral");
    ++sets;
  };
  for (std::size_t s = 0; s < 4; ++s) {
    check(r.pyramid.stages[s], "stage " + std::to_string(s + 1));
    check(r.cr.steps[s], "CR-MTA step " + std::to_string(s + 1));
    check(r.sr.steps[s], "SR-MTA step " + std::to_string(s + 1));
  }
  o.detail = std::to_string(sets) + " token sets sum to 3136 pixels; densities positive, area-weighted integral 3136";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"clustering oracle equivalence", oracle_equivalence},
      {"local/global degeneracy", local_global_degeneracy},
      {"clustering complexity law", complexity_law},
      {"weighted merge invariances", merge_invariances},
      {"biased attention checks", attention_checks},
      {"upsampling roundtrips", upsampling_roundtrips},
      {"pipeline geometry and runtime", pipeline_geometry},
      {"CR-MTA contract", cr_mta_contract},
      {"determinism", determinism},
      {"conservation", conservation},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.failure = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": "
              << (o.pass ? o.detail : o.failure) << '\n';
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
