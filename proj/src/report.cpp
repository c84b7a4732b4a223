#include "tcf/report.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"

namespace tcf {

using ordered_json = nlohmann::ordered_json;

StageTokenMap stage_token_map(const TokenSet& tokens) {
  StageTokenMap m;
  m.stage = tokens.stage + 1;
  m.grid_h = tokens.grid_h;
  m.grid_w = tokens.grid_w;
  m.token_count = tokens.size();
  m.token_ids = tokens.pixel_map;
  m.areas = owned_pixel_counts(tokens);
  m.density.resize(m.areas.size());
  for (std::size_t i = 0; i < m.areas.size(); ++i) {
    if (m.areas[i] == 0) throw std::logic_error("token " + std::to_string(i) + " owns no pixel");
    m.density[i] = 1.0 / static_cast<double>(m.areas[i]);
  }
  return m;
}

TokenMapReport build_report(const TokenPyramid& pyramid, const MtaOutput* mta, MtaVariant variant,
                            std::uint64_t attention_macs, std::vector<float> logits, std::uint64_t seed) {
  TokenMapReport r;
  r.image_h = pyramid.image_h;
  r.image_w = pyramid.image_w;
  r.map_h = pyramid.stem_h;
  r.map_w = pyramid.stem_w;
  r.seed = seed;
  for (const auto& st : pyramid.stages) r.stages.push_back(stage_token_map(st));
  for (std::size_t i = 0; i < pyramid.clusters.size(); ++i) {
    const auto& c = pyramid.clusters[i];
    r.ctm.push_back({static_cast<std::size_t>(c.num_parts), c.num_tokens(), c.num_clusters(), c.dist_ops});
  }
  r.dist_ops = pyramid.dist_ops;
  r.attention_macs = attention_macs;
  if (mta) {
    MtaRecord m;
    m.variant = variant == MtaVariant::CR ? "cr" : "sr";
    for (int s = 0; s < kNumStages; ++s) {
      m.levels.push_back(mta->pyramid.levels[s].shape());
      m.kv_tokens.push_back(mta->kv_tokens[s]);
      m.areas.push_back(owned_pixel_counts(mta->steps[s]));
    }
    r.mta = std::move(m);
  }
  r.logits = std::move(logits);
  return r;
}

std::string report_to_json(const TokenMapReport& r) {
  ordered_json j;
  j["schema"] = kReportSchema;
  j["image"] = {{"height", r.image_h}, {"width", r.image_w}};
  j["stem_grid"] = {{"height", r.map_h}, {"width", r.map_w}};
  j["seed"] = r.seed;
  j["stages"] = ordered_json::array();
  for (const auto& s : r.stages) {
    ordered_json js;
    js["stage"] = s.stage;
    js["grid"] = {s.grid_h, s.grid_w};
    js["token_count"] = s.token_count;
    js["areas"] = s.areas;
    js["density"] = s.density;
    js["token_ids"] = s.token_ids;
    std::vector<double> density_map(s.token_ids.size());
    for (std::size_t p = 0; p < density_map.size(); ++p) density_map[p] = s.density[static_cast<std::size_t>(s.token_ids[p])];
    js["density_map"] = density_map;
    j["stages"].push_back(std::move(js));
  }
  j["ctm"] = ordered_json::array();
  for (std::size_t i = 0; i < r.ctm.size(); ++i) {
    const auto& c = r.ctm[i];
    j["ctm"].push_back({{"index", i + 1},
                        {"parts", c.parts},
                        {"tokens_in", c.tokens_in},
                        {"clusters", c.clusters},
                        {"dist_ops", c.dist_ops}});
  }
  j["dist_ops"] = r.dist_ops;
  j["attention_macs"] = r.attention_macs;
  if (r.mta) {
    ordered_json m;
    m["variant"] = r.mta->variant;
    m["levels"] = r.mta->levels;
    m["kv_tokens"] = r.mta->kv_tokens;
    m["step_areas"] = r.mta->areas;
    j["mta"] = std::move(m);
  } else {
    j["mta"] = nullptr;
  }
  std::vector<double> logits(r.logits.begin(), r.logits.end());
  j["logits"] = logits;
  return j.dump(1) + "\n";
}

std::array<std::uint8_t, 3> token_color(std::int32_t id) {
  // Xorshift and odd multipliers are bijections on 24 bits fixing 0, so
  // id + 1 never maps to black and distinct ids never share a colour.
  constexpr std::uint32_t mask = 0xFFFFFFu;
  std::uint32_t x = (static_cast<std::uint32_t>(id) + 1u) & mask;
  x ^= x >> 12;
  x = (x * 0xB5297Bu) & mask;
  x ^= x >> 11;
  x = (x * 0x2C1B3Du) & mask;
  x ^= x >> 13;
  return {static_cast<std::uint8_t>(x >> 16), static_cast<std::uint8_t>(x >> 8), static_cast<std::uint8_t>(x)};
}

RgbImage render_token_overlay(const StageTokenMap& stage, std::size_t map_h, std::size_t map_w, bool boundaries) {
  if (stage.token_ids.size() != map_h * map_w) throw std::invalid_argument("overlay: token map does not match grid");
  RgbImage img{map_w, map_h, std::vector<std::uint8_t>(map_h * map_w * 3)};
  for (std::size_t y = 0; y < map_h; ++y) {
    for (std::size_t x = 0; x < map_w; ++x) {
      const auto id = stage.token_ids[y * map_w + x];
      bool edge = false;
      if (boundaries) {
        edge = (y > 0 && stage.token_ids[(y - 1) * map_w + x] != id) ||
               (y + 1 < map_h && stage.token_ids[(y + 1) * map_w + x] != id) ||
               (x > 0 && stage.token_ids[y * map_w + x - 1] != id) ||
               (x + 1 < map_w && stage.token_ids[y * map_w + x + 1] != id);
      }
      const auto col = edge ? std::array<std::uint8_t, 3>{0, 0, 0} : token_color(id);
      std::copy(col.begin(), col.end(), img.pixels.begin() + static_cast<std::ptrdiff_t>((y * map_w + x) * 3));
    }
  }
  return img;
}

RgbImage render_density_map(const StageTokenMap& stage, std::size_t map_h, std::size_t map_w) {
  if (stage.token_ids.size() != map_h * map_w) throw std::invalid_argument("density map: token map does not match grid");
  const double peak = *std::max_element(stage.density.begin(), stage.density.end());
  RgbImage img{map_w, map_h, std::vector<std::uint8_t>(map_h * map_w * 3)};
  for (std::size_t p = 0; p < map_h * map_w; ++p) {
    const double v = stage.density[static_cast<std::size_t>(stage.token_ids[p])] / peak;
    const auto level = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    img.pixels[p * 3] = img.pixels[p * 3 + 1] = img.pixels[p * 3 + 2] = level;
  }
  return img;
}

void save_token_overlay(const TokenMapReport& report, int stage, const std::string& path) {
  auto it = std::find_if(report.stages.begin(), report.stages.end(), [&](const StageTokenMap& s) { return s.stage == stage; });
  if (it == report.stages.end()) throw std::invalid_argument("report has no stage " + std::to_string(stage));
  save_ppm(render_token_overlay(*it, report.map_h, report.map_w), path);
}

}  // namespace tcf
