#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tcf/image.hpp"
#include "tcf/mta.hpp"

namespace tcf {

inline constexpr const char* kReportSchema = "tcf-report/1";

struct StageTokenMap {
  int stage = 1;  // 1-based in reports and file names
  std::size_t grid_h = 0, grid_w = 0;
  std::size_t token_count = 0;
  std::vector<std::int32_t> token_ids;  // stem-grid pixel -> token
  std::vector<std::size_t> areas;       // stem pixels per token
  std::vector<double> density;          // 1 / area per token
};

struct CtmRecord {
  std::size_t parts = 1;
  std::size_t tokens_in = 0;
  std::size_t clusters = 0;
  std::uint64_t dist_ops = 0;
};

struct MtaRecord {
  std::string variant;
  std::vector<Shape> levels;
  std::vector<std::size_t> kv_tokens;            // per level, stride 4 first
  std::vector<std::vector<std::size_t>> areas;   // per level, token areas of each MTA step
};

struct TokenMapReport {
  std::size_t image_h = 0, image_w = 0;
  std::size_t map_h = 0, map_w = 0;
  std::uint64_t seed = 0;
  std::vector<StageTokenMap> stages;
  std::vector<CtmRecord> ctm;
  std::uint64_t dist_ops = 0;
  std::uint64_t attention_macs = 0;
  std::optional<MtaRecord> mta;
  std::vector<float> logits;
};

StageTokenMap stage_token_map(const TokenSet& tokens);

/// `attention_macs` should cover everything that ran (backbone plus MTA).
TokenMapReport build_report(const TokenPyramid& pyramid, const MtaOutput* mta, MtaVariant variant,
                            std::uint64_t attention_macs, std::vector<float> logits, std::uint64_t seed);

/// Pretty-printed JSON, keys in fixed order, doubles in shortest round-trip form.
std::string report_to_json(const TokenMapReport& report);

/// Deterministic, injective token colour; never black.
std::array<std::uint8_t, 3> token_color(std::int32_t id);

/// Stem-grid overlay: each pixel takes its token's colour; with `boundaries`
/// any pixel whose 4-neighbour belongs to another token is painted black.
RgbImage render_token_overlay(const StageTokenMap& stage, std::size_t map_h, std::size_t map_w, bool boundaries = true);

/// Greyscale token density (1/area), scaled so the densest token is white.
RgbImage render_density_map(const StageTokenMap& stage, std::size_t map_h, std::size_t map_w);

/// Writes the overlay of report stage `stage` (1-based) as PPM.
void save_token_overlay(const TokenMapReport& report, int stage, const std::string& path);

}  // namespace tcf
