#include "tcf/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace tcf {

using nlohmann::json;

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  const std::array<std::size_t, kNumStages> dims{32, 64, 160, 256};
  const std::array<std::size_t, kNumStages> heads{1, 2, 5, 8};
  const std::array<std::size_t, kNumStages> sr{8, 4, 2, 1};
  for (int s = 0; s < kNumStages; ++s) {
    c.stages[s] = StageConfig{dims[s], heads[s], 2, sr[s], 4};
  }
  return c;
}

ModelConfig ModelConfig::with_global_clustering() const {
  ModelConfig c = *this;
  c.ctm_parts.fill(1);
  return c;
}

void ModelConfig::validate() const {
  for (int s = 0; s < kNumStages; ++s) {
    const auto& st = stages[s];
    const std::string where = "stage " + std::to_string(s) + ": ";
    if (st.dim == 0 || st.heads == 0 || st.dim % st.heads != 0) {
      throw std::invalid_argument(where + "dim must be a positive multiple of heads");
    }
    if (st.blocks == 0) throw std::invalid_argument(where + "needs at least one block");
    if (st.sr_ratio == 0) throw std::invalid_argument(where + "sr_ratio must be positive");
    if (st.mlp_ratio == 0) throw std::invalid_argument(where + "mlp_ratio must be positive");
  }
  if (stages[0].dim % 2 != 0) throw std::invalid_argument("stage 0 dim must be even (stem halves it)");
  for (std::size_t i = 0; i < ctm_parts.size(); ++i) {
    const auto p = ctm_parts[i];
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(p))));
    if (p == 0 || side * side != p) {
      throw std::invalid_argument("ctm_parts[" + std::to_string(i) + "]=" + std::to_string(p) + " is not a perfect square");
    }
    if (i > 0 && p > ctm_parts[i - 1]) throw std::invalid_argument("ctm_parts must be non-increasing");
  }
  if (!(cluster_ratio > 0.0 && cluster_ratio <= 1.0)) throw std::invalid_argument("cluster_ratio must lie in (0, 1]");
  if (knn_k == 0) throw std::invalid_argument("knn_k must be positive");
  if (num_classes == 0) throw std::invalid_argument("num_classes must be positive");
  if (mta_dim == 0 || mta_heads == 0 || mta_dim % mta_heads != 0) {
    throw std::invalid_argument("mta_dim must be a positive multiple of mta_heads");
  }
  if (mta_mlp_ratio == 0) throw std::invalid_argument("mta_mlp_ratio must be positive");
  if (!(ln_eps > 0.0f)) throw std::invalid_argument("ln_eps must be positive");
}

void validate_geometry(const ModelConfig& config, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0 || height % 32 != 0 || width % 32 != 0) {
    throw std::invalid_argument("image size " + std::to_string(height) + "x" + std::to_string(width) +
                                " must be a positive multiple of 32");
  }
  for (int s = 0; s < kNumStages; ++s) {
    const std::size_t gh = (height / 4) >> s, gw = (width / 4) >> s;
    const auto r = config.stages[s].sr_ratio;
    if (gh % r != 0 || gw % r != 0) {
      throw std::invalid_argument("stage " + std::to_string(s) + " grid " + std::to_string(gh) + "x" +
                                  std::to_string(gw) + " is not divisible by sr_ratio " + std::to_string(r));
    }
  }
}

namespace {

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw std::invalid_argument("unknown config key '" + it.key() + "' in " + where);
  }
}

}  // namespace

ModelConfig parse_config(const std::string& json_text) {
  ModelConfig c = ModelConfig::tiny();
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  reject_unknown(j,
                 {"stages", "ctm_parts", "cluster_ratio", "knn_k", "num_classes", "seed", "mta_dim", "mta_heads",
                  "mta_mlp_ratio", "cr_aggregation", "ctm_key_reduction", "ln_eps"},
                 "config");
  try {
    if (auto it = j.find("stages"); it != j.end()) {
      if (!it->is_array() || it->size() != kNumStages) throw std::invalid_argument("config 'stages' must list 4 stages");
      for (int s = 0; s < kNumStages; ++s) {
        const auto& js = (*it)[static_cast<std::size_t>(s)];
        reject_unknown(js, {"dim", "heads", "blocks", "sr_ratio", "mlp_ratio"}, "stage " + std::to_string(s));
        auto& st = c.stages[s];
        read_field(js, "dim", st.dim);
        read_field(js, "heads", st.heads);
        read_field(js, "blocks", st.blocks);
        read_field(js, "sr_ratio", st.sr_ratio);
        read_field(js, "mlp_ratio", st.mlp_ratio);
      }
    }
    if (auto it = j.find("ctm_parts"); it != j.end()) {
      if (!it->is_array() || it->size() != c.ctm_parts.size()) throw std::invalid_argument("config 'ctm_parts' must list 3 counts");
      for (std::size_t i = 0; i < c.ctm_parts.size(); ++i) c.ctm_parts[i] = (*it)[i].get<std::size_t>();
    }
    read_field(j, "cluster_ratio", c.cluster_ratio);
    read_field(j, "knn_k", c.knn_k);
    read_field(j, "num_classes", c.num_classes);
    read_field(j, "seed", c.seed);
    read_field(j, "mta_dim", c.mta_dim);
    read_field(j, "mta_heads", c.mta_heads);
    read_field(j, "mta_mlp_ratio", c.mta_mlp_ratio);
    read_field(j, "ctm_key_reduction", c.ctm_key_reduction);
    read_field(j, "ln_eps", c.ln_eps);
    if (auto it = j.find("cr_aggregation"); it != j.end()) {
      const auto v = it->get<std::string>();
      if (v == "mean") c.cr_aggregation = CrAggregation::Mean;
      else if (v == "importance") c.cr_aggregation = CrAggregation::Importance;
      else throw std::invalid_argument("cr_aggregation must be 'mean' or 'importance'");
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config field has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_to_json(const ModelConfig& c) {
  json j;
  j["stages"] = json::array();
  for (const auto& st : c.stages) {
    j["stages"].push_back(
        {{"dim", st.dim}, {"heads", st.heads}, {"blocks", st.blocks}, {"sr_ratio", st.sr_ratio}, {"mlp_ratio", st.mlp_ratio}});
  }
  j["ctm_parts"] = c.ctm_parts;
  j["cluster_ratio"] = c.cluster_ratio;
  j["knn_k"] = c.knn_k;
  j["num_classes"] = c.num_classes;
  j["seed"] = c.seed;
  j["mta_dim"] = c.mta_dim;
  j["mta_heads"] = c.mta_heads;
  j["mta_mlp_ratio"] = c.mta_mlp_ratio;
  j["cr_aggregation"] = c.cr_aggregation == CrAggregation::Mean ? "mean" : "importance";
  j["ctm_key_reduction"] = c.ctm_key_reduction;
  j["ln_eps"] = c.ln_eps;
  return j.dump(2) + "\n";
}

ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace tcf
