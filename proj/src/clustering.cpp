#include "tcf/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "tcf/parallel.hpp"

namespace tcf {

namespace {

std::size_t token_count(const Tensor& features) {
  if (features.rank() != 2) throw std::invalid_argument("clustering expects an N x C feature matrix");
  return features.dim(0);
}

std::vector<double> density_from_matrix(const Tensor& d2, std::size_t k) {
  const std::size_t n = d2.dim(0);
  if (k < 1 || k + 1 > n) {
    throw std::invalid_argument("local_density: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(n == 0 ? 0 : n - 1) + "]");
  }
  std::vector<double> rho(n);
  std::vector<std::size_t> order(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = d2.row(i);
    std::size_t w = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order[w++] = j;
    }
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return row[a] < row[b] || (row[a] == row[b] && a < b);
                      });
    double sum = 0.0;
    for (std::size_t q = 0; q < k; ++q) sum += static_cast<double>(row[order[q]]);
    rho[i] = std::exp(-sum / static_cast<double>(k));
  }
  return rho;
}

std::vector<std::size_t> density_order(const std::vector<double>& rho) {
  std::vector<std::size_t> order(rho.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rho[a] > rho[b] || (rho[a] == rho[b] && a < b);
  });
  return order;
}

std::vector<double> delta_from_matrix(const Tensor& d2, const std::vector<double>& rho) {
  const std::size_t n = d2.dim(0);
  if (n < 2) throw std::invalid_argument("distance_indicator needs at least 2 tokens");
  if (rho.size() != n) throw std::invalid_argument("distance_indicator: rho length mismatch");
  const auto order = density_order(rho);
  std::vector<double> delta(n);
  {
    const auto row = d2.row(order[0]);
    float mx = 0.0f;
    for (float v : row) mx = std::max(mx, v);
    delta[order[0]] = std::sqrt(static_cast<double>(mx));
  }
  for (std::size_t p = 1; p < n; ++p) {
    const auto row = d2.row(order[p]);
    float mn = row[order[0]];
    for (std::size_t q = 1; q < p; ++q) mn = std::min(mn, row[order[q]]);
    delta[order[p]] = std::sqrt(static_cast<double>(mn));
  }
  return delta;
}

std::vector<std::int32_t> assign_from_matrix(const Tensor& d2, const std::vector<std::int32_t>& centers) {
  const std::size_t n = d2.dim(0);
  if (centers.empty()) throw std::invalid_argument("assign_to_centers: no centers");
  std::vector<std::int32_t> assignment(n, -1);
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const auto idx = centers[c];
    if (idx < 0 || static_cast<std::size_t>(idx) >= n) {
      throw std::invalid_argument("assign_to_centers: center index out of range");
    }
    if (assignment[static_cast<std::size_t>(idx)] != -1) {
      throw std::invalid_argument("assign_to_centers: duplicate center " + std::to_string(idx));
    }
    assignment[static_cast<std::size_t>(idx)] = static_cast<std::int32_t>(c);
  }
  for (std::size_t t = 0; t < n; ++t) {
    if (assignment[t] != -1) continue;
    const auto row = d2.row(t);
    std::size_t best = 0;
    float best_d = row[static_cast<std::size_t>(centers[0])];
    for (std::size_t c = 1; c < centers.size(); ++c) {
      const float d = row[static_cast<std::size_t>(centers[c])];
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    assignment[t] = static_cast<std::int32_t>(best);
  }
  return assignment;
}

ClusterResult singleton_result(std::size_t channels) {
  ClusterResult r;
  r.rho = {1.0};
  r.delta = {0.0};
  r.score = {0.0};
  r.centers = {0};
  r.assignment = {0};
  r.part_label = {0};
  r.dist_ops = channels;
  return r;
}

}  // namespace

Tensor pairwise_sq_distances(const Tensor& features, std::uint64_t* ops) {
  const std::size_t n = token_count(features);
  const std::size_t c = features.dim(1);
  Tensor d2({n, n});
  parallel_for(
      n,
      [&](std::size_t i) {
        const auto xi = features.row(i);
        auto out = d2.row(i);
        for (std::size_t j = 0; j < n; ++j) {
          const auto xj = features.row(j);
          float acc = 0.0f;
          for (std::size_t ch = 0; ch < c; ++ch) {
            const float diff = xi[ch] - xj[ch];
            acc += diff * diff;
          }
          out[j] = acc;
        }
      },
      32);
  if (ops) *ops += static_cast<std::uint64_t>(n) * n * c;
  ensure_finite(d2, "pairwise_sq_distances");
  return d2;
}

std::vector<double> local_density(const Tensor& features, std::size_t k) {
  token_count(features);
  return density_from_matrix(pairwise_sq_distances(features), k);
}

std::vector<double> distance_indicator(const Tensor& features, const std::vector<double>& rho) {
  if (token_count(features) < 2) throw std::invalid_argument("distance_indicator needs at least 2 tokens");
  return delta_from_matrix(pairwise_sq_distances(features), rho);
}

std::vector<std::int32_t> select_centers(const std::vector<double>& rho, const std::vector<double>& delta,
                                         std::size_t k) {
  const std::size_t n = rho.size();
  if (delta.size() != n) throw std::invalid_argument("select_centers: rho/delta length mismatch");
  if (k < 1 || k > n) {
    throw std::invalid_argument("select_centers: K=" + std::to_string(k) + " outside [1, " +
                                std::to_string(n) + "]");
  }
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) score[i] = rho[i] * delta[i];
  std::vector<std::int32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::int32_t a, std::int32_t b) {
                      const double sa = score[static_cast<std::size_t>(a)];
                      const double sb = score[static_cast<std::size_t>(b)];
                      return sa > sb || (sa == sb && a < b);
                    });
  idx.resize(k);
  return idx;
}

std::vector<std::int32_t> assign_to_centers(const Tensor& features, const std::vector<std::int32_t>& centers) {
  token_count(features);
  return assign_from_matrix(pairwise_sq_distances(features), centers);
}

ClusterResult cluster_global(const Tensor& features, std::size_t num_clusters, std::size_t knn) {
  const std::size_t n = token_count(features);
  if (num_clusters < 1 || num_clusters > n) {
    throw std::invalid_argument("cluster_global: K=" + std::to_string(num_clusters) + " outside [1, " +
                                std::to_string(n) + "]");
  }
  ClusterResult r;
  const Tensor d2 = pairwise_sq_distances(features, &r.dist_ops);
  r.rho = density_from_matrix(d2, knn);
  r.delta = delta_from_matrix(d2, r.rho);
  r.score.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.score[i] = r.rho[i] * r.delta[i];
  r.centers = select_centers(r.rho, r.delta, num_clusters);
  r.assignment = assign_from_matrix(d2, r.centers);
  r.part_label.assign(n, 0);
  r.num_parts = 1;
  return r;
}

std::vector<std::int32_t> part_labels(const TokenSet& tokens, std::size_t parts) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(parts))));
  if (parts == 0 || side * side != parts) {
    throw std::invalid_argument("part count " + std::to_string(parts) + " is not a perfect square");
  }
  if (side > tokens.map_h || side > tokens.map_w) {
    throw std::invalid_argument("part grid " + std::to_string(side) + "x" + std::to_string(side) +
                                " is finer than the pixel grid");
  }
  const std::size_t n = tokens.size();
  std::vector<double> cy(n, 0.0), cx(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  for (std::size_t y = 0; y < tokens.map_h; ++y) {
    for (std::size_t x = 0; x < tokens.map_w; ++x) {
      const auto id = static_cast<std::size_t>(tokens.pixel_map[y * tokens.map_w + x]);
      if (id >= n) throw std::invalid_argument("pixel_map holds invalid token id");
      cy[id] += static_cast<double>(y) + 0.5;
      cx[id] += static_cast<double>(x) + 0.5;
      ++count[id];
    }
  }
  std::vector<std::int32_t> label(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (count[t] == 0) throw std::invalid_argument("token " + std::to_string(t) + " owns no pixel");
    const double my = cy[t] / static_cast<double>(count[t]);
    const double mx = cx[t] / static_cast<double>(count[t]);
    auto py = static_cast<std::size_t>(my * static_cast<double>(side) / static_cast<double>(tokens.map_h));
    auto px = static_cast<std::size_t>(mx * static_cast<double>(side) / static_cast<double>(tokens.map_w));
    py = std::min(py, side - 1);
    px = std::min(px, side - 1);
    label[t] = static_cast<std::int32_t>(py * side + px);
  }
  return label;
}

ClusterResult cluster_local(const TokenSet& tokens, std::size_t parts, double ratio, std::size_t knn) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw std::invalid_argument("cluster ratio must lie in (0, 1]");
  if (knn < 1) throw std::invalid_argument("knn must be >= 1");
  const std::size_t n = tokens.size();
  const std::size_t c = tokens.channels();
  const auto label = part_labels(tokens, parts);

  std::vector<std::vector<std::int32_t>> members(parts);
  for (std::size_t t = 0; t < n; ++t) members[static_cast<std::size_t>(label[t])].push_back(static_cast<std::int32_t>(t));
  for (std::size_t p = 0; p < parts; ++p) {
    if (members[p].empty()) throw std::invalid_argument("cluster_local: part " + std::to_string(p) + " is empty");
  }

  std::vector<ClusterResult> local(parts);
  parallel_for(parts, [&](std::size_t p) {
    const auto& idx = members[p];
    const std::size_t np = idx.size();
    if (np == 1) {
      local[p] = singleton_result(c);
      return;
    }
    Tensor sub({np, c});
    for (std::size_t i = 0; i < np; ++i) {
      const auto src = tokens.features.row(static_cast<std::size_t>(idx[i]));
      std::copy(src.begin(), src.end(), sub.row(i).begin());
    }
    const auto kp = std::clamp<long long>(std::llround(static_cast<double>(np) * ratio), 1,
                                          static_cast<long long>(np));
    local[p] = cluster_global(sub, static_cast<std::size_t>(kp), std::min(knn, np - 1));
  });

  ClusterResult r;
  r.rho.resize(n);
  r.delta.resize(n);
  r.score.resize(n);
  r.assignment.resize(n);
  r.part_label = label;
  r.num_parts = static_cast<std::int32_t>(parts);
  std::int32_t offset = 0;
  for (std::size_t p = 0; p < parts; ++p) {
    const auto& idx = members[p];
    const auto& lr = local[p];
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto t = static_cast<std::size_t>(idx[i]);
      r.rho[t] = lr.rho[i];
      r.delta[t] = lr.delta[i];
      r.score[t] = lr.score[i];
      r.assignment[t] = lr.assignment[i] + offset;
    }
    for (auto ci : lr.centers) r.centers.push_back(idx[static_cast<std::size_t>(ci)]);
    r.dist_ops += lr.dist_ops;
    offset += static_cast<std::int32_t>(lr.centers.size());
  }
  return r;
}

void validate(const ClusterResult& r) {
  const std::size_t n = r.assignment.size();
  const std::size_t k = r.centers.size();
  if (k == 0) throw std::logic_error("ClusterResult has no clusters");
  if (r.rho.size() != n || r.delta.size() != n || r.score.size() != n || r.part_label.size() != n) {
    throw std::logic_error("ClusterResult field lengths disagree");
  }
  std::vector<std::size_t> members(k, 0);
  for (auto a : r.assignment) {
    if (a < 0 || static_cast<std::size_t>(a) >= k) throw std::logic_error("assignment out of range");
    ++members[static_cast<std::size_t>(a)];
  }
  std::vector<char> seen(n, 0);
  for (std::size_t c = 0; c < k; ++c) {
    const auto idx = r.centers[c];
    if (idx < 0 || static_cast<std::size_t>(idx) >= n) throw std::logic_error("center out of range");
    if (seen[static_cast<std::size_t>(idx)]) throw std::logic_error("duplicate center");
    seen[static_cast<std::size_t>(idx)] = 1;
    if (r.assignment[static_cast<std::size_t>(idx)] != static_cast<std::int32_t>(c)) {
      throw std::logic_error("center not assigned to its own cluster");
    }
  }
  std::vector<std::int32_t> cluster_part(k, -1);
  for (std::size_t t = 0; t < n; ++t) {
    const auto a = static_cast<std::size_t>(r.assignment[t]);
    if (r.part_label[t] < 0 || r.part_label[t] >= r.num_parts) throw std::logic_error("part label out of range");
    if (cluster_part[a] == -1) cluster_part[a] = r.part_label[t];
    if (cluster_part[a] != r.part_label[t]) throw std::logic_error("cluster spans two parts");
  }
}

}  // namespace tcf
