#include "ganvert/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ganvert {

namespace {

void check_attention(const AttentionMap& map) {
  if (map.matrix.ndim() != 2 || map.matrix.shape[0] != map.query_h * map.query_w ||
      map.matrix.shape[1] != map.key_h * map.key_w) {
    throw shape_error("attention: matrix " + shape_string(map.matrix.shape) +
                      " inconsistent with query grid " + std::to_string(map.query_h) + "x" +
                      std::to_string(map.query_w) + " and key grid " + std::to_string(map.key_h) +
                      "x" + std::to_string(map.key_w));
  }
  const std::size_t n = map.matrix.shape[0], m = map.matrix.shape[1];
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double v = map.matrix.at(i, j);
      if (v < 0.0) throw std::invalid_argument("attention: negative entry");
      row += v;
    }
    if (std::abs(row - 1.0) > 1e-9) {
      throw std::invalid_argument("attention: row " + std::to_string(i) + " sums to " +
                                  std::to_string(row) + ", want 1");
    }
  }
}

}  // namespace

AttentionMap upsample_attention(const AttentionMap& map, std::size_t factor) {
  check_attention(map);
  if (factor == 0) throw std::invalid_argument("upsample_attention: factor must be >= 1");
  if (map.key_h * factor != map.query_h || map.key_w * factor != map.query_w) {
    throw shape_error("upsample_attention: key grid " + std::to_string(map.key_h) + "x" +
                      std::to_string(map.key_w) + " times " + std::to_string(factor) +
                      " does not give query grid " + std::to_string(map.query_h) + "x" +
                      std::to_string(map.query_w));
  }
  if (factor == 1) return map;

  const std::size_t n = map.query_h * map.query_w;
  const double share = 1.0 / static_cast<double>(factor * factor);
  AttentionMap out;
  out.query_h = map.query_h;
  out.query_w = map.query_w;
  out.key_h = map.query_h;
  out.key_w = map.query_w;
  out.matrix = Tensor({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t y = 0; y < map.query_h; ++y) {
      for (std::size_t x = 0; x < map.query_w; ++x) {
        const std::size_t src = (y / factor) * map.key_w + (x / factor);
        out.matrix.at(i, y * map.query_w + x) = map.matrix.at(i, src) * share;
      }
    }
  }
  return out;
}

Tensor dissimilarity(const AttentionMap& map) {
  check_attention(map);
  const std::size_t n = map.matrix.shape[0];
  if (map.matrix.shape[1] != n) {
    throw shape_error("dissimilarity: attention must be square, got " +
                      shape_string(map.matrix.shape));
  }
  Tensor d({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 1.0 - (map.matrix.at(i, j) + map.matrix.at(j, i)) / 2.0;
      d.at(i, j) = v;
      d.at(j, i) = v;
    }
  }
  return d;
}

Dendrogram agglomerative_cluster(const Tensor& d) {
  if (d.ndim() != 2 || d.shape[0] != d.shape[1] || d.shape[0] == 0) {
    throw shape_error("cluster: dissimilarity must be square and nonempty, got " +
                      shape_string(d.shape));
  }
  const std::size_t n = d.shape[0];
  for (std::size_t i = 0; i < n; ++i) {
    if (d.at(i, i) != 0.0) throw std::invalid_argument("cluster: diagonal must be zero");
    for (std::size_t j = i + 1; j < n; ++j) {
      if (d.at(i, j) != d.at(j, i)) throw std::invalid_argument("cluster: matrix not symmetric");
      if (!(d.at(i, j) >= 0.0)) throw std::invalid_argument("cluster: negative dissimilarity");
    }
  }

  Dendrogram tree;
  tree.leaves = n;
  if (n == 1) return tree;

  // Cluster ids 0..n-1 are leaves; merge step t creates id n+t. Cross-pair
  // dissimilarity sums are kept so the UPGMA average is sum / (size_a*size_b)
  // and merging is just adding sums (Lance-Williams for average linkage).
  const std::size_t total = 2 * n - 1;
  std::vector<double> sums(total * total, 0.0);
  std::vector<std::size_t> sizes(total, 0);
  std::vector<bool> active(total, false);
  for (std::size_t i = 0; i < n; ++i) {
    sizes[i] = 1;
    active[i] = true;
    for (std::size_t j = 0; j < n; ++j) sums[i * total + j] = d.at(i, j);
  }

  for (std::size_t step = 0; step + 1 < n; ++step) {
    int best_a = -1, best_b = -1;
    double best = 0.0;
    for (std::size_t a = 0; a < total; ++a) {
      if (!active[a]) continue;
      for (std::size_t b = a + 1; b < total; ++b) {
        if (!active[b]) continue;
        const double avg = sums[a * total + b] / static_cast<double>(sizes[a] * sizes[b]);
        if (best_a < 0 || avg < best) {  // strict < keeps the (min id, max id) tie winner
          best = avg;
          best_a = static_cast<int>(a);
          best_b = static_cast<int>(b);
        }
      }
    }

    const std::size_t merged = n + step;
    const std::size_t a = static_cast<std::size_t>(best_a), b = static_cast<std::size_t>(best_b);
    tree.merges.push_back({best_a, best_b, best, static_cast<int>(merged)});
    sizes[merged] = sizes[a] + sizes[b];
    for (std::size_t c = 0; c < total; ++c) {
      if (!active[c] || c == a || c == b) continue;
      const double s = sums[a * total + c] + sums[b * total + c];
      sums[merged * total + c] = s;
      sums[c * total + merged] = s;
    }
    active[a] = false;
    active[b] = false;
    active[merged] = true;
  }
  return tree;
}

std::vector<int> Dendrogram::labels_at(std::size_t k) const {
  if (k < 1 || k > leaves) {
    throw std::invalid_argument("labels_at: k = " + std::to_string(k) + " outside [1, " +
                                std::to_string(leaves) + "]");
  }
  // Replay the first leaves-k merges over a leaf -> cluster map.
  std::vector<int> owner(leaves);
  std::iota(owner.begin(), owner.end(), 0);
  for (std::size_t step = 0; step < leaves - k; ++step) {
    const MergeRecord& m = merges[step];
    for (int& o : owner) {
      if (o == m.a || o == m.b) o = m.merged;
    }
  }
  // Renumber by smallest member: the first leaf of each cluster in index
  // order fixes that cluster's label.
  std::vector<int> label(leaves, -1);
  std::vector<std::pair<int, int>> seen;  // cluster id -> label
  for (std::size_t i = 0; i < leaves; ++i) {
    int found = -1;
    for (const auto& [cluster, l] : seen) {
      if (cluster == owner[i]) {
        found = l;
        break;
      }
    }
    if (found < 0) {
      found = static_cast<int>(seen.size());
      seen.emplace_back(owner[i], found);
    }
    label[i] = found;
  }
  return label;
}

SegmentationResult segment(const Tensor& h, const GeneratorBundle& bundle,
                           const std::vector<std::size_t>& cluster_counts) {
  if (cluster_counts.empty()) throw std::invalid_argument("segment: no cluster counts given");
  auto [image, attention] = g2_forward(h, bundle, true);
  const AttentionMap& raw = *attention;
  const std::size_t factor = raw.query_h / raw.key_h;
  const AttentionMap full = upsample_attention(raw, factor);
  const Tensor d = dissimilarity(full);
  const Dendrogram tree = agglomerative_cluster(d);

  SegmentationResult out;
  out.grid_h = full.query_h;
  out.grid_w = full.query_w;
  out.image = image;

  const std::size_t channels = image.shape[0];
  const std::size_t cell_h = image.shape[1] / out.grid_h;
  const std::size_t cell_w = image.shape[2] / out.grid_w;

  for (const std::size_t k : cluster_counts) {
    Segmentation seg;
    seg.k = k;
    seg.labels = tree.labels_at(k);

    // Average color of each cluster over the image pixels its cells cover.
    std::vector<double> color(k * channels, 0.0);
    std::vector<double> count(k, 0.0);
    for (std::size_t gy = 0; gy < out.grid_h; ++gy) {
      for (std::size_t gx = 0; gx < out.grid_w; ++gx) {
        const int l = seg.labels[gy * out.grid_w + gx];
        count[static_cast<std::size_t>(l)] += static_cast<double>(cell_h * cell_w);
        for (std::size_t c = 0; c < channels; ++c) {
          for (std::size_t py = gy * cell_h; py < (gy + 1) * cell_h; ++py) {
            for (std::size_t px = gx * cell_w; px < (gx + 1) * cell_w; ++px) {
              color[static_cast<std::size_t>(l) * channels + c] += image.at(c, py, px);
            }
          }
        }
      }
    }
    seg.rendered = Tensor({channels, out.grid_h, out.grid_w}, 0.0);
    for (std::size_t gy = 0; gy < out.grid_h; ++gy) {
      for (std::size_t gx = 0; gx < out.grid_w; ++gx) {
        const std::size_t l = static_cast<std::size_t>(seg.labels[gy * out.grid_w + gx]);
        for (std::size_t c = 0; c < channels; ++c) {
          seg.rendered.at(c, gy, gx) = color[l * channels + c] / count[l];
        }
      }
    }
    out.segmentations.push_back(std::move(seg));
  }
  return out;
}

}  // namespace ganvert
