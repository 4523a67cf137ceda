#pragma once

#include <cstdint>
#include <vector>

#include "ganvert/generator.hpp"

namespace ganvert {

// Spreads each key column of a subsampled attention map over its factor x
// factor spatial block, dividing by factor^2 so rows stay stochastic. The
// result is square: keys live on the query grid afterwards.
AttentionMap upsample_attention(const AttentionMap& map, std::size_t factor);

// D = (1 - (A + A^T) / 2) .* (1 - I) for a square row-stochastic attention
// matrix: symmetric, exactly zero diagonal, entries in [0, 1].
Tensor dissimilarity(const AttentionMap& map);

struct MergeRecord {
  int a = -1;           // cluster ids being merged, a < b
  int b = -1;
  double distance = 0;  // average pairwise dissimilarity between them
  int merged = -1;      // id of the new cluster: leaves are 0..N-1, merges N+step
};

// Average-linkage (UPGMA) agglomerative clustering. Ties pick the pair with
// the smallest lower id, then the smallest higher id. labels_at(k) replays
// the first N-k merges and renumbers clusters by their smallest member, so
// coarser labelings are always refinements collapsing.
struct Dendrogram {
  std::size_t leaves = 0;
  std::vector<MergeRecord> merges;  // leaves - 1 records

  std::vector<int> labels_at(std::size_t k) const;  // throws on k outside [1, leaves]
};

Dendrogram agglomerative_cluster(const Tensor& d);

struct Segmentation {
  std::size_t k = 0;
  std::vector<int> labels;  // row-major over the attention query grid
  Tensor rendered;          // [C, grid_h, grid_w], each cell its cluster's average color
};

struct SegmentationResult {
  std::size_t grid_h = 0, grid_w = 0;
  Tensor image;  // the generator output the attention was captured from
  std::vector<Segmentation> segmentations;
};

// Full pipeline for a dense-layer point: render with attention capture,
// upsample the key grid to the query grid, build the dissimilarity matrix,
// cluster, and color each cluster by the average of its cells' image pixels.
SegmentationResult segment(const Tensor& h, const GeneratorBundle& bundle,
                           const std::vector<std::size_t>& cluster_counts);

}  // namespace ganvert
