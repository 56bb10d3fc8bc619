#include "priorsfm/graph/correspondence_graph.h"

#include <algorithm>
#include <numeric>

#include "priorsfm/util/errors.h"

namespace priorsfm {

void CorrespondenceGraph::Build(const std::map<int, int>& keypoint_counts,
                                const std::vector<PairMatches>& matches) {
  keypoint_counts_ = keypoint_counts;

  int total = 0;
  image_node_offset_.clear();
  for (const auto& [image_id, count] : keypoint_counts_) {
    if (count < 0) {
      throw ValidationError("negative keypoint count");
    }
    image_node_offset_[image_id] = total;
    total += count;
  }

  parent_.resize(total);
  std::iota(parent_.begin(), parent_.end(), 0);
  flagged_.assign(total, false);
  track_id_.assign(total, -1);
  tracks_.clear();
  pair_stats_.clear();

  // Canonicalize: normalize each block to (a < b), merge blocks of the same
  // pair, and sort matches. The union order below is then a pure function of
  // the match content, not of file ordering.
  std::map<std::pair<int, int>, std::vector<PairMatches::Entry>> canonical;
  for (const PairMatches& pair : matches) {
    if (!pair.verified) {
      continue;
    }
    if (pair.image_a == pair.image_b) {
      throw ValidationError("self-matching image pair");
    }
    const bool swap = pair.image_a > pair.image_b;
    const int a = swap ? pair.image_b : pair.image_a;
    const int b = swap ? pair.image_a : pair.image_b;
    const auto it_a = keypoint_counts_.find(a);
    const auto it_b = keypoint_counts_.find(b);
    if (it_a == keypoint_counts_.end() || it_b == keypoint_counts_.end()) {
      throw OutOfBoundsError("match references unknown image");
    }
    auto& entries = canonical[{a, b}];
    for (const PairMatches::Entry& entry : pair.entries) {
      PairMatches::Entry e = entry;
      if (swap) {
        std::swap(e.idx_a, e.idx_b);
      }
      if (e.idx_a < 0 || e.idx_a >= it_a->second || e.idx_b < 0 ||
          e.idx_b >= it_b->second) {
        throw OutOfBoundsError("match keypoint index out of range");
      }
      if (!(e.score > 0.0)) {
        throw ValidationError("match score must be positive");
      }
      entries.push_back(e);
    }
  }

  // Track the member images of every union-find set so that merges that would
  // put two keypoints of one image into a single track can be rejected.
  std::vector<std::set<int>> root_images(total);
  for (const auto& [image_id, offset] : image_node_offset_) {
    for (int k = 0; k < keypoint_counts_.at(image_id); ++k) {
      root_images[offset + k].insert(image_id);
    }
  }

  for (auto& [pair_id, entries] : canonical) {
    std::sort(entries.begin(), entries.end(),
              [](const PairMatches::Entry& x, const PairMatches::Entry& y) {
                if (x.idx_a != y.idx_a) return x.idx_a < y.idx_a;
                if (x.idx_b != y.idx_b) return x.idx_b < y.idx_b;
                return x.score < y.score;
              });

    PairStats& stats = pair_stats_[pair_id];
    std::set<int> used_a, used_b;
    const int offset_a = image_node_offset_.at(pair_id.first);
    const int offset_b = image_node_offset_.at(pair_id.second);

    for (const PairMatches::Entry& e : entries) {
      // First occupant of either keypoint index wins within the pair.
      if (used_a.count(e.idx_a) || used_b.count(e.idx_b)) {
        continue;
      }
      used_a.insert(e.idx_a);
      used_b.insert(e.idx_b);
      stats.num_matches += 1;
      stats.score_sum += e.score;

      const int node_a = offset_a + e.idx_a;
      const int node_b = offset_b + e.idx_b;
      int root_a = FindRoot(node_a);
      int root_b = FindRoot(node_b);
      if (root_a == root_b) {
        continue;
      }

      // Reject merges that would join two keypoints of one image.
      bool conflict = false;
      const std::set<int>& small =
          root_images[root_a].size() <= root_images[root_b].size()
              ? root_images[root_a]
              : root_images[root_b];
      const std::set<int>& large =
          root_images[root_a].size() <= root_images[root_b].size()
              ? root_images[root_b]
              : root_images[root_a];
      for (const int image : small) {
        if (large.count(image)) {
          conflict = true;
          break;
        }
      }
      if (conflict) {
        flagged_[node_a] = true;
        flagged_[node_b] = true;
        continue;
      }

      // Union by member count; merge the smaller image set into the larger.
      if (root_images[root_a].size() < root_images[root_b].size()) {
        std::swap(root_a, root_b);
      }
      parent_[root_b] = root_a;
      root_images[root_a].insert(root_images[root_b].begin(),
                                 root_images[root_b].end());
      root_images[root_b].clear();
    }
  }

  // Extract tracks (components with >= 2 members), ordered by their smallest
  // member so ids are stable.
  std::map<int, std::vector<Node>> components;
  for (const auto& [image_id, offset] : image_node_offset_) {
    for (int k = 0; k < keypoint_counts_.at(image_id); ++k) {
      const int node = offset + k;
      components[FindRoot(node)].push_back({image_id, k});
    }
  }
  for (auto& [root, members] : components) {
    if (members.size() < 2) {
      continue;
    }
    std::sort(members.begin(), members.end());
    const int track_id = static_cast<int>(tracks_.size());
    for (const Node& member : members) {
      track_id_[NodeIndex(member)] = track_id;
    }
    tracks_.push_back(std::move(members));
  }
}

int CorrespondenceGraph::FindRoot(int node) const {
  while (parent_[node] != node) {
    parent_[node] = parent_[parent_[node]];
    node = parent_[node];
  }
  return node;
}

int CorrespondenceGraph::NodeIndex(const Node& node) const {
  return image_node_offset_.at(node.image_id) + node.keypoint_idx;
}

int CorrespondenceGraph::TrackIdOf(int image_id, int keypoint_idx) const {
  const auto it = image_node_offset_.find(image_id);
  if (it == image_node_offset_.end()) {
    return -1;
  }
  return track_id_[it->second + keypoint_idx];
}

bool CorrespondenceGraph::IsFlagged(int image_id, int keypoint_idx) const {
  const auto it = image_node_offset_.find(image_id);
  if (it == image_node_offset_.end()) {
    return false;
  }
  return flagged_[it->second + keypoint_idx];
}

int CorrespondenceGraph::NumKeypoints(int image_id) const {
  const auto it = keypoint_counts_.find(image_id);
  return it == keypoint_counts_.end() ? 0 : it->second;
}

std::vector<std::pair<int, int>> CorrespondenceGraph::RankInitPairs() const {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(pair_stats_.size());
  for (const auto& [pair_id, stats] : pair_stats_) {
    if (stats.num_matches > 0) {
      pairs.push_back(pair_id);
    }
  }
  std::sort(pairs.begin(), pairs.end(),
            [this](const std::pair<int, int>& x, const std::pair<int, int>& y) {
              const PairStats& sx = pair_stats_.at(x);
              const PairStats& sy = pair_stats_.at(y);
              if (sx.num_matches != sy.num_matches) {
                return sx.num_matches > sy.num_matches;
              }
              if (sx.score_sum != sy.score_sum) {
                return sx.score_sum > sy.score_sum;
              }
              return x < y;
            });
  return pairs;
}

std::vector<int> CorrespondenceGraph::NextViewCandidates(
    const std::set<int>& registered, NextViewRanking ranking,
    const std::function<int(int)>& visible_points) const {
  std::vector<std::pair<double, int>> scored;
  for (const auto& [image_id, count] : keypoint_counts_) {
    if (registered.count(image_id)) {
      continue;
    }
    double score = 0.0;
    if (ranking == NextViewRanking::kVisiblePoints) {
      score = visible_points ? static_cast<double>(visible_points(image_id)) : 0.0;
    } else {
      // Best single connection to any registered image.
      for (const int reg : registered) {
        const auto it = pair_stats_.find(
            {std::min(image_id, reg), std::max(image_id, reg)});
        if (it == pair_stats_.end()) {
          continue;
        }
        const double value = ranking == NextViewRanking::kInlierCount
                                 ? static_cast<double>(it->second.num_matches)
                                 : it->second.score_sum;
        score = std::max(score, value);
      }
    }
    scored.emplace_back(score, image_id);
  }
  std::sort(scored.begin(), scored.end(),
            [](const std::pair<double, int>& x, const std::pair<double, int>& y) {
              if (x.first != y.first) return x.first > y.first;
              return x.second < y.second;
            });
  std::vector<int> result;
  result.reserve(scored.size());
  for (const auto& [score, image_id] : scored) {
    result.push_back(image_id);
  }
  return result;
}

}  // namespace priorsfm
