#ifndef PRIORSFM_GRAPH_CORRESPONDENCE_GRAPH_H_
#define PRIORSFM_GRAPH_CORRESPONDENCE_GRAPH_H_

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <vector>

namespace priorsfm {

// Matches between one image pair. Scores are the matcher confidences in
// (0, 1]; sparse and dense matches share one list and one score scale.
struct PairMatches {
  struct Entry {
    int idx_a = 0;
    int idx_b = 0;
    double score = 0.0;
  };

  int image_a = 0;
  int image_b = 0;
  std::vector<Entry> entries;
  bool verified = true;
};

// Ranking modes for next-view selection. Score-sum is the default; the
// alternatives exist for ablation runs.
enum class NextViewRanking {
  kScoreSum,
  kInlierCount,
  kVisiblePoints,
};

// Union-find closure of pairwise matches into multi-view tracks, plus the
// per-pair statistics used for ranking initialization pairs and next views.
//
// Construction is canonicalized: pairs are normalized to (a < b), duplicate
// blocks for one pair are merged, and matches are processed in sorted order.
// This makes the track partition independent of input file ordering. A match
// whose union would put two keypoints of one image into the same track is
// rejected (existing tracks win) and its endpoints are flagged.
class CorrespondenceGraph {
 public:
  struct Node {
    int image_id = 0;
    int keypoint_idx = 0;

    bool operator<(const Node& other) const {
      return image_id != other.image_id ? image_id < other.image_id
                                        : keypoint_idx < other.keypoint_idx;
    }
    bool operator==(const Node& other) const {
      return image_id == other.image_id && keypoint_idx == other.keypoint_idx;
    }
  };

  struct PairStats {
    int num_matches = 0;
    double score_sum = 0.0;
  };

  CorrespondenceGraph() = default;

  // keypoint_counts maps image id to its number of keypoints. Throws
  // OutOfBoundsError for match indices outside those ranges.
  void Build(const std::map<int, int>& keypoint_counts,
             const std::vector<PairMatches>& matches);

  // Track id of a keypoint, or -1 if the keypoint is in no track (unmatched).
  int TrackIdOf(int image_id, int keypoint_idx) const;

  // Tracks with >= 2 members, each sorted by (image, keypoint). Track ids are
  // indices into this list.
  const std::vector<std::vector<Node>>& tracks() const { return tracks_; }

  bool IsFlagged(int image_id, int keypoint_idx) const;

  const std::map<std::pair<int, int>, PairStats>& pair_stats() const {
    return pair_stats_;
  }

  int NumKeypoints(int image_id) const;

  const std::map<int, int>& keypoint_counts() const { return keypoint_counts_; }

  // Image pairs ordered for initialization: descending match count, ties by
  // descending score sum, then ascending pair id.
  std::vector<std::pair<int, int>> RankInitPairs() const;

  // Unregistered images ordered by their best connection to the registered
  // set. `visible_points` supplies the per-candidate count of keypoints whose
  // track already carries a scene point; it is only consulted for the
  // visible-points ranking.
  std::vector<int> NextViewCandidates(
      const std::set<int>& registered, NextViewRanking ranking,
      const std::function<int(int)>& visible_points = nullptr) const;

 private:
  int FindRoot(int node) const;
  int NodeIndex(const Node& node) const;

  std::map<int, int> keypoint_counts_;
  std::map<int, int> image_node_offset_;
  // parent_ implements union-find over flattened node indices.
  mutable std::vector<int> parent_;
  std::vector<bool> flagged_;
  std::vector<int> track_id_;
  std::vector<std::vector<Node>> tracks_;
  std::map<std::pair<int, int>, PairStats> pair_stats_;
};

}  // namespace priorsfm

#endif  // PRIORSFM_GRAPH_CORRESPONDENCE_GRAPH_H_
