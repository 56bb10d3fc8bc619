#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "priorsfm/graph/correspondence_graph.h"
#include "priorsfm/util/errors.h"
#include "priorsfm/util/rng.h"

using namespace priorsfm;

namespace {

PairMatches MakePair(int a, int b,
                     std::vector<std::tuple<int, int, double>> entries) {
  PairMatches pair;
  pair.image_a = a;
  pair.image_b = b;
  for (const auto& [ia, ib, score] : entries) {
    pair.entries.push_back({ia, ib, score});
  }
  return pair;
}

}  // namespace

TEST_CASE("build_graph: transitive closure across pairs") {
  std::map<int, int> counts = {{0, 2}, {1, 2}, {2, 2}};
  std::vector<PairMatches> matches = {
      MakePair(0, 1, {{0, 0, 0.9}}),
      MakePair(1, 2, {{0, 0, 0.8}}),
  };
  CorrespondenceGraph graph;
  graph.Build(counts, matches);

  REQUIRE(graph.tracks().size() == 1);
  CHECK(graph.tracks()[0].size() == 3);
  CHECK(graph.TrackIdOf(0, 0) == 0);
  CHECK(graph.TrackIdOf(1, 0) == 0);
  CHECK(graph.TrackIdOf(2, 0) == 0);
  CHECK(graph.TrackIdOf(0, 1) == -1);
}

TEST_CASE("build_graph: duplicate index within a pair is rejected") {
  std::map<int, int> counts = {{0, 2}, {1, 1}};
  // Two blocks for the same pair; both claim keypoint 0 of image 1. After
  // canonical ordering the (0,0) match wins and (1,0) is dropped.
  std::vector<PairMatches> matches = {
      MakePair(0, 1, {{0, 0, 0.9}}),
      MakePair(0, 1, {{1, 0, 0.8}}),
  };
  CorrespondenceGraph graph;
  graph.Build(counts, matches);

  REQUIRE(graph.tracks().size() == 1);
  CHECK(graph.tracks()[0].size() == 2);
  CHECK(graph.TrackIdOf(0, 0) == 0);
  CHECK(graph.TrackIdOf(0, 1) == -1);
  CHECK(graph.pair_stats().at({0, 1}).num_matches == 1);
}

TEST_CASE("build_graph: chain of 5 images with 10 shared keypoints") {
  // Generator oracle: every image sees the same 10 surface samples, matched
  // between consecutive images by sample id.
  std::map<int, int> counts;
  std::vector<PairMatches> matches;
  for (int i = 0; i < 5; ++i) {
    counts[i] = 10;
  }
  for (int i = 0; i + 1 < 5; ++i) {
    std::vector<std::tuple<int, int, double>> entries;
    for (int k = 0; k < 10; ++k) {
      entries.push_back({k, k, 0.5 + 0.05 * k});
    }
    matches.push_back(MakePair(i, i + 1, entries));
  }
  CorrespondenceGraph graph;
  graph.Build(counts, matches);

  REQUIRE(graph.tracks().size() == 10);
  for (const auto& track : graph.tracks()) {
    CHECK(track.size() == 5);
  }
}

TEST_CASE("build_graph: conflicting merge is rejected and flagged") {
  std::map<int, int> counts = {{0, 2}, {1, 1}, {2, 2}};
  // (0:0, 1:0) and (0:1, 2:0) build two tracks; the (1:0, 2:1)-like merge that
  // would join keypoints 0 and 1 of image 0 into one track must be rejected.
  std::vector<PairMatches> matches = {
      MakePair(0, 1, {{0, 0, 0.9}}),
      MakePair(0, 2, {{1, 0, 0.9}}),
      MakePair(1, 2, {{0, 0, 0.9}}),
  };
  CorrespondenceGraph graph;
  graph.Build(counts, matches);

  // No track may contain two keypoints of one image.
  for (const auto& track : graph.tracks()) {
    std::set<int> images;
    for (const auto& node : track) {
      CHECK(images.insert(node.image_id).second);
    }
  }
  CHECK(graph.IsFlagged(1, 0));
  CHECK(graph.IsFlagged(2, 0));
}

TEST_CASE("build_graph: order independence of the pair list") {
  std::map<int, int> counts = {{0, 4}, {1, 4}, {2, 4}, {3, 4}};
  std::vector<PairMatches> matches = {
      MakePair(0, 1, {{0, 0, 0.9}, {1, 1, 0.8}, {2, 3, 0.7}}),
      MakePair(1, 2, {{0, 2, 0.6}, {1, 0, 0.9}}),
      MakePair(2, 3, {{2, 2, 0.5}, {0, 1, 0.4}}),
      MakePair(0, 2, {{3, 1, 0.95}}),
      MakePair(1, 3, {{3, 3, 0.85}}),
  };

  CorrespondenceGraph reference;
  reference.Build(counts, matches);
  const auto reference_tracks = reference.tracks();

  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<PairMatches> shuffled = matches;
    for (size_t i = shuffled.size(); i > 1; --i) {
      std::swap(shuffled[i - 1], shuffled[rng.UniformInt(0, static_cast<int>(i) - 1)]);
    }
    // Also shuffle entries within pairs and randomly swap pair orientation.
    for (PairMatches& pair : shuffled) {
      for (size_t i = pair.entries.size(); i > 1; --i) {
        std::swap(pair.entries[i - 1],
                  pair.entries[rng.UniformInt(0, static_cast<int>(i) - 1)]);
      }
      if (rng.UniformInt(0, 1) == 1) {
        std::swap(pair.image_a, pair.image_b);
        for (auto& e : pair.entries) {
          std::swap(e.idx_a, e.idx_b);
        }
      }
    }
    CorrespondenceGraph graph;
    graph.Build(counts, shuffled);
    CHECK(graph.tracks() == reference_tracks);
  }
}

TEST_CASE("build_graph: rejects out-of-range indices") {
  std::map<int, int> counts = {{0, 2}, {1, 2}};
  std::vector<PairMatches> matches = {MakePair(0, 1, {{0, 5, 0.9}})};
  CorrespondenceGraph graph;
  CHECK_THROWS_AS(graph.Build(counts, matches), OutOfBoundsError);
}

TEST_CASE("rank_init_pairs: count then score-sum then pair id") {
  std::map<int, int> counts = {{0, 64}, {1, 64}, {2, 64}, {3, 64}};

  SUBCASE("counts dominate") {
    std::vector<PairMatches> matches;
    std::vector<std::tuple<int, int, double>> fifty, thirty;
    for (int k = 0; k < 50; ++k) fifty.push_back({k, k, 0.5});
    for (int k = 0; k < 30; ++k) thirty.push_back({k, k, 0.9});
    matches.push_back(MakePair(0, 1, fifty));
    matches.push_back(MakePair(1, 2, thirty));
    CorrespondenceGraph graph;
    graph.Build(counts, matches);

    const auto ranked = graph.RankInitPairs();
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0] == std::make_pair(0, 1));
    CHECK(ranked[1] == std::make_pair(1, 2));
  }

  SUBCASE("equal counts fall back to score sum") {
    std::vector<PairMatches> matches = {
        MakePair(0, 1, {{0, 0, 4.0 / 8}, {1, 1, 4.0 / 8}, {2, 2, 9.0}}),
        MakePair(1, 2, {{0, 3, 4.0}, {1, 4, 4.0}, {2, 5, 4.5}}),
    };
    // Sums: (0,1) -> 10.0, (1,2) -> 12.5 with equal counts.
    CorrespondenceGraph graph;
    graph.Build(counts, matches);
    const auto ranked = graph.RankInitPairs();
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0] == std::make_pair(1, 2));
    CHECK(ranked[1] == std::make_pair(0, 1));
  }

  SUBCASE("full ties break lexicographically") {
    std::vector<PairMatches> matches = {
        MakePair(2, 3, {{0, 0, 0.5}}),
        MakePair(0, 1, {{0, 0, 0.5}}),
    };
    CorrespondenceGraph graph;
    graph.Build(counts, matches);
    const auto ranked = graph.RankInitPairs();
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0] == std::make_pair(0, 1));
    CHECK(ranked[1] == std::make_pair(2, 3));
  }
}

TEST_CASE("next_view_candidates: score-sum ranking and variants") {
  std::map<int, int> counts = {{0, 16}, {1, 16}, {2, 16}, {3, 16}};
  std::vector<PairMatches> matches = {
      // Candidate 2 connects to registered {0,1} with sums 8.0 and 2.0.
      MakePair(0, 2, {{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}, {3, 3, 1.0},
                      {4, 4, 1.0}, {5, 5, 1.0}, {6, 6, 1.0}, {7, 7, 1.0}}),
      MakePair(1, 2, {{0, 8, 1.0}, {1, 9, 1.0}}),
      // Candidate 3 has one strong pair of 3.0.
      MakePair(1, 3, {{2, 0, 1.0}, {3, 1, 1.0}, {4, 2, 1.0}}),
  };
  CorrespondenceGraph graph;
  graph.Build(counts, matches);

  const std::set<int> registered = {0, 1};
  const auto by_score = graph.NextViewCandidates(registered, NextViewRanking::kScoreSum);
  REQUIRE(by_score.size() == 2);
  CHECK(by_score[0] == 2);
  CHECK(by_score[1] == 3);

  const auto by_count =
      graph.NextViewCandidates(registered, NextViewRanking::kInlierCount);
  CHECK(by_count[0] == 2);

  // Visible-point ranking consults the supplied counter instead.
  const auto by_visible = graph.NextViewCandidates(
      registered, NextViewRanking::kVisiblePoints,
      [](int image_id) { return image_id == 3 ? 12 : 1; });
  CHECK(by_visible[0] == 3);

  // Singleton candidate set stays a singleton.
  const auto singleton =
      graph.NextViewCandidates({0, 1, 2}, NextViewRanking::kScoreSum);
  REQUIRE(singleton.size() == 1);
  CHECK(singleton[0] == 3);
}
