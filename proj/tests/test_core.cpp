#include <doctest.h>

#include <stdexcept>

#include "dsa/core.hpp"
#include "dsa/rng.hpp"

using namespace dsa;

namespace {

Stay make_stay(const std::vector<std::uint8_t>& events) {
  Stay stay;
  stay.id = "s";
  stay.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(events.size()), 1);
  stay.events = events;
  return stay;
}

}  // namespace

TEST_CASE("validate_stay accepts a minimal stay") {
  Stay stay = make_stay({0});
  CHECK_NOTHROW(validate_stay(stay));
}

TEST_CASE("validate_stay rejects malformed stays") {
  Stay stay = make_stay({0, 0});
  stay.features(1, 0) = std::nan("");
  CHECK_THROWS_WITH_AS(validate_stay(stay), doctest::Contains("non-finite"),
                       std::invalid_argument);

  Stay bad_event = make_stay({0, 2, 0});
  CHECK_THROWS_WITH_AS(validate_stay(bad_event), doctest::Contains("non-binary"),
                       std::invalid_argument);

  Stay mismatch = make_stay({0, 0});
  mismatch.events.push_back(0);
  CHECK_THROWS_AS(validate_stay(mismatch), std::invalid_argument);

  Stay empty;
  empty.id = "e";
  empty.features.resize(0, 1);
  CHECK_THROWS_AS(validate_stay(empty), std::invalid_argument);
}

TEST_CASE("event_spans finds maximal runs") {
  const auto spans = event_spans({0, 1, 1, 0, 1, 0, 0, 1});
  REQUIRE(spans.size() == 3);
  CHECK(spans[0].onset == 1);
  CHECK(spans[0].end == 2);
  CHECK(spans[1].onset == 4);
  CHECK(spans[1].end == 4);
  CHECK(spans[2].onset == 7);
  CHECK(spans[2].end == 7);
}

TEST_CASE("censored-only stay yields one censored episode") {
  Stay stay = make_stay(std::vector<std::uint8_t>(5, 0));
  const EpisodeSplit split = split_episodes(stay);
  CHECK(split.dropped_empty == 0);
  REQUIRE(split.episodes.size() == 1);
  const Episode& ep = split.episodes[0];
  CHECK(ep.censored);
  CHECK(ep.label_start == 0);
  CHECK(ep.label_end == 4);
  CHECK(ep.history.rows() == 5);
}

TEST_CASE("two events plus tail split into three episodes") {
  // T = 20, events occupy steps 5-6 and 12-13.
  std::vector<std::uint8_t> events(20, 0);
  events[5] = events[6] = 1;
  events[12] = events[13] = 1;
  Stay stay = make_stay(events);
  stay.features = Eigen::MatrixXd::Random(20, 3);

  const EpisodeSplit split = split_episodes(stay);
  CHECK(split.dropped_empty == 0);
  REQUIRE(split.episodes.size() == 3);

  const Episode& first = split.episodes[0];
  CHECK_FALSE(first.censored);
  CHECK(first.label_start == 0);
  CHECK(first.label_end == 4);
  CHECK(first.event_step == 5);
  CHECK(first.history.rows() == 5);
  CHECK(first.history == stay.features.topRows(5));

  const Episode& second = split.episodes[1];
  CHECK_FALSE(second.censored);
  CHECK(second.label_start == 7);
  CHECK(second.label_end == 11);
  CHECK(second.event_step == 12);
  CHECK(second.history.rows() == 12);

  const Episode& tail = split.episodes[2];
  CHECK(tail.censored);
  CHECK(tail.label_start == 14);
  CHECK(tail.label_end == 19);
  CHECK(tail.history.rows() == 20);
}

TEST_CASE("stay ending in an event has no censored tail") {
  std::vector<std::uint8_t> events(4, 0);
  events[2] = events[3] = 1;
  const EpisodeSplit split = split_episodes(make_stay(events));
  REQUIRE(split.episodes.size() == 1);
  CHECK_FALSE(split.episodes[0].censored);
  CHECK(split.episodes[0].label_start == 0);
  CHECK(split.episodes[0].label_end == 1);
  CHECK(split.episodes[0].event_step == 2);
}

TEST_CASE("event at step 0 yields no episode for it") {
  std::vector<std::uint8_t> events = {1, 1, 0, 0};
  const EpisodeSplit split = split_episodes(make_stay(events));
  CHECK(split.dropped_empty == 1);
  REQUIRE(split.episodes.size() == 1);
  CHECK(split.episodes[0].censored);
  CHECK(split.episodes[0].label_start == 2);
  CHECK(split.episodes[0].label_end == 3);
}

TEST_CASE("single-step label range between close events") {
  // Events at steps 2-3 and 5: the second episode's labels are {4} only.
  const std::vector<std::uint8_t> events = {0, 0, 1, 1, 0, 1, 0};
  const EpisodeSplit split = split_episodes(make_stay(events));
  CHECK(split.dropped_empty == 0);
  REQUIRE(split.episodes.size() == 3);
  CHECK(split.episodes[1].label_start == 4);
  CHECK(split.episodes[1].label_end == 4);
  CHECK(split.episodes[1].event_step == 5);

  // Adjacent ones merge into a single event span, not two events.
  const std::vector<std::uint8_t> merged = {0, 1, 1, 1};
  const EpisodeSplit split2 = split_episodes(make_stay(merged));
  CHECK(split2.dropped_empty == 0);
  REQUIRE(split2.episodes.size() == 1);
  CHECK_FALSE(split2.episodes[0].censored);
  CHECK(split2.episodes[0].label_end == 0);
}

TEST_CASE("delta and survival span helpers") {
  std::vector<std::uint8_t> events(10, 0);
  events[6] = 1;
  const EpisodeSplit split = split_episodes(make_stay(events));
  REQUIRE(split.episodes.size() == 2);
  const Episode& ep = split.episodes[0];
  CHECK(delta_at(ep, 5) == 1);
  CHECK(delta_at(ep, 0) == 6);
  const Episode& tail = split.episodes[1];
  CHECK(survival_span_at(tail, 9) == 0);
  CHECK(survival_span_at(tail, 7) == 2);
}

TEST_CASE("episode label ranges partition the out-of-event steps") {
  Rng rng(314);
  for (int trial = 0; trial < 50; ++trial) {
    const int T = static_cast<int>(rng.uniform_int(1, 40));
    std::vector<std::uint8_t> events(static_cast<std::size_t>(T));
    for (auto& e : events) e = rng.uniform01() < 0.2 ? 1 : 0;
    Stay stay = make_stay(events);
    stay.features = Eigen::MatrixXd::Random(T, 2);
    const EpisodeSplit split = split_episodes(stay);

    std::vector<int> covered(static_cast<std::size_t>(T), 0);
    for (const Episode& ep : split.episodes) {
      CHECK(ep.label_start <= ep.label_end);
      CHECK(ep.history.rows() == ep.label_end + 1);
      CHECK(ep.history == stay.features.topRows(ep.label_end + 1));
      if (!ep.censored) {
        CHECK(ep.event_step == ep.label_end + 1);
        CHECK(events[static_cast<std::size_t>(ep.event_step)] == 1);
      }
      for (int t = ep.label_start; t <= ep.label_end; ++t) {
        covered[static_cast<std::size_t>(t)]++;
        CHECK(events[static_cast<std::size_t>(t)] == 0);
      }
    }
    for (int t = 0; t < T; ++t) {
      if (events[static_cast<std::size_t>(t)] == 0) {
        CHECK(covered[static_cast<std::size_t>(t)] == 1);
      } else {
        CHECK(covered[static_cast<std::size_t>(t)] == 0);
      }
    }
  }
}
