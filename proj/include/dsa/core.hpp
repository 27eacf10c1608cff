#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace dsa {

// One monitored trajectory: a T x d feature matrix and a per-step binary
// event indicator (1 = step lies inside an event).
struct Stay {
    std::string id;
    Eigen::MatrixXd features;          // T x d
    std::vector<std::uint8_t> events;  // length T, entries in {0, 1}
};

// A survival-compatible sample cut from a stay. The history holds every
// feature row up to and including the last labeled step; labels are valid on
// [label_start, label_end]. An uncensored episode's event begins at
// event_step == label_end + 1, so the time to event from step t is
// event_step - t >= 1. event_step is meaningless when censored.
struct Episode {
    std::string stay_id;
    Eigen::MatrixXd history;
    int label_start = 0;
    int label_end = 0;
    bool censored = false;
    int event_step = -1;
};

// Prediction-task geometry: the evaluation horizon h, the informational step
// resolution, and the largest horizon any training objective may touch.
struct TaskConfig {
    int horizon = 1;                  // h, in steps
    double resolution_minutes = 5.0;  // duration of one step
    int max_train_horizon = 1;        // K >= h
};

// Maximal run of consecutive event steps: [onset, end] inclusive.
struct EventSpan {
    int onset = 0;
    int end = 0;
};

struct EpisodeSplit {
    std::vector<Episode> episodes;
    // Episodes whose label range came out empty (event at step 0, or two
    // events back to back). They are dropped, not an error.
    int dropped_empty = 0;
};

// Throws std::invalid_argument naming the first violated invariant; returns
// the stay untouched otherwise.
const Stay& validate_stay(const Stay& stay);

void validate_task(const TaskConfig& task);

// Onset/end pairs of every event in the indicator vector.
std::vector<EventSpan> event_spans(const std::vector<std::uint8_t>& events);

// Onset step of each event.
std::vector<int> event_onsets(const std::vector<std::uint8_t>& events);

// Cuts a stay into survival episodes: one uncensored episode per event, each
// ending right before its onset, plus a censored tail when observations
// continue past the last event. Label ranges jointly cover exactly the
// stay's out-of-event steps.
EpisodeSplit split_episodes(const Stay& stay);

// Time to event from step t within an uncensored episode's label range.
inline int delta_at(const Episode& episode, int t) {
    return episode.event_step - t;
}

// Observed event-free span from step t within a censored episode.
inline int survival_span_at(const Episode& episode, int t) {
    return episode.label_end - t;
}

}  // namespace dsa
