#include "dsa/core.hpp"

#include <cmath>
#include <stdexcept>

namespace dsa {

const Stay& validate_stay(const Stay& stay) {
    const auto rows = stay.features.rows();
    const auto cols = stay.features.cols();
    if (rows < 1) throw std::invalid_argument("stay '" + stay.id + "': empty series");
    if (cols < 1) throw std::invalid_argument("stay '" + stay.id + "': no covariates");
    if (static_cast<std::size_t>(rows) != stay.events.size())
        throw std::invalid_argument("stay '" + stay.id +
                                    "': event vector length does not match feature rows");
    if (!stay.features.allFinite())
        throw std::invalid_argument("stay '" + stay.id + "': non-finite feature");
    for (const auto e : stay.events)
        if (e != 0 && e != 1)
            throw std::invalid_argument("stay '" + stay.id + "': non-binary event indicator");
    return stay;
}

void validate_task(const TaskConfig& task) {
    if (task.horizon < 1) throw std::invalid_argument("task: horizon must be >= 1");
    if (task.max_train_horizon < task.horizon)
        throw std::invalid_argument("task: max_train_horizon must be >= horizon");
    if (!(task.resolution_minutes > 0.0))
        throw std::invalid_argument("task: resolution must be positive");
}

std::vector<EventSpan> event_spans(const std::vector<std::uint8_t>& events) {
    std::vector<EventSpan> spans;
    const int n = static_cast<int>(events.size());
    for (int t = 0; t < n; ++t) {
        if (events[t] == 1 && (t == 0 || events[t - 1] == 0)) {
            int end = t;
            while (end + 1 < n && events[end + 1] == 1) ++end;
            spans.push_back({t, end});
        }
    }
    return spans;
}

std::vector<int> event_onsets(const std::vector<std::uint8_t>& events) {
    std::vector<int> onsets;
    for (const auto& span : event_spans(events)) onsets.push_back(span.onset);
    return onsets;
}

EpisodeSplit split_episodes(const Stay& stay) {
    const int n_steps = static_cast<int>(stay.events.size());
    const auto spans = event_spans(stay.events);

    EpisodeSplit out;
    int prev_end = -1;  // end step of the previous event; labels resume after it
    for (const auto& span : spans) {
        Episode ep;
        ep.stay_id = stay.id;
        ep.label_start = prev_end + 1;
        ep.label_end = span.onset - 1;
        ep.censored = false;
        ep.event_step = span.onset;
        if (ep.label_start > ep.label_end) {
            ++out.dropped_empty;
        } else {
            ep.history = stay.features.topRows(span.onset);
            out.episodes.push_back(std::move(ep));
        }
        prev_end = span.end;
    }

    // Censored tail when observations continue past the last event (or the
    // stay had no events at all).
    if (prev_end + 1 <= n_steps - 1) {
        Episode tail;
        tail.stay_id = stay.id;
        tail.history = stay.features;
        tail.label_start = prev_end + 1;
        tail.label_end = n_steps - 1;
        tail.censored = true;
        out.episodes.push_back(std::move(tail));
    }
    return out;
}

}  // namespace dsa
