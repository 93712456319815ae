#include "latrank/data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "latrank/errors.hpp"

namespace latrank {

namespace {

std::string describe_event(const EventRecord& e) {
  std::ostringstream os;
  os << "day " << e.day << ", time " << e.time << ", winner " << (e.winner + 1)
     << ", loser " << (e.loser + 1);
  return os.str();
}

}  // namespace

EventDataset make_dataset(std::vector<EventRecord> events,
                          const DatasetOptions& options) {
  EventDataset ds;
  ds.cohort = options.cohort;

  for (const auto& e : events) {
    if (e.winner == e.loser) {
      throw InputError("winner equals loser (" + describe_event(e) + ")");
    }
    if (e.winner < 0 || e.loser < 0) {
      throw InputError("node index out of range (" + describe_event(e) + ")");
    }
    if (e.day < 1) {
      throw InputError("day must be >= 1 (" + describe_event(e) + ")");
    }
    if (!(e.time >= 0.0) || !std::isfinite(e.time)) {
      throw InputError("event time must be finite and nonnegative (" +
                       describe_event(e) + ")");
    }
    if (ds.cohort.empty()) ds.cohort = e.cohort;
  }

  if (options.per_day_clock && !events.empty()) {
    // concatenate per-day sessions onto one clock; each day's offset is
    // the cumulative length of the preceding sessions
    std::map<int, double> day_max;
    for (const auto& e : events) {
      auto [it, inserted] = day_max.try_emplace(e.day, e.time);
      if (!inserted && e.time > it->second) it->second = e.time;
    }
    std::map<int, double> offset;
    double acc = 0.0;
    for (const auto& [day, mx] : day_max) {
      offset[day] = acc;
      acc += mx;
    }
    for (auto& e : events) e.time += offset[e.day];
  }

  std::stable_sort(events.begin(), events.end(),
                   [](const EventRecord& a, const EventRecord& b) {
                     return a.time < b.time;
                   });

  for (std::size_t k = 1; k < events.size(); ++k) {
    if (events[k].day < events[k - 1].day) {
      throw InputError("day labels decrease along the time axis near time " +
                       std::to_string(events[k].time));
    }
  }

  // Ties (and zeros) break likelihood terms that need strictly increasing
  // times, so nudge each offender just above its predecessor.
  for (std::size_t k = 0; k < events.size(); ++k) {
    double floor_time = k == 0 ? 0.0 : events[k - 1].time;
    if (events[k].time <= floor_time) {
      events[k].time = std::nextafter(floor_time,
                                      std::numeric_limits<double>::infinity());
    }
  }

  int n_nodes = options.n_nodes;
  if (n_nodes == 0) {
    int max_idx = -1;
    for (const auto& e : events) max_idx = std::max({max_idx, e.winner, e.loser});
    if (max_idx < 0) {
      throw InputError("cannot infer the number of nodes from an empty event list");
    }
    n_nodes = max_idx + 1;
  } else {
    for (const auto& e : events) {
      if (e.winner >= n_nodes || e.loser >= n_nodes) {
        throw InputError("node index out of range (" + describe_event(e) + ")");
      }
    }
  }
  ds.n_nodes = n_nodes;

  double horizon = options.horizon;
  if (horizon == 0.0 && !events.empty()) horizon = events.back().time;
  if (horizon < 0.0 || !std::isfinite(horizon)) {
    throw InputError("observation horizon must be finite and nonnegative");
  }

  if (!events.empty() && events.back().time > horizon && options.horizon != 0.0) {
    // a tie group at exactly the declared horizon may have been nudged past
    // it; walk the tail back under the ceiling instead of failing
    double over = events.back().time;
    double limit = std::nextafter(horizon, 0.0);
    if (over - horizon < 1e-9 * std::max(1.0, horizon)) {
      double ceil_time = horizon;
      for (std::size_t r = events.size(); r-- > 0;) {
        if (events[r].time <= ceil_time) break;
        events[r].time = ceil_time;
        ceil_time = std::nextafter(ceil_time, 0.0);
      }
      (void)limit;
    } else {
      throw InputError("event time " + std::to_string(over) +
                       " exceeds the declared horizon " + std::to_string(horizon));
    }
  }
  ds.horizon = horizon;

  std::vector<double> boundaries = options.day_boundaries;
  int last_day = events.empty() ? 0 : events.back().day;
  if (boundaries.empty()) {
    if (last_day > 0) {
      boundaries.assign(static_cast<std::size_t>(last_day), 0.0);
      for (const auto& e : events) {
        auto d = static_cast<std::size_t>(e.day) - 1;
        if (e.time > boundaries[d]) boundaries[d] = e.time;
      }
      // empty interior days collapse to a zero-length slice just above the
      // previous boundary; the final day always ends at the horizon
      double prev = 0.0;
      for (std::size_t d = 0; d + 1 < boundaries.size(); ++d) {
        if (boundaries[d] <= prev) boundaries[d] = prev + 1e-9;
        prev = boundaries[d];
      }
      boundaries.back() = horizon;
      if (boundaries.size() > 1 && boundaries[boundaries.size() - 2] > horizon) {
        throw InputError("inferred day boundaries exceed the horizon");
      }
    }
  } else {
    double prev = 0.0;
    for (double b : boundaries) {
      if (!(b >= prev) || !std::isfinite(b)) {
        throw InputError("day boundaries must be finite and nondecreasing");
      }
      prev = b;
    }
    if (last_day > static_cast<int>(boundaries.size())) {
      throw InputError("event day exceeds the declared number of days");
    }
    if (!boundaries.empty() &&
        std::abs(boundaries.back() - horizon) > 1e-9 * std::max(1.0, horizon)) {
      throw InputError("last day boundary must equal the horizon");
    }
    if (!boundaries.empty()) boundaries.back() = horizon;
  }
  ds.day_boundaries = std::move(boundaries);

  for (const auto& e : events) {
    if (e.time > ds.horizon) {
      throw InputError("event time " + std::to_string(e.time) +
                       " exceeds the horizon " + std::to_string(ds.horizon));
    }
    if (!ds.day_boundaries.empty()) {
      double lo = e.day >= 2 ? ds.day_boundaries[static_cast<std::size_t>(e.day) - 2]
                             : 0.0;
      double hi = ds.day_boundaries[static_cast<std::size_t>(e.day) - 1];
      // the tie nudge can move an event a few ulps past its recorded day
      double slack = 1e-9 * std::max(1.0, hi);
      if (e.time <= lo - slack || e.time > hi + slack) {
        throw InputError("event time " + std::to_string(e.time) +
                         " is outside day " + std::to_string(e.day));
      }
    }
  }

  ds.events = std::move(events);
  return ds;
}

PairHistories build_pair_histories(const EventDataset& ds) {
  PairHistories h(ds.n_nodes);
  for (const auto& e : ds.events) h.times(e.winner, e.loser).push_back(e.time);
  return h;
}

PairHistories build_pair_histories(const EventDataset& ds, double cutoff) {
  PairHistories h(ds.n_nodes);
  for (const auto& e : ds.events) {
    if (e.time <= cutoff) h.times(e.winner, e.loser).push_back(e.time);
  }
  return h;
}

int day_for_time(const EventDataset& ds, double t) {
  if (ds.day_boundaries.empty()) return 1;
  auto it = std::lower_bound(ds.day_boundaries.begin(), ds.day_boundaries.end(), t);
  if (it == ds.day_boundaries.end()) return ds.n_days();
  return static_cast<int>(it - ds.day_boundaries.begin()) + 1;
}

WinLossMatrix winloss_matrix(const EventDataset& ds, double window_begin,
                             double window_end) {
  if (window_end < window_begin) {
    throw InputError("window end precedes window begin");
  }
  WinLossMatrix w;
  w.window_begin = window_begin;
  w.window_end = window_end;
  w.counts = Eigen::MatrixXi::Zero(ds.n_nodes, ds.n_nodes);
  for (const auto& e : ds.events) {
    if (e.time > window_begin && e.time <= window_end) {
      w.counts(e.winner, e.loser) += 1;
    }
  }
  return w;
}

}  // namespace latrank
