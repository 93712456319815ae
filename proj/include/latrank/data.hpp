#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <string>
#include <vector>

namespace latrank {

// Node indices are 0-based everywhere in memory.  The file format uses
// 1..N ids; the conversion happens in the io layer and nowhere else.

struct EventRecord {
  std::string cohort;
  int day = 1;       // 1-based observation day
  double time = 0.0; // hours on the cohort-wide continuous clock
  int winner = 0;    // 0-based initiator / winner index
  int loser = 0;     // 0-based receiver / loser index
};

// A validated event stream for one cohort.  Invariants established by
// make_dataset: events sorted with strictly increasing times in
// (0, horizon]; day labels nondecreasing and consistent with
// day_boundaries; day_boundaries nondecreasing with back() == horizon
// whenever any day exists.
struct EventDataset {
  std::string cohort;
  int n_nodes = 0;
  double horizon = 0.0;
  std::vector<double> day_boundaries; // day_boundaries[d-1] = end of day d
  std::vector<EventRecord> events;

  int n_days() const { return static_cast<int>(day_boundaries.size()); }

  // end of day `day` (1-based); day 0 is the origin
  double day_end(int day) const {
    return day <= 0 ? 0.0 : day_boundaries.at(static_cast<std::size_t>(day) - 1);
  }
};

struct DatasetOptions {
  int n_nodes = 0;      // 0 = infer as max observed index + 1
  double horizon = 0.0; // 0 = infer as last event time
  std::vector<double> day_boundaries; // empty = infer from per-day maxima
  bool per_day_clock = false; // input times restart at 0 each day
  std::string cohort;         // overrides per-record cohort when nonempty
};

// Sorts, resolves ties by minimal upward perturbation, infers whatever
// DatasetOptions leaves unspecified, and validates every invariant above.
// Throws InputError with a description of the first violation.
EventDataset make_dataset(std::vector<EventRecord> events,
                          const DatasetOptions& options = {});

// Per-directed-pair event times.  times(i, j) are the moments i beat j,
// strictly increasing, a partition of the dataset's events.
class PairHistories {
 public:
  PairHistories() = default;
  explicit PairHistories(int n_nodes)
      : n_(n_nodes),
        times_(static_cast<std::size_t>(n_nodes) * static_cast<std::size_t>(n_nodes)) {}

  int n_nodes() const { return n_; }

  std::vector<double>& times(int i, int j) {
    return times_[static_cast<std::size_t>(i) * n_ + j];
  }
  const std::vector<double>& times(int i, int j) const {
    return times_[static_cast<std::size_t>(i) * n_ + j];
  }

  std::size_t total_events() const {
    std::size_t n = 0;
    for (const auto& v : times_) n += v.size();
    return n;
  }

 private:
  int n_ = 0;
  std::vector<std::vector<double>> times_;
};

PairHistories build_pair_histories(const EventDataset& ds);

// Events with time <= cutoff only; the tail is dropped.
PairHistories build_pair_histories(const EventDataset& ds, double cutoff);

// The 1-based day whose window (day_end(d-1), day_end(d)] contains t,
// clamped to [1, n_days] for out-of-range times.
int day_for_time(const EventDataset& ds, double t);

// counts(i, j) = number of events with winner i, loser j and time in
// (window_begin, window_end]
struct WinLossMatrix {
  Eigen::MatrixXi counts;
  double window_begin = 0.0;
  double window_end = 0.0;
};

WinLossMatrix winloss_matrix(const EventDataset& ds, double window_begin,
                             double window_end);

}  // namespace latrank
