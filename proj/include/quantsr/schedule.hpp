#pragma once

// Progressive slimming state machine.
//
// Warmup for 20% of training, then repeated Evolve states. Each Evolve state
// ends (Slim) once validation PSNR recovers to the pre-slim value minus a
// tolerance, or after per_state_cap iterations. Once the retained count hits
// the target the schedule finalizes and stays inert.

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "quantsr/tensor.hpp"

namespace qsr {

enum class ScheduleState { Warmup, Evolve, Final };
enum class ScheduleAction { Continue, Slim, Finalize };

inline const char* to_string(ScheduleState s) {
  switch (s) {
    case ScheduleState::Warmup: return "warmup";
    case ScheduleState::Evolve: return "evolve";
    case ScheduleState::Final: return "final";
  }
  return "?";
}

inline ScheduleState schedule_state_from_string(const std::string& s) {
  if (s == "warmup") return ScheduleState::Warmup;
  if (s == "evolve") return ScheduleState::Evolve;
  if (s == "final") return ScheduleState::Final;
  throw FormatError("unknown schedule state '" + s + "'");
}

inline const char* to_string(ScheduleAction a) {
  switch (a) {
    case ScheduleAction::Continue: return "continue";
    case ScheduleAction::Slim: return "slim";
    case ScheduleAction::Finalize: return "finalize";
  }
  return "?";
}

struct MetricPoint {
  std::int64_t iter = 0;
  double psnr = 0.0;
};

/// Bounded (iter, PSNR) history; iterations must increase.
class MetricHistory {
 public:
  explicit MetricHistory(std::size_t capacity = 1024) : capacity_(capacity == 0 ? 1 : capacity) {}

  void push(std::int64_t iter, double psnr) {
    if (!points_.empty() && iter <= points_.back().iter) {
      throw Error("metric history: iteration " + std::to_string(iter) + " does not follow " +
                  std::to_string(points_.back().iter));
    }
    points_.push_back({iter, psnr});
    if (points_.size() > capacity_) points_.pop_front();
  }

  bool empty() const { return points_.empty(); }
  std::size_t size() const { return points_.size(); }
  std::size_t capacity() const { return capacity_; }
  const MetricPoint& latest() const { return points_.back(); }
  const std::deque<MetricPoint>& points() const { return points_; }

 private:
  std::size_t capacity_;
  std::deque<MetricPoint> points_;
};

class SlimmingSchedule {
 public:
  static constexpr double kDefaultTolerance = 0.01;  // dB

  SlimmingSchedule() = default;

  SlimmingSchedule(std::int64_t total_iters, int blocks, int target, double tolerance = kDefaultTolerance)
      : total_(total_iters), blocks_(blocks), target_(target), tolerance_(tolerance) {
    if (total_iters < 1) throw ConfigError("schedule: total_iters must be positive");
    if (target < 1 || target > blocks) throw ConfigError("schedule: target must be in [1, blocks]");
    warmup_ = static_cast<std::int64_t>(std::floor(0.2 * static_cast<double>(total_iters)));
    cap_ = static_cast<std::int64_t>(std::floor(0.8 * static_cast<double>(total_iters) / target));
    if (cap_ < 1) cap_ = 1;
    retained_ = blocks;
    if (blocks == target) state_ = ScheduleState::Final;
  }

  std::int64_t total_iters() const { return total_; }
  std::int64_t warmup_iters() const { return warmup_; }
  std::int64_t per_state_cap() const { return cap_; }
  int target() const { return target_; }
  int retained() const { return retained_; }
  int slim_events() const { return blocks_ - retained_; }
  double tolerance() const { return tolerance_; }
  ScheduleState state() const { return state_; }
  std::int64_t state_start() const { return state_start_; }
  double pre_slim_metric() const { return pre_slim_; }

  /// Default evaluation cadence: a tenth of the state cap.
  std::int64_t default_eval_interval() const { return std::max<std::int64_t>(1, cap_ / 10); }

  ScheduleAction tick(std::int64_t iter, const MetricHistory& history) {
    switch (state_) {
      case ScheduleState::Final:
        return ScheduleAction::Continue;
      case ScheduleState::Warmup:
        return iter >= warmup_ ? begin_slim(iter) : ScheduleAction::Continue;
      case ScheduleState::Evolve:
        break;
    }
    if (retained_ == target_) {
      state_ = ScheduleState::Final;
      return ScheduleAction::Finalize;
    }
    if (iter - state_start_ >= cap_) return begin_slim(iter);
    if (!history.empty()) {
      const MetricPoint& p = history.latest();
      if (p.iter > state_start_ && p.iter <= iter && p.psnr >= pre_slim_ - tolerance_) return begin_slim(iter);
    }
    return ScheduleAction::Continue;
  }

  /// Snapshot of the metric just before a slim event; sets the recovery threshold.
  void record_pre_slim(double psnr) {
    if (std::isnan(psnr)) throw NumericError("record_pre_slim: PSNR is NaN");
    pre_slim_ = psnr;
  }

  /// Restores a saved state (checkpoint resume).
  void restore(ScheduleState state, std::int64_t state_start, double pre_slim, int retained) {
    state_ = state;
    state_start_ = state_start;
    pre_slim_ = pre_slim;
    retained_ = retained;
  }

 private:
  ScheduleAction begin_slim(std::int64_t iter) {
    state_ = ScheduleState::Evolve;
    state_start_ = iter;
    --retained_;
    return ScheduleAction::Slim;
  }

  std::int64_t total_ = 0;
  int blocks_ = 0;
  int target_ = 0;
  double tolerance_ = kDefaultTolerance;
  std::int64_t warmup_ = 0;
  std::int64_t cap_ = 0;
  ScheduleState state_ = ScheduleState::Warmup;
  std::int64_t state_start_ = 0;
  double pre_slim_ = 0.0;
  int retained_ = 0;
};

struct ScheduleEvent {
  std::int64_t iter = 0;
  ScheduleAction action = ScheduleAction::Continue;
  double pre_slim = 0.0;
};

/// Drives a schedule the way the trainer does, with a scripted metric in
/// place of validation: evaluate when iter > 0 and iter % eval_interval == 0,
/// then tick; a slim records the metric at that iteration as its pre-slim value.
inline std::vector<ScheduleEvent> simulate_schedule(SlimmingSchedule sched, std::int64_t eval_interval,
                                                    const std::function<double(std::int64_t)>& metric) {
  if (eval_interval < 1) throw ConfigError("simulate_schedule: eval_interval must be positive");
  MetricHistory history(1u << 16);
  std::vector<ScheduleEvent> events;
  for (std::int64_t t = 0; t < sched.total_iters(); ++t) {
    if (t > 0 && t % eval_interval == 0) history.push(t, metric(t));
    const ScheduleAction a = sched.tick(t, history);
    if (a == ScheduleAction::Slim) {
      const double pre = (!history.empty() && history.latest().iter == t) ? history.latest().psnr : metric(t);
      sched.record_pre_slim(pre);
      events.push_back({t, a, pre});
    } else if (a == ScheduleAction::Finalize) {
      events.push_back({t, a, sched.pre_slim_metric()});
    }
  }
  return events;
}

}  // namespace qsr
