#pragma once

// Training loop for the FP teacher and the quantized student.
//
// Per iteration t (student):
//   1. every eval_interval iterations (t > 0) evaluate validation PSNR
//   2. tick the slimming schedule; on Slim skip the highest-alpha block
//   3. one Adam step on  l1(SR, HR) + lambda * sfd
// Batches are a pure function of (seed, t), so resuming from a checkpoint
// reproduces the uninterrupted run.

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "quantsr/adam.hpp"
#include "quantsr/checkpoint.hpp"
#include "quantsr/dataset.hpp"
#include "quantsr/distill.hpp"
#include "quantsr/imaging.hpp"
#include "quantsr/network.hpp"
#include "quantsr/network_io.hpp"
#include "quantsr/schedule.hpp"

namespace qsr {

struct TrainConfig {
  NetworkSpec net;
  int target_blocks = 0;  // 0: blocks / 2
  std::int64_t total_iters = 300000;
  int batch_size = 32;
  int patch_size = 64;  // LR pixels
  float lr_init = 2e-4f;
  double lr_halve_at = 250.0 / 300.0;
  float lambda = 1e-4f;
  std::uint64_t seed = 0;
  std::int64_t eval_interval = 0;  // 0: a tenth of the per-state cap
  bool rbd = true;
  bool qsa = true;
  bool sfd = true;
  int prefetch = 4;  // bounded queue depth of the loader thread; 0 loads inline
  int shave = -1;    // -1: upscale factor

  int target() const { return target_blocks > 0 ? target_blocks : net.blocks / 2; }
  int metric_shave() const { return shave >= 0 ? shave : net.upscale; }
  float effective_lambda() const { return sfd ? lambda : 0.0f; }

  std::int64_t resolved_eval_interval() const {
    if (eval_interval > 0) return eval_interval;
    return SlimmingSchedule(total_iters, net.blocks, target()).default_eval_interval();
  }

  void validate() const {
    net.validate();
    if (total_iters < 1) throw ConfigError("total_iters must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (patch_size < 1) throw ConfigError("patch_size must be positive");
    if (!(lr_init > 0.0f)) throw ConfigError("lr_init must be positive");
    if (!(lr_halve_at > 0.0 && lr_halve_at <= 1.0)) throw ConfigError("lr_halve_at must be in (0, 1]");
    if (!(lambda >= 0.0f)) throw ConfigError("lambda must be non-negative");
    if (eval_interval < 0) throw ConfigError("eval_interval must be non-negative");
    if (target() < 1 || target() > net.blocks) throw ConfigError("target_blocks must be in [1, blocks]");
    if (prefetch < 0) throw ConfigError("prefetch must be non-negative");
  }
};

inline float lr_at(std::int64_t iter, const TrainConfig& cfg) {
  const auto halve = static_cast<std::int64_t>(std::llround(static_cast<double>(cfg.total_iters) * cfg.lr_halve_at));
  return iter >= halve ? cfg.lr_init * 0.5f : cfg.lr_init;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalResult {
  double psnr = 0.0;
  double ssim = 0.0;
  std::vector<double> psnr_per_image;
  std::vector<double> ssim_per_image;
};

inline ImageRGB super_resolve(const Network& net, const ImageRGB& lr) { return from_tensor(net.forward(to_tensor(lr))); }

inline EvalResult evaluate(const Network& net, const Dataset& ds, int shave, bool with_ssim = true) {
  if (ds.empty()) throw Error("evaluate: empty validation set");
  EvalResult r;
  for (const auto& item : ds.items) {
    const ImageRGB sr = super_resolve(net, item.lr);
    r.psnr_per_image.push_back(psnr(sr, item.hr, shave));
    if (with_ssim) r.ssim_per_image.push_back(ssim(sr, item.hr, shave));
  }
  const double n = static_cast<double>(ds.size());
  for (double v : r.psnr_per_image) r.psnr += v / n;
  for (double v : r.ssim_per_image) r.ssim += v / n;
  return r;
}

// ---------------------------------------------------------------------------
// Background batch loader

class BatchPrefetcher {
 public:
  BatchPrefetcher(const Dataset& ds, const TrainConfig& cfg, std::int64_t begin, std::int64_t end)
      : ds_(ds), cfg_(cfg), next_(begin), end_(end) {
    if (cfg.prefetch > 0) worker_ = std::thread([this] { produce(); });
  }
  BatchPrefetcher(const BatchPrefetcher&) = delete;
  BatchPrefetcher& operator=(const BatchPrefetcher&) = delete;

  ~BatchPrefetcher() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
  }

  Batch next(std::int64_t iter) {
    if (!worker_.joinable()) return make_batch(ds_, cfg_.batch_size, cfg_.patch_size, cfg_.seed, static_cast<std::uint64_t>(iter));
    std::unique_lock<std::mutex> lk(mu_);
    cv_.wait(lk, [&] { return !queue_.empty() || error_; });
    if (error_) std::rethrow_exception(error_);
    auto [it, batch] = std::move(queue_.front());
    queue_.pop_front();
    cv_.notify_all();
    if (it != iter) throw Error("batch loader out of sync at iteration " + std::to_string(iter));
    return std::move(batch);
  }

 private:
  void produce() {
    try {
      for (std::int64_t it = next_; it < end_; ++it) {
        Batch b = make_batch(ds_, cfg_.batch_size, cfg_.patch_size, cfg_.seed, static_cast<std::uint64_t>(it));
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return stop_ || static_cast<int>(queue_.size()) < cfg_.prefetch; });
        if (stop_) return;
        queue_.emplace_back(it, std::move(b));
        cv_.notify_all();
      }
    } catch (...) {
      std::lock_guard<std::mutex> lk(mu_);
      error_ = std::current_exception();
      cv_.notify_all();
    }
  }

  const Dataset& ds_;
  TrainConfig cfg_;
  std::int64_t next_, end_;
  std::thread worker_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::pair<std::int64_t, Batch>> queue_;
  bool stop_ = false;
  std::exception_ptr error_;
};

// ---------------------------------------------------------------------------

struct LogRow {
  std::int64_t iter = 0;
  double lr = 0.0, loss = 0.0, l_pix = 0.0, l_sfd = 0.0;
  double psnr = std::numeric_limits<double>::quiet_NaN();  // only on evaluation iterations
  std::string event;
  std::vector<double> sfd_terms;  // only on evaluation iterations

  bool operator==(const LogRow& o) const {
    auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
    return iter == o.iter && same(lr, o.lr) && same(loss, o.loss) && same(l_pix, o.l_pix) && same(l_sfd, o.l_sfd) &&
           same(psnr, o.psnr) && event == o.event && sfd_terms == o.sfd_terms;
  }
};

struct EventRow {
  std::int64_t iter = 0;
  std::string event;
  int block = 0;  // 1-based, 0 when not applicable
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double psnr = std::numeric_limits<double>::quiet_NaN();

  bool operator==(const EventRow& o) const {
    auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
    return iter == o.iter && event == o.event && block == o.block && same(alpha, o.alpha) && same(psnr, o.psnr);
  }
};

inline std::string format_double(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os.precision(9);
  os << v;
  return os.str();
}

inline std::string metrics_csv(const std::vector<LogRow>& rows) {
  std::ostringstream os;
  os << "iter,lr,loss,l_pix,l_sfd,psnr,event,sfd_terms\n";
  for (const auto& r : rows) {
    os << r.iter << ',' << format_double(r.lr) << ',' << format_double(r.loss) << ',' << format_double(r.l_pix) << ','
       << format_double(r.l_sfd) << ',' << format_double(r.psnr) << ',' << r.event << ',';
    for (std::size_t i = 0; i < r.sfd_terms.size(); ++i) os << (i ? ";" : "") << format_double(r.sfd_terms[i]);
    os << '\n';
  }
  return os.str();
}

inline std::string events_log(const std::vector<EventRow>& rows) {
  std::ostringstream os;
  os << "iter,event,block_index,alpha,psnr\n";
  for (const auto& e : rows)
    os << e.iter << ',' << e.event << ',' << (e.block > 0 ? std::to_string(e.block) : "") << ',' << format_double(e.alpha)
       << ',' << format_double(e.psnr) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Config <-> JSON

inline nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"net", spec_to_json(c.net)},
          {"target_blocks", c.target_blocks},
          {"total_iters", c.total_iters},
          {"batch_size", c.batch_size},
          {"patch_size", c.patch_size},
          {"lr_init", c.lr_init},
          {"lr_halve_at", c.lr_halve_at},
          {"lambda", c.lambda},
          {"seed", c.seed},
          {"eval_interval", c.eval_interval},
          {"rbd", c.rbd},
          {"qsa", c.qsa},
          {"sfd", c.sfd},
          {"prefetch", c.prefetch},
          {"shave", c.shave}};
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.net = spec_from_json(j.at("net"));
  c.target_blocks = j.at("target_blocks").get<int>();
  c.total_iters = j.at("total_iters").get<std::int64_t>();
  c.batch_size = j.at("batch_size").get<int>();
  c.patch_size = j.at("patch_size").get<int>();
  c.lr_init = j.at("lr_init").get<float>();
  c.lr_halve_at = j.at("lr_halve_at").get<double>();
  c.lambda = j.at("lambda").get<float>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.eval_interval = j.at("eval_interval").get<std::int64_t>();
  c.rbd = j.at("rbd").get<bool>();
  c.qsa = j.at("qsa").get<bool>();
  c.sfd = j.at("sfd").get<bool>();
  c.prefetch = j.at("prefetch").get<int>();
  c.shave = j.at("shave").get<int>();
  c.validate();
  return c;
}

namespace detail {
inline nlohmann::json num(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }
inline double num(const nlohmann::json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }
}  // namespace detail

// ---------------------------------------------------------------------------

enum class TrainMode { Teacher, Student };

class Trainer {
 public:
  /// Teacher training (full precision, pixel loss only).
  Trainer(TrainConfig cfg, Dataset train, Dataset val)
      : cfg_(std::move(cfg)), mode_(TrainMode::Teacher), train_(std::move(train)), val_(std::move(val)) {
    init_common();
    model_ = build_teacher(cfg_.net, cfg_.seed);
    schedule_ = SlimmingSchedule(cfg_.total_iters, cfg_.net.blocks, cfg_.net.blocks);
  }

  /// Student training distilled from (and initialized by) a trained teacher.
  Trainer(TrainConfig cfg, Dataset train, Dataset val, const Network& teacher)
      : cfg_(std::move(cfg)), mode_(TrainMode::Student), train_(std::move(train)), val_(std::move(val)) {
    init_common();
    if (teacher.quantized()) throw ConfigError("teacher network must be full precision");
    teacher_ = teacher;
    for (auto* p : teacher_->parameters()) p->frozen = true;
    StudentOptions opts;
    opts.method = cfg_.rbd ? QuantMethod::Rbd : QuantMethod::Uniform;
    opts.qsa = cfg_.qsa;
    opts.target_blocks = cfg_.target();
    model_ = build_student(cfg_.net, opts, &*teacher_, cfg_.seed);
    const Batch calib = make_batch(train_, cfg_.batch_size, cfg_.patch_size, cfg_.seed, 0);
    calibrate_activations(model_, calib.lr);
    schedule_ = SlimmingSchedule(cfg_.total_iters, model_.retained_count(), cfg_.target());
  }

  /// Restores a trainer saved by checkpoint().
  static Trainer resume(const Container& c, Dataset train, Dataset val) {
    const std::string kind = c.meta.value("kind", "");
    if (kind != "teacher" && kind != "student") throw FormatError("not a training checkpoint (kind '" + kind + "')");
    Trainer t(config_from_json(c.meta.at("config")), std::move(train), std::move(val),
              kind == "teacher" ? TrainMode::Teacher : TrainMode::Student);
    t.model_ = restore_network(c, "model");
    if (t.mode_ == TrainMode::Student) {
      t.teacher_ = restore_network(c, "teacher");
      for (auto* p : t.teacher_->parameters()) p->frozen = true;
    }
    const auto& st = c.meta.at("state");
    t.next_iter_ = st.at("next_iter").get<std::int64_t>();
    t.schedule_ = SlimmingSchedule(t.cfg_.total_iters, st.at("schedule_blocks").get<int>(), t.cfg_.target());
    if (t.mode_ == TrainMode::Teacher) t.schedule_ = SlimmingSchedule(t.cfg_.total_iters, t.cfg_.net.blocks, t.cfg_.net.blocks);
    t.schedule_.restore(schedule_state_from_string(st.at("schedule_state").get<std::string>()),
                        st.at("state_start").get<std::int64_t>(), detail::num(st.at("pre_slim")),
                        st.at("schedule_retained").get<int>());
    for (const auto& p : st.at("history")) t.history_.push(p.at(0).get<std::int64_t>(), p.at(1).get<double>());
    t.adam_.step = st.at("adam_step").get<std::int64_t>();
    for (Parameter* p : t.model_.parameters()) {
      const std::string m = "adam.m." + p->name, v = "adam.v." + p->name;
      if (c.tensors.count(m)) t.adam_.moments[p->name] = {c.tensor(m), c.tensor(v)};
    }
    for (const auto& r : c.meta.at("log")) {
      LogRow row;
      row.iter = r.at(0).get<std::int64_t>();
      row.lr = detail::num(r.at(1));
      row.loss = detail::num(r.at(2));
      row.l_pix = detail::num(r.at(3));
      row.l_sfd = detail::num(r.at(4));
      row.psnr = detail::num(r.at(5));
      row.event = r.at(6).get<std::string>();
      for (const auto& v : r.at(7)) row.sfd_terms.push_back(detail::num(v));
      t.log_.push_back(std::move(row));
    }
    for (const auto& e : c.meta.at("events")) {
      t.events_.push_back({e.at(0).get<std::int64_t>(), e.at(1).get<std::string>(), e.at(2).get<int>(),
                           detail::num(e.at(3)), detail::num(e.at(4))});
    }
    return t;
  }

  Container checkpoint() const {
    Container c;
    c.meta["kind"] = mode_ == TrainMode::Teacher ? "teacher" : "student";
    c.meta["config"] = config_to_json(cfg_);
    store_network(c, model_, "model");
    if (teacher_) store_network(c, *teacher_, "teacher");
    nlohmann::json st;
    st["next_iter"] = next_iter_;
    st["schedule_state"] = to_string(schedule_.state());
    st["state_start"] = schedule_.state_start();
    st["pre_slim"] = detail::num(schedule_.pre_slim_metric());
    st["schedule_retained"] = schedule_.retained();
    st["schedule_blocks"] = schedule_.retained() + schedule_.slim_events();
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& p : history_.points()) hist.push_back({p.iter, p.psnr});
    st["history"] = hist;
    st["adam_step"] = adam_.step;
    c.meta["state"] = st;
    for (const auto& [name, mo] : adam_.moments) {
      c.tensors["adam.m." + name] = mo.m;
      c.tensors["adam.v." + name] = mo.v;
    }
    nlohmann::json log = nlohmann::json::array();
    for (const auto& r : log_) {
      nlohmann::json terms = nlohmann::json::array();
      for (double v : r.sfd_terms) terms.push_back(detail::num(v));
      log.push_back({r.iter, detail::num(r.lr), detail::num(r.loss), detail::num(r.l_pix), detail::num(r.l_sfd),
                     detail::num(r.psnr), r.event, terms});
    }
    c.meta["log"] = log;
    nlohmann::json ev = nlohmann::json::array();
    for (const auto& e : events_) ev.push_back({e.iter, e.event, e.block, detail::num(e.alpha), detail::num(e.psnr)});
    c.meta["events"] = ev;
    return c;
  }

  /// Trains iterations [next_iter, stop); stop < 0 means to the end.
  void run(std::int64_t stop = -1) {
    if (stop < 0 || stop > cfg_.total_iters) stop = cfg_.total_iters;
    if (next_iter_ >= stop) return;
    BatchPrefetcher loader(train_, cfg_, next_iter_, stop);
    const std::int64_t every = cfg_.resolved_eval_interval();
    for (; next_iter_ < stop; ++next_iter_) {
      const std::int64_t t = next_iter_;
      LogRow row;
      row.iter = t;
      if (t > 0 && t % every == 0) {
        row.psnr = validation_psnr();
        history_.push(t, row.psnr);
        row.event = "eval";
      }
      if (mode_ == TrainMode::Student) {
        const ScheduleAction a = schedule_.tick(t, history_);
        if (a == ScheduleAction::Slim) {
          const double pre = (!history_.empty() && history_.latest().iter == t) ? history_.latest().psnr : validation_psnr();
          schedule_.record_pre_slim(pre);
          const int idx = rank_alpha(model_).front();
          const double alpha = model_.blocks[idx].alpha.scalar();
          apply_skip(model_, idx);
          events_.push_back({t, "slim", idx + 1, alpha, pre});
          row.event = row.event.empty() ? "slim" : row.event + "+slim";
        } else if (a == ScheduleAction::Finalize) {
          events_.push_back({t, "finalize", 0, std::numeric_limits<double>::quiet_NaN(),
                             history_.empty() ? std::numeric_limits<double>::quiet_NaN() : history_.latest().psnr});
          row.event = row.event.empty() ? "finalize" : row.event + "+finalize";
        }
      }
      const Batch batch = loader.next(t);
      step(batch, t, row);
      log_.push_back(std::move(row));
      if (on_iteration) on_iteration(log_.back());
    }
  }

  bool finished() const { return next_iter_ >= cfg_.total_iters; }
  std::int64_t next_iter() const { return next_iter_; }
  const TrainConfig& config() const { return cfg_; }
  TrainMode mode() const { return mode_; }
  const Network& model() const { return model_; }
  Network& model() { return model_; }
  const Network* teacher() const { return teacher_ ? &*teacher_ : nullptr; }
  const SlimmingSchedule& schedule() const { return schedule_; }
  const MetricHistory& history() const { return history_; }
  const std::vector<LogRow>& log() const { return log_; }
  const std::vector<EventRow>& events() const { return events_; }
  const Dataset& validation_set() const { return val_; }

  double validation_psnr() const { return evaluate(model_, val_, cfg_.metric_shave(), false).psnr; }

  /// Called after every training iteration (progress reporting).
  std::function<void(const LogRow&)> on_iteration;

 private:
  Trainer(TrainConfig cfg, Dataset train, Dataset val, TrainMode mode)
      : cfg_(std::move(cfg)), mode_(mode), train_(std::move(train)), val_(std::move(val)) {
    init_common();
  }

  void init_common() {
    cfg_.validate();
    if (train_.empty()) throw ConfigError("training set is empty");
    if (val_.empty()) throw ConfigError("validation set is empty");
    if (train_.scale != cfg_.net.upscale || val_.scale != cfg_.net.upscale) {
      throw ConfigError("dataset scale does not match the network upscale factor");
    }
  }

  std::string norm_report() {
    std::vector<std::pair<double, std::string>> norms;
    for (Parameter* p : model_.parameters()) norms.emplace_back(p->value.norm(), p->name);
    std::sort(norms.begin(), norms.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::ostringstream os;
    for (std::size_t i = 0; i < std::min<std::size_t>(5, norms.size()); ++i) os << (i ? ", " : "") << norms[i].second << "=" << norms[i].first;
    return os.str();
  }

  void step(const Batch& batch, std::int64_t t, LogRow& row) {
    const float lambda = mode_ == TrainMode::Student ? cfg_.effective_lambda() : 0.0f;
    const bool distill = lambda > 0.0f;
    model_.zero_grad();
    Tape tape;
    std::vector<Tensor> s_outs, t_outs;
    Tensor sr;
    try {
      sr = model_.forward(batch.lr, distill ? &s_outs : nullptr, &tape);
    } catch (const NumericError& e) {
      throw NumericError("non-finite activations at iteration " + std::to_string(t) + " (" + e.what() +
                         "); largest parameter norms: " + norm_report());
    }
    const float l_pix = l1_loss(sr, batch.hr);
    SfdResult sfd;
    if (distill) {
      teacher_->forward(batch.lr, &t_outs);
      sfd = sfd_loss(t_outs, s_outs, sfd_mask(model_.retained), true);
      for (auto& g : sfd.grads)
        for (auto& v : g.data) v *= lambda;
    }
    const float loss = total_loss(l_pix, sfd.loss, lambda);
    if (!std::isfinite(loss)) {
      throw NumericError("loss is not finite at iteration " + std::to_string(t) + "; largest parameter norms: " + norm_report());
    }
    model_.backward(tape, l1_loss_grad(sr, batch.hr), distill ? &sfd.grads : nullptr);
    const float lr = lr_at(t, cfg_);
    adam_step(model_.parameters(), adam_, lr);
    project_scales();
    row.lr = lr;
    row.loss = loss;
    row.l_pix = l_pix;
    row.l_sfd = sfd.loss;
    if (!row.event.empty() && row.event.rfind("eval", 0) == 0 && distill) row.sfd_terms.assign(sfd.terms.begin(), sfd.terms.end());
  }

  void project_scales() {
    if (model_.method != QuantMethod::Rbd) return;
    for (auto& b : model_.blocks)
      for (QuantConv* qc : {&b.conv1, &b.conv2}) {
        for (auto& v : qc->rbd_w.scale.value.data) v = std::max(v, kScaleFloor);
        for (auto& v : qc->rbd_a.scale.value.data) v = std::max(v, kScaleFloor);
      }
  }

  TrainConfig cfg_;
  TrainMode mode_;
  Dataset train_;
  Dataset val_;
  Network model_;
  std::optional<Network> teacher_;
  SlimmingSchedule schedule_;
  MetricHistory history_{1u << 16};
  AdamState adam_;
  std::int64_t next_iter_ = 0;
  std::vector<LogRow> log_;
  std::vector<EventRow> events_;
};

}  // namespace qsr
