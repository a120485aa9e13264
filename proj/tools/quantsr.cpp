// quantsr: train, evaluate, export and run low-bit super-resolution networks.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.
// Log verbosity comes from QSR_LOG_LEVEL (error, warn, info, debug; default info).

#include <cblas.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "quantsr/quantsr.hpp"

namespace fs = std::filesystem;
using namespace qsr;

namespace {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

LogLevel g_level = LogLevel::Info;

void init_logging() {
  const char* env = std::getenv("QSR_LOG_LEVEL");
  if (!env) return;
  const std::string v = env;
  if (v == "error") g_level = LogLevel::Error;
  else if (v == "warn") g_level = LogLevel::Warn;
  else if (v == "info") g_level = LogLevel::Info;
  else if (v == "debug") g_level = LogLevel::Debug;
}

template <class... Args>
void log(LogLevel lvl, const Args&... args) {
  if (lvl > g_level) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::ostringstream os;
  ((os << args), ...);
  std::cerr << "[" << names[static_cast<int>(lvl)] << "] " << os.str() << "\n";
}

class UsageError : public Error {
 public:
  using Error::Error;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

// Options shared by the two training commands; each overrides a config key.
struct TrainFlags {
  std::string config;
  std::string out;
  std::string log_path;
  std::string events_path;
  std::string resume;
  std::int64_t stop_at = -1;
  std::int64_t checkpoint_every = 0;
  std::optional<std::int64_t> iters;
  std::optional<std::uint64_t> seed;
  std::optional<int> batch, patch, bits, w_bits, a_bits, channels, blocks, upscale, eval_interval;
  std::optional<float> lr, lambda;
  std::optional<std::string> train_dir, val_dir;
  bool no_rbd = false, no_qsa = false, no_sfd = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f, bool student) {
  cmd->add_option("-c,--config", f.config, "JSON run configuration");
  cmd->add_option("-o,--out", f.out, "checkpoint to write")->required();
  cmd->add_option("--log", f.log_path, "metrics CSV (iter,lr,loss,l_pix,l_sfd,psnr,event)");
  cmd->add_option("--resume", f.resume, "continue from this checkpoint");
  cmd->add_option("--stop-at", f.stop_at, "stop (and save) before this iteration");
  cmd->add_option("--checkpoint-every", f.checkpoint_every, "save the checkpoint every N iterations");
  cmd->add_option("--iters", f.iters, "training.total_iters");
  cmd->add_option("--seed", f.seed, "training.seed");
  cmd->add_option("--batch", f.batch, "training.batch_size");
  cmd->add_option("--patch", f.patch, "training.patch_size (LR pixels)");
  cmd->add_option("--lr", f.lr, "training.lr_init");
  cmd->add_option("--eval-interval", f.eval_interval, "training.eval_interval");
  cmd->add_option("--channels", f.channels, "network.channels");
  cmd->add_option("--blocks", f.blocks, "network.blocks (2N)");
  cmd->add_option("--upscale", f.upscale, "network.upscale");
  cmd->add_option("--train-dir", f.train_dir, "data.train_dir");
  cmd->add_option("--val-dir", f.val_dir, "data.val_dir");
  if (!student) return;
  cmd->add_option("--events", f.events_path, "schedule event log (iter,event,block_index,alpha,psnr)");
  cmd->add_option("--bits", f.bits, "network.w_bits and network.a_bits");
  cmd->add_option("--w-bits", f.w_bits, "network.w_bits");
  cmd->add_option("--a-bits", f.a_bits, "network.a_bits");
  cmd->add_option("--lambda", f.lambda, "training.lambda");
  cmd->add_flag("--no-rbd", f.no_rbd, "uniform quantizers with a straight-through estimator");
  cmd->add_flag("--no-qsa", f.no_qsa, "fixed N blocks, no slimming");
  cmd->add_flag("--no-sfd", f.no_sfd, "pixel loss only");
}

RunConfig resolve_config(const TrainFlags& f) {
  RunConfig rc = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  TrainConfig& t = rc.train;
  if (f.iters) t.total_iters = *f.iters;
  if (f.seed) t.seed = *f.seed;
  if (f.batch) t.batch_size = *f.batch;
  if (f.patch) t.patch_size = *f.patch;
  if (f.lr) t.lr_init = *f.lr;
  if (f.lambda) t.lambda = *f.lambda;
  if (f.eval_interval) t.eval_interval = *f.eval_interval;
  if (f.channels) t.net.channels = *f.channels;
  if (f.blocks) t.net.blocks = *f.blocks;
  if (f.upscale) t.net.upscale = *f.upscale;
  if (f.bits) t.net.w_bits = t.net.a_bits = *f.bits;
  if (f.w_bits) t.net.w_bits = *f.w_bits;
  if (f.a_bits) t.net.a_bits = *f.a_bits;
  if (f.train_dir) rc.data.train_dir = *f.train_dir;
  if (f.val_dir) rc.data.val_dir = *f.val_dir;
  if (f.no_rbd) t.rbd = false;
  if (f.no_qsa) t.qsa = false;
  if (f.no_sfd) t.sfd = false;
  t.validate();
  return rc;
}

void save_checkpoint(const Trainer& tr, const DataConfig& data, const std::string& path) {
  Container c = tr.checkpoint();
  c.meta["data"] = data_config_to_json(data);
  save_container(c, path);
}

void save_logs(const Trainer& tr, const TrainFlags& f) {
  if (!f.log_path.empty()) write_text(f.log_path, metrics_csv(tr.log()));
  if (!f.events_path.empty()) write_text(f.events_path, events_log(tr.events()));
}

void run_training(Trainer& tr, const DataConfig& data, const TrainFlags& f) {
  const auto start = std::chrono::steady_clock::now();
  const std::int64_t total = tr.config().total_iters;
  const std::int64_t report = std::max<std::int64_t>(1, total / 20);
  tr.on_iteration = [&](const LogRow& r) {
    if (!r.event.empty() && r.event != "eval") log(LogLevel::Info, "iter ", r.iter, ": ", r.event);
    if (r.iter % report == 0 || !std::isnan(r.psnr)) {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      log(LogLevel::Debug, "iter ", r.iter, "/", total, " loss ", r.loss, (std::isnan(r.psnr) ? "" : " psnr "),
          (std::isnan(r.psnr) ? "" : format_double(r.psnr)), " (", static_cast<int>(s), "s)");
    }
  };
  std::int64_t stop = f.stop_at >= 0 ? std::min(f.stop_at, total) : total;
  while (tr.next_iter() < stop) {
    const std::int64_t chunk_end = f.checkpoint_every > 0 ? std::min(stop, tr.next_iter() + f.checkpoint_every) : stop;
    tr.run(chunk_end);
    save_checkpoint(tr, data, f.out);
    save_logs(tr, f);
  }
  if (tr.next_iter() >= stop) {
    save_checkpoint(tr, data, f.out);
    save_logs(tr, f);
  }
  const double psnr_now = tr.validation_psnr();
  log(LogLevel::Info, "stopped at iteration ", tr.next_iter(), "/", total, ", validation PSNR ", format_double(psnr_now),
      " dB, retained blocks ", tr.model().retained_count(), "; wrote ", f.out);
  std::cout << "validation_psnr " << format_double(psnr_now) << "\n";
}

// Continues a saved run with the configuration and data it was started with.
// Only --train-dir / --val-dir may be given again (for moved directories).
int resume_training(const TrainFlags& f, TrainMode expected) {
  const Container c = load_container(f.resume);
  const std::string kind = c.meta.value("kind", "");
  if (kind != (expected == TrainMode::Teacher ? "teacher" : "student")) {
    throw UsageError("--resume: '" + f.resume + "' is not a " + (expected == TrainMode::Teacher ? "teacher" : "student") +
                     " checkpoint");
  }
  if (!f.config.empty() || f.iters || f.seed || f.batch || f.patch || f.lr || f.lambda || f.eval_interval || f.channels ||
      f.blocks || f.upscale || f.bits || f.w_bits || f.a_bits || f.no_rbd || f.no_qsa || f.no_sfd) {
    throw UsageError("--resume: the run configuration is taken from the checkpoint; drop the other training options");
  }
  RunConfig rc;
  rc.train = config_from_json(c.meta.at("config"));
  if (c.meta.contains("data")) rc.data = data_config_from_json(c.meta.at("data"));
  if (f.train_dir) rc.data.train_dir = *f.train_dir;
  if (f.val_dir) rc.data.val_dir = *f.val_dir;
  Trainer tr = Trainer::resume(c, training_set(rc), validation_set(rc));
  log(LogLevel::Info, "resuming at iteration ", tr.next_iter(), "/", tr.config().total_iters);
  run_training(tr, rc.data, f);
  return 0;
}

int cmd_train_teacher(const TrainFlags& f) {
  if (!f.resume.empty()) return resume_training(f, TrainMode::Teacher);
  const RunConfig rc = resolve_config(f);
  Dataset train = training_set(rc), val = validation_set(rc);
  log(LogLevel::Info, "training teacher: ", rc.train.net.channels, " channels, ", rc.train.net.blocks, " blocks, x",
      rc.train.net.upscale, ", ", rc.train.total_iters, " iterations");
  Trainer tr(rc.train, std::move(train), std::move(val));
  run_training(tr, rc.data, f);
  return 0;
}

Network load_model_network(const std::string& path, const char* expected_kind = nullptr) {
  const Container c = load_container(path);
  const std::string kind = c.meta.value("kind", "");
  if (expected_kind && kind != expected_kind) throw UsageError("'" + path + "' is a " + kind + " checkpoint, expected " + expected_kind);
  if (kind != "teacher" && kind != "student") throw UsageError("'" + path + "' is not a training checkpoint");
  return restore_network(c, "model");
}

int cmd_train(const TrainFlags& f, const std::string& teacher_path) {
  if (!f.resume.empty()) {
    if (!teacher_path.empty()) throw UsageError("--resume: the teacher is stored in the checkpoint; drop --teacher");
    return resume_training(f, TrainMode::Student);
  }
  const RunConfig rc = resolve_config(f);
  Dataset train = training_set(rc), val = validation_set(rc);
  if (teacher_path.empty()) throw UsageError("train: --teacher is required unless --resume is given");
  const Network teacher = load_model_network(teacher_path, "teacher");
  log(LogLevel::Info, "training student: ", rc.train.net.w_bits, "/", rc.train.net.a_bits, " bits, rbd=", rc.train.rbd,
      " qsa=", rc.train.qsa, " sfd=", rc.train.sfd, ", ", rc.train.total_iters, " iterations");
  Trainer tr(rc.train, std::move(train), std::move(val), teacher);
  run_training(tr, rc.data, f);
  return 0;
}

// Either a training checkpoint or an exported artifact.
struct AnyModel {
  std::optional<Network> net;
  std::optional<DeployedModel> deployed;
  int upscale() const { return net ? net->spec.upscale : deployed->spec.upscale; }
  ImageRGB run(const ImageRGB& lr) const {
    return from_tensor(net ? net->forward(to_tensor(lr)) : infer(*deployed, to_tensor(lr)));
  }
};

AnyModel load_any(const std::string& path) {
  const Container c = load_container(path);
  AnyModel m;
  if (c.meta.value("kind", "") == "artifact") m.deployed = deployed_from_container(c);
  else m.net = restore_network(c, "model");
  return m;
}

std::vector<fs::path> png_files(const std::string& path) {
  std::vector<fs::path> out;
  if (fs::is_regular_file(path)) return {fs::path(path)};
  if (!fs::is_directory(path)) throw Error("'" + path + "' does not exist");
  for (const auto& e : fs::directory_iterator(path))
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error("no PNG files in '" + path + "'");
  return out;
}

int cmd_eval(const std::string& model_path, const std::string& data, const std::string& sr_path, const std::string& hr_path,
             int scale, int shave, const std::string& csv_path) {
  struct Row {
    std::string name;
    double psnr, ssim;
  };
  std::vector<Row> rows;
  if (!model_path.empty()) {
    if (data.empty()) throw UsageError("eval: --data is required with --model");
    const AnyModel m = load_any(model_path);
    const int s = m.upscale();
    const Dataset ds = load_dataset(data, s);
    const int sh = shave >= 0 ? shave : s;
    for (const auto& item : ds.items) {
      const ImageRGB sr = m.run(item.lr);
      rows.push_back({item.name, psnr(sr, item.hr, sh), ssim(sr, item.hr, sh)});
    }
  } else {
    if (sr_path.empty() || hr_path.empty()) throw UsageError("eval: give --model and --data, or --sr and --hr");
    const auto srs = png_files(sr_path), hrs = png_files(hr_path);
    if (srs.size() != hrs.size()) throw UsageError("eval: --sr and --hr hold different numbers of images");
    const int sh = shave >= 0 ? shave : scale;
    for (std::size_t i = 0; i < srs.size(); ++i) {
      const ImageRGB a = load_png(srs[i].string()), b = load_png(hrs[i].string());
      rows.push_back({srs[i].filename().string(), psnr(a, b, sh), ssim(a, b, sh)});
    }
  }
  std::ostringstream os;
  os << "image,psnr_db,ssim\n";
  double mp = 0.0, ms = 0.0;
  for (const auto& r : rows) {
    os << r.name << ',' << format_double(r.psnr) << ',' << format_double(r.ssim) << '\n';
    mp += r.psnr / rows.size();
    ms += r.ssim / rows.size();
  }
  os << "mean," << format_double(mp) << ',' << format_double(ms) << '\n';
  std::cout << os.str();
  if (!csv_path.empty()) write_text(csv_path, os.str());
  return 0;
}

int cmd_export(const std::string& ckpt, const std::string& out) {
  const Network net = load_model_network(ckpt, "student");
  const DeployedModel m = export_model(net);
  save_deployed(m, out);
  log(LogLevel::Info, "exported ", m.blocks.size(), " of ", net.block_count(), " blocks to ", out, " (",
      fs::file_size(out), " bytes)");
  return 0;
}

int cmd_infer(const std::string& model, const std::string& input, const std::string& output) {
  const DeployedModel m = load_deployed(model);
  const ImageRGB lr = load_png(input);
  save_png(from_tensor(infer(m, to_tensor(lr))), output);
  log(LogLevel::Info, "wrote ", output);
  return 0;
}

int cmd_report(const std::string& ckpt, const std::string& model, const std::string& config, int in_h, int in_w,
               bool json) {
  NetworkSpec spec;
  int blocks = 0;
  QuantMethod method = QuantMethod::Rbd;
  std::optional<DeployedModel> deployed;
  if (!model.empty()) {
    deployed = load_deployed(model);
    spec = deployed->spec;
    blocks = static_cast<int>(deployed->blocks.size());
    method = deployed->method;
  } else if (!ckpt.empty()) {
    const Network net = load_model_network(ckpt);
    spec = net.spec;
    blocks = net.retained_count();
    if (net.quantized()) method = net.method;
  } else if (!config.empty()) {
    const RunConfig rc = load_run_config(config);
    spec = rc.train.net;
    blocks = rc.train.target();
    method = rc.train.rbd ? QuantMethod::Rbd : QuantMethod::Uniform;
  } else {
    throw UsageError("report: give --model, --ckpt or --config");
  }
  const AccountingReport r = account(spec, blocks, in_h, in_w, method);
  std::int64_t measured_codes = -1, measured_sections = -1;
  if (deployed) {
    measured_codes = measured_sections = 0;
    for (const auto& b : deployed->blocks)
      for (const PackedWeights* pw : {&b.w1, &b.w2}) {
        measured_codes += static_cast<std::int64_t>(pw->bytes.size());
        measured_sections += static_cast<std::int64_t>(pw->serialized_size());
      }
  }
  const auto ref = reference_reduction(spec, blocks);
  if (json) {
    nlohmann::json j{{"channels", spec.channels},
                     {"deployed_blocks", blocks},
                     {"upscale", spec.upscale},
                     {"w_bits", spec.w_bits},
                     {"a_bits", spec.a_bits},
                     {"input", {in_h, in_w}},
                     {"params", r.params_total},
                     {"body_params", r.body_params},
                     {"body_code_bytes", r.body_code_bytes},
                     {"body_overhead_bytes", r.body_overhead_bytes},
                     {"body_fp32_bytes", r.body_fp32_bytes},
                     {"body_code_ratio", r.body_code_ratio()},
                     {"body_reduction_factor", r.body_reduction_factor()},
                     {"storage_bytes", r.storage_bytes()},
                     {"fp32_storage_bytes", r.fp32_storage_bytes()},
                     {"macs", r.macs_total},
                     {"effective_ops", r.effective_ops},
                     {"params_reduction_pct", r.params_reduction_pct()},
                     {"ops_reduction_pct", r.ops_reduction_pct()}};
    if (deployed) {
      j["artifact_code_bytes"] = measured_codes;
      j["artifact_section_bytes"] = measured_sections;
    }
    if (ref) j["reference"] = {{"label", ref->label}, {"params_pct", ref->params_pct}, {"ops_pct", ref->ops_pct}};
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  char buf[256];
  auto line = [&](const char* fmt, auto... v) {
    std::snprintf(buf, sizeof buf, fmt, v...);
    std::cout << buf << "\n";
  };
  line("network            %d channels, %d deployed blocks, x%d, W%d/A%d", spec.channels, blocks, spec.upscale, spec.w_bits,
       spec.a_bits);
  line("input              %d x %d (LR)", in_h, in_w);
  line("params             %lld (%.1fK)", static_cast<long long>(r.params_total), r.params_total / 1000.0);
  line("body params        %lld", static_cast<long long>(r.body_params));
  line("body codes         %lld bytes (%.6f of FP32 body)", static_cast<long long>(r.body_code_bytes), r.body_code_ratio());
  line("body overhead      %lld bytes (headers, channel scales, activation quantizers)",
       static_cast<long long>(r.body_overhead_bytes));
  line("body reduction     %.2fx versus FP32", r.body_reduction_factor());
  if (deployed) line("artifact body      %lld code bytes, %lld section bytes", static_cast<long long>(measured_codes), static_cast<long long>(measured_sections));
  line("storage            %lld bytes (FP32 model %lld)", static_cast<long long>(r.storage_bytes()),
       static_cast<long long>(r.fp32_storage_bytes()));
  line("MACs               %.3fG", r.macs_total / 1e9);
  line("effective ops      %.3fG (32-bit MAC equivalents)", r.effective_ops / 1e9);
  line("params reduction   %.1f%%", r.params_reduction_pct());
  line("ops reduction      %.1f%%", r.ops_reduction_pct());
  if (ref) line("reference          %s: params -%.1f%%, ops -%.1f%%", ref->label.c_str(), ref->params_pct, ref->ops_pct);
  return 0;
}

int cmd_synth(const std::string& out, int count, int size, std::uint64_t seed, int scale) {
  const fs::path hr_dir = fs::path(out) / "HR";
  fs::create_directories(hr_dir);
  const fs::path lr_dir = fs::path(out) / ("LR_x" + std::to_string(scale));
  if (scale > 1) fs::create_directories(lr_dir);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%04d.png", i);
    const ImageRGB hr = mod_crop(synthetic_image(size, size, seed * 1000003ull + static_cast<std::uint64_t>(i)), std::max(1, scale));
    save_png(hr, (hr_dir / name).string());
    if (scale > 1) save_png(make_lr(hr, scale), (lr_dir / name).string());
  }
  log(LogLevel::Info, "wrote ", count, " images to ", hr_dir.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  openblas_set_num_threads(1);
  CLI::App app{"Low-bit super-resolution: quantization-aware training, slimming, distillation and integer inference"};
  app.require_subcommand(1);

  TrainFlags teacher_flags, student_flags;
  auto* t_cmd = app.add_subcommand("train-teacher", "train the full-precision teacher");
  add_train_flags(t_cmd, teacher_flags, false);

  std::string teacher_path;
  auto* s_cmd = app.add_subcommand("train", "train the quantized student from a teacher checkpoint");
  add_train_flags(s_cmd, student_flags, true);
  s_cmd->add_option("--teacher", teacher_path, "teacher checkpoint");

  std::string e_model, e_data, e_sr, e_hr, e_csv;
  int e_scale = 2, e_shave = -1;
  auto* e_cmd = app.add_subcommand("eval", "PSNR/SSIM (Y channel) per image and mean");
  e_cmd->add_option("--model", e_model, "checkpoint or exported artifact");
  e_cmd->add_option("--data", e_data, "HR PNG directory (LR from sibling LR_x{s} or bicubic)");
  e_cmd->add_option("--sr", e_sr, "compare this image or directory ...");
  e_cmd->add_option("--hr", e_hr, "... against this one");
  e_cmd->add_option("--scale", e_scale, "scale used for the default shave with --sr/--hr");
  e_cmd->add_option("--shave", e_shave, "border pixels to ignore (default: scale)");
  e_cmd->add_option("--csv", e_csv, "also write the table here");

  std::string x_ckpt, x_out;
  auto* x_cmd = app.add_subcommand("export", "pack a student checkpoint into a deployable artifact");
  x_cmd->add_option("--ckpt", x_ckpt, "student checkpoint")->required();
  x_cmd->add_option("-o,--out", x_out, "artifact path")->required();

  std::string i_model, i_in, i_out;
  auto* i_cmd = app.add_subcommand("infer", "super-resolve a PNG with the integer path");
  i_cmd->add_option("--model", i_model, "exported artifact")->required();
  i_cmd->add_option("-i,--input", i_in, "LR PNG")->required();
  i_cmd->add_option("-o,--output", i_out, "SR PNG")->required();

  std::string r_ckpt, r_model, r_config;
  int r_h = 256, r_w = 256;
  bool r_json = false;
  auto* r_cmd = app.add_subcommand("report", "parameter, storage and operation accounting");
  r_cmd->add_option("--ckpt", r_ckpt, "training checkpoint");
  r_cmd->add_option("--model", r_model, "exported artifact");
  r_cmd->add_option("--config", r_config, "run configuration (deployed size = target blocks)");
  r_cmd->add_option("--height", r_h, "LR input height for op counts");
  r_cmd->add_option("--width", r_w, "LR input width for op counts");
  r_cmd->add_flag("--json", r_json, "machine-readable output");

  std::string y_out;
  int y_count = 8, y_size = 96, y_scale = 2;
  std::uint64_t y_seed = 1;
  auto* y_cmd = app.add_subcommand("synth", "write a procedural HR/LR PNG dataset");
  y_cmd->add_option("-o,--out", y_out, "output directory (HR/ and LR_x{s}/ are created)")->required();
  y_cmd->add_option("--count", y_count, "number of images");
  y_cmd->add_option("--size", y_size, "HR side length");
  y_cmd->add_option("--seed", y_seed, "seed");
  y_cmd->add_option("--scale", y_scale, "LR scale");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  try {
    if (t_cmd->parsed()) return cmd_train_teacher(teacher_flags);
    if (s_cmd->parsed()) return cmd_train(student_flags, teacher_path);
    if (e_cmd->parsed()) return cmd_eval(e_model, e_data, e_sr, e_hr, e_scale, e_shave, e_csv);
    if (x_cmd->parsed()) return cmd_export(x_ckpt, x_out);
    if (i_cmd->parsed()) return cmd_infer(i_model, i_in, i_out);
    if (r_cmd->parsed()) return cmd_report(r_ckpt, r_model, r_config, r_h, r_w, r_json);
    if (y_cmd->parsed()) return cmd_synth(y_out, y_count, y_size, y_seed, y_scale);
  } catch (const UsageError& e) {
    log(LogLevel::Error, e.what());
    return 1;
  } catch (const ConfigError& e) {
    log(LogLevel::Error, e.what());
    return 1;
  } catch (const std::exception& e) {
    log(LogLevel::Error, e.what());
    return 2;
  }
  return 1;
}
