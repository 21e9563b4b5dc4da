#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "diffstr/checkpoint.hpp"
#include "diffstr/config.hpp"
#include "diffstr/data.hpp"
#include "diffstr/diffusion.hpp"
#include "diffstr/eval.hpp"
#include "diffstr/model.hpp"
#include "diffstr/train.hpp"
#include "diffstr/vocab.hpp"

namespace fs = std::filesystem;
using namespace diffstr;
using nlohmann::json;

namespace {

/// At most one command writes an output directory at a time.
class DirLock {
 public:
  explicit DirLock(const std::string& dir) : path_(dir + "/.diffstr.lock") {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
      throw IoError("output directory is locked by another command: " + dir);
    ::close(fd);
    held_ = true;
  }
  ~DirLock() {
    if (held_) {
      std::error_code ec;
      fs::remove(path_, ec);
    }
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::string path_;
  bool held_ = false;
};

std::uint64_t env_seed_or(std::uint64_t fallback) {
  const char* s = std::getenv("DIFFSTR_SEED");
  return s != nullptr ? std::strtoull(s, nullptr, 10) : fallback;
}

std::vector<std::uint64_t> parse_u64_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t comma = s.find(',', pos);
    const std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!tok.empty()) out.push_back(std::strtoull(tok.c_str(), nullptr, 10));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw ConfigError("empty list: " + s);
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (std::uint64_t v : parse_u64_list(s)) out.push_back(static_cast<int>(v));
  return out;
}

std::string render_token(int id, const Vocabulary& vocab) {
  if (vocab.is_char(id)) return std::string(1, vocab.charset.char_at(id));
  if (id == vocab.eos()) return "|";
  if (id == vocab.pad()) return ".";
  return "␣";  // open box for MASK
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("short write: " + path);
}

// ---------------------------------------------------------------------------
// render-data
// ---------------------------------------------------------------------------

struct RenderDataArgs {
  std::string out;
  int n = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string charset_file;
  int maxlen = 8;
  std::string augment = "none";  // none | all | comma list of rotate,noise,blur
  int h = 32, w = 96, c = 1;
  double rotate_deg = 10.0, noise_sigma = 0.05;
  int blur_radius = 1;
};

int cmd_render_data(const RenderDataArgs& a) {
  RenderSpec spec;
  spec.charset = a.charset_file.empty() ? Charset::lower_alnum36()
                                        : Charset::from_file(a.charset_file);
  spec.max_len = a.maxlen;
  spec.img_h = a.h;
  spec.img_w = a.w;
  spec.img_c = a.c;
  spec.seed = a.seed_set ? a.seed : env_seed_or(0);
  spec.augment.rotate_deg = a.rotate_deg;
  spec.augment.noise_sigma = a.noise_sigma;
  spec.augment.blur_radius = a.blur_radius;
  if (a.augment != "none") {
    const std::string flags = a.augment == "all" ? "rotate,noise,blur" : a.augment;
    spec.augment.rotate = flags.find("rotate") != std::string::npos;
    spec.augment.noise = flags.find("noise") != std::string::npos;
    spec.augment.blur = flags.find("blur") != std::string::npos;
  }

  DirLock lock(a.out);
  std::vector<LabeledSample> samples = render_dataset(spec, a.n);
  std::vector<std::string> written;
  try {
    written = save_dataset(a.out, samples);
    json prov = {{"n", a.n},
                 {"seed", spec.seed},
                 {"charset", spec.charset.chars()},
                 {"max_len", spec.max_len},
                 {"image", {{"h", spec.img_h}, {"w", spec.img_w}, {"c", spec.img_c}}},
                 {"augment", to_json(spec.augment)},
                 {"sample_seeds", "derive_seed(seed, i) for i in [0, n)"}};
    write_text_file(a.out + "/render_spec.json", prov.dump(2) + "\n");
  } catch (...) {
    for (const auto& f : written) {
      std::error_code ec;
      fs::remove(f, ec);
    }
    throw;
  }
  std::cout << "wrote " << a.n << " samples to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string data;
  std::string val;
  std::string out;
  int epochs_override = -1;
};

template <class S>
int run_training(const RunConfig& cfg, const std::string& out_dir,
                 const std::vector<LabeledSample>& train_data,
                 const std::vector<LabeledSample>& val_data) {
  using Clock = std::chrono::steady_clock;
  const Vocabulary vocab(make_charset(cfg));
  const ScheduleKind sk = schedule_kind_from_string(cfg.schedule);
  const KernelKind kk = kernel_kind_from_string(cfg.kernel);
  const SampleMode mode =
      cfg.eval.mode == "greedy" ? SampleMode::Greedy : SampleMode::Sample;
  const CharsetMode word_mode = charset_mode_from_string(cfg.eval.word_mode);

  Rng init_rng(derive_seed(cfg.train.seed, 0x5eed));
  Model<S> model(cfg.model, init_rng);
  NoiseSchedule<double> sched = build_schedule(sk, cfg.T);
  Trainer<S> trainer(model, vocab, sched, kk, cfg.train);

  std::ofstream log(out_dir + "/metrics.jsonl", std::ios::binary);
  if (!log) throw IoError("cannot write metrics log");
  const auto t0 = Clock::now();

  int last_epoch = -1;
  double epoch_loss = 0;
  std::int64_t epoch_steps = 0;
  double best_metric = -1e300;
  auto maybe_save_best = [&](int epoch) {
    double metric;
    if (!val_data.empty()) {
      std::vector<LabeledSample> probe(val_data.begin(),
                                       val_data.begin() + std::min<std::size_t>(val_data.size(), 256));
      metric = evaluate(model, probe, vocab, sk, kk, cfg.T,
                        {cfg.eval.seeds.front()}, mode, word_mode, "val-probe")
                   .mean_accuracy;
    } else {
      metric = -epoch_loss / static_cast<double>(std::max<std::int64_t>(1, epoch_steps));
    }
    if (metric > best_metric) {
      best_metric = metric;
      save_checkpoint(out_dir + "/checkpoint.best.ckpt", model, vocab.charset, sk, kk);
    }
    std::cerr << "epoch " << epoch << " done, mean loss "
              << epoch_loss / static_cast<double>(std::max<std::int64_t>(1, epoch_steps))
              << (val_data.empty() ? "" : ", val-probe acc " + std::to_string(metric))
              << "\n";
  };

  trainer.run(train_data, [&](const StepMetrics& m) {
    if (last_epoch >= 0 && m.epoch != last_epoch) {
      maybe_save_best(last_epoch);
      epoch_loss = 0;
      epoch_steps = 0;
    }
    last_epoch = m.epoch;
    epoch_loss += m.loss.total;
    ++epoch_steps;
    json line = {{"step", m.step},
                 {"epoch", m.epoch},
                 {"lr", m.lr},
                 {"loss", m.loss.total},
                 {"ce", m.loss.ce},
                 {"bce", m.loss.bce},
                 {"mse", m.loss.mse},
                 {"grad_norm", m.grad_norm},
                 {"wall_ms", std::chrono::duration<double, std::milli>(Clock::now() - t0).count()}};
    log << line.dump() << "\n";
  });
  maybe_save_best(last_epoch);
  save_checkpoint(out_dir + "/checkpoint.final.ckpt", model, vocab.charset, sk, kk);

  // summary: word accuracy on (a subset of) the training data, plus the
  // full validation set when provided
  std::vector<LabeledSample> train_probe(
      train_data.begin(),
      train_data.begin() + std::min<std::size_t>(train_data.size(), 512));
  const EvalReport train_rep =
      evaluate(model, train_probe, vocab, sk, kk, cfg.T, cfg.eval.seeds, mode,
               word_mode, "train-probe");
  json summary = {{"steps", trainer.step_count()},
                  {"train_accuracy", train_rep.mean_accuracy},
                  {"train_probe_size", train_probe.size()},
                  {"wall_s", std::chrono::duration<double>(Clock::now() - t0).count()}};
  if (!val_data.empty()) {
    const EvalReport val_rep = evaluate(model, val_data, vocab, sk, kk, cfg.T,
                                        cfg.eval.seeds, mode, word_mode, "val");
    summary["val_accuracy"] = val_rep.mean_accuracy;
    write_text_file(out_dir + "/val_report.json", to_json(val_rep).dump(2) + "\n");
  }
  write_text_file(out_dir + "/train_summary.json", summary.dump(2) + "\n");
  std::cout << "final train word accuracy " << train_rep.mean_accuracy;
  if (summary.contains("val_accuracy"))
    std::cout << ", val word accuracy " << summary["val_accuracy"].get<double>();
  std::cout << "\n";
  return 0;
}

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = load_run_config(a.config);
  if (a.epochs_override > 0) {
    cfg.train.epochs = a.epochs_override;
    cfg.train.warmup_epochs = std::min(cfg.train.warmup_epochs, cfg.train.epochs - 1);
    cfg = resolve(cfg);
  }
  const Charset charset = make_charset(cfg);
  auto train_data = load_dataset(a.data, charset, cfg.max_label_len,
                                 cfg.model.img_h, cfg.model.img_w, cfg.model.img_c);
  if (train_data.empty()) throw ConfigError("empty dataset: " + a.data);
  std::vector<LabeledSample> val_data;
  if (!a.val.empty())
    val_data = load_dataset(a.val, charset, cfg.max_label_len, cfg.model.img_h,
                            cfg.model.img_w, cfg.model.img_c);

  DirLock lock(a.out);
  write_text_file(a.out + "/config.resolved.json", to_json(cfg).dump(2) + "\n");
  if (cfg.dtype == "float64")
    return run_training<double>(cfg, a.out, train_data, val_data);
  return run_training<float>(cfg, a.out, train_data, val_data);
}

// ---------------------------------------------------------------------------
// recognize
// ---------------------------------------------------------------------------

struct RecognizeArgs {
  std::string checkpoint;
  std::string image;
  bool greedy = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool trace = false;
};

template <class S>
int run_recognize(Model<S>& model, const LoadedCheckpoint& ck,
                  const RecognizeArgs& a) {
  const Vocabulary vocab = ck.vocab();
  const ModelConfig& mc = model.config();
  Image img = read_pnm(a.image);
  img = convert_channels(img, mc.img_c);
  img = resize_image(img, mc.img_h, mc.img_w);

  const NoiseSchedule<double> sched = build_schedule(ck.schedule, mc.max_step);
  Rng rng(a.seed_set ? a.seed : env_seed_or(0));
  const Mat<S> z = model.encode_one(img);
  auto denoiser = [&](const TokenSeq& xt, int t) -> MatD {
    return model.denoise_one(z, xt, t).char_logits.template cast<double>();
  };
  std::function<void(int, const TokenSeq&)> trace;
  if (a.trace) {
    trace = [&](int t, const TokenSeq& seq) {
      std::cout << "t=" << t << " ";
      for (int id : seq) std::cout << render_token(id, vocab);
      std::cout << "\n";
    };
  }
  const TokenSeq x0 =
      sample(denoiser, mc.seq_len, mc.vocab_size, vocab.mask(), sched,
             ck.kernel, rng, a.greedy ? SampleMode::Greedy : SampleMode::Sample,
             trace);
  std::cout << decode_tokens(x0, vocab) << "\n";
  return 0;
}

int cmd_recognize(const RecognizeArgs& a) {
  LoadedCheckpoint ck = load_checkpoint(a.checkpoint);
  if (auto* m = std::get_if<std::unique_ptr<Model<float>>>(&ck.net))
    return run_recognize(**m, ck, a);
  return run_recognize(**std::get_if<std::unique_ptr<Model<double>>>(&ck.net), ck, a);
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::string seeds = "1,2,3,4";
  int T = -1;
  bool greedy = false;
  std::string word_mode = "full94";
  std::string name = "dataset";
};

template <class S>
int run_evaluate(Model<S>& model, const LoadedCheckpoint& ck,
                 const EvaluateArgs& a) {
  const Vocabulary vocab = ck.vocab();
  const ModelConfig& mc = model.config();
  auto data = load_dataset(a.data, vocab.charset, mc.seq_len - 1, mc.img_h,
                           mc.img_w, mc.img_c);
  if (data.empty()) throw ConfigError("empty dataset: " + a.data);
  const int T_eval = a.T > 0 ? a.T : mc.max_step;
  DirLock lock(a.out);
  const EvalReport rep =
      evaluate(model, data, vocab, ck.schedule, ck.kernel, T_eval,
               parse_u64_list(a.seeds),
               a.greedy ? SampleMode::Greedy : SampleMode::Sample,
               charset_mode_from_string(a.word_mode), a.name);
  write_text_file(a.out + "/report.json", to_json(rep).dump(2) + "\n");
  std::cout << "mean word accuracy " << rep.mean_accuracy << " over "
            << rep.runs.size() << " seeds (" << rep.n_samples << " samples)\n";
  return 0;
}

int cmd_evaluate(const EvaluateArgs& a) {
  LoadedCheckpoint ck = load_checkpoint(a.checkpoint);
  if (auto* m = std::get_if<std::unique_ptr<Model<float>>>(&ck.net))
    return run_evaluate(**m, ck, a);
  return run_evaluate(**std::get_if<std::unique_ptr<Model<double>>>(&ck.net), ck, a);
}

// ---------------------------------------------------------------------------
// ablations
// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string config;
  std::string out;
  std::string T_list = "2,20,50";
};

std::string summary_row(const EvalReport& r) {
  std::string row = r.dataset_name + "\t" + std::to_string(r.mean_accuracy);
  for (const auto& run : r.runs) row += "\t" + std::to_string(run.accuracy);
  return row + "\n";
}

int cmd_ablate_head(const AblateArgs& a) {
  const RunConfig cfg = load_run_config(a.config);
  const Vocabulary vocab(make_charset(cfg));
  DirLock lock(a.out);
  const Protocol base = protocol_from_run_config(cfg);
  auto [arm_with, arm_without] = make_presence_arms(base);
  std::pair<EvalReport, EvalReport> reports =
      cfg.dtype == "float64"
          ? ablate_presence_head<double>(arm_with, arm_without, vocab)
          : ablate_presence_head<float>(arm_with, arm_without, vocab);
  write_text_file(a.out + "/with_head.json", to_json(reports.first).dump(2) + "\n");
  write_text_file(a.out + "/without_head.json", to_json(reports.second).dump(2) + "\n");
  std::string tsv = "arm\tmean_accuracy\tper_seed...\n" +
                    summary_row(reports.first) + summary_row(reports.second);
  write_text_file(a.out + "/summary.tsv", tsv);
  std::cout << "with-head " << reports.first.mean_accuracy << ", without-head "
            << reports.second.mean_accuracy << " (gap "
            << reports.first.mean_accuracy - reports.second.mean_accuracy << ")\n";
  return 0;
}

int cmd_ablate_steps(const AblateArgs& a) {
  const RunConfig cfg = load_run_config(a.config);
  const Vocabulary vocab(make_charset(cfg));
  const std::vector<int> T_list = parse_int_list(a.T_list);
  DirLock lock(a.out);
  const Protocol base = protocol_from_run_config(cfg);
  const std::vector<EvalReport> reports =
      cfg.dtype == "float64" ? ablate_time_steps<double>(base, T_list, vocab)
                             : ablate_time_steps<float>(base, T_list, vocab);
  std::string tsv = "T\tmean_accuracy\tper_seed...\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    write_text_file(a.out + "/T_" + std::to_string(T_list[i]) + ".json",
                    to_json(reports[i]).dump(2) + "\n");
    tsv += std::to_string(T_list[i]) + "\t" + std::to_string(reports[i].mean_accuracy);
    for (const auto& run : reports[i].runs) tsv += "\t" + std::to_string(run.accuracy);
    tsv += "\n";
    std::cout << "T=" << T_list[i] << " accuracy " << reports[i].mean_accuracy << "\n";
  }
  write_text_file(a.out + "/summary.tsv", tsv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene text recognition by iterative denoising of a fixed-length token sequence"};
  app.require_subcommand(1);

  RenderDataArgs rd;
  auto* c_rd = app.add_subcommand("render-data", "Render a synthetic labeled dataset");
  c_rd->add_option("--out", rd.out, "output directory")->required();
  c_rd->add_option("--n", rd.n, "number of samples")->required();
  auto* rd_seed = c_rd->add_option("--seed", rd.seed, "dataset seed");
  c_rd->add_option("--charset", rd.charset_file, "charset file (default: 36 lowercase alphanumerics)");
  c_rd->add_option("--maxlen", rd.maxlen, "maximum label length");
  c_rd->add_option("--augment", rd.augment, "none | all | comma list of rotate,noise,blur");
  c_rd->add_option("--height", rd.h, "image height");
  c_rd->add_option("--width", rd.w, "image width");
  c_rd->add_option("--channels", rd.c, "image channels");
  c_rd->add_option("--rotate-deg", rd.rotate_deg, "max rotation angle");
  c_rd->add_option("--noise-sigma", rd.noise_sigma, "gaussian noise sigma");
  c_rd->add_option("--blur-radius", rd.blur_radius, "box blur radius");

  TrainArgs tr;
  bool resume = false;
  auto* c_tr = app.add_subcommand("train", "Train a model");
  c_tr->add_option("--config", tr.config, "run config JSON")->required();
  c_tr->add_option("--data", tr.data, "training dataset directory")->required();
  c_tr->add_option("--val", tr.val, "held-out dataset directory");
  c_tr->add_option("--out", tr.out, "output directory")->required();
  c_tr->add_option("--epochs", tr.epochs_override, "override train.epochs");
  c_tr->add_flag("--resume", resume, "unsupported");

  RecognizeArgs rc;
  auto* c_rc = app.add_subcommand("recognize", "Recognize text in one image");
  c_rc->add_option("--checkpoint", rc.checkpoint, "checkpoint file")->required();
  c_rc->add_option("--image", rc.image, "PGM/PPM image")->required();
  c_rc->add_flag("--greedy", rc.greedy, "greedy reverse steps");
  auto* rc_seed = c_rc->add_option("--seed", rc.seed, "sampling seed");
  c_rc->add_flag("--trace", rc.trace, "print each intermediate sequence");

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "Word accuracy on a dataset");
  c_ev->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
  c_ev->add_option("--data", ev.data, "dataset directory")->required();
  c_ev->add_option("--out", ev.out, "output directory")->required();
  c_ev->add_option("--seeds", ev.seeds, "comma-separated evaluation seeds");
  c_ev->add_option("--T", ev.T, "evaluation step count (default: trained T)");
  c_ev->add_flag("--greedy", ev.greedy, "greedy reverse steps");
  c_ev->add_option("--word-mode", ev.word_mode, "full94 | alnum36-ci");
  c_ev->add_option("--name", ev.name, "dataset name for the report");

  AblateArgs ah;
  auto* c_ah = app.add_subcommand("ablate-head", "Character-aware head ablation");
  c_ah->add_option("--config", ah.config, "run config JSON")->required();
  c_ah->add_option("--out", ah.out, "output directory")->required();

  AblateArgs as_;
  auto* c_as = app.add_subcommand("ablate-steps", "Diffusion step-count ablation");
  c_as->add_option("--config", as_.config, "run config JSON")->required();
  c_as->add_option("--out", as_.out, "output directory")->required();
  c_as->add_option("--T", as_.T_list, "comma-separated list of T values");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_rd->parsed()) {
      rd.seed_set = rd_seed->count() > 0;
      return cmd_render_data(rd);
    }
    if (c_tr->parsed()) {
      if (resume) throw ConfigError("--resume is unsupported: training resumption is a non-goal");
      return cmd_train(tr);
    }
    if (c_rc->parsed()) {
      rc.seed_set = rc_seed->count() > 0;
      return cmd_recognize(rc);
    }
    if (c_ev->parsed()) return cmd_evaluate(ev);
    if (c_ah->parsed()) return cmd_ablate_head(ah);
    if (c_as->parsed()) return cmd_ablate_steps(as_);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
