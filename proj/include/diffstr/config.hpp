#pragma once

#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "diffstr/data.hpp"
#include "diffstr/eval.hpp"
#include "diffstr/model.hpp"
#include "diffstr/train.hpp"
#include "diffstr/vocab.hpp"

namespace diffstr {

struct EvalRunConfig {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4};
  std::string mode = "sample";  // sample | greedy
  std::string word_mode = "full94";
};

struct DataRunConfig {
  int n_train = 5000;
  int n_val = 512;
  int max_len_render = 8;
  AugmentConfig augment;
  std::uint64_t seed = 0;
};

/// The resolved configuration of a run: every module's knobs plus the
/// profile name. A serialized copy is written before any work starts.
struct RunConfig {
  std::string profile = "toy";
  std::string dtype = "float32";  // float32 | float64
  std::string charset = "alnum36";  // alnum36 | full94
  std::string charset_file;         // optional; overrides `charset`
  int max_label_len = 8;
  std::string schedule = "linear-mask";
  std::string kernel = "absorbing";
  int T = 20;
  ModelConfig model;
  TrainConfig train;
  EvalRunConfig eval;
  DataRunConfig data;
};

inline Charset make_charset(const RunConfig& cfg) {
  if (!cfg.charset_file.empty()) return Charset::from_file(cfg.charset_file);
  if (cfg.charset == "alnum36") return Charset::lower_alnum36();
  if (cfg.charset == "full94") return Charset::printable94();
  throw ConfigError("unknown charset preset: " + cfg.charset);
}

/// Fills the derived model fields (L, K, T) and validates the whole record.
inline RunConfig resolve(RunConfig cfg) {
  const Charset cs = make_charset(cfg);
  cfg.model.seq_len = cfg.max_label_len + 1;
  cfg.model.vocab_size = cs.size() + 3;
  cfg.model.max_step = cfg.T;
  cfg.model.validate();
  cfg.train.validate();
  schedule_kind_from_string(cfg.schedule);
  kernel_kind_from_string(cfg.kernel);
  charset_mode_from_string(cfg.eval.word_mode);
  if (cfg.eval.mode != "sample" && cfg.eval.mode != "greedy")
    throw ConfigError("eval.mode must be sample or greedy");
  if (cfg.dtype != "float32" && cfg.dtype != "float64")
    throw ConfigError("dtype must be float32 or float64");
  if (cfg.data.max_len_render > cfg.max_label_len)
    throw ConfigError("data.max_len_render exceeds max_label_len");
  if (cfg.T < 1) throw InvalidT("diffusion.T must be >= 1");
  return cfg;
}

inline nlohmann::json to_json(const AugmentConfig& a) {
  return {{"rotate", a.rotate},       {"rotate_deg", a.rotate_deg},
          {"noise", a.noise},         {"noise_sigma", a.noise_sigma},
          {"blur", a.blur},           {"blur_radius", a.blur_radius}};
}

inline nlohmann::json to_json(const RunConfig& c) {
  return {
      {"profile", c.profile},
      {"dtype", c.dtype},
      {"vocab",
       {{"charset", c.charset},
        {"charset_file", c.charset_file},
        {"max_label_len", c.max_label_len}}},
      {"image", {{"h", c.model.img_h}, {"w", c.model.img_w}, {"c", c.model.img_c}}},
      {"vision",
       {{"patch_h", c.model.patch_h},
        {"patch_w", c.model.patch_w},
        {"dim", c.model.enc_dim},
        {"layers", c.model.enc_layers},
        {"heads", c.model.enc_heads}}},
      {"decoder",
       {{"dim", c.model.dec_dim},
        {"layers", c.model.dec_layers},
        {"heads", c.model.dec_heads}}},
      {"model",
       {{"mlp_ratio", c.model.mlp_ratio},
        {"activation", c.model.activation},
        {"dropout", c.model.dropout}}},
      {"diffusion", {{"T", c.T}, {"schedule", c.schedule}, {"kernel", c.kernel}}},
      {"train",
       {{"epochs", c.train.epochs},
        {"warmup_epochs", c.train.warmup_epochs},
        {"peak_lr", c.train.peak_lr},
        {"weight_decay", c.train.weight_decay},
        {"batch_size", c.train.batch_size},
        {"lambda_presence", c.train.lambda_presence},
        {"lambda_simple", c.train.lambda_simple},
        {"clip_norm", c.train.clip_norm},
        {"adam_eps", c.train.adam_eps},
        {"adam_beta1", c.train.adam_beta1},
        {"adam_beta2", c.train.adam_beta2},
        {"seed", c.train.seed}}},
      {"eval",
       {{"seeds", c.eval.seeds}, {"mode", c.eval.mode}, {"word_mode", c.eval.word_mode}}},
      {"data",
       {{"n_train", c.data.n_train},
        {"n_val", c.data.n_val},
        {"max_len_render", c.data.max_len_render},
        {"seed", c.data.seed},
        {"augment", to_json(c.data.augment)}}}};
}

inline void merge_augment(const nlohmann::json& j, AugmentConfig& a) {
  a.rotate = j.value("rotate", a.rotate);
  a.rotate_deg = j.value("rotate_deg", a.rotate_deg);
  a.noise = j.value("noise", a.noise);
  a.noise_sigma = j.value("noise_sigma", a.noise_sigma);
  a.blur = j.value("blur", a.blur);
  a.blur_radius = j.value("blur_radius", a.blur_radius);
}

/// Overlays a (possibly partial) JSON document onto `cfg`.
inline void merge_run_config(const nlohmann::json& j, RunConfig& cfg) {
  cfg.profile = j.value("profile", cfg.profile);
  cfg.dtype = j.value("dtype", cfg.dtype);
  if (j.contains("vocab")) {
    const auto& v = j.at("vocab");
    cfg.charset = v.value("charset", cfg.charset);
    cfg.charset_file = v.value("charset_file", cfg.charset_file);
    cfg.max_label_len = v.value("max_label_len", cfg.max_label_len);
  }
  if (j.contains("image")) {
    const auto& v = j.at("image");
    cfg.model.img_h = v.value("h", cfg.model.img_h);
    cfg.model.img_w = v.value("w", cfg.model.img_w);
    cfg.model.img_c = v.value("c", cfg.model.img_c);
  }
  if (j.contains("vision")) {
    const auto& v = j.at("vision");
    cfg.model.patch_h = v.value("patch_h", cfg.model.patch_h);
    cfg.model.patch_w = v.value("patch_w", cfg.model.patch_w);
    cfg.model.enc_dim = v.value("dim", cfg.model.enc_dim);
    cfg.model.enc_layers = v.value("layers", cfg.model.enc_layers);
    cfg.model.enc_heads = v.value("heads", cfg.model.enc_heads);
  }
  if (j.contains("decoder")) {
    const auto& v = j.at("decoder");
    cfg.model.dec_dim = v.value("dim", cfg.model.dec_dim);
    cfg.model.dec_layers = v.value("layers", cfg.model.dec_layers);
    cfg.model.dec_heads = v.value("heads", cfg.model.dec_heads);
  }
  if (j.contains("model")) {
    const auto& v = j.at("model");
    cfg.model.mlp_ratio = v.value("mlp_ratio", cfg.model.mlp_ratio);
    cfg.model.activation = v.value("activation", cfg.model.activation);
    cfg.model.dropout = v.value("dropout", cfg.model.dropout);
  }
  if (j.contains("diffusion")) {
    const auto& v = j.at("diffusion");
    cfg.T = v.value("T", cfg.T);
    cfg.schedule = v.value("schedule", cfg.schedule);
    cfg.kernel = v.value("kernel", cfg.kernel);
  }
  if (j.contains("train")) {
    const auto& v = j.at("train");
    cfg.train.epochs = v.value("epochs", cfg.train.epochs);
    cfg.train.warmup_epochs = v.value("warmup_epochs", cfg.train.warmup_epochs);
    cfg.train.peak_lr = v.value("peak_lr", cfg.train.peak_lr);
    cfg.train.weight_decay = v.value("weight_decay", cfg.train.weight_decay);
    cfg.train.batch_size = v.value("batch_size", cfg.train.batch_size);
    cfg.train.lambda_presence = v.value("lambda_presence", cfg.train.lambda_presence);
    cfg.train.lambda_simple = v.value("lambda_simple", cfg.train.lambda_simple);
    cfg.train.clip_norm = v.value("clip_norm", cfg.train.clip_norm);
    cfg.train.adam_eps = v.value("adam_eps", cfg.train.adam_eps);
    cfg.train.adam_beta1 = v.value("adam_beta1", cfg.train.adam_beta1);
    cfg.train.adam_beta2 = v.value("adam_beta2", cfg.train.adam_beta2);
    cfg.train.seed = v.value("seed", cfg.train.seed);
  }
  if (j.contains("eval")) {
    const auto& v = j.at("eval");
    if (v.contains("seeds"))
      cfg.eval.seeds = v.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.eval.mode = v.value("mode", cfg.eval.mode);
    cfg.eval.word_mode = v.value("word_mode", cfg.eval.word_mode);
  }
  if (j.contains("data")) {
    const auto& v = j.at("data");
    cfg.data.n_train = v.value("n_train", cfg.data.n_train);
    cfg.data.n_val = v.value("n_val", cfg.data.n_val);
    cfg.data.max_len_render = v.value("max_len_render", cfg.data.max_len_render);
    cfg.data.seed = v.value("seed", cfg.data.seed);
    if (v.contains("augment")) merge_augment(v.at("augment"), cfg.data.augment);
  }
}

/// Builds the training-plus-evaluation protocol a run config describes:
/// model and trainer settings plus freshly rendered train and held-out
/// datasets (split seeds derived disjointly from data.seed).
inline Protocol protocol_from_run_config(const RunConfig& cfg) {
  Protocol proto;
  proto.model = cfg.model;
  proto.train = cfg.train;
  proto.schedule = schedule_kind_from_string(cfg.schedule);
  proto.kernel = kernel_kind_from_string(cfg.kernel);
  proto.eval_seeds = cfg.eval.seeds;
  proto.eval_mode =
      cfg.eval.mode == "greedy" ? SampleMode::Greedy : SampleMode::Sample;
  proto.word_mode = charset_mode_from_string(cfg.eval.word_mode);

  RenderSpec spec;
  spec.charset = make_charset(cfg);
  spec.max_len = cfg.data.max_len_render;
  spec.img_h = cfg.model.img_h;
  spec.img_w = cfg.model.img_w;
  spec.img_c = cfg.model.img_c;
  spec.augment = cfg.data.augment;
  spec.seed = derive_seed(cfg.data.seed, 0x7a0);
  proto.train_data = render_dataset(spec, cfg.data.n_train);
  RenderSpec vspec = spec;
  vspec.seed = derive_seed(cfg.data.seed, 0x7a1);
  proto.eval_data = render_dataset(vspec, cfg.data.n_val);
  return proto;
}

/// Loads a config file on top of the built-in defaults. When the file does
/// not pin a seed, the DIFFSTR_SEED environment variable, if set, provides
/// both the training and data seeds.
inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  RunConfig cfg;
  merge_run_config(j, cfg);
  const char* env_seed = std::getenv("DIFFSTR_SEED");
  if (env_seed != nullptr) {
    const std::uint64_t s = std::strtoull(env_seed, nullptr, 10);
    if (!(j.contains("train") && j.at("train").contains("seed"))) cfg.train.seed = s;
    if (!(j.contains("data") && j.at("data").contains("seed"))) cfg.data.seed = s;
  }
  return resolve(cfg);
}

}  // namespace diffstr
