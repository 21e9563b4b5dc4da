#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <variant>

#include <json.hpp>

#include "diffstr/common.hpp"
#include "diffstr/diffusion.hpp"
#include "diffstr/model.hpp"
#include "diffstr/schedule.hpp"
#include "diffstr/vocab.hpp"

namespace diffstr {

// Versioned binary container, documented in CHECKPOINT.md:
//   magic "DSTRCKP1", u32 meta length, meta JSON, u32 param count, then per
//   parameter: u32 name length, name, u64 rows, u64 cols, raw values
//   (column-major, little-endian, dtype per meta).
inline constexpr char kCheckpointMagic[9] = "DSTRCKP1";

namespace ckpt_detail {

template <class T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

inline nlohmann::json model_config_to_json(const ModelConfig& m) {
  return {{"img_h", m.img_h},           {"img_w", m.img_w},
          {"img_c", m.img_c},           {"patch_h", m.patch_h},
          {"patch_w", m.patch_w},       {"enc_dim", m.enc_dim},
          {"enc_layers", m.enc_layers}, {"enc_heads", m.enc_heads},
          {"dec_dim", m.dec_dim},       {"dec_layers", m.dec_layers},
          {"dec_heads", m.dec_heads},   {"mlp_ratio", m.mlp_ratio},
          {"seq_len", m.seq_len},       {"vocab_size", m.vocab_size},
          {"max_step", m.max_step},     {"activation", m.activation},
          {"dropout", m.dropout}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig m;
  m.img_h = j.at("img_h");
  m.img_w = j.at("img_w");
  m.img_c = j.at("img_c");
  m.patch_h = j.at("patch_h");
  m.patch_w = j.at("patch_w");
  m.enc_dim = j.at("enc_dim");
  m.enc_layers = j.at("enc_layers");
  m.enc_heads = j.at("enc_heads");
  m.dec_dim = j.at("dec_dim");
  m.dec_layers = j.at("dec_layers");
  m.dec_heads = j.at("dec_heads");
  m.mlp_ratio = j.at("mlp_ratio");
  m.seq_len = j.at("seq_len");
  m.vocab_size = j.at("vocab_size");
  m.max_step = j.at("max_step");
  m.activation = j.at("activation");
  m.dropout = j.at("dropout");
  return m;
}

}  // namespace ckpt_detail

template <class S>
void save_checkpoint(const std::string& path, const Model<S>& model,
                     const Charset& charset, ScheduleKind schedule,
                     KernelKind kernel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  nlohmann::json meta = {
      {"format_version", 1},
      {"dtype", sizeof(S) == 4 ? "float32" : "float64"},
      {"charset", charset.chars()},
      {"schedule", to_string(schedule)},
      {"kernel", to_string(kernel)},
      {"model", ckpt_detail::model_config_to_json(model.config())}};
  const std::string meta_str = meta.dump();
  out.write(kCheckpointMagic, 8);
  ckpt_detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(meta_str.size()));
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  const auto& store = model.params();
  ckpt_detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  for (int i = 0; i < store.size(); ++i) {
    const auto& e = store.entry(i);
    ckpt_detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    ckpt_detail::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(e.value.rows()));
    ckpt_detail::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(e.value.cols()));
    out.write(reinterpret_cast<const char*>(e.value.data()),
              static_cast<std::streamsize>(sizeof(S) * static_cast<std::size_t>(e.value.size())));
  }
  if (!out) throw IoError("short write to checkpoint: " + path);
}

/// A checkpoint restored into memory; the net's scalar type follows the
/// dtype it was trained with.
struct LoadedCheckpoint {
  std::string dtype;
  ScheduleKind schedule = ScheduleKind::LinearMask;
  KernelKind kernel = KernelKind::Absorbing;
  std::string charset_chars;
  ModelConfig model_config;
  std::variant<std::unique_ptr<Model<float>>, std::unique_ptr<Model<double>>> net;

  Vocabulary vocab() const { return Vocabulary(Charset(charset_chars)); }
};

namespace ckpt_detail {

template <class S>
std::unique_ptr<Model<S>> read_params_into_model(std::ifstream& in,
                                                 const ModelConfig& cfg,
                                                 const std::string& path) {
  auto model = std::make_unique<Model<S>>(cfg);
  auto& store = model->params();
  const auto n = read_pod<std::uint32_t>(in);
  if (static_cast<int>(n) != store.size())
    throw IoError("checkpoint has " + std::to_string(n) + " parameters, model needs " +
                  std::to_string(store.size()) + ": " + path);
  for (int i = 0; i < store.size(); ++i) {
    auto& e = store.entry(i);
    const auto name_len = read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    if (name != e.name || rows != static_cast<std::uint64_t>(e.value.rows()) ||
        cols != static_cast<std::uint64_t>(e.value.cols()))
      throw IoError("checkpoint parameter mismatch at \"" + name + "\" (expected \"" +
                    e.name + "\"): " + path);
    in.read(reinterpret_cast<char*>(e.value.data()),
            static_cast<std::streamsize>(sizeof(S) * static_cast<std::size_t>(e.value.size())));
  }
  if (!in) throw IoError("truncated checkpoint: " + path);
  return model;
}

}  // namespace ckpt_detail

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != std::string(kCheckpointMagic, 8))
    throw IoError("not a checkpoint file: " + path);
  const auto meta_len = ckpt_detail::read_pod<std::uint32_t>(in);
  std::string meta_str(meta_len, '\0');
  in.read(meta_str.data(), meta_len);
  if (!in) throw IoError("truncated checkpoint metadata: " + path);
  nlohmann::json meta = nlohmann::json::parse(meta_str);
  if (meta.at("format_version").get<int>() != 1)
    throw IoError("unsupported checkpoint version in " + path);

  LoadedCheckpoint ck;
  ck.dtype = meta.at("dtype");
  ck.schedule = schedule_kind_from_string(meta.at("schedule"));
  ck.kernel = kernel_kind_from_string(meta.at("kernel"));
  ck.charset_chars = meta.at("charset");
  ck.model_config = ckpt_detail::model_config_from_json(meta.at("model"));
  if (ck.dtype == "float32") {
    ck.net = ckpt_detail::read_params_into_model<float>(in, ck.model_config, path);
  } else if (ck.dtype == "float64") {
    ck.net = ckpt_detail::read_params_into_model<double>(in, ck.model_config, path);
  } else {
    throw IoError("unknown checkpoint dtype: " + ck.dtype);
  }
  return ck;
}

}  // namespace diffstr
