#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "diffstr/common.hpp"
#include "diffstr/data.hpp"
#include "diffstr/diffusion.hpp"
#include "diffstr/model.hpp"
#include "diffstr/train.hpp"
#include "diffstr/vocab.hpp"

namespace diffstr {

/// full94: exact match. alnum36-ci: strip non-alphanumerics, casefold,
/// then exact match.
enum class CharsetMode { Full94, Alnum36CI };

inline std::string to_string(CharsetMode m) {
  return m == CharsetMode::Full94 ? "full94" : "alnum36-ci";
}

inline CharsetMode charset_mode_from_string(const std::string& s) {
  if (s == "full94") return CharsetMode::Full94;
  if (s == "alnum36-ci") return CharsetMode::Alnum36CI;
  throw ConfigError("unknown word-accuracy mode: " + s);
}

inline bool word_correct(const std::string& pred, const std::string& gt,
                         CharsetMode mode) {
  if (mode == CharsetMode::Full94) return pred == gt;
  auto fold = [](const std::string& s) {
    std::string out;
    for (char c : s) {
      const auto uc = static_cast<unsigned char>(c);
      if (std::isalnum(uc)) out.push_back(static_cast<char>(std::tolower(uc)));
    }
    return out;
  };
  return fold(pred) == fold(gt);
}

struct EvalRecord {
  std::string label;
  std::string prediction;
  bool correct = false;
};

struct SeedRun {
  std::uint64_t seed = 0;
  double accuracy = 0;
  std::vector<EvalRecord> records;
};

struct EvalReport {
  std::string dataset_name;
  int n_samples = 0;
  CharsetMode mode = CharsetMode::Full94;
  int T_eval = 0;
  std::vector<SeedRun> runs;
  double mean_accuracy = 0;  // arithmetic mean of per-seed accuracies
};

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : r.runs) {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& rec : run.records)
      recs.push_back({{"label", rec.label},
                      {"prediction", rec.prediction},
                      {"correct", rec.correct}});
    runs.push_back({{"seed", run.seed},
                    {"accuracy", run.accuracy},
                    {"records", std::move(recs)}});
  }
  return {{"dataset", r.dataset_name},
          {"n_samples", r.n_samples},
          {"mode", to_string(r.mode)},
          {"T_eval", r.T_eval},
          {"runs", std::move(runs)},
          {"mean_accuracy", r.mean_accuracy}};
}

/// Runs the reverse chain for a batch of images against cached visual
/// features. Each image uses its own generator seeded from
/// derive_seed(base_seed, dataset index), so results do not depend on how
/// the dataset was chunked into batches.
template <class S>
std::vector<TokenSeq> sample_batch(Model<S>& model, const Mat<S>& z_batch,
                                   const std::vector<std::size_t>& indices,
                                   const Vocabulary& vocab,
                                   const NoiseSchedule<double>& sched,
                                   KernelKind kernel, std::uint64_t base_seed,
                                   SampleMode mode) {
  const int B = static_cast<int>(indices.size());
  const int L = model.config().seq_len;
  const int K = model.config().vocab_size;
  std::vector<Rng> rngs;
  rngs.reserve(static_cast<std::size_t>(B));
  for (std::size_t idx : indices) rngs.emplace_back(derive_seed(base_seed, idx));

  std::vector<TokenSeq> xs(static_cast<std::size_t>(B),
                           TokenSeq(static_cast<std::size_t>(L), vocab.mask()));
  if (kernel == KernelKind::Uniform) {
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < L; ++i)
        xs[static_cast<std::size_t>(b)][static_cast<std::size_t>(i)] =
            static_cast<int>(rngs[static_cast<std::size_t>(b)].below(
                static_cast<std::uint64_t>(K)));
  }
  for (int t = sched.steps; t >= 1; --t) {
    Tape<S> tape;
    typename Model<S>::Output out =
        model.decode(tape, tape.input(z_batch), xs,
                     std::vector<int>(static_cast<std::size_t>(B), t));
    const Mat<S>& logits = out.char_logits.val();
    for (int b = 0; b < B; ++b) {
      const MatD block =
          logits.middleRows(static_cast<Eigen::Index>(b) * L, L).template cast<double>();
      const Grid<double> belief = x0_belief_from_logits(block, vocab.mask());
      xs[static_cast<std::size_t>(b)] =
          reverse_step(xs[static_cast<std::size_t>(b)], belief, t, sched, kernel,
                       vocab.mask(), rngs[static_cast<std::size_t>(b)], mode);
    }
  }
  return xs;
}

/// Word accuracy over a dataset, one full reverse chain per image per seed.
/// Visual features are computed once and shared across seeds.
template <class S>
EvalReport evaluate(Model<S>& model, const std::vector<LabeledSample>& dataset,
                    const Vocabulary& vocab, ScheduleKind sched_kind,
                    KernelKind kernel, int T_eval,
                    const std::vector<std::uint64_t>& seeds, SampleMode mode,
                    CharsetMode word_mode,
                    const std::string& dataset_name = "dataset",
                    int eval_batch = 64) {
  if (dataset.empty()) throw ConfigError("evaluate: empty dataset");
  if (T_eval < 1) throw InvalidT("evaluate: T_eval must be >= 1");
  if (seeds.empty()) throw ConfigError("evaluate: need at least one seed");
  const NoiseSchedule<double> sched = build_schedule(sched_kind, T_eval);
  const int P = model.config().n_patches();

  // conditioning features once per image
  Mat<S> z_all(static_cast<Eigen::Index>(dataset.size()) * P,
               model.config().enc_dim);
  for (std::size_t start = 0; start < dataset.size();
       start += static_cast<std::size_t>(eval_batch)) {
    const std::size_t end =
        std::min(dataset.size(), start + static_cast<std::size_t>(eval_batch));
    std::vector<Image> images;
    for (std::size_t i = start; i < end; ++i) images.push_back(dataset[i].image);
    Tape<S> tape;
    z_all.middleRows(static_cast<Eigen::Index>(start) * P,
                     static_cast<Eigen::Index>(end - start) * P) =
        model.encode(tape, images).val();
  }

  EvalReport report;
  report.dataset_name = dataset_name;
  report.n_samples = static_cast<int>(dataset.size());
  report.mode = word_mode;
  report.T_eval = T_eval;
  double acc_sum = 0;
  for (std::uint64_t seed : seeds) {
    SeedRun run;
    run.seed = seed;
    int correct = 0;
    for (std::size_t start = 0; start < dataset.size();
         start += static_cast<std::size_t>(eval_batch)) {
      const std::size_t end =
          std::min(dataset.size(), start + static_cast<std::size_t>(eval_batch));
      std::vector<std::size_t> indices;
      for (std::size_t i = start; i < end; ++i) indices.push_back(i);
      const Mat<S> z_block =
          z_all.middleRows(static_cast<Eigen::Index>(start) * P,
                           static_cast<Eigen::Index>(end - start) * P);
      std::vector<TokenSeq> decoded = sample_batch(
          model, z_block, indices, vocab, sched, kernel, seed, mode);
      for (std::size_t i = start; i < end; ++i) {
        EvalRecord rec;
        rec.label = dataset[i].label;
        rec.prediction = decode_tokens(decoded[i - start], vocab);
        rec.correct = word_correct(rec.prediction, rec.label, word_mode);
        correct += rec.correct ? 1 : 0;
        run.records.push_back(std::move(rec));
      }
    }
    run.accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());
    acc_sum += run.accuracy;
    report.runs.push_back(std::move(run));
  }
  report.mean_accuracy = acc_sum / static_cast<double>(seeds.size());
  return report;
}

// ---------------------------------------------------------------------------
// Ablation runners. Both retrain from scratch per arm, since the ablated
// quantity changes training itself.
// ---------------------------------------------------------------------------

/// Everything one training-plus-evaluation arm depends on.
struct Protocol {
  ModelConfig model;
  TrainConfig train;
  ScheduleKind schedule = ScheduleKind::LinearMask;
  KernelKind kernel = KernelKind::Absorbing;
  std::vector<LabeledSample> train_data;
  std::vector<LabeledSample> eval_data;
  std::vector<std::uint64_t> eval_seeds{1, 2, 3, 4};
  SampleMode eval_mode = SampleMode::Sample;
  CharsetMode word_mode = CharsetMode::Full94;
};

/// Trains one model under the protocol and evaluates it. The model is
/// initialized from derive_seed(train.seed, 0x5eed).
template <class S>
EvalReport train_and_evaluate(const Protocol& proto, const Vocabulary& vocab,
                              const std::string& name,
                              const std::function<void(const StepMetrics&)>& on_step = {}) {
  Rng init_rng(derive_seed(proto.train.seed, 0x5eed));
  Model<S> model(proto.model, init_rng);
  NoiseSchedule<double> sched = build_schedule(proto.schedule, proto.model.max_step);
  Trainer<S> trainer(model, vocab, sched, proto.kernel, proto.train);
  trainer.run(proto.train_data, on_step);
  return evaluate(model, proto.eval_data, vocab, proto.schedule, proto.kernel,
                  proto.model.max_step, proto.eval_seeds, proto.eval_mode,
                  proto.word_mode, name);
}

inline void check_arms_match(const Protocol& a, const Protocol& b) {
  auto fail = [](const std::string& what) {
    throw MismatchedProtocol("ablation arms differ in " + what);
  };
  if (a.train.seed != b.train.seed) fail("training seed");
  if (a.eval_seeds != b.eval_seeds) fail("evaluation seeds");
  if (a.train_data.size() != b.train_data.size() ||
      a.eval_data.size() != b.eval_data.size())
    fail("dataset sizes");
  for (std::size_t i = 0; i < a.train_data.size(); ++i)
    if (a.train_data[i].sample_seed != b.train_data[i].sample_seed ||
        a.train_data[i].label != b.train_data[i].label)
      fail("training data");
  if (a.train.epochs != b.train.epochs || a.train.batch_size != b.train.batch_size ||
      a.train.peak_lr != b.train.peak_lr)
    fail("training hyperparameters");
  if (a.model.max_step != b.model.max_step) fail("diffusion steps");
}

/// Trains with the character-aware head supervised (lambda_presence = 1)
/// vs unsupervised (0), everything else identical.
template <class S>
std::pair<EvalReport, EvalReport> ablate_presence_head(
    const Protocol& arm_with, const Protocol& arm_without,
    const Vocabulary& vocab,
    const std::function<void(const StepMetrics&)>& on_step = {}) {
  check_arms_match(arm_with, arm_without);
  if (arm_with.train.lambda_presence != 1.0 ||
      arm_without.train.lambda_presence != 0.0)
    throw MismatchedProtocol(
        "presence ablation arms must have lambda_presence 1 and 0");
  EvalReport with_head =
      train_and_evaluate<S>(arm_with, vocab, "with-head", on_step);
  EvalReport without_head =
      train_and_evaluate<S>(arm_without, vocab, "without-head", on_step);
  return {std::move(with_head), std::move(without_head)};
}

/// Builds the two presence-ablation arms from a shared protocol.
inline std::pair<Protocol, Protocol> make_presence_arms(const Protocol& base) {
  Protocol with_head = base;
  with_head.train.lambda_presence = 1.0;
  Protocol without_head = base;
  without_head.train.lambda_presence = 0.0;
  return {std::move(with_head), std::move(without_head)};
}

/// Trains one model per T (all else fixed) and evaluates each with its own T.
template <class S>
std::vector<EvalReport> ablate_time_steps(
    const Protocol& base, const std::vector<int>& T_list,
    const Vocabulary& vocab,
    const std::function<void(const StepMetrics&)>& on_step = {}) {
  if (T_list.empty()) throw ConfigError("ablate_time_steps: empty T list");
  std::vector<EvalReport> reports;
  for (int T : T_list) {
    if (T < 1) throw InvalidT("ablate_time_steps: T must be >= 1, got " +
                              std::to_string(T));
    Protocol arm = base;
    arm.model.max_step = T;
    reports.push_back(
        train_and_evaluate<S>(arm, vocab, "T=" + std::to_string(T), on_step));
  }
  return reports;
}

}  // namespace diffstr
