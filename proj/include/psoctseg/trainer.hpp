#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "psoctseg/augment.hpp"
#include "psoctseg/critic.hpp"
#include "psoctseg/losses.hpp"
#include "psoctseg/metrics.hpp"
#include "psoctseg/record_io.hpp"
#include "psoctseg/segnet.hpp"

namespace psoctseg {

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct TrainPaths {
  std::string data;
  std::string critic_ckpt;
  std::string out;
};

struct TrainConfig {
  LossConfig loss;
  double lr = 1e-3;
  double rho = 0.9;
  double rms_eps = 1e-7;
  int batch_size = 20;
  int epochs = 30;
  int patience = 10;  // epochs without a better validation Dice
  std::uint64_t seed = 0;
  SplitFractions split;
  TrainPaths paths;
  bool augment = true;
  AugmentRanges augment_ranges;
  SegNetConfig arch;

  /// Throws ConfigError.
  void validate() const;

  [[nodiscard]] nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Reads a JSON object or flat `section.key = value` lines ('#' comments).
TrainConfig load_train_config(const std::filesystem::path& path);
/// Nested JSON object from key=value text, e.g. "loss.lambda_bc = 0.1".
nlohmann::json parse_key_values(const std::string& text);

LossConfig loss_config_from_json(const nlohmann::json& j, LossConfig base = {});
nlohmann::json to_json(const LossConfig& c);

// ------------------------------------------------------------ splitting

enum class Partition { Train, Val, Test };
const char* partition_name(Partition p);

struct SplitAssignment {
  std::map<std::string, Partition> patients;

  [[nodiscard]] std::size_t count(Partition p) const;
  /// Positions in `records` whose patient falls in `p`, in record order.
  [[nodiscard]] std::vector<std::size_t> indices(std::span<const Record> records, Partition p) const;
};

/// Shuffles the distinct patient IDs with the seed and deals them out:
/// round(val * P) to validation, round(test * P) to test, the rest to
/// training, with at least one patient in each. Throws TooFewPatients below
/// three patients.
SplitAssignment split_by_patient(std::span<const std::string> patient_ids, const SplitFractions& fractions,
                                 std::uint64_t seed);
SplitAssignment split_by_patient(std::span<const Record> records, const SplitFractions& fractions, std::uint64_t seed);

// ------------------------------------------------------------ training

struct StepLog {
  int epoch = 0;
  int step = 0;
  LossTerms terms;
  double total = 0.0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;  // mean combined loss over the epoch
  double val_dice = 0.0;    // mean over validation frames, raw argmax
  double val_mhd = 0.0;
};

struct TrainResult {
  SegNet<float> net;  // best-on-validation weights
  SplitAssignment split;
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;
  int best_epoch = -1;
  double best_val_dice = 0.0;
  double best_val_mhd = 0.0;
};

/// Epochs of augmented mini-batch RMSprop on the training patients, keeping
/// the weights with the best mean validation Dice (lower MHD breaks ties).
/// The critic is required iff lambda_ap > 0 and is never updated.
/// Deterministic in config.seed. Throws MissingCritic, NonFiniteLoss.
TrainResult train(const TrainConfig& cfg, std::span<const Record> data, const Critic<float>* critic,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// File-based run: loads paths.data and paths.critic_ckpt, writes
/// model.ckpt, train_log.csv, epochs.csv and config.json under paths.out.
TrainResult train(const TrainConfig& cfg);

void write_step_csv(std::ostream& os, const std::vector<StepLog>& steps);

struct Evaluation {
  std::vector<FrameMetrics> frames;
  EvalReport report;
};

/// Predicts every selected record and scores it against its labels.
/// `postprocess` runs clean() on the predictions first. A positive
/// `max_wall_px` excludes A-lines whose ground-truth wall is thicker.
Evaluation evaluate(const SegNet<float>& net, std::span<const Record> data, std::span<const std::size_t> indices,
                    bool postprocess, int max_wall_px = 0);

// ------------------------------------------------------------ lambda search

enum class LossTerm { Wce = 0, Dice = 1, Bp = 2, Ap = 3, Bc = 4 };
const char* term_name(LossTerm t);
double& lambda_of(LossConfig& c, LossTerm t);
double lambda_of(const LossConfig& c, LossTerm t);

struct GridSpec {
  std::vector<LossTerm> order{LossTerm::Dice, LossTerm::Bp, LossTerm::Ap, LossTerm::Bc};
  std::map<LossTerm, std::vector<double>> candidates;  // a missing coordinate is held fixed

  /// 7 log-spaced points over [1e-3, 1e3] for every coordinate in `order`,
  /// with 0 prepended when `include_zero`.
  static GridSpec log_spaced(bool include_zero = true);
};

struct GridTrial {
  LossTerm term = LossTerm::Wce;
  double value = 0.0;
  LossConfig loss;
  double val_dice = 0.0;
  double val_mhd = 0.0;
};

struct GridResult {
  LossConfig best;
  std::vector<GridTrial> trials;
};

/// Greedy coordinate search: each coordinate in turn takes the candidate with
/// the best validation Dice (MHD as tie-breaker) while the others stay fixed.
/// One training run per candidate.
GridResult grid_search_lambda(const TrainConfig& base, const GridSpec& grid, std::span<const Record> data,
                              const Critic<float>* critic);

// ------------------------------------------------------------ ablation

struct AblationRow {
  std::vector<LossTerm> terms;
  std::vector<double> accuracy, dice, mhd;  // per seed, test split after clean()

  [[nodiscard]] std::string label() const;
  [[nodiscard]] double mean_accuracy() const;
  [[nodiscard]] double mean_dice() const;
  [[nodiscard]] double mean_mhd() const;
};

/// Nested subsets: the first term alone, then one more term per row.
std::vector<std::vector<LossTerm>> nested_subsets(std::span<const LossTerm> order);

/// Trains and tests each subset once per seed. Terms outside a subset get
/// weight 0; the others keep their weight from `cfg.loss`.
std::vector<AblationRow> ablation(const TrainConfig& cfg, std::span<const LossTerm> order,
                                  std::span<const std::uint64_t> seeds, std::span<const Record> data,
                                  const Critic<float>* critic);

nlohmann::json ablation_to_json(const std::vector<AblationRow>& rows);

}  // namespace psoctseg
