#include "psoctseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "psoctseg/errors.hpp"
#include "psoctseg/nn/optim.hpp"
#include "psoctseg/postprocess.hpp"

namespace psoctseg {

using nlohmann::json;

// ------------------------------------------------------------ config

json to_json(const LossConfig& c) {
  return {{"lambda_wce", c.lambda_wce}, {"lambda_dice", c.lambda_dice}, {"lambda_bp", c.lambda_bp},
          {"lambda_ap", c.lambda_ap},   {"lambda_bc", c.lambda_bc},     {"epsilon", c.epsilon},
          {"b", c.b},                   {"M", c.M},                     {"sigma", sigma_name(c.sigma)},
          {"gp_weight", c.gp_weight}};
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (std::none_of(keys.begin(), keys.end(), [&](const char* s) { return k == s; }))
      throw ConfigError(where + ": unknown key '" + k + "'");
}

template <typename V>
void read(const json& j, const char* key, V& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

}  // namespace

LossConfig loss_config_from_json(const json& j, LossConfig c) {
  reject_unknown(j, {"lambda_wce", "lambda_dice", "lambda_bp", "lambda_ap", "lambda_bc", "epsilon", "b", "M", "m",
                     "sigma", "gp_weight"},
                 "loss");
  read(j, "lambda_wce", c.lambda_wce, "loss");
  read(j, "lambda_dice", c.lambda_dice, "loss");
  read(j, "lambda_bp", c.lambda_bp, "loss");
  read(j, "lambda_ap", c.lambda_ap, "loss");
  read(j, "lambda_bc", c.lambda_bc, "loss");
  read(j, "epsilon", c.epsilon, "loss");
  read(j, "b", c.b, "loss");
  read(j, "M", c.M, "loss");
  read(j, "m", c.M, "loss");
  read(j, "gp_weight", c.gp_weight, "loss");
  if (j.contains("sigma")) c.sigma = parse_sigma(j.at("sigma").get<std::string>());
  return c;
}

void TrainConfig::validate() const {
  loss.validate();
  if (!(lr > 0.0)) throw ConfigError("optimizer.lr must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("optimizer.rho must lie in [0, 1)");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (split.train < 0 || split.val < 0 || split.test < 0 ||
      std::abs(split.train + split.val + split.test - 1.0) > 1e-9)
    throw ConfigError("split fractions must be non-negative and sum to 1");
}

json TrainConfig::to_json() const {
  return {
      {"loss", psoctseg::to_json(loss)},
      {"optimizer", {{"kind", "rmsprop"}, {"lr", lr}, {"rho", rho}, {"eps", rms_eps}}},
      {"batch_size", batch_size},
      {"epochs", epochs},
      {"patience", patience},
      {"seed", seed},
      {"split", {{"train", split.train}, {"val", split.val}, {"test", split.test}}},
      {"paths", {{"data", paths.data}, {"critic_ckpt", paths.critic_ckpt}, {"out", paths.out}}},
      {"augment",
       {{"enabled", augment},
        {"probability", augment_ranges.probability},
        {"gain_min", augment_ranges.gain_min},
        {"gain_max", augment_ranges.gain_max},
        {"offset_fraction", augment_ranges.offset_fraction},
        {"zoom_min", augment_ranges.zoom_min},
        {"zoom_max", augment_ranges.zoom_max}}},
      {"arch", arch.to_json()},
  };
}

TrainConfig TrainConfig::from_json(const json& j) {
  reject_unknown(j, {"loss", "optimizer", "batch_size", "epochs", "patience", "seed", "split", "paths", "augment",
                     "arch"},
                 "config");
  TrainConfig c;
  if (j.contains("loss")) c.loss = loss_config_from_json(j.at("loss"));
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    reject_unknown(o, {"kind", "lr", "rho", "eps"}, "optimizer");
    if (o.value("kind", std::string("rmsprop")) != "rmsprop") throw ConfigError("optimizer.kind: only rmsprop");
    read(o, "lr", c.lr, "optimizer");
    read(o, "rho", c.rho, "optimizer");
    read(o, "eps", c.rms_eps, "optimizer");
  }
  read(j, "batch_size", c.batch_size, "config");
  read(j, "epochs", c.epochs, "config");
  read(j, "patience", c.patience, "config");
  read(j, "seed", c.seed, "config");
  if (j.contains("split")) {
    const auto& s = j.at("split");
    reject_unknown(s, {"train", "val", "test"}, "split");
    read(s, "train", c.split.train, "split");
    read(s, "val", c.split.val, "split");
    read(s, "test", c.split.test, "split");
  }
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    reject_unknown(p, {"data", "critic_ckpt", "out"}, "paths");
    read(p, "data", c.paths.data, "paths");
    read(p, "critic_ckpt", c.paths.critic_ckpt, "paths");
    read(p, "out", c.paths.out, "paths");
  }
  if (j.contains("augment")) {
    const auto& a = j.at("augment");
    reject_unknown(a, {"enabled", "probability", "gain_min", "gain_max", "offset_fraction", "zoom_min", "zoom_max"},
                   "augment");
    read(a, "enabled", c.augment, "augment");
    read(a, "probability", c.augment_ranges.probability, "augment");
    read(a, "gain_min", c.augment_ranges.gain_min, "augment");
    read(a, "gain_max", c.augment_ranges.gain_max, "augment");
    read(a, "offset_fraction", c.augment_ranges.offset_fraction, "augment");
    read(a, "zoom_min", c.augment_ranges.zoom_min, "augment");
    read(a, "zoom_max", c.augment_ranges.zoom_max, "augment");
  }
  if (j.contains("arch")) c.arch = SegNetConfig::from_json(j.at("arch"));
  c.validate();
  return c;
}

json parse_key_values(const std::string& text) {
  json out = json::object();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    json* node = &out;
    std::size_t start = 0;
    for (auto dot = key.find('.'); dot != std::string::npos; dot = key.find('.', start)) {
      node = &(*node)[key.substr(start, dot - start)];
      start = dot + 1;
    }
    (*node)[key.substr(start)] = value;
  }
  return out;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError(path.string() + ": invalid JSON");
    return TrainConfig::from_json(j);
  }
  return TrainConfig::from_json(parse_key_values(text));
}

// ------------------------------------------------------------ splitting

const char* partition_name(Partition p) {
  switch (p) {
    case Partition::Train: return "train";
    case Partition::Val: return "val";
    case Partition::Test: return "test";
  }
  return "?";
}

std::size_t SplitAssignment::count(Partition p) const {
  return static_cast<std::size_t>(
      std::count_if(patients.begin(), patients.end(), [&](const auto& kv) { return kv.second == p; }));
}

std::vector<std::size_t> SplitAssignment::indices(std::span<const Record> records, Partition p) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto it = patients.find(records[i].patient_id);
    if (it == patients.end()) throw ConfigError("split has no entry for patient " + records[i].patient_id);
    if (it->second == p) out.push_back(i);
  }
  return out;
}

SplitAssignment split_by_patient(std::span<const std::string> patient_ids, const SplitFractions& fractions,
                                 std::uint64_t seed) {
  const std::set<std::string> distinct(patient_ids.begin(), patient_ids.end());
  const int P = static_cast<int>(distinct.size());
  if (P < 3) throw TooFewPatients("split_by_patient: " + std::to_string(P) + " patients, need at least 3");
  std::vector<std::string> ids(distinct.begin(), distinct.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);

  int n_val = std::max(1, static_cast<int>(std::lround(fractions.val * P)));
  int n_test = std::max(1, static_cast<int>(std::lround(fractions.test * P)));
  while (P - n_val - n_test < 1) {
    if (n_val >= n_test && n_val > 1) --n_val;
    else --n_test;
  }
  SplitAssignment s;
  for (int i = 0; i < P; ++i)
    s.patients[ids[i]] = i < n_val ? Partition::Val : i < n_val + n_test ? Partition::Test : Partition::Train;
  return s;
}

SplitAssignment split_by_patient(std::span<const Record> records, const SplitFractions& fractions, std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.patient_id);
  return split_by_patient(ids, fractions, seed);
}

// ------------------------------------------------------------ training

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Batch {
  std::vector<PolarImage> images;
  std::vector<LabelMap> labels;
};

Batch make_batch(const TrainConfig& cfg, std::span<const Record> data, std::span<const std::size_t> idx, int epoch) {
  Batch b;
  for (std::size_t i : idx) {
    const Record& rec = data[i];
    if (!cfg.augment) {
      b.images.push_back(rec.image);
      b.labels.push_back(*rec.labels);
      continue;
    }
    // Per-record stream so the plan does not depend on batch composition.
    const std::uint64_t s = mix(mix(cfg.seed, static_cast<std::uint64_t>(epoch)), i);
    const auto plan = sample_plan(s, rec.image.A, cfg.augment_ranges);
    auto [im, y] = apply_resampling(plan, rec.image, *rec.labels, s ^ 0x5bd1e995ULL, cfg.augment_ranges);
    b.images.push_back(std::move(im));
    b.labels.push_back(std::move(y));
  }
  return b;
}

struct ValScore {
  double dice = 0.0;
  double mhd = 0.0;
};

ValScore validate_net(const SegNet<float>& net, std::span<const Record> data, std::span<const std::size_t> idx,
                      int batch) {
  if (idx.empty()) return {};
  std::vector<PolarImage> images;
  for (std::size_t i : idx) images.push_back(data[i].image);
  const auto probs = predict(net, images, batch);
  ValScore v;
  std::size_t n_mhd = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto yhat = probs[k].argmax();
    const auto f = evaluate_frame(*data[idx[k]].labels, yhat, data[idx[k]].image.pixel_pitch_um);
    v.dice += f.dice;
    for (const auto& m : f.interfaces)
      if (m) {
        v.mhd += m->mhd_px;
        ++n_mhd;
      }
  }
  v.dice /= static_cast<double>(idx.size());
  v.mhd = n_mhd ? v.mhd / static_cast<double>(n_mhd) : std::numeric_limits<double>::infinity();
  return v;
}

bool better(double dice, double mhd, double best_dice, double best_mhd) {
  return dice > best_dice || (dice == best_dice && mhd < best_mhd);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, std::span<const Record> data, const Critic<float>* critic,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  const LossConfig& lc = cfg.loss;
  if (lc.lambda_ap > 0.0 && critic == nullptr) throw MissingCritic("lambda_ap > 0 needs a critic checkpoint");
  for (const auto& r : data)
    if (!r.labels) throw ConfigError("train: every record needs labels");

  TrainResult res;
  res.split = split_by_patient(data, cfg.split, cfg.seed);
  const auto train_idx = res.split.indices(data, Partition::Train);
  const auto val_idx = res.split.indices(data, Partition::Val);

  SegNet<float> net(cfg.arch, mix(cfg.seed, 1));
  {
    std::vector<PolarImage> imgs;
    for (std::size_t i : train_idx) imgs.push_back(data[i].image);
    net.fit_normalization(imgs);
  }
  nn::RMSprop opt(net.parameters(), {cfg.lr, cfg.rho, cfg.rms_eps});

  res.net = net;
  res.best_val_dice = -std::numeric_limits<double>::infinity();
  res.best_val_mhd = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::mt19937_64 order_rng(mix(cfg.seed, 2));
  int step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    std::shuffle(order.begin(), order.end(), order_rng);
    double epoch_loss = 0.0;
    int epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const std::size_t> ids(order.data() + start, end - start);
      const Batch batch = make_batch(cfg, data, ids, epoch);

      SegNet<float>::Cache cache;
      const auto probs = net.forward(image_tensor<float>(batch.images), &cache);
      const auto maps = to_probmaps(probs);
      const int R = maps[0].R, A = maps[0].A;
      GradBatch total(maps.size(), ProbMap(R, A));
      GradBatch g(maps.size(), ProbMap(R, A));
      auto reset = [&] {
        for (auto& m : g) std::fill(m.probs.begin(), m.probs.end(), 0.0);
      };

      StepLog log;
      log.epoch = epoch;
      log.step = step;
      reset();
      log.terms.wce = wce(batch.labels, maps, lc.epsilon, &g);
      accumulate(total, g, lc.lambda_wce);
      reset();
      log.terms.dice = dice_loss(batch.labels, maps, lc.epsilon, &g);
      accumulate(total, g, lc.lambda_dice);
      if (lc.lambda_bp > 0.0) {
        std::vector<BoundaryMask> beta;
        for (const auto& y : batch.labels) beta.push_back(boundary_mask(y, lc.b));
        reset();
        log.terms.bp = bp_loss(batch.labels, maps, beta, lc.epsilon, &g);
        accumulate(total, g, lc.lambda_bp);
      }
      if (lc.lambda_ap > 0.0) {
        reset();
        log.terms.ap = ap_loss(*critic, std::span<const PolarImage>(batch.images), maps, &g);
        accumulate(total, g, lc.lambda_ap);
      }
      if (lc.lambda_bc > 0.0) {
        reset();
        log.terms.bc = bc_loss(batch.labels, maps, lc.M, lc.sigma, &g);
        accumulate(total, g, lc.lambda_bc);
      }
      log.total = combine(log.terms, lc);

      net.zero_grad();
      net.backward(cache, from_probmaps<float>(total));
      opt.step();

      res.steps.push_back(log);
      epoch_loss += log.total;
      ++epoch_steps;
      ++step;
    }

    const ValScore v = validate_net(net, data, val_idx, cfg.batch_size);
    EpochLog el{epoch, epoch_steps ? epoch_loss / epoch_steps : 0.0, v.dice, v.mhd};
    res.epochs.push_back(el);
    if (on_epoch) on_epoch(el);
    if (better(v.dice, v.mhd, res.best_val_dice, res.best_val_mhd)) {
      res.best_val_dice = v.dice;
      res.best_val_mhd = v.mhd;
      res.best_epoch = epoch;
      res.net = net;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  if (res.best_epoch < 0) {
    const ValScore v = validate_net(net, data, val_idx, cfg.batch_size);
    res.best_val_dice = v.dice;
    res.best_val_mhd = v.mhd;
  }
  return res;
}

void write_step_csv(std::ostream& os, const std::vector<StepLog>& steps) {
  os << "epoch,step,wce,dice,bp,ap,bc,total\n";
  os.precision(10);
  for (const auto& s : steps)
    os << s.epoch << ',' << s.step << ',' << s.terms.wce << ',' << s.terms.dice << ',' << s.terms.bp << ','
       << s.terms.ap << ',' << s.terms.bc << ',' << s.total << '\n';
}

TrainResult train(const TrainConfig& cfg) {
  if (cfg.paths.data.empty()) throw ConfigError("paths.data is required");
  const auto data = load_dataset(cfg.paths.data);
  std::optional<Critic<float>> critic;
  if (!cfg.paths.critic_ckpt.empty()) critic = load_critic(cfg.paths.critic_ckpt);
  if (cfg.loss.lambda_ap > 0.0 && !critic) throw MissingCritic("lambda_ap > 0 needs paths.critic_ckpt");

  const std::filesystem::path out = cfg.paths.out.empty() ? std::filesystem::path(".") : std::filesystem::path(cfg.paths.out);
  std::filesystem::create_directories(out);
  std::ofstream epochs_csv(out / "epochs.csv");
  epochs_csv << "epoch,train_loss,val_dice,val_mhd\n";
  auto res = train(cfg, data, critic ? &*critic : nullptr, [&](const EpochLog& e) {
    epochs_csv << e.epoch << ',' << e.train_loss << ',' << e.val_dice << ',' << e.val_mhd << std::endl;
    std::cerr << "epoch " << e.epoch << "  loss " << e.train_loss << "  val dice " << e.val_dice << "  val mhd "
              << e.val_mhd << '\n';
  });

  json split = json::object();
  for (const auto& [id, p] : res.split.patients) split[id] = partition_name(p);
  save_segnet(out / "model.ckpt", res.net,
              {{"best_epoch", res.best_epoch}, {"best_val_dice", res.best_val_dice}, {"seed", cfg.seed}});
  std::ofstream(out / "config.json") << cfg.to_json().dump(2) << '\n';
  std::ofstream(out / "split.json") << split.dump(2) << '\n';
  std::ofstream log(out / "train_log.csv");
  write_step_csv(log, res.steps);
  return res;
}

Evaluation evaluate(const SegNet<float>& net, std::span<const Record> data, std::span<const std::size_t> indices,
                    bool postprocess, int max_wall_px) {
  Evaluation ev;
  std::vector<PolarImage> images;
  for (std::size_t i : indices) images.push_back(data[i].image);
  const auto probs = predict(net, images);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Record& rec = data[indices[k]];
    if (!rec.labels) throw ConfigError("evaluate: record without labels");
    const LabelMap yhat = postprocess ? clean(probs[k], CleanOptions::for_grid(rec.image.R, rec.image.A))
                                      : probs[k].argmax();
    std::vector<char> excl;
    if (max_wall_px > 0) excl = thick_wall_alines(*rec.labels, max_wall_px);
    ev.frames.push_back(evaluate_frame(*rec.labels, yhat, rec.image.pixel_pitch_um,
                                       rec.patient_id + "/" + std::to_string(indices[k]),
                                       max_wall_px > 0 ? &excl : nullptr));
  }
  ev.report = summarize(ev.frames);
  ev.report.excluded_alines = max_wall_px > 0;
  return ev;
}

// ------------------------------------------------------------ lambda search

const char* term_name(LossTerm t) {
  switch (t) {
    case LossTerm::Wce: return "wce";
    case LossTerm::Dice: return "dice";
    case LossTerm::Bp: return "bp";
    case LossTerm::Ap: return "ap";
    case LossTerm::Bc: return "bc";
  }
  return "?";
}

double& lambda_of(LossConfig& c, LossTerm t) {
  switch (t) {
    case LossTerm::Wce: return c.lambda_wce;
    case LossTerm::Dice: return c.lambda_dice;
    case LossTerm::Bp: return c.lambda_bp;
    case LossTerm::Ap: return c.lambda_ap;
    case LossTerm::Bc: return c.lambda_bc;
  }
  throw std::invalid_argument("lambda_of: bad term");
}

double lambda_of(const LossConfig& c, LossTerm t) { return lambda_of(const_cast<LossConfig&>(c), t); }

GridSpec GridSpec::log_spaced(bool include_zero) {
  GridSpec g;
  std::vector<double> pts;
  if (include_zero) pts.push_back(0.0);
  for (int k = 0; k < 7; ++k) pts.push_back(std::pow(10.0, -3.0 + k));
  for (LossTerm t : g.order) g.candidates[t] = pts;
  return g;
}

GridResult grid_search_lambda(const TrainConfig& base, const GridSpec& grid, std::span<const Record> data,
                              const Critic<float>* critic) {
  GridResult res;
  res.best = base.loss;
  for (LossTerm t : grid.order) {
    const auto it = grid.candidates.find(t);
    if (it == grid.candidates.end() || it->second.empty()) continue;
    double best_dice = -std::numeric_limits<double>::infinity();
    double best_mhd = std::numeric_limits<double>::infinity();
    double best_value = lambda_of(res.best, t);
    for (double v : it->second) {
      TrainConfig cfg = base;
      cfg.loss = res.best;
      lambda_of(cfg.loss, t) = v;
      const auto run = train(cfg, data, critic);
      res.trials.push_back({t, v, cfg.loss, run.best_val_dice, run.best_val_mhd});
      std::cerr << "grid " << term_name(t) << " = " << v << "  val dice " << run.best_val_dice << "  val mhd "
                << run.best_val_mhd << '\n';
      if (better(run.best_val_dice, run.best_val_mhd, best_dice, best_mhd)) {
        best_dice = run.best_val_dice;
        best_mhd = run.best_val_mhd;
        best_value = v;
      }
    }
    lambda_of(res.best, t) = best_value;
  }
  return res;
}

// ------------------------------------------------------------ ablation

namespace {

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::string AblationRow::label() const {
  std::string s;
  for (LossTerm t : terms) {
    if (!s.empty()) s += '+';
    s += term_name(t);
  }
  return s;
}

double AblationRow::mean_accuracy() const { return mean(accuracy); }
double AblationRow::mean_dice() const { return mean(dice); }
double AblationRow::mean_mhd() const { return mean(mhd); }

std::vector<std::vector<LossTerm>> nested_subsets(std::span<const LossTerm> order) {
  std::vector<std::vector<LossTerm>> out;
  for (std::size_t k = 1; k <= order.size(); ++k) out.emplace_back(order.begin(), order.begin() + k);
  return out;
}

std::vector<AblationRow> ablation(const TrainConfig& cfg, std::span<const LossTerm> order,
                                  std::span<const std::uint64_t> seeds, std::span<const Record> data,
                                  const Critic<float>* critic) {
  std::vector<AblationRow> rows;
  for (const auto& subset : nested_subsets(order)) {
    AblationRow row;
    row.terms = subset;
    TrainConfig run_cfg = cfg;
    for (LossTerm t : {LossTerm::Wce, LossTerm::Dice, LossTerm::Bp, LossTerm::Ap, LossTerm::Bc})
      if (std::find(subset.begin(), subset.end(), t) == subset.end()) lambda_of(run_cfg.loss, t) = 0.0;
    for (std::uint64_t seed : seeds) {
      run_cfg.seed = seed;
      const auto run = train(run_cfg, data, critic);
      const auto test_idx = run.split.indices(data, Partition::Test);
      const auto ev = evaluate(run.net, data, test_idx, true);
      row.accuracy.push_back(ev.report.accuracy);
      row.dice.push_back(ev.report.dice);
      row.mhd.push_back(ev.report.mhd_px);
      std::cerr << "ablation " << row.label() << " seed " << seed << "  dice " << ev.report.dice << "  mhd "
                << ev.report.mhd_px << '\n';
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

json ablation_to_json(const std::vector<AblationRow>& rows) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"terms", r.label()},
                   {"accuracy", r.mean_accuracy()},
                   {"dice", r.mean_dice()},
                   {"mhd_px", r.mean_mhd()},
                   {"per_seed", {{"accuracy", r.accuracy}, {"dice", r.dice}, {"mhd_px", r.mhd}}}});
  return out;
}

}  // namespace psoctseg
