// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset, e.g. `acceptance 1 2 3`.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "fd_helpers.hpp"
#include "oracles.hpp"
#include "psoctseg/critic.hpp"
#include "psoctseg/losses.hpp"
#include "psoctseg/metrics.hpp"
#include "psoctseg/phantom.hpp"
#include "psoctseg/postprocess.hpp"
#include "psoctseg/segnet.hpp"
#include "psoctseg/trainer.hpp"

using namespace psoctseg;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void progress(const std::string& s) { std::cerr << "  .. " << s << std::endl; }

// ------------------------------------------------------------ shared data

constexpr int kBenchFrames = 200;
constexpr int kFramesPerPatient = 10;

std::vector<Record> phantom_records(int count, std::uint64_t first_seed, const std::string& prefix) {
  std::vector<Record> out;
  for (int i = 0; i < count; ++i) {
    PhantomConfig cfg;
    cfg.seed = first_seed + static_cast<std::uint64_t>(i);
    const auto ph = generate(cfg);
    out.push_back({ph.image, ph.labels, prefix + std::to_string(i / kFramesPerPatient)});
  }
  return out;
}

const std::vector<Record>& benchmark() {
  static const auto data = phantom_records(kBenchFrames, 1000, "bench");
  return data;
}

CriticConfig desk_critic() {
  CriticConfig c;
  c.features = {8, 16, 32};
  c.dense = {256, 64, 32};
  return c;
}

CriticTrainConfig critic_schedule(double severity_low) {
  CriticTrainConfig tc;
  tc.steps = 300;
  tc.batch_pairs = 8;
  tc.severity_low = severity_low;
  tc.seed = 3;
  return tc;
}

const Critic<float>& ap_critic() {
  static const Critic<float> critic = [] {
    progress("training the label critic (severity 0 vs 0.5)");
    const auto data = phantom_records(100, 50000, "critic");
    return train_critic(data, desk_critic(), critic_schedule(0.5)).critic;
  }();
  return critic;
}

struct HeldOut {
  std::vector<PolarImage> images;
  std::vector<LabelMap> clean, degraded;
};

HeldOut held_out_pairs(int n, double severity) {
  HeldOut h;
  for (int i = 0; i < n; ++i) {
    PhantomConfig cfg;
    cfg.seed = 90000 + static_cast<std::uint64_t>(i);
    const auto ph = generate(cfg);
    h.images.push_back(ph.image);
    h.clean.push_back(ph.labels);
    h.degraded.push_back(perturb_labels(ph.labels, severity, 7 + static_cast<std::uint64_t>(i)));
  }
  return h;
}

TrainConfig bench_config(std::uint64_t seed) {
  TrainConfig c;
  c.seed = seed;
  c.epochs = 30;
  c.batch_size = 20;
  c.lr = 1e-3;
  return c;
}

struct RunScore {
  double dice = 0, accuracy = 0, mhd = 0, ade_lumen = 0, ade_lumen_rev = 0, ade2d_lumen = 0, raw_dice = 0;
  double seconds = 0;
  int best_epoch = 0, epochs_run = 0;
};

// Full five-term runs are shared by criteria 6 and 7.
std::map<std::pair<std::string, std::uint64_t>, RunScore> g_runs;

RunScore bench_run(const std::string& name, const LossConfig& loss, std::uint64_t seed) {
  const auto key = std::make_pair(name, seed);
  if (auto it = g_runs.find(key); it != g_runs.end()) return it->second;
  TrainConfig cfg = bench_config(seed);
  cfg.loss = loss;
  const auto& data = benchmark();
  const auto t0 = Clock::now();
  const auto res = train(cfg, data, loss.lambda_ap > 0 ? &ap_critic() : nullptr);
  RunScore s;
  s.seconds = seconds_since(t0);
  s.best_epoch = res.best_epoch;
  s.epochs_run = static_cast<int>(res.epochs.size());
  const auto test = res.split.indices(data, Partition::Test);
  const auto raw = evaluate(res.net, data, test, false);
  const auto post = evaluate(res.net, data, test, true);
  s.raw_dice = raw.report.dice;
  s.ade_lumen = raw.report.interfaces[0].ade_px;
  s.ade_lumen_rev = raw.report.interfaces[0].ade_reverse_px;
  s.ade2d_lumen = raw.report.interfaces[0].ade2d_px;
  s.dice = post.report.dice;
  s.accuracy = post.report.accuracy;
  s.mhd = post.report.mhd_px;
  progress(fmt("%s seed %llu: %.0f s, %d epochs (best %d), raw dice %.4f, clean dice %.4f, clean mhd %.4f px",
               name.c_str(), static_cast<unsigned long long>(seed), s.seconds, s.epochs_run, s.best_epoch,
               s.raw_dice, s.dice, s.mhd));
  g_runs[key] = s;
  return s;
}

LossConfig subset(std::initializer_list<LossTerm> terms) {
  LossConfig c;
  for (LossTerm t : {LossTerm::Wce, LossTerm::Dice, LossTerm::Bp, LossTerm::Ap, LossTerm::Bc})
    if (std::find(terms.begin(), terms.end(), t) == terms.end()) lambda_of(c, t) = 0.0;
  return c;
}

const LossConfig kFull = subset({LossTerm::Wce, LossTerm::Dice, LossTerm::Bp, LossTerm::Ap, LossTerm::Bc});

// ------------------------------------------------------------ criterion 1

// Piecewise structure of bc_loss at yhat: per-pixel winners, the signs of
// the S differences and of the per-A-line count differences.
std::vector<int> bc_pattern(const std::vector<LabelMap>& y, const std::vector<ProbMap>& p, double M) {
  std::vector<int> out;
  for (std::size_t n = 0; n < p.size(); ++n) {
    const auto S = soft_argmax(p[n], M);
    for (std::size_t px = 0; px < p[n].pixels(); ++px) {
      const double* q = &p[n].probs[px * kNumClasses];
      out.push_back(static_cast<int>(std::max_element(q, q + kNumClasses) - q));
    }
    for (int r = 0; r + 1 < S.R; ++r)
      for (int a = 0; a < S.A; ++a)
        for (int c = 0; c < kNumClasses; ++c) out.push_back(S.at(r + 1, a, c) > S.at(r, a, c));
    const auto bp = boundary_cardinality(S);
    const auto by = boundary_cardinality(soft_argmax(ProbMap::from_labels(y[n]), M));
    for (std::size_t a = 0; a < bp.size(); ++a) out.push_back(bp[a] > by[a]);
  }
  return out;
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  const int R = 4, A = 8, N = 2, points = 100;
  const double h = 1e-5, eps = 1e-7, M = 5.0;
  std::vector<LabelMap> y;
  std::vector<ProbMap> p;
  std::vector<PolarImage> images;
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int n = 0; n < N; ++n) {
    y.push_back(oracle::noise_labels(rng, R, A));
    p.push_back(oracle::random_probs(rng, R, A));
    PolarImage im(R, A);
    for (auto& v : im.data) v = u(rng);
    images.push_back(im);
  }
  std::vector<BoundaryMask> beta;
  for (const auto& m : y) beta.push_back(boundary_mask(m, 2));
  CriticConfig cc;
  cc.R = R;
  cc.A = A;
  cc.features = {8, 8, 8};
  cc.dense = {16, 16, 16};
  const Critic<double> critic(cc, 17);
  const std::span<const PolarImage> ims(images);

  using Fn = std::function<double(GradBatch*)>;
  const std::vector<std::pair<std::string, Fn>> losses = {
      {"wce", [&](GradBatch* g) { return wce(y, p, eps, g); }},
      {"dice", [&](GradBatch* g) { return dice_loss(y, p, eps, g); }},
      {"bp", [&](GradBatch* g) { return bp_loss(y, p, beta, eps, g); }},
      {"bc", [&](GradBatch* g) { return bc_loss(y, p, M, SigmaKind::Norm1, g); }},
      {"ap", [&](GradBatch* g) { return ap_loss(critic, ims, p, g); }},
  };
  std::uniform_int_distribution<std::size_t> pick_n(0, N - 1), pick_i(0, p[0].probs.size() - 1);
  bool ok = true;
  std::ostringstream detail;
  for (const auto& [name, fn] : losses) {
    GradBatch g;
    fn(&g);
    double worst = 0;
    int used = 0, skipped = 0;
    while (used < points) {
      const std::size_t n = pick_n(rng), i = pick_i(rng);
      bool stable = true;
      if (name == "bc" || name == "ap") {
        const double x0 = p[n].probs[i];
        p[n].probs[i] = x0 + h;
        const auto up = name == "bc" ? bc_pattern(y, p, M) : fdcheck::activation_pattern(critic, critique_input<double>(ims, p));
        p[n].probs[i] = x0 - h;
        const auto dn = name == "bc" ? bc_pattern(y, p, M) : fdcheck::activation_pattern(critic, critique_input<double>(ims, p));
        p[n].probs[i] = x0;
        stable = up == dn;
      }
      if (!stable) {
        ++skipped;
        continue;
      }
      const double fd = oracle::central_diff([&] { return fn(nullptr); }, p[n].probs[i], h);
      worst = std::max(worst, oracle::rel_err(g[n].probs[i], fd, 1e-6));
      ++used;
    }
    ok &= worst < 1e-4;
    detail << name << " " << fmt("%.1e", worst) << (skipped ? fmt(" (%d tie points skipped)", skipped) : "") << "; ";
  }
  const double secs = seconds_since(t0);
  ok &= secs < 60;
  detail << fmt("max rel err < 1e-4 required, %.1f s", secs);
  return {ok, detail.str()};
}

// ------------------------------------------------------------ criteria 2-5

Outcome criterion2() {
  std::mt19937_64 rng(202);
  double worst = 0, worst_self = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto y = oracle::random_labels(rng, 32, 32, 8);
    const auto bc = boundary_cardinality(soft_argmax(ProbMap::from_labels(y), 1e9));
    for (int a = 0; a < y.A; ++a) worst = std::max(worst, std::abs(bc[a] - oracle::transitions(y, a)));
    const std::vector<LabelMap> ys{y};
    const std::vector<ProbMap> ps{ProbMap::from_labels(y)};
    worst_self = std::max(worst_self, bc_loss(ys, ps, 1e9, SigmaKind::Norm1));
  }
  return {worst <= 1e-3 && worst_self < 1e-3,
          fmt("1000 maps: max |BC - transitions| = %.2e (<= 1e-3), max bc_loss(y, y) = %.2e (< 1e-3)", worst,
              worst_self)};
}

Outcome criterion3() {
  std::mt19937_64 rng(303);
  long mismatches = 0, masked = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto y = t % 2 ? oracle::random_labels(rng, 64, 32, 8) : oracle::noise_labels(rng, 24, 16);
    for (int b : {2, 10}) {
      const auto m = boundary_mask(y, b);
      for (int r = 0; r < y.R; ++r)
        for (int a = 0; a < y.A; ++a) {
          mismatches += m.at(r, a) != oracle::band(y, b, r, a);
          masked += m.at(r, a);
        }
    }
  }
  return {mismatches == 0, fmt("1000 maps x b in {2, 10}: %ld mismatching pixels (%ld masked)", mismatches, masked)};
}

Outcome criterion4() {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> count(1, 200), rr(0, 63), aa(0, 127);
  auto random_set = [&] {
    std::set<BoundaryPoint> pts;
    const int k = count(rng);
    while (static_cast<int>(pts.size()) < k) pts.insert({rr(rng), aa(rng)});
    BoundarySet b;
    b.points.assign(pts.begin(), pts.end());
    return b;
  };
  double worst = 0;
  for (int t = 0; t < 500; ++t) {
    const auto x = random_set(), z = random_set();
    worst = std::max(worst, std::abs(ade_radial(x, z) - oracle::ade_radial(x.points, z.points)));
    worst = std::max(worst, std::abs(ade_2d(x, z) - oracle::ade_2d(x.points, z.points)));
    worst = std::max(worst, std::abs(mhd(x, z) - oracle::mhd(x.points, z.points)));
  }
  long pixel_mismatch = 0;
  for (int t = 0; t < 500; ++t) {
    const auto y = oracle::random_labels(rng, 32, 32);
    auto yhat = t % 3 ? oracle::random_labels(rng, 32, 32) : y;
    if (t % 3 == 0) {
      std::uniform_int_distribution<std::size_t> pix(0, y.size() - 1);
      for (int k = 0; k < 30; ++k) yhat.codes[pix(rng)] = static_cast<std::uint8_t>(1 + k % 6);
    }
    pixel_mismatch += accuracy(y, yhat) != oracle::accuracy(y, yhat);
    pixel_mismatch += dice_coef(y, yhat) != oracle::dice_coef(y, yhat);
    for (int c = 1; c <= kNumClasses; ++c) {
      const auto k = oracle::counts(y, yhat, c);
      const auto rates = sensitivity_specificity(y, yhat, static_cast<Label>(c));
      if (k.tp + k.fn > 0) pixel_mismatch += *rates.sensitivity != k.tp / (k.tp + k.fn);
      else pixel_mismatch += rates.sensitivity.has_value();
      if (k.tn + k.fp > 0) pixel_mismatch += *rates.specificity != k.tn / (k.tn + k.fp);
      else pixel_mismatch += rates.specificity.has_value();
    }
  }
  return {worst <= 1e-9 && pixel_mismatch == 0,
          fmt("500 boundary pairs: max |ade/mhd - brute force| = %.1e (<= 1e-9); 500 map pairs: %ld pixel-metric "
              "mismatches",
              worst, pixel_mismatch)};
}

Outcome criterion5() {
  std::mt19937_64 rng(505);
  int valid = 0, idempotent = 0;
  const int N = 500;
  for (int t = 0; t < N; ++t) {
    ProbMap p;
    if (t % 2 == 0) {
      p = oracle::random_probs(rng, 64, 128, 0.5 + 0.01 * (t % 200));
    } else {
      // noisy version of a phantom label map
      PhantomConfig cfg;
      cfg.seed = 20000 + static_cast<std::uint64_t>(t);
      const auto y = generate(cfg).labels;
      p = ProbMap(64, 128);
      std::normal_distribution<double> g(0.0, 0.5 + 0.002 * t);
      for (int r = 0; r < 64; ++r)
        for (int a = 0; a < 128; ++a) {
          double z[kNumClasses], s = 0;
          for (int c = 0; c < kNumClasses; ++c) s += z[c] = std::exp((c == class_index(y.at(r, a)) ? 1.5 : 0.0) + g(rng));
          for (int c = 0; c < kNumClasses; ++c) p.at(r, a, c) = z[c] / s;
        }
    }
    const auto z = clean(p);
    valid += verify_topology(z).valid();
    idempotent += clean_labels(z) == z;
  }
  int recovered = 0;
  const int trials = 500;
  for (int s = 0; s < trials; ++s) {
    PhantomConfig cfg;
    cfg.seed = 30000 + static_cast<std::uint64_t>(s);
    const auto ph = generate(cfg);
    auto y = ph.labels;
    std::uniform_int_distribution<std::size_t> pix(0, y.size() - 1);
    std::uniform_int_distribution<int> shift(1, 5);
    for (int k = 0; k < 3; ++k) {
      auto& c = y.codes[pix(rng)];
      c = static_cast<std::uint8_t>((c - 1 + shift(rng)) % 6 + 1);
    }
    recovered += clean_labels(y) == ph.labels;
  }
  const double rate = recovered / static_cast<double>(trials);
  return {valid == N && idempotent == N && rate >= 0.99,
          fmt("topology valid %d/%d, idempotent %d/%d, 3-pixel corruption recovered %d/%d (%.1f%%, >= 99%%)", valid,
              N, idempotent, N, recovered, trials, 100 * rate)};
}

// ------------------------------------------------------------ criteria 6-7

Outcome criterion6() {
  const auto s = bench_run("full", kFull, 0);
  const bool ok = s.raw_dice >= 0.85 && s.ade_lumen <= 1.5 && s.seconds <= 1800 && s.epochs_run <= 30;
  return {ok, fmt("five-term loss, 200 phantoms 64x128, %d epochs: test mean Dice %.4f (>= 0.85), outer-lumen ADE "
                  "%.3f px (<= 1.5; reverse %.3f, 2-D %.3f), %.0f s (<= 1800)",
                  s.epochs_run, s.raw_dice, s.ade_lumen, s.ade_lumen_rev, s.ade2d_lumen, s.seconds)};
}

Outcome criterion7() {
  const std::vector<std::pair<std::string, LossConfig>> configs = {
      {"full", kFull},
      {"wce", subset({LossTerm::Wce})},
      {"wce+dice+bp", subset({LossTerm::Wce, LossTerm::Dice, LossTerm::Bp})},
      {"wce+dice", subset({LossTerm::Wce, LossTerm::Dice})},
  };
  std::map<std::string, double> mean_mhd;
  for (const auto& [name, loss] : configs) {
    double sum = 0;
    for (std::uint64_t seed : {0, 1, 2}) sum += bench_run(name, loss, seed).mhd;
    mean_mhd[name] = sum / 3;
  }
  const bool a = mean_mhd["full"] <= mean_mhd["wce"];
  const bool b = mean_mhd["wce+dice+bp"] <= mean_mhd["wce+dice"];
  return {a && b, fmt("mean test MHD over 3 seeds: full %.4f vs wce %.4f (%s); wce+dice+bp %.4f vs wce+dice %.4f (%s)",
                      mean_mhd["full"], mean_mhd["wce"], a ? "ok" : "reversed", mean_mhd["wce+dice+bp"],
                      mean_mhd["wce+dice"], b ? "ok" : "reversed")};
}

// ------------------------------------------------------------ criterion 8

Outcome criterion8() {
  const auto pairs = held_out_pairs(250, 0.5);
  const auto& critic = ap_critic();
  const auto hi = score_labels(critic, pairs.images, pairs.clean);
  const auto lo = score_labels(critic, pairs.images, pairs.degraded);
  const double auc = roc_auc(hi, lo);

  progress("training the null critic (severity 0 vs 0)");
  const auto null_critic = train_critic(phantom_records(100, 50000, "critic"), desk_critic(), critic_schedule(0.0));
  const auto null_pairs = held_out_pairs(500, 0.0);
  const auto nh = score_labels(null_critic.critic, null_pairs.images, null_pairs.clean);
  const auto nl = score_labels(null_critic.critic, null_pairs.images, null_pairs.degraded);
  const double null_auc = roc_auc(nh, nl);

  double gp_err = 0;
  for (double norm : {1.0, 3.0}) {
    std::mt19937_64 rng(808);
    std::normal_distribution<double> g;
    nn::Tensor<double> real(4, kCritiqueChannels, 4, 8), fake(4, kCritiqueChannels, 4, 8);
    for (auto& v : real.data) v = g(rng);
    for (auto& v : fake.data) v = g(rng);
    std::vector<double> w(real.sample_size());
    double s = 0;
    for (auto& v : w) {
      v = g(rng);
      s += v * v;
    }
    for (auto& v : w) v *= norm / std::sqrt(s);
    const std::vector<double> alpha{0.0, 0.25, 0.75, 1.0};
    const auto pen = gradient_penalty(real, fake, std::span<const double>(alpha), [&](const nn::Tensor<double>& x) {
      nn::Tensor<double> out(x.n, x.c, x.h, x.w);
      for (int n = 0; n < x.n; ++n) std::copy(w.begin(), w.end(), out.sample(n).begin());
      return out;
    });
    gp_err = std::max(gp_err, std::abs(pen.value - (norm - 1) * (norm - 1)));
  }
  const bool ok = auc >= 0.9 && null_auc >= 0.4 && null_auc <= 0.6 && gp_err <= 1e-6;
  return {ok, fmt("held-out AUC %.4f at severity 0.5 (>= 0.9), null AUC %.4f over 500 pairs (in [0.4, 0.6]), "
                  "linear-critic penalty max error %.1e (<= 1e-6)",
                  auc, null_auc, gp_err)};
}

// ------------------------------------------------------------ criterion 9

Outcome criterion9() {
  const auto& data = benchmark();
  TrainConfig cfg = bench_config(42);
  cfg.epochs = 3;
  const auto a = train(cfg, data, &ap_critic());
  const auto b = train(cfg, data, &ap_critic());
  const bool same = a.epochs.back().val_dice == b.epochs.back().val_dice && a.best_val_dice == b.best_val_dice;

  long overlaps = 0;
  std::vector<std::string> ids57;
  for (int i = 0; i < 57; ++i) ids57.push_back("patient" + std::to_string(i));
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto s = split_by_patient(data, {}, seed);
    std::map<std::string, std::set<int>> seen;
    for (Partition p : {Partition::Train, Partition::Val, Partition::Test})
      for (std::size_t i : s.indices(data, p)) seen[data[i].patient_id].insert(static_cast<int>(p));
    for (const auto& [id, parts] : seen) overlaps += parts.size() > 1;
    overlaps += seen.size() != kBenchFrames / kFramesPerPatient;
  }
  const auto s57 = split_by_patient(ids57, {}, 0);
  const bool split57_ok =
      s57.count(Partition::Train) == 45 && s57.count(Partition::Val) == 6 && s57.count(Partition::Test) == 6;
  return {same && overlaps == 0 && split57_ok,
          fmt("repeat run val Dice %.17g vs %.17g (%s); patient overlaps over 1000 seeds: %ld; 57 patients -> "
              "%zu/%zu/%zu",
              a.epochs.back().val_dice, b.epochs.back().val_dice, same ? "identical" : "DIFFERENT", overlaps,
              s57.count(Partition::Train), s57.count(Partition::Val), s57.count(Partition::Test))};
}

// ------------------------------------------------------------ criterion 10

Outcome criterion10() {
  const auto path = std::filesystem::temp_directory_path() / "psoctseg_equivariance.ckpt";
  {
    SegNet<float> net(SegNetConfig{}, 1234);
    const auto& data = benchmark();
    std::vector<PolarImage> imgs;
    for (int i = 0; i < 20; ++i) imgs.push_back(data[i].image);
    net.fit_normalization(imgs);
    save_segnet(path, net);
  }
  const auto net = load_segnet(path);
  std::filesystem::remove(path);
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  double worst = 0;
  for (int t = 0; t < 2; ++t) {
    PolarImage im = t == 0 ? benchmark()[5].image : PolarImage(64, 128);
    if (t == 1)
      for (auto& v : im.data) v = u(rng);
    const std::vector<PolarImage> base{im};
    const auto ref = predict(net, base)[0];
    for (int k : {4, 8, 32, 64, 124}) {
      PolarImage s(64, 128);
      for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 64; ++r)
          for (int a = 0; a < 128; ++a) s.at(c, r, (a + k) % 128) = im.at(c, r, a);
      const std::vector<PolarImage> shifted{s};
      const auto out = predict(net, shifted)[0];
      for (int r = 0; r < 64; ++r)
        for (int a = 0; a < 128; ++a)
          for (int c = 0; c < kNumClasses; ++c)
            worst = std::max(worst, std::abs(out.at(r, (a + k) % 128, c) - ref.at(r, a, c)));
    }
  }
  return {worst < 1e-4, fmt("shifts {4, 8, 32, 64, 124} A-lines: max abs deviation %.2e (< 1e-4)", worst)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", criterion1},  {"boundary-cardinality exactness", criterion2},
      {"boundary-mask oracle", criterion3},  {"metric oracles", criterion4},
      {"topology", criterion5},              {"phantom end-to-end", criterion6},
      {"ablation direction", criterion7},    {"critic separation", criterion8},
      {"determinism and leakage", criterion9}, {"angular equivariance", criterion10},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  int failed = 0;
  std::vector<std::string> lines;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const std::string line = fmt("%s [%d] %s: ", o.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str()) + o.detail +
                             fmt(" (%.0f s)", seconds_since(t0));
    std::cout << line << std::endl;
    lines.push_back(line);
    failed += !o.pass;
  }
  std::cout << "\nsummary:\n";
  for (const auto& l : lines) std::cout << "  " << l.substr(0, l.find(':')) << '\n';
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << '\n';
  return failed ? 1 : 0;
}
