// psoctseg command line: phantom generation, critic and segmentation
// training, lambda search, evaluation and ablation.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "psoctseg/critic.hpp"
#include "psoctseg/errors.hpp"
#include "psoctseg/phantom.hpp"
#include "psoctseg/record_io.hpp"
#include "psoctseg/segnet.hpp"
#include "psoctseg/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace psoctseg;

namespace {

// Flags shared by every command that trains a segmentation network. Each
// one overrides the matching --config entry only when given.
struct TrainFlags {
  std::string config, data, critic, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs, batch;
  std::optional<double> lr;
  bool no_augment = false;
  std::optional<double> l_wce, l_dice, l_bp, l_ap, l_bc, epsilon, M;
  std::optional<int> b;
  std::optional<std::string> sigma;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON or key=value config file");
    app->add_option("--data", data, "dataset directory");
    app->add_option("--critic", critic, "frozen critic checkpoint");
    app->add_option("--out", out, "output directory");
    app->add_option("--seed", seed);
    app->add_option("--epochs", epochs);
    app->add_option("--batch", batch);
    app->add_option("--lr", lr);
    app->add_flag("--no-augment", no_augment);
    app->add_option("--lambda-wce", l_wce);
    app->add_option("--lambda-dice", l_dice);
    app->add_option("--lambda-bp", l_bp);
    app->add_option("--lambda-ap", l_ap);
    app->add_option("--lambda-bc", l_bc);
    app->add_option("--epsilon", epsilon);
    app->add_option("--b", b, "boundary half-width in radial pixels");
    app->add_option("--m", M, "soft-argmax sharpness");
    app->add_option("--sigma", sigma)->check(CLI::IsMember({"norm1", "norm2", "max"}));
  }

  [[nodiscard]] TrainConfig resolve() const {
    TrainConfig c = config.empty() ? TrainConfig{} : load_train_config(config);
    if (!data.empty()) c.paths.data = data;
    if (!critic.empty()) c.paths.critic_ckpt = critic;
    if (!out.empty()) c.paths.out = out;
    if (seed) c.seed = *seed;
    if (epochs) c.epochs = *epochs;
    if (batch) c.batch_size = *batch;
    if (lr) c.lr = *lr;
    if (no_augment) c.augment = false;
    if (l_wce) c.loss.lambda_wce = *l_wce;
    if (l_dice) c.loss.lambda_dice = *l_dice;
    if (l_bp) c.loss.lambda_bp = *l_bp;
    if (l_ap) c.loss.lambda_ap = *l_ap;
    if (l_bc) c.loss.lambda_bc = *l_bc;
    if (epsilon) c.loss.epsilon = *epsilon;
    if (M) c.loss.M = *M;
    if (b) c.loss.b = *b;
    if (sigma) c.loss.sigma = parse_sigma(*sigma);
    c.validate();
    return c;
  }
};

std::optional<Critic<float>> maybe_critic(const TrainConfig& c) {
  if (c.paths.critic_ckpt.empty()) return std::nullopt;
  return load_critic(c.paths.critic_ckpt);
}

fs::path out_dir(const TrainConfig& c) {
  fs::path p = c.paths.out.empty() ? fs::path(".") : fs::path(c.paths.out);
  fs::create_directories(p);
  return p;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << j.dump(2) << '\n';
}

int cmd_generate(int count, const std::string& out, std::uint64_t seed, int R, int A, double noise, int per_patient) {
  if (count < 1 || per_patient < 1) throw ConfigError("--count and --per-patient must be positive");
  fs::create_directories(out);
  std::vector<ManifestEntry> manifest;
  for (int i = 0; i < count; ++i) {
    PhantomConfig cfg;
    cfg.R = R;
    cfg.A = A;
    cfg.noise_level = noise;
    cfg.seed = seed * 1000003ULL + static_cast<std::uint64_t>(i);
    const Phantom ph = generate(cfg);
    std::ostringstream name;
    name << "frame_" << std::setw(5) << std::setfill('0') << i << ".rec";
    std::ostringstream pid;
    pid << "P" << std::setw(4) << std::setfill('0') << i / per_patient;
    save_record(fs::path(out) / name.str(), {ph.image, ph.labels, pid.str()});
    manifest.push_back({name.str(), pid.str()});
  }
  write_manifest(out, manifest);
  std::cerr << "wrote " << count << " phantoms to " << out << '\n';
  return 0;
}

int cmd_evaluate(const std::string& model, const std::string& data_dir, const std::string& split, double val_frac,
                 double test_frac, std::uint64_t split_seed, bool no_post, int max_wall, const std::string& out) {
  const auto net = load_segnet(model);
  const auto data = load_dataset(data_dir);
  std::vector<std::size_t> idx;
  if (split == "all") {
    for (std::size_t i = 0; i < data.size(); ++i) idx.push_back(i);
  } else {
    const auto s = split_by_patient(data, {1.0 - val_frac - test_frac, val_frac, test_frac}, split_seed);
    idx = s.indices(data, split == "train" ? Partition::Train : split == "val" ? Partition::Val : Partition::Test);
  }
  const auto ev = evaluate(net, data, idx, !no_post, max_wall);
  fs::create_directories(out);
  write_json(fs::path(out) / "report.json", ev.report.to_json());
  std::ofstream csv(fs::path(out) / "frames.csv");
  write_frame_csv(csv, ev.frames);
  std::cout << ev.report.to_json()["aggregate"].dump() << '\n';
  return 0;
}

void print_report(const json& j) {
  if (j.is_array()) {
    std::cout << std::left << std::setw(28) << "terms" << std::setw(12) << "accuracy" << std::setw(12) << "dice"
              << "mhd_px\n";
    for (const auto& r : j)
      std::cout << std::setw(28) << r.at("terms").get<std::string>() << std::setw(12)
                << r.at("accuracy").get<double>() << std::setw(12) << r.at("dice").get<double>()
                << r.at("mhd_px").get<double>() << '\n';
    return;
  }
  if (j.contains("trials")) {
    std::cout << "best: " << j.at("best").dump() << '\n';
    for (const auto& t : j.at("trials"))
      std::cout << t.at("term").get<std::string>() << " = " << t.at("value").get<double>()
                << "  dice " << t.at("val_dice").get<double>() << "  mhd " << t.at("val_mhd").get<double>() << '\n';
    return;
  }
  const auto& a = j.at("aggregate");
  std::cout << "frames " << j.at("frames") << "  accuracy " << a.at("accuracy") << "  dice " << a.at("dice")
            << "  mhd " << a.at("mhd_px") << " px (" << a.at("mhd_um") << " um)\n";
  for (const auto& [name, c] : j.at("classes").items())
    std::cout << "  " << std::left << std::setw(10) << name << " sens " << c.at("sensitivity") << "  spec "
              << c.at("specificity") << "  dice " << c.at("dice") << '\n';
  for (const auto& [name, i] : j.at("interfaces").items())
    std::cout << "  " << std::left << std::setw(14) << name << " ade " << i.at("ade_px") << " px  mhd "
              << i.at("mhd_px") << " px  missing " << i.at("missing") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polar PS-OCT vessel-wall segmentation toolkit"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic phantom dataset");
  int g_count = 200, g_R = 64, g_A = 128, g_per_patient = 10;
  double g_noise = 0.25;
  std::uint64_t g_seed = 0;
  std::string g_out;
  gen->add_option("--count", g_count);
  gen->add_option("--out", g_out)->required();
  gen->add_option("--seed", g_seed);
  gen->add_option("--r", g_R, "radial samples");
  gen->add_option("--a", g_A, "A-lines");
  gen->add_option("--noise", g_noise);
  gen->add_option("--per-patient", g_per_patient, "consecutive frames sharing a patient id");

  // train-critic
  auto* tc = app.add_subcommand("train-critic", "train the label critic on clean vs perturbed labels");
  std::string tc_data, tc_out;
  CriticTrainConfig tc_cfg;
  std::vector<int> tc_features{32, 64, 128}, tc_dense{1024, 256, 128};
  tc->add_option("--data", tc_data)->required();
  tc->add_option("--out", tc_out, "checkpoint path")->required();
  tc->add_option("--seed", tc_cfg.seed);
  tc->add_option("--steps", tc_cfg.steps);
  tc->add_option("--batch-pairs", tc_cfg.batch_pairs);
  tc->add_option("--lr", tc_cfg.lr);
  tc->add_option("--gp", tc_cfg.gp_weight);
  tc->add_option("--severity-high", tc_cfg.severity_high);
  tc->add_option("--severity-low", tc_cfg.severity_low);
  tc->add_option("--features", tc_features)->expected(3);
  tc->add_option("--dense", tc_dense)->expected(3);

  // train
  auto* tr = app.add_subcommand("train", "train the segmentation network");
  TrainFlags tr_flags;
  tr_flags.attach(tr);

  // grid-search
  auto* gs = app.add_subcommand("grid-search", "greedy coordinate search over loss weights");
  TrainFlags gs_flags;
  gs_flags.attach(gs);
  bool gs_no_zero = false;
  gs->add_flag("--no-zero", gs_no_zero, "do not try switching a term off");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score a checkpoint against labelled records");
  std::string ev_model, ev_data, ev_split = "test", ev_out = ".";
  double ev_val = 0.1, ev_test = 0.1;
  std::uint64_t ev_seed = 0;
  bool ev_no_post = false;
  int ev_max_wall = 0;
  ev->add_option("--model", ev_model)->required();
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--split", ev_split)->check(CLI::IsMember({"all", "train", "val", "test"}));
  ev->add_option("--val-fraction", ev_val);
  ev->add_option("--test-fraction", ev_test);
  ev->add_option("--seed", ev_seed, "split seed (the training seed)");
  ev->add_flag("--no-postprocess", ev_no_post);
  ev->add_option("--max-wall-px", ev_max_wall, "exclude A-lines with a thicker ground-truth wall");
  ev->add_option("--out", ev_out);

  // ablate
  auto* ab = app.add_subcommand("ablate", "nested loss-term ablation on the test split");
  TrainFlags ab_flags;
  ab_flags.attach(ab);
  std::vector<std::uint64_t> ab_seeds{0, 1, 2};
  ab->add_option("--seeds", ab_seeds);

  // report
  auto* rp = app.add_subcommand("report", "print a saved report, grid or ablation JSON");
  std::string rp_in;
  rp->add_option("input", rp_in)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_generate(g_count, g_out, g_seed, g_R, g_A, g_noise, g_per_patient);

    if (*tc) {
      const auto data = load_dataset(tc_data);
      CriticConfig arch;
      arch.R = data.at(0).image.R;
      arch.A = data.at(0).image.A;
      std::copy(tc_features.begin(), tc_features.end(), arch.features.begin());
      std::copy(tc_dense.begin(), tc_dense.end(), arch.dense.begin());
      const auto res = train_critic(data, arch, tc_cfg);
      save_critic(tc_out, res.critic);
      for (const auto& e : res.log)
        std::cerr << "step " << e.step << "  W " << e.wasserstein << "  gp " << e.penalty << '\n';
      return 0;
    }

    if (*tr) {
      const auto res = train(tr_flags.resolve());
      std::cout << "best epoch " << res.best_epoch << "  val dice " << res.best_val_dice << '\n';
      return 0;
    }

    if (*gs) {
      const TrainConfig cfg = gs_flags.resolve();
      const auto data = load_dataset(cfg.paths.data);
      const auto critic = maybe_critic(cfg);
      auto grid = GridSpec::log_spaced(!gs_no_zero);
      if (cfg.loss.lambda_ap == 0.0 && !critic) {
        grid.candidates.erase(LossTerm::Ap);
        std::cerr << "no critic given; lambda_ap stays 0\n";
      }
      const auto res = grid_search_lambda(cfg, grid, data, critic ? &*critic : nullptr);
      json j{{"best", to_json(res.best)}, {"trials", json::array()}};
      for (const auto& t : res.trials)
        j["trials"].push_back(
            {{"term", term_name(t.term)}, {"value", t.value}, {"val_dice", t.val_dice}, {"val_mhd", t.val_mhd}});
      write_json(out_dir(cfg) / "grid.json", j);
      print_report(j);
      return 0;
    }

    if (*ev) return cmd_evaluate(ev_model, ev_data, ev_split, ev_val, ev_test, ev_seed, ev_no_post, ev_max_wall, ev_out);

    if (*ab) {
      const TrainConfig cfg = ab_flags.resolve();
      const auto data = load_dataset(cfg.paths.data);
      const auto critic = maybe_critic(cfg);
      std::vector<LossTerm> order{LossTerm::Wce, LossTerm::Dice, LossTerm::Bp, LossTerm::Ap, LossTerm::Bc};
      if (!critic) {
        std::erase(order, LossTerm::Ap);
        std::cerr << "no critic given; the ap row is skipped\n";
      }
      const auto rows = ablation(cfg, order, ab_seeds, data, critic ? &*critic : nullptr);
      const json j = ablation_to_json(rows);
      write_json(out_dir(cfg) / "ablation.json", j);
      print_report(j);
      return 0;
    }

    if (*rp) {
      std::ifstream f(rp_in);
      if (!f) throw std::runtime_error("cannot open " + rp_in);
      print_report(json::parse(f));
      return 0;
    }
  } catch (const NonFiniteLoss& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
