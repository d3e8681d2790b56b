#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"

#include "psoctseg/errors.hpp"
#include "psoctseg/phantom.hpp"
#include "psoctseg/trainer.hpp"

using namespace psoctseg;

namespace {

std::vector<Record> tiny_dataset(int frames, int per_patient) {
  std::vector<Record> data;
  for (int i = 0; i < frames; ++i) {
    PhantomConfig cfg;
    cfg.R = 32;
    cfg.A = 32;
    cfg.lumen_radius_range = {6, 9};
    cfg.intima_thickness_range = {5.5, 6.5};
    cfg.media_thickness_range = {5, 6};
    cfg.wedge_count_range = {1, 1};
    cfg.seed = 300 + i;
    const auto ph = generate(cfg);
    data.push_back({ph.image, ph.labels, "P" + std::to_string(i / per_patient)});
  }
  return data;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.loss.lambda_ap = 0.0;
  c.epochs = 2;
  c.batch_size = 4;
  c.arch.features = {4, 4, 8};
  c.arch.latent_features = 8;
  return c;
}

std::vector<std::string> ids(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("patient" + std::to_string(i));
  return out;
}

}  // namespace

TEST_CASE("patient split sizes") {
  const auto s57 = split_by_patient(ids(57), {}, 0);
  CHECK(s57.count(Partition::Train) == 45);
  CHECK(s57.count(Partition::Val) == 6);
  CHECK(s57.count(Partition::Test) == 6);
  const auto s10 = split_by_patient(ids(10), {}, 1);
  CHECK(s10.count(Partition::Train) == 8);
  CHECK(s10.count(Partition::Val) == 1);
  CHECK(s10.count(Partition::Test) == 1);
  const auto s3 = split_by_patient(ids(3), {}, 2);
  CHECK(s3.count(Partition::Train) == 1);
  CHECK_THROWS_AS(split_by_patient(ids(2), {}, 0), TooFewPatients);

  const auto a = split_by_patient(ids(20), {}, 9), b = split_by_patient(ids(20), {}, 9);
  CHECK(a.patients == b.patients);
}

TEST_CASE("no patient spans two partitions") {
  const auto data = tiny_dataset(12, 2);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = split_by_patient(data, {}, seed);
    std::set<std::string> seen[3];
    for (Partition p : {Partition::Train, Partition::Val, Partition::Test})
      for (std::size_t i : s.indices(data, p)) seen[static_cast<int>(p)].insert(data[i].patient_id);
    for (int x = 0; x < 3; ++x)
      for (int y = x + 1; y < 3; ++y)
        for (const auto& id : seen[x]) CHECK(seen[y].count(id) == 0);
  }
}

TEST_CASE("config files") {
  const auto kv = parse_key_values("# comment\nloss.lambda_bc = 0.5\nloss.sigma = max\nepochs=3\npaths.out = run dir\n");
  const auto c = TrainConfig::from_json(kv);
  CHECK(c.loss.lambda_bc == 0.5);
  CHECK(c.loss.sigma == SigmaKind::Max);
  CHECK(c.epochs == 3);
  CHECK(c.paths.out == "run dir");
  CHECK(TrainConfig::from_json(c.to_json()).to_json() == c.to_json());
  CHECK_THROWS_AS(TrainConfig::from_json(parse_key_values("lossy.x = 1")), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_json(parse_key_values("split.train = 0.5")), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_json(parse_key_values("optimizer.lr = 0")), ConfigError);

  const auto path = std::filesystem::temp_directory_path() / "psoctseg_cfg.json";
  std::ofstream(path) << R"({"batch_size": 7, "loss": {"lambda_ap": 0}})";
  const auto j = load_train_config(path);
  CHECK(j.batch_size == 7);
  CHECK(j.loss.lambda_ap == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("training needs a critic for the ap term") {
  const auto data = tiny_dataset(6, 2);
  auto cfg = tiny_config();
  cfg.loss.lambda_ap = 1.0;
  CHECK_THROWS_AS(train(cfg, data, nullptr), MissingCritic);
}

TEST_CASE("zero weights leave parameters unchanged") {
  const auto data = tiny_dataset(6, 2);
  auto cfg = tiny_config();
  cfg.epochs = 1;
  cfg.loss.lambda_wce = cfg.loss.lambda_dice = cfg.loss.lambda_bp = cfg.loss.lambda_bc = 0.0;
  const auto res = train(cfg, data, nullptr);
  // a zero-epoch run returns the initial weights for the same seed
  auto cfg0 = cfg;
  cfg0.epochs = 0;
  const auto init = train(cfg0, data, nullptr);
  const auto a = res.net.parameters(), b = init.net.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);
}

TEST_CASE("training is deterministic and logs consistent totals") {
  const auto data = tiny_dataset(10, 2);
  const auto cfg = tiny_config();
  const auto r1 = train(cfg, data, nullptr), r2 = train(cfg, data, nullptr);
  CHECK(r1.epochs.back().val_dice == r2.epochs.back().val_dice);
  CHECK(r1.best_val_dice == r2.best_val_dice);
  REQUIRE(r1.steps.size() == r2.steps.size());
  for (const auto& s : r1.steps) {
    const auto& l = cfg.loss;
    const double sum = l.lambda_wce * s.terms.wce + l.lambda_dice * s.terms.dice + l.lambda_bp * s.terms.bp +
                       l.lambda_ap * s.terms.ap + l.lambda_bc * s.terms.bc;
    CHECK(s.total == doctest::Approx(sum).epsilon(1e-6));
  }

  // checkpoint round trip keeps validation metrics
  const auto path = std::filesystem::temp_directory_path() / "psoctseg_trainer.ckpt";
  save_segnet(path, r1.net);
  const auto back = load_segnet(path);
  const auto val = r1.split.indices(data, Partition::Val);
  const auto e1 = evaluate(r1.net, data, val, false), e2 = evaluate(back, data, val, false);
  CHECK(e1.report.dice == e2.report.dice);
  CHECK(e1.report.mhd_px == e2.report.mhd_px);
  std::filesystem::remove(path);
}

TEST_CASE("grid search bookkeeping") {
  const auto data = tiny_dataset(6, 2);
  auto cfg = tiny_config();
  cfg.epochs = 1;
  GridSpec single;
  single.candidates[LossTerm::Bc] = {cfg.loss.lambda_bc};
  const auto one = grid_search_lambda(cfg, single, data, nullptr);
  CHECK(to_json(one.best) == to_json(cfg.loss));
  CHECK(one.trials.size() == 1);

  GridSpec two;
  two.order = {LossTerm::Dice, LossTerm::Bc};
  two.candidates[LossTerm::Dice] = {0.0, 1.0};
  two.candidates[LossTerm::Bc] = {0.0, 0.1, 1.0};
  const auto res = grid_search_lambda(cfg, two, data, nullptr);
  CHECK(res.trials.size() == 5);

  const auto spec = GridSpec::log_spaced();
  CHECK(spec.candidates.at(LossTerm::Bp).size() == 8);
  CHECK(spec.candidates.at(LossTerm::Bp).back() == doctest::Approx(1e3));
}

TEST_CASE("nested ablation subsets") {
  const std::vector<LossTerm> order{LossTerm::Wce, LossTerm::Dice, LossTerm::Bp, LossTerm::Ap, LossTerm::Bc};
  const auto subsets = nested_subsets(order);
  REQUIRE(subsets.size() == 5);
  for (std::size_t k = 0; k < subsets.size(); ++k) {
    CHECK(subsets[k].size() == k + 1);
    if (k > 0) CHECK(std::equal(subsets[k - 1].begin(), subsets[k - 1].end(), subsets[k].begin()));
  }

  const auto data = tiny_dataset(6, 2);
  auto cfg = tiny_config();
  cfg.epochs = 1;
  const std::vector<LossTerm> short_order{LossTerm::Wce, LossTerm::Dice};
  const std::vector<std::uint64_t> seeds{0};
  const auto rows = ablation(cfg, short_order, seeds, data, nullptr);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].label() == "wce+dice");
  CHECK(ablation_to_json(rows).size() == 2);
}
