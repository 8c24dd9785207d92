// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "metric_oracle.hpp"
#include "ordemo/app.hpp"
#include "ordemo/codec.hpp"
#include "ordemo/hash.hpp"
#include "ordemo/taxonomy.hpp"

using namespace ordemo;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kData = ORDEMO_DATA_DIR;
const fs::path kFixtures = ORDEMO_FIXTURE_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 3) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << v;
  return out.str();
}

std::string sci(double v) {
  std::ostringstream out;
  out.setf(std::ios::scientific);
  out.precision(2);
  out << v;
  return out.str();
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

fs::path workdir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "ordemo_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json spec_json(const std::string& taxonomy, std::size_t per_class, double p_signal, double p_confuse,
               std::uint64_t seed) {
  return {{"taxonomy", (kData / "taxonomies" / taxonomy).string()},
          {"examples_per_class", per_class},
          {"p_signal", p_signal},
          {"p_confuse", p_confuse},
          {"sequence_length", 16},
          {"seed", seed}};
}

TrainConfig desk(HeadMode mode, int epochs, std::uint64_t seed) {
  TrainConfig c = preset_config("desk");
  c.mode = mode;
  c.epochs = epochs;
  c.seed = seed;
  return c;
}

MetricsReport train_and_test(const TrainConfig& config, const fs::path& dir) {
  const auto trained = run_train(config, dir / "run");
  return run_eval(trained.best_checkpoint, dir / "run" / "test.tsv", std::nullopt, dir / "eval").report;
}

// 1. Reverse-mode gradients agree with central differences in double
// precision for every head and 5 seeds.
Outcome gradients() {
  const auto start = std::chrono::steady_clock::now();
  std::size_t reports = 0, failed = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto outcome = run_gradcheck("default", seed);
    for (const auto& r : outcome.reports) {
      ++reports;
      if (!r.passed() || r.tolerance > 1e-4) ++failed;
      for (const auto& layer : r.layers) worst = std::max(worst, layer.max_relative_error);
    }
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {reports == 15 && failed == 0 && seconds < 60.0,
          std::to_string(reports) + " reports, worst relative error " + sci(worst)};
}

// 2. Thermometer laws for every level count up to 32 and metric axioms on
// every shipped taxonomy plus permuted 1d taxonomies.
Outcome codec_laws() {
  std::size_t violations = 0, checks = 0;
  for (int levels = 2; levels <= 32; ++levels) {
    std::vector<OrdinalCode> codes;
    for (int k = 0; k < levels; ++k) {
      codes.push_back(encode_thermometer(k, levels));
      ++checks;
      if (decode_thermometer(codes.back().values) != k) ++violations;
    }
    for (int i = 0; i < levels; ++i) {
      for (int j = 0; j < levels; ++j) {
        double sq = 0.0;
        for (std::size_t e = 0; e < codes[i].values.size(); ++e) {
          const double d = codes[i].values[e] - codes[j].values[e];
          sq += d * d;
        }
        ++checks;
        if (sq != std::abs(i - j)) ++violations;
      }
    }
  }

  std::vector<EmotionTaxonomy> taxonomies;
  for (const char* name : {"isear.json", "isear_grid.json", "goemotions23.json"}) {
    taxonomies.push_back(load_taxonomy_file(kData / "taxonomies" / name));
  }
  for (int k = 2; k <= 32; ++k) {
    std::vector<std::string> labels;
    std::vector<int> ranks;
    for (int i = 0; i < k; ++i) {
      labels.push_back("l" + std::to_string(i));
      ranks.push_back((i + 3) % k);
    }
    taxonomies.push_back(EmotionTaxonomy::one_d(labels, ranks));
  }
  for (const auto& t : taxonomies) {
    const std::size_t n = t.size();
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        checks += 3;
        const int d = t.distance(a, b);
        if ((d == 0) != (a == b)) ++violations;
        if (d != t.distance(b, a)) ++violations;
        if (d < 0) ++violations;
        for (std::size_t c = 0; c < n; ++c) {
          ++checks;
          if (d > t.distance(a, c) + t.distance(c, b)) ++violations;
        }
      }
    }
  }
  return {violations == 0, std::to_string(checks) + " checks, " + std::to_string(violations) + " violations"};
}

// 3. Every head fits a separable 7-class corpus.
Outcome separable() {
  struct Case {
    HeadMode mode;
    const char* taxonomy;
  };
  const Case cases[] = {{HeadMode::Softmax, "isear.json"},
                        {HeadMode::Ordinal1D, "isear.json"},
                        {HeadMode::Ordinal2D, "isear_grid.json"}};
  bool pass = true;
  std::string detail;
  for (const auto& c : cases) {
    TrainConfig config = desk(c.mode, 10, 1);
    config.data.synthetic = spec_json(c.taxonomy, 200, 1.0, 0.0, 11);
    const auto report = train_and_test(config, workdir("separable_" + std::string(to_string(c.mode))));
    pass = pass && report.accuracy >= 0.95;
    detail += std::string(detail.empty() ? "" : ", ") + std::string(to_string(c.mode)) + " test accuracy " +
              fmt(report.accuracy);
  }
  return {pass, detail};
}

double far_error_fraction(const MetricsReport& r) {
  std::size_t errors = 0, far = 0;
  for (const auto& [d, n] : r.error_histogram) {
    errors += n;
    if (d >= 3) far += n;
  }
  return errors == 0 ? 0.0 : static_cast<double>(far) / errors;
}

// 4. With adjacent-rank confusion, the ordinal head makes nearer mistakes
// at matching accuracy.
Outcome ordinal_error_profile() {
  std::vector<double> acc[2], dist[2], far[2];
  const HeadMode modes[] = {HeadMode::Softmax, HeadMode::Ordinal1D};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (int m = 0; m < 2; ++m) {
      TrainConfig config = desk(modes[m], 10, seed);
      config.data.synthetic = spec_json("isear.json", 500, 0.15, 0.3, seed);
      const auto r = train_and_test(config, workdir("profile_" + std::string(to_string(modes[m])) + "_" +
                                                    std::to_string(seed)));
      acc[m].push_back(r.accuracy);
      dist[m].push_back(r.mean_error_distance);
      far[m].push_back(far_error_fraction(r));
    }
  }
  const bool nearer = mean(dist[1]) <= mean(dist[0]);
  const bool fewer_far = mean(far[1]) < mean(far[0]);
  const bool same_accuracy = std::abs(mean(acc[1]) - mean(acc[0])) <= 0.03;
  return {nearer && fewer_far && same_accuracy,
          "accuracy softmax " + fmt(mean(acc[0])) + " ordinal " + fmt(mean(acc[1])) + "; mean error distance " +
              fmt(mean(dist[0])) + " vs " + fmt(mean(dist[1])) + "; errors at distance >= 3 " + fmt(mean(far[0])) +
              " vs " + fmt(mean(far[1]))};
}

void write_corpus(const fs::path& path, const json& spec) {
  std::ofstream(path) << serialize_corpus(generate_synthetic(parse_synthetic_spec(spec, {})), CorpusFormat::Tsv);
}

// 5. Small budget on 23 grid classes: 10 training examples per class,
// 100 epochs, separate validation and test corpora.
Outcome grid_budget() {
  std::vector<double> f1[2];
  const HeadMode modes[] = {HeadMode::Softmax, HeadMode::Ordinal2D};
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto dir = workdir("budget_" + std::to_string(seed));
    write_corpus(dir / "train.tsv", spec_json("goemotions23.json", 10, 0.3, 0.3, seed));
    write_corpus(dir / "val.tsv", spec_json("goemotions23.json", 20, 0.3, 0.3, seed + 100));
    write_corpus(dir / "test.tsv", spec_json("goemotions23.json", 100, 0.3, 0.3, seed + 200));
    for (int m = 0; m < 2; ++m) {
      TrainConfig config = desk(modes[m], 100, seed);
      config.data.taxonomy = (kData / "taxonomies" / "goemotions23.json").string();
      config.data.train = (dir / "train.tsv").string();
      config.data.val = (dir / "val.tsv").string();
      config.data.test = (dir / "test.tsv").string();
      f1[m].push_back(train_and_test(config, dir / std::string(to_string(modes[m]))).macro_f1);
    }
  }
  const double gap = mean(f1[1]) - mean(f1[0]);
  return {gap >= 0.10, "macro-F1 softmax " + fmt(mean(f1[0])) + " ordinal-2d " + fmt(mean(f1[1])) + ", gap " +
                           fmt(gap)};
}

// 6. A class never seen in training still lands near its own cell. 2.4 is
// the mean L1 distance from the grid centre over all 25 cells.
Outcome holdout() {
  double uniform = 0.0;
  for (int v = 0; v < 5; ++v) {
    for (int a = 0; a < 5; ++a) uniform += l1_distance({v, a}, {2, 2});
  }
  uniform /= 25.0;

  std::vector<double> distances;
  bool pass = true;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto dir = workdir("holdout_" + std::to_string(seed));
    TrainConfig config = desk(HeadMode::Ordinal2D, 30, seed);
    config.data.synthetic = spec_json("goemotions23.json", 60, 0.3, 0.3, seed);
    config.data.holdout_labels = {"joy"};
    const auto trained = run_train(config, dir / "run");
    const auto eval = run_eval(trained.best_checkpoint, dir / "run" / "holdout.tsv", std::nullopt, dir / "eval", "joy");
    distances.push_back(eval.proximity->mean_distance);
    pass = pass && eval.proximity->examples > 0 && eval.proximity->mean_distance < uniform;
  }
  std::string per_seed;
  for (double d : distances) per_seed += (per_seed.empty() ? "" : " ") + fmt(d);
  return {pass && uniform == 2.4, "held-out joy mean grid distance " + per_seed + " (bound " + fmt(uniform, 1) + ")"};
}

// 7. Two runs of one configuration give byte-identical artifacts.
Outcome determinism() {
  std::vector<std::map<std::string, std::string>> digests;
  for (int run = 0; run < 2; ++run) {
    const auto dir = workdir("determinism_" + std::to_string(run));
    TrainConfig config = desk(HeadMode::Ordinal2D, 3, 9);
    config.data.synthetic = spec_json("goemotions23.json", 20, 0.5, 0.3, 4);
    const auto trained = run_train(config, dir / "run");
    const auto eval = run_eval(trained.best_checkpoint, dir / "run" / "test.tsv", std::nullopt, dir / "eval");
    digests.push_back({{"final.ckpt", sha256_file(trained.final_checkpoint)},
                       {"best.ckpt", sha256_file(trained.best_checkpoint)},
                       {"state.ckpt", sha256_file(trained.state_checkpoint)},
                       {"train manifest", sha256_file(trained.manifest)},
                       {"report.json", sha256_file(eval.report_json)},
                       {"confusion.csv", sha256_file(eval.confusion_csv)},
                       {"histogram.csv", sha256_file(eval.histogram_csv)},
                       {"pairs.csv", sha256_file(eval.pairs_csv)}});
  }
  std::string differing;
  for (const auto& [name, digest] : digests[0]) {
    if (digests[1].at(name) != digest) differing += " " + name;
  }
  return {differing.empty(), differing.empty() ? std::to_string(digests[0].size()) + " artifacts identical"
                                               : "differing:" + differing};
}

// 8. Report fields equal a brute-force recomputation on persisted pairs.
Outcome oracle_equivalence() {
  bool pass = true;
  std::string detail;
  const std::pair<const char*, const char*> fixtures[] = {{"pairs50_isear.csv", "isear.json"},
                                                           {"pairs50_goemotions23.csv", "goemotions23.json"}};
  for (const auto& [fixture, taxonomy_file] : fixtures) {
    const auto taxonomy = load_taxonomy_file(kData / "taxonomies" / taxonomy_file);
    const auto pairs = parse_pairs_csv(taxonomy, read_file(kFixtures / fixture));
    const auto bad = oracle::mismatches(taxonomy, report_from_pairs(taxonomy, pairs), oracle::compute(taxonomy, pairs));
    pass = pass && pairs.size() == 50 && bad.empty();
    detail += std::string(detail.empty() ? "" : ", ") + fixture + " " + std::to_string(pairs.size()) + " pairs " +
              (bad.empty() ? "match" : "mismatch in " + bad.front());
  }
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient check", gradients},
      {"codec and metric laws", codec_laws},
      {"separable sanity", separable},
      {"ordinal error profile", ordinal_error_profile},
      {"2d grid at small budget", grid_budget},
      {"held-out proximity", holdout},
      {"determinism", determinism},
      {"metric oracle equivalence", oracle_equivalence},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(number)) continue;
    Outcome outcome;
    const auto start = std::chrono::steady_clock::now();
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!outcome.pass) ++failures;
    std::printf("criterion %d %s: %s (%s; %.1fs)\n", number, criteria[i].first, outcome.pass ? "PASS" : "FAIL",
                outcome.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
