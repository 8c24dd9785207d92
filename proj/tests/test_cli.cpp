#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "ordemo/checkpoint.hpp"
#include "ordemo/codec.hpp"
#include "ordemo/hash.hpp"
#include "ordemo/taxonomy.hpp"

using namespace ordemo;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kDataDir = ORDEMO_DATA_DIR;
const std::string kCli = ORDEMO_CLI;

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "ordemo_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run run(const std::string& args) {
  const auto out = scratch() / "stdout.txt", err = scratch() / "stderr.txt";
  const std::string cmd = kCli + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(out), read_file(err)};
}

fs::path write_json(const std::string& name, const json& doc) {
  const auto path = scratch() / name;
  std::ofstream(path) << doc.dump(2);
  return path;
}

json spec_doc(const std::string& taxonomy, std::size_t n, double p_signal, std::uint64_t seed) {
  return {{"taxonomy", kDataDir + "/taxonomies/" + taxonomy},
          {"examples_per_class", n},
          {"p_signal", p_signal},
          {"p_confuse", 0.0},
          {"sequence_length", 12},
          {"seed", seed}};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::string small_model_flags() { return "--epochs 3 --max-seq-length 12 --batch-size 16"; }

}  // namespace

TEST_CASE("synth writes the requested corpus deterministically") {
  const auto spec = write_json("spec.json", spec_doc("isear.json", 12, 0.5, 4));
  const auto before = sha256_file(spec);
  const auto a = run("synth --spec " + spec.string() + " --out " + (scratch() / "synth_a").string());
  const auto b = run("synth --spec " + spec.string() + " --out " + (scratch() / "synth_b").string());
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(sha256_file(spec) == before);
  const auto corpus = read_file(scratch() / "synth_a" / "corpus.tsv");
  CHECK(corpus == read_file(scratch() / "synth_b" / "corpus.tsv"));
  std::map<std::string, int> freq;
  for (const auto& line : lines(corpus)) ++freq[line.substr(line.find('\t') + 1)];
  CHECK(freq.size() == 7);
  for (const auto& [label, n] : freq) CHECK(n == 12);
  std::set<std::string> files;
  for (const auto& e : fs::directory_iterator(scratch() / "synth_a")) files.insert(e.path().filename());
  CHECK(files == std::set<std::string>{"corpus.tsv", "manifest.json"});

  const auto again = run("rerun --manifest " + (scratch() / "synth_a" / "manifest.json").string() + " --out " +
                         (scratch() / "synth_c").string());
  REQUIRE(again.code == 0);
  CHECK(read_file(scratch() / "synth_c" / "corpus.tsv") == corpus);

  const auto bad = write_json("bad_spec.json", {{"taxonomy", kDataDir + "/taxonomies/isear.json"}, {"p_signal", 2}});
  CHECK(run("synth --spec " + bad.string() + " --out " + (scratch() / "synth_bad").string()).code == 1);
}

TEST_CASE("train, eval and predict on a separable corpus") {
  const auto spec = write_json("sep.json", spec_doc("isear.json", 40, 1.0, 2));
  const auto out = scratch() / "train_sep";
  const auto r = run("train --synthetic " + spec.string() + " --mode ordinal-1d --epochs 30 --max-seq-length 12 --seed 4 --out " +
                     out.string());
  REQUIRE(r.code == 0);
  for (const char* f : {"final.ckpt", "best.ckpt", "state.ckpt", "history.jsonl", "manifest.json", "train.tsv",
                        "val.tsv", "test.tsv"}) {
    CHECK(fs::exists(out / f));
  }
  CHECK_FALSE(fs::exists(out / ".ordemo.lock"));
  const auto history = lines(read_file(out / "history.jsonl"));
  REQUIRE(history.size() == 30);
  CHECK(json::parse(history.back()).at("epoch") == 30);
  const auto manifest = json::parse(read_file(out / "manifest.json"));
  CHECK(manifest.at("command") == "train");
  CHECK(manifest.at("seed") == 4);
  CHECK(manifest.at("config").at("epochs") == 30);
  CHECK(manifest.at("hashes").contains("taxonomy_sha256"));
  CHECK(manifest.contains("version"));

  SUBCASE("evaluating the training split of a converged run") {
    const auto e = run("eval --checkpoint " + (out / "final.ckpt").string() + " --corpus " +
                       (out / "train.tsv").string() + " --out " + (scratch() / "eval_sep").string());
    REQUIRE(e.code == 0);
    const auto report = json::parse(read_file(scratch() / "eval_sep" / "report.json"));
    CHECK(report.at("accuracy").get<double>() >= 0.99);
    std::size_t errors = 0;
    const auto rows = lines(read_file(scratch() / "eval_sep" / "histogram.csv"));
    CHECK(rows.front() == "distance,count");
    for (std::size_t i = 1; i < rows.size(); ++i) errors += std::stoul(rows[i].substr(rows[i].find(',') + 1));
    CHECK(errors == report.at("total").get<std::size_t>() - report.at("correct").get<std::size_t>());
    CHECK(fs::exists(scratch() / "eval_sep" / "confusion.csv"));
  }
  SUBCASE("predict prints one JSON line with a taxonomy label") {
    const auto p = run("predict --checkpoint " + (out / "final.ckpt").string() + " --text \"rank4 w1 rank4\"");
    REQUIRE(p.code == 0);
    REQUIRE(lines(p.out).size() == 1);
    const auto j = json::parse(p.out);
    const auto tax = load_taxonomy_file(kDataDir + "/taxonomies/isear.json");
    CHECK(tax.find(j.at("label").get<std::string>()).has_value());
    CHECK(j.at("raw").size() == 6);
    CHECK(j.contains("rank"));
    const auto empty = run("predict --checkpoint " + (out / "final.ckpt").string() + " --text \"?!\"");
    CHECK(empty.code == 1);
    CHECK(empty.err.find("empty after tokenization") != std::string::npos);
  }
  SUBCASE("rerunning the manifest reproduces every checkpoint") {
    const auto again = scratch() / "train_sep_again";
    REQUIRE(run("rerun --manifest " + (out / "manifest.json").string() + " --out " + again.string()).code == 0);
    for (const char* f : {"final.ckpt", "best.ckpt", "state.ckpt", "train.tsv", "manifest.json"}) {
      CHECK(sha256_file(out / f) == sha256_file(again / f));
    }
    const auto via_config = scratch() / "train_sep_config";
    REQUIRE(run("train --config " + (out / "manifest.json").string() + " --out " + via_config.string()).code == 0);
    CHECK(sha256_file(out / "final.ckpt") == sha256_file(via_config / "final.ckpt"));
  }
  SUBCASE("resume continues a finished state without changing it") {
    const auto resumed = scratch() / "train_sep_resumed";
    REQUIRE(run("train --resume " + (out / "state.ckpt").string() + " --out " + resumed.string()).code == 0);
    CHECK(sha256_file(out / "final.ckpt") == sha256_file(resumed / "final.ckpt"));
  }
}

TEST_CASE("2d checkpoints predict cells on the grid") {
  const auto spec = write_json("grid.json", spec_doc("isear_grid.json", 20, 0.8, 3));
  const auto out = scratch() / "train_grid";
  REQUIRE(run("train --synthetic " + spec.string() + " --mode ordinal-2d " + small_model_flags() + " --out " +
              out.string())
              .code == 0);
  const auto p = run("predict --checkpoint " + (out / "final.ckpt").string() + " --text \"v4a3 v4a3 w2\"");
  REQUIRE(p.code == 0);
  const auto j = json::parse(p.out);
  REQUIRE(j.contains("cell"));
  for (const auto& v : j.at("cell")) {
    CHECK(v.get<int>() >= 0);
    CHECK(v.get<int>() <= 4);
  }
}

TEST_CASE("an off-grid decoding is flagged") {
  // All weights zero: the outputs are the logistic of fc3's bias, chosen to
  // decode to the unlabeled cell (2, 0).
  const auto tax = load_taxonomy_file(kDataDir + "/taxonomies/goemotions23.json");
  REQUIRE_FALSE(tax.label_at_cell({2, 0}).has_value());
  const auto vocab = Vocabulary::from_tokens({"hello"}, 1);
  ModelConfig mc;
  mc.vocab_size = vocab.size();
  mc.embed_dim = 2;
  mc.filters1 = 2;
  mc.filters2 = 2;
  mc.hidden1 = 2;
  mc.hidden2 = 2;
  mc.max_seq_length = 9;
  mc.head = HeadMode::Ordinal2D;
  mc.output_width = output_width(HeadMode::Ordinal2D, tax);
  ClassifierModel<float> model(mc);
  const float bias[] = {4, 4, -4, -4, -4, -4, -4, -4};
  for (std::size_t i = 0; i < 8; ++i) model.mutable_param(kFc3Bias)[i] = bias[i];
  const auto path = scratch() / "offgrid.ckpt";
  save_checkpoint(path, {tax, vocab, model, json::object(), std::nullopt});

  const auto p = run("predict --checkpoint " + path.string() + " --text hello");
  REQUIRE(p.code == 0);
  const auto j = json::parse(p.out);
  CHECK(j.at("off_grid") == true);
  CHECK(j.at("cell") == json::array({2, 0}));
  CHECK(j.at("label") == "disappointment");
}

TEST_CASE("validation errors exit 1 before any training") {
  const auto spec = write_json("grid_small.json", spec_doc("goemotions23.json", 5, 0.5, 1));
  const auto out = scratch() / "bad_mode";
  const auto r = run("train --synthetic " + spec.string() + " --taxonomy " + kDataDir +
                     "/taxonomies/goemotions23.json --mode ordinal-1d --out " + out.string());
  CHECK(r.code == 1);
  CHECK(r.err.find("ordinal-1d") != std::string::npos);
  CHECK_FALSE(fs::exists(out / "manifest.json"));
  CHECK_FALSE(fs::exists(out / "final.ckpt"));

  const auto missing = scratch() / "does_not_exist.ckpt";
  const auto e = run("eval --checkpoint " + missing.string() + " --corpus x.tsv --out " + (scratch() / "e").string());
  CHECK(e.code != 0);
  CHECK(e.err.find(missing.string()) != std::string::npos);
  const auto p = run("predict --checkpoint " + missing.string() + " --text hi");
  CHECK(p.code != 0);
  CHECK(p.err.find(missing.string()) != std::string::npos);

  CHECK(run("train --bogus-flag 1 --out x").code == 1);
  CHECK(run("gradcheck --preset nonsense").code == 1);
}

TEST_CASE("divergence exits 2 with a diagnostic") {
  const auto spec = write_json("div.json", spec_doc("isear.json", 10, 0.5, 1));
  const auto r = run("train --synthetic " + spec.string() + " --mode ordinal-1d --lr 1e30 " + small_model_flags() +
                     " --out " + (scratch() / "diverge").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("non-finite") != std::string::npos);
  CHECK(r.err.find("epoch 1") != std::string::npos);
}

TEST_CASE("a locked output directory is refused") {
  const auto out = scratch() / "locked";
  fs::create_directories(out);
  std::ofstream(out / ".ordemo.lock") << "1\n";
  const auto spec = write_json("lock.json", spec_doc("isear.json", 3, 0.5, 1));
  const auto r = run("synth --spec " + spec.string() + " --out " + out.string());
  CHECK(r.code == 1);
  CHECK(r.err.find("in use") != std::string::npos);
  CHECK_FALSE(fs::exists(out / "corpus.tsv"));
}

TEST_CASE("flags override the config file, which overrides the preset") {
  const auto spec = write_json("prec_spec.json", spec_doc("isear.json", 5, 0.5, 1));
  const auto config = write_json("prec.json", {{"preset", "desk"},
                                               {"epochs", 2},
                                               {"batch_size", 4},
                                               {"max_seq_length", 12},
                                               {"data", {{"synthetic", spec.string()}}}});
  const auto out = scratch() / "prec";
  REQUIRE(run("train --config " + config.string() + " --epochs 1 --out " + out.string()).code == 0);
  const auto cfg = json::parse(read_file(out / "manifest.json")).at("config");
  CHECK(cfg.at("epochs") == 1);                 // flag
  CHECK(cfg.at("batch_size") == 4);             // file
  CHECK(cfg.at("model").at("embed_dim") == 32);  // desk preset
  CHECK(lines(read_file(out / "history.jsonl")).size() == 1);

  const auto help = run("train --help");
  CHECK(help.code == 0);
  CHECK((help.out + help.err).find("preset (desk or paper) < --config file < flags") != std::string::npos);
}

TEST_CASE("gradcheck exit codes and stable reports") {
  const auto a = run("gradcheck --seed 3");
  CHECK(a.code == 0);
  CHECK(a.err.find("PASS") != std::string::npos);
  CHECK(run("gradcheck --seed 3").err == a.err);
  const auto bad = run("gradcheck --preset corrupt --seed 3");
  CHECK(bad.code == 1);
  CHECK(bad.err.find("FAIL") != std::string::npos);
}
