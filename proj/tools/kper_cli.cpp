/*
 * Copyright 2026 The kper Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// kper: prepare, train, evaluate and verify the knowledge-aware recommender.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kper/checkpoint.hpp"
#include "kper/ckg.hpp"
#include "kper/config.hpp"
#include "kper/errors.hpp"
#include "kper/evaluation.hpp"
#include "kper/model.hpp"
#include "kper/seed_referencing.hpp"
#include "kper/synthetic.hpp"
#include "kper/training.hpp"
#include "kper/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitMissingInput = 2;
constexpr int kExitNonFinite = 3;

// Raised for a missing checkpoint or prepared directory.
struct MissingInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string now_iso() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw MissingInput(what + " not found: " + p.string());
}

struct Manifest {
  json doc;
  fs::path out;

  Manifest(const std::string& command, const fs::path& out_dir) : out(out_dir) {
    doc["command"] = command;
    doc["output_dir"] = out_dir.string();
    doc["started"] = now_iso();
  }
  void write() {
    doc["finished"] = now_iso();
    std::ofstream f(out / "manifest.json");
    f << doc.dump(2) << '\n';
  }
};

json config_json(const kper::TrainConfig& c) {
  json j = json::object();
  for (const auto& [k, v] : c.to_pairs()) j[k] = v;
  return j;
}

std::string fnv_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

// Hyperparameter flags shared by train; values stay strings until merged
// so that only flags the user actually passed override the config file.
struct ConfigFlags {
  std::map<std::string, std::string> values;
  std::string config_file;
  bool no_ref = false;
  bool masked = false;
  bool freeze = false;

  void attach(CLI::App* app) {
    const std::vector<std::pair<std::string, std::string>> flags = {
        {"--seed", "seed"},
        {"--d", "dim"},
        {"--K", "depth"},
        {"--l", "sample_size"},
        {"--batch", "batch_size"},
        {"--lr", "learning_rate"},
        {"--lambda1", "lambda1"},
        {"--lambda2", "lambda2"},
        {"--eta", "eta"},
        {"--tau", "tau"},
        {"--seeds-per-side", "seeds_per_side"},
        {"--seed-exclusion", "seed_exclusion"},
        {"--max-epochs", "max_epochs"},
        {"--patience", "patience"},
        {"--val-max-users", "val_max_users"},
    };
    for (const auto& [flag, key] : flags) {
      app->add_option(flag, values[key], "config key " + key);
    }
    app->add_option("--threads", values["threads"], "worker threads (default 1)")
        ->envname("KPER_THREADS");
    app->add_option("--config", config_file, "key=value config file");
    app->add_flag("--no-ref", no_ref, "disable the referencing module (v+ = v*)");
    app->add_flag("--masked", masked, "softmax over open gates only");
    app->add_flag("--freeze-negatives", freeze, "reuse one negative sample for every epoch");
  }

  kper::TrainConfig resolve() const {
    kper::TrainConfig c;
    if (!config_file.empty()) c = kper::TrainConfig::load(config_file);
    for (const auto& [k, v] : values) {
      if (!v.empty()) c.set(k, v);
    }
    if (no_ref) c.use_referencing = false;
    if (masked) c.masked_referencing = true;
    if (freeze) c.freeze_negatives = true;
    c.validate();
    return c;
  }
};

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

// --- prepare -----------------------------------------------------------------

struct PrepareArgs {
  std::string ratings, kg, out;
  std::uint64_t seed = 2026;
  bool positives_only = false;
  std::size_t seeds_per_side = 64;
  double seed_exclusion = 0.5;
};

int cmd_prepare(const PrepareArgs& a) {
  require_file(a.ratings, "ratings file");
  require_file(a.kg, "knowledge graph file");
  ensure_dir(a.out);
  Manifest manifest("prepare", a.out);
  kper::LoadOptions lo;
  lo.labeled = !a.positives_only;
  kper::LoadedGraph loaded = kper::load_ckg(a.ratings, a.kg, lo);
  std::vector<std::string> warnings = loaded.warnings;
  kper::DatasetSplit split = kper::split_dataset(loaded.graph, a.seed);
  kper::attach_evaluation_negatives(loaded.graph, split, &warnings);
  const fs::path out(a.out);
  kper::write_prepared(out, loaded.graph, split);
  kper::write_idmap(out / "idmap.tsv", loaded.ids);

  const auto train_graph = loaded.graph.with_interactions(kper::positives_of(split.train));
  const kper::SeedPool pool =
      kper::build_seed_pool(train_graph, a.seeds_per_side, a.seed_exclusion, &warnings);
  kper::write_seeds(out / "seeds.tsv", pool);
  print_warnings(warnings);

  std::cout << "users " << loaded.graph.num_users() << ", items " << loaded.graph.num_items()
            << ", entities " << loaded.graph.num_entities() << ", relations "
            << loaded.graph.num_relations() << ", triples " << loaded.graph.triples().size()
            << '\n';
  std::cout << "split train/val/test positives: " << kper::positives_of(split.train).size()
            << " / " << kper::positives_of(split.validation).size() << " / "
            << kper::positives_of(split.test).size() << '\n';

  manifest.doc["rng_seed"] = a.seed;
  manifest.doc["ratings"] = a.ratings;
  manifest.doc["kg"] = a.kg;
  manifest.doc["positives_only"] = a.positives_only;
  manifest.doc["seeds_per_side"] = a.seeds_per_side;
  manifest.doc["warnings"] = warnings;
  manifest.write();
  return 0;
}

// --- train -------------------------------------------------------------------

int cmd_train(const std::string& data_dir, const std::string& out_dir, const ConfigFlags& flags,
              const std::string& resume) {
  require_file(fs::path(data_dir) / "counts.tsv", "prepared data");
  ensure_dir(out_dir);
  const fs::path out(out_dir);
  Manifest manifest("train", out);
  const kper::PreparedData data = kper::read_prepared(data_dir);

  std::optional<kper::Trainer> trainer;
  if (!resume.empty()) {
    require_file(resume, "checkpoint");
    kper::Checkpoint ck = kper::load_checkpoint(resume);
    // flags may extend the run (max_epochs, patience, threads)
    for (const char* key : {"max_epochs", "patience", "threads"}) {
      auto it = flags.values.find(key);
      if (it != flags.values.end() && !it->second.empty()) ck.config.set(key, it->second);
    }
    trainer.emplace(data.graph, data.split, ck);
    if (fs::exists(out / "best.ckpt")) trainer->set_best(kper::load_checkpoint(out / "best.ckpt"));
  } else {
    trainer.emplace(data.graph, data.split, flags.resolve());
  }
  trainer->set_dump_path(out / "nonfinite_batch.tsv");
  const kper::TrainConfig& config = trainer->config();
  print_warnings(trainer->warnings());
  kper::write_seeds(out / "seeds.tsv", trainer->pool());
  {
    std::ofstream cf(out / "config.txt");
    cf << config.to_text();
  }

  const bool append = !resume.empty() && fs::exists(out / "train_log.tsv");
  std::ofstream log(out / "train_log.tsv", append ? std::ios::app : std::ios::trunc);
  if (!append) log << kper::epoch_log_header(config.eval_top_k) << '\n';
  std::cout << kper::epoch_log_header(config.eval_top_k) << '\n';
  try {
    trainer->train([&](const kper::EpochLog& e) {
      const std::string line = kper::format_epoch_log(e);
      log << line << '\n';
      log.flush();
      std::cout << line << std::endl;
      kper::save_checkpoint(out / "last.ckpt", trainer->checkpoint());
    });
  } catch (const kper::NonFiniteLossError& e) {
    std::cerr << "error: " << e.what() << '\n';
    manifest.doc["error"] = e.what();
    manifest.write();
    return kExitNonFinite;
  }
  kper::save_checkpoint(out / "best.ckpt", trainer->best_checkpoint());
  std::cout << "best val recall@" << config.eval_top_k << " " << trainer->best_metric()
            << " at epoch " << trainer->best_epoch() << '\n';

  manifest.doc["config_path"] = flags.config_file;
  manifest.doc["data_dir"] = data_dir;
  manifest.doc["rng_seed"] = config.seed;
  manifest.doc["config"] = config_json(config);
  manifest.doc["config_hash"] = config.hash();
  manifest.doc["epochs"] = trainer->epoch();
  manifest.doc["best_epoch"] = trainer->best_epoch();
  manifest.doc["best_val_recall"] = trainer->best_metric();
  manifest.doc["resumed_from"] = resume;
  manifest.write();
  return 0;
}

// --- evaluate / coldstart-report ---------------------------------------------

struct EvalArgs {
  std::string checkpoint, data, out, baseline;
  std::string threads;
};

struct LoadedModel {
  kper::Checkpoint ckpt;
  kper::CollaborativeKnowledgeGraph train_graph;
  kper::SeedPool pool;
  kper::ModelOptions opts;
  kper::TripleNeighborhoods nb;
  std::string id;
};

kper::EvaluationReport run_evaluation(const EvalArgs& a, const kper::PreparedData& data,
                                      bool groups_only) {
  kper::EvaluationOptions eo;
  eo.threads = a.threads.empty() ? 1 : std::stoul(a.threads);
  if (groups_only) eo.ks = {eo.group_k};
  const auto train_graph = data.graph.with_interactions(kper::positives_of(data.split.train));

  if (a.baseline == "popularity") {
    const kper::PopularityScorer scorer(train_graph);
    kper::EvaluationReport r = kper::evaluate(scorer, data.graph, data.split, eo);
    r.meta["model"] = "popularity";
    return r;
  }
  if (!a.baseline.empty()) throw std::invalid_argument("unknown baseline '" + a.baseline + "'");
  if (a.checkpoint.empty()) throw std::invalid_argument("--checkpoint or --baseline is required");
  require_file(a.checkpoint, "checkpoint");
  std::string bytes;
  {
    std::ifstream in(a.checkpoint, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    bytes = buf.str();
  }
  LoadedModel m;
  m.ckpt = kper::deserialize_checkpoint(bytes, a.checkpoint);
  if (!a.threads.empty()) m.ckpt.config.threads = eo.threads;
  m.train_graph = train_graph;
  m.pool = kper::seed_pool_for(m.train_graph, m.ckpt.config);
  if (!(m.ckpt.params.dims() == kper::model_dims(m.train_graph, m.pool, m.ckpt.config.dim))) {
    throw kper::ValidationError("checkpoint " + a.checkpoint +
                                " does not match the prepared data dimensions");
  }
  m.opts = kper::ModelOptions::from(m.ckpt.config);
  m.nb = kper::evaluation_neighborhoods(m.train_graph, m.ckpt.config);
  const kper::ModelScorer scorer(m.ckpt.params, m.pool, m.opts, m.nb);
  kper::EvaluationReport r = kper::evaluate(scorer, data.graph, data.split, eo);
  r.meta["model"] = "kper";
  r.meta["config_hash"] = m.ckpt.config.hash();
  r.meta["checkpoint_id"] = fnv_hex(bytes);
  r.meta["checkpoint_epoch"] = std::to_string(m.ckpt.epoch);
  return r;
}

int cmd_evaluate(const EvalArgs& a, bool coldstart) {
  require_file(fs::path(a.data) / "counts.tsv", "prepared data");
  ensure_dir(a.out);
  const fs::path out(a.out);
  Manifest manifest(coldstart ? "coldstart-report" : "evaluate", out);
  const kper::PreparedData data = kper::read_prepared(a.data);
  kper::EvaluationReport report = run_evaluation(a, data, coldstart);
  if (auto it = report.meta.find("auc_error"); it != report.meta.end()) {
    std::cerr << "warning: AUC undefined: " << it->second << '\n';
  }
  if (coldstart) {
    kper::EvaluationReport groups;
    groups.meta = report.meta;
    for (const auto& r : report.rows) {
      if (r.group != "all") groups.rows.push_back(r);
    }
    report = groups;
  }
  const std::string stem = coldstart ? "coldstart" : "report";
  kper::write_report_tsv(out / (stem + ".tsv"), report);
  {
    std::ofstream t(out / (stem + ".txt"));
    kper::print_report_table(t, report);
  }
  kper::print_report_table(std::cout, report);
  manifest.doc["checkpoint"] = a.checkpoint;
  manifest.doc["data_dir"] = a.data;
  manifest.doc["baseline"] = a.baseline;
  manifest.doc["report_meta"] = report.meta;
  manifest.write();
  return 0;
}

// --- verify --------------------------------------------------------------------

int cmd_verify(std::uint64_t seed, const std::vector<std::string>& suites, std::size_t draws,
               bool corrupt) {
  kper::VerifyOptions vo;
  vo.seed = seed;
  vo.draws = draws;
  vo.corrupt_gradient = corrupt;
  bool all = true;
  for (const auto& r : kper::run_verify(suites, vo)) {
    for (const auto& line : r.lines) std::cout << "  " << line << '\n';
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << std::fixed
              << std::setprecision(2) << r.seconds << " s)\n";
    all = all && r.passed;
  }
  return all ? 0 : kExitFailure;
}

// --- summarize / synth ----------------------------------------------------------

int cmd_summarize(const std::vector<std::string>& files) {
  std::vector<kper::EvaluationReport> reports;
  for (const auto& f : files) {
    require_file(f, "report");
    reports.push_back(kper::read_report_tsv(f));
  }
  std::cout << "metric\tK\tgroup\tmean\tstd\tn\n";
  for (const auto& s : kper::summarize_reports(reports)) {
    std::cout << s.key.metric << '\t' << s.key.k << '\t' << s.key.group << '\t'
              << kper::format_double(s.mean) << '\t' << kper::format_double(s.stddev) << '\t'
              << s.n << '\n';
  }
  return 0;
}

int cmd_synth(const std::string& out_dir, const std::string& scale, std::uint64_t seed) {
  ensure_dir(out_dir);
  kper::SyntheticSpec spec;
  if (scale == "lastfm") spec = kper::SyntheticSpec::lastfm_scale(seed);
  else if (scale == "tiny") spec = kper::SyntheticSpec::tiny(seed);
  else throw std::invalid_argument("unknown scale '" + scale + "'");
  const kper::SyntheticData data = kper::generate_synthetic(spec);
  kper::write_synthetic(fs::path(out_dir) / "ratings.txt", fs::path(out_dir) / "kg.txt", data);
  std::cout << "wrote " << data.ratings.size() << " ratings and " << data.triples.size()
            << " triples to " << out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kper: knowledge-aware recommender with seed referencing"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "load, remap and split a dataset");
  prepare->add_option("--ratings", prep.ratings, "user item label file")->required();
  prepare->add_option("--kg", prep.kg, "head relation tail file")->required();
  prepare->add_option("--out", prep.out, "output directory")->required();
  prepare->add_option("--seed", prep.seed, "split seed");
  prepare->add_flag("--positives-only", prep.positives_only, "ratings lines are `user item`");
  prepare->add_option("--seeds-per-side", prep.seeds_per_side, "seed pool size per side");
  prepare->add_option("--seed-exclusion", prep.seed_exclusion, "low-degree fraction never used as seeds");

  std::string train_data, train_out, resume;
  ConfigFlags flags;
  auto* train = app.add_subcommand("train", "train a model on a prepared directory");
  train->add_option("--data", train_data, "prepared directory")->required();
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--resume", resume, "continue from a last.ckpt");
  flags.attach(train);

  EvalArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "top-K, AUC, PSR and cold-start metrics");
  auto* cold = app.add_subcommand("coldstart-report", "recall per warm/normal/cold user group");
  for (auto* sub : {evaluate, cold}) {
    sub->add_option("--checkpoint", ev.checkpoint, "model checkpoint");
    sub->add_option("--data", ev.data, "prepared directory")->required();
    sub->add_option("--out", ev.out, "output directory")->required();
    sub->add_option("--baseline", ev.baseline, "built-in baseline instead of a checkpoint")
        ->check(CLI::IsMember({"popularity"}));
    sub->add_option("--threads", ev.threads, "worker threads")->envname("KPER_THREADS");
  }

  std::uint64_t verify_seed = 7;
  std::vector<std::string> suites;
  std::size_t draws = 100000;
  bool corrupt = false;
  auto* verify = app.add_subcommand("verify", "gradient, gate and metric self-checks");
  verify->add_option("--seed", verify_seed, "seed");
  verify->add_option("--suite", suites, "gradients, gates, metrics or all")
      ->check(CLI::IsMember({"gradients", "gates", "metrics", "all"}));
  verify->add_option("--draws", draws, "Monte Carlo draws per cell");
  verify->add_flag("--corrupt-gradient", corrupt)->group("");

  std::vector<std::string> report_files;
  auto* summarize = app.add_subcommand("summarize", "mean and std of several report.tsv files");
  summarize->add_option("reports", report_files, "report files")->required();

  std::string synth_out, synth_scale = "lastfm";
  std::uint64_t synth_seed = 1;
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset with planted topics");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--scale", synth_scale, "lastfm or tiny");
  synth->add_option("--seed", synth_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prepare) return cmd_prepare(prep);
    if (*train) return cmd_train(train_data, train_out, flags, resume);
    if (*evaluate) return cmd_evaluate(ev, false);
    if (*cold) return cmd_evaluate(ev, true);
    if (*verify) return cmd_verify(verify_seed, suites, draws, corrupt);
    if (*summarize) return cmd_summarize(report_files);
    if (*synth) return cmd_synth(synth_out, synth_scale, synth_seed);
  } catch (const MissingInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMissingInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
