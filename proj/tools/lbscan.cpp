// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

// lbscan command-line tool.
//
// Exit codes: 0 success, 1 runtime failure (tolerance violation, unreadable
// checkpoint, non-finite loss), 2 invalid flags.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "lbscan/checkpoint.hpp"
#include "lbscan/config.hpp"
#include "lbscan/cost_model.hpp"
#include "lbscan/engine.hpp"
#include "lbscan/erf.hpp"
#include "lbscan/errors.hpp"
#include "lbscan/harness.hpp"
#include "lbscan/model.hpp"
#include "lbscan/rng.hpp"
#include "lbscan/synthdata.hpp"
#include "lbscan/train.hpp"

namespace {

using namespace lbscan;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr std::uint64_t kTestSeed = 999999;

// Flag values that only fail after parsing (unknown variant names and such).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<std::size_t> env_workers() {
  const char* s = std::getenv("LBSCAN_WORKERS");
  if (s == nullptr || *s == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0' || v == 0) throw UsageError(fmt::format("LBSCAN_WORKERS='{}' is not a positive integer", s));
  return static_cast<std::size_t>(v);
}

std::size_t workers_or_env(std::size_t flag) { return env_workers().value_or(flag); }

const CLI::Validator kAtLeastOne(
    [](std::string& v) {
      return v.find_first_not_of("0") == std::string::npos ? std::string("must be >= 1")
                                                           : std::string();
    },
    ">=1");

std::vector<Variant> parse_variants(const std::vector<std::string>& names) {
  std::vector<Variant> out;
  for (const std::string& n : names) {
    try {
      out.push_back(parse_variant(n));
    } catch (const std::invalid_argument&) {
      throw UsageError(fmt::format("unknown variant '{}' (forward|global_bidir|lbm)", n));
    }
  }
  return out;
}

std::vector<Precision> parse_precisions(const std::string& s) {
  if (s == "single") return {Precision::single_};
  if (s == "double") return {Precision::double_};
  if (s == "both") return {Precision::single_, Precision::double_};
  throw UsageError(fmt::format("unknown precision '{}' (single|double|both)", s));
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path);
}

ModelConfig load_model_config(const std::string& path, std::size_t default_classes) {
  KeyValues kv = path.empty() ? desk_config().to_key_values() : read_key_values_file(path);
  if (kv.find("num_classes") == kv.end()) kv["num_classes"] = std::to_string(default_classes);
  ModelConfig c = ModelConfig::from_key_values(kv);
  c.validate();
  return c;
}

// ---- verify ---------------------------------------------------------------

struct VerifyOpts {
  harness::VerifyConfig grid;
  std::vector<std::string> variants{"forward", "global_bidir", "lbm"};
  std::string precision = "both";
};

int cmd_verify(VerifyOpts o) {
  o.grid.variants = parse_variants(o.variants);
  o.grid.precisions = parse_precisions(o.precision);
  if (auto w = env_workers()) o.grid.workers = {*w};
  const std::vector<harness::VerifyRow> rows = harness::run_verify(o.grid);

  std::map<std::pair<Variant, Precision>, double> worst;
  std::size_t failures = 0;
  for (const harness::VerifyRow& r : rows) {
    double& w = worst[{r.variant, r.precision}];
    w = std::max(w, r.max_rel_error);
    if (!r.pass) {
      ++failures;
      std::cerr << fmt::format("FAIL {} {} L={} M={} workers={} rel_err={:.3e}\n",
                               to_string(r.variant), to_string(r.precision), r.length,
                               r.tile_len, r.workers, r.max_rel_error);
    }
  }
  std::cout << "variant,precision,max_rel_error,tolerance\n";
  for (const auto& [key, err] : worst) {
    std::cout << fmt::format("{},{},{:.3e},{:.0e}\n", to_string(key.first),
                             to_string(key.second), err, harness::verify_tolerance(key.second));
  }

  // With one-element tiles the local backward scan is empty.
  const bool has_unit_tile =
      std::find(o.grid.tiles.begin(), o.grid.tiles.end(), 1) != o.grid.tiles.end();
  const bool has_pair =
      std::find(o.grid.variants.begin(), o.grid.variants.end(), Variant::lbm) !=
          o.grid.variants.end() &&
      std::find(o.grid.variants.begin(), o.grid.variants.end(), Variant::forward) !=
          o.grid.variants.end();
  if (has_unit_tile && has_pair) {
    bool same = true;
    for (std::size_t L : o.grid.lengths) {
      const ScanParams<double> p =
          harness::random_scan_params(o.grid.seed, o.grid.batch, L, o.grid.inner, o.grid.state);
      const engine::TilePlan plan = engine::TilePlan::make(L, 1);
      const engine::ScanEngine eng(o.grid.workers.front());
      same = same && eng.lbm(p, plan).y.storage() == eng.forward(p, plan).y.storage();
    }
    std::cout << fmt::format("M=1: lbm and forward outputs {}\n", same ? "identical" : "DIFFER");
    if (!same) ++failures;
  }
  std::cout << fmt::format("{} checks, {} failures\n", rows.size(), failures);
  return failures == 0 ? 0 : kExitFailure;
}

// ---- bench ----------------------------------------------------------------

struct BenchOpts {
  harness::BenchConfig cfg;
  std::vector<std::string> variants{"forward", "lbm", "global_bidir"};
  std::string precision = "single";
  std::string out;
};

int cmd_bench(BenchOpts o) {
  o.cfg.variants = parse_variants(o.variants);
  const std::vector<Precision> p = parse_precisions(o.precision);
  if (p.size() != 1) throw UsageError("bench takes --precision single or double");
  o.cfg.precision = p.front();
  o.cfg.workers = workers_or_env(o.cfg.workers);
  const std::vector<harness::BenchRow> rows = harness::run_bench(o.cfg);
  std::string csv = harness::bench_csv_header() + "\n";
  for (const harness::BenchRow& r : rows) csv += harness::bench_csv_row(r) + "\n";
  if (o.out.empty()) {
    std::cout << csv;
  } else {
    write_text(o.out, csv);
  }
  return 0;
}

// ---- train ----------------------------------------------------------------

struct TrainOpts {
  std::string task = "local";
  std::string config;
  std::optional<std::size_t> steps;
  std::uint64_t seed = 1;
  std::string ckpt;
  std::string log;
  std::size_t eval = 1000;
  std::size_t workers = 1;
};

int cmd_train(const TrainOpts& o) {
  if (o.task != "local" && o.task != "global") {
    throw UsageError(fmt::format("unknown task '{}' (local|global)", o.task));
  }
  ModelConfig mc;
  train::TrainConfig tc;
  try {
    mc = load_model_config(o.config, 2);
    tc = train::TrainConfig::from_key_values(o.config.empty() ? KeyValues{}
                                                               : read_key_values_file(o.config));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (mc.image_size != synth::kImageSize || mc.channels != 1) {
    throw UsageError(fmt::format("the synthetic tasks need image_size={} and channels=1",
                                 synth::kImageSize));
  }
  if (o.steps) tc.steps = *o.steps;
  const std::size_t workers = workers_or_env(o.workers);

  Model model = make_model(mc, o.seed);
  std::unique_ptr<std::ofstream> file;
  std::ostream* log = &std::cout;
  if (!o.log.empty()) {
    file = std::make_unique<std::ofstream>(o.log);
    if (!*file) throw std::runtime_error("cannot write " + o.log);
    log = file.get();
  }
  *log << "step,lr,loss,accuracy\n";
  std::size_t started = 0;
  try {
    train::fit(
        model, tc,
        [&](std::size_t k) {
          started = k + 1;
          synth::Dataset d = synth::gen_task(o.task, 1000003ull * o.seed + k, tc.batch);
          return train::Batch{std::move(d.images), std::move(d.labels)};
        },
        [&](const train::LogRow& r) {
          *log << fmt::format("{},{:.6g},{:.6f},{:.4f}\n", r.step, r.lr, r.loss, r.accuracy);
          log->flush();
        },
        workers);
  } catch (const train::TrainingError& e) {
    // Steps are numbered from 1 as in the log; 0 means no step completed.
    std::cerr << fmt::format("error: training diverged at step {} ({}); last good step {}\n",
                             started, e.what(), started - 1);
    return kExitFailure;
  }
  if (o.eval > 0) {
    const synth::Dataset test = synth::gen_task(o.task, kTestSeed, o.eval);
    const double acc = train::evaluate(model, test.images, test.labels, 64, workers);
    std::cerr << fmt::format("test_accuracy={:.4f} (n={})\n", acc, o.eval);
  }
  if (!o.ckpt.empty()) io::save_checkpoint(o.ckpt, model);
  return 0;
}

// ---- erf ------------------------------------------------------------------

struct ErfOpts {
  std::string ckpt;
  std::string out;
  std::string csv;
  std::optional<std::size_t> token;
  std::size_t images = 8;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
};

int cmd_erf(const ErfOpts& o) {
  Model model;
  try {
    model = io::load_checkpoint(o.ckpt);
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  const ModelConfig& c = model.config;
  TensorD imgs;
  if (c.image_size == synth::kImageSize && c.channels == 1) {
    imgs = synth::gen_task("global", o.seed, o.images).images;
  } else {
    Rng rng(o.seed);
    imgs = TensorD({o.images, c.image_size, c.image_size, c.channels});
    for (double& v : imgs.storage()) v = rng.normal();
  }
  const std::size_t workers = workers_or_env(o.workers);
  const std::size_t token = o.token.value_or(erf::center_token(c));
  const erf::ErfMap map = erf::compute_erf(model, imgs, token, workers);
  write_text(o.out, erf::to_pgm(map.heat));
  if (!o.csv.empty()) write_text(o.csv, erf::to_csv(map.heat));
  std::cout << fmt::format("token {} of {}, heatmap {}x{} written to {}\n", map.token,
                           c.seq_len(), map.heat.dim(1), map.heat.dim(0), o.out);
  return 0;
}

// ---- flops ----------------------------------------------------------------

struct FlopsOpts {
  std::string config;
  std::vector<std::size_t> lengths;
  std::size_t tile_len = 16;
  std::size_t batch = 1, inner = 128, state = 16;
};

int cmd_flops(const FlopsOpts& o) {
  if (!o.lengths.empty()) {
    for (std::size_t L : o.lengths) {
      std::vector<CostReport> reports;
      for (Variant v : {Variant::forward, Variant::lbm, Variant::global_bidir}) {
        reports.push_back(cost::count_scan_cost(v, o.batch, L, o.inner, o.state, o.tile_len));
      }
      std::cout << fmt::format("L={} M={} B={} E={} N={}\n", L, o.tile_len, o.batch, o.inner,
                               o.state)
                << cost::format_table(reports)
                << fmt::format("lbm/forward flops {:.4f}\n\n",
                               double(reports[1].flops) / double(reports[0].flops));
    }
    return 0;
  }
  ModelConfig c;
  try {
    c = load_model_config(o.config, desk_config().num_classes);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::cout << cost::format_model_table(c, cost::count_model_cost(c));
  return 0;
}

// ---- data -----------------------------------------------------------------

struct DataOpts {
  std::string task = "local";
  std::uint64_t seed = 1;
  std::size_t n = 1000;
  std::string out;
};

int cmd_data(const DataOpts& o) {
  if (o.task != "local" && o.task != "global") {
    throw UsageError(fmt::format("unknown task '{}' (local|global)", o.task));
  }
  synth::write_dataset(o.out, synth::gen_task(o.task, o.seed, o.n));
  std::cout << fmt::format("{} {} samples written to {}\n", o.n, o.task, o.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locally bi-directional selective scan: verification, benchmarks, training"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "lbscan 0.1.0");

  VerifyOpts vo;
  auto* verify = app.add_subcommand("verify", "Check the parallel engine against the oracle");
  verify->add_option("--l", vo.grid.lengths, "Sequence lengths")
      ->delimiter(',')->check(kAtLeastOne);
  verify->add_option("--m", vo.grid.tiles, "Tile lengths")->delimiter(',')->check(kAtLeastOne);
  verify->add_option("--workers", vo.grid.workers, "Worker counts")
      ->delimiter(',')->check(kAtLeastOne);
  verify->add_option("--variants", vo.variants, "forward,global_bidir,lbm")->delimiter(',');
  verify->add_option("--precision", vo.precision, "single|double|both");
  verify->add_option("--seed", vo.grid.seed, "Random seed");

  BenchOpts bo;
  auto* bench = app.add_subcommand("bench", "Time the fused scan kernel per variant");
  bench->add_option("--l", bo.cfg.length, "Sequence length")->check(kAtLeastOne);
  bench->add_option("--m", bo.cfg.tile_len, "Tile length (0 = automatic)")
      ->check(CLI::NonNegativeNumber);
  bench->add_option("--workers", bo.cfg.workers, "Worker threads")->check(kAtLeastOne);
  bench->add_option("--reps", bo.cfg.reps, "Timed repetitions")->check(kAtLeastOne);
  bench->add_option("--batch", bo.cfg.batch, "Batch size")->check(kAtLeastOne);
  bench->add_option("--inner", bo.cfg.inner, "Inner dimension E")->check(kAtLeastOne);
  bench->add_option("--state", bo.cfg.state, "State dimension N")->check(kAtLeastOne);
  bench->add_option("--variants", bo.variants, "Variants to time")->delimiter(',');
  bench->add_option("--precision", bo.precision, "single|double");
  bench->add_option("--seed", bo.cfg.seed, "Random seed");
  bench->add_option("--out", bo.out, "CSV output path (default stdout)");

  TrainOpts to;
  auto* trn = app.add_subcommand("train", "Train a classifier on a synthetic task");
  trn->add_option("--task", to.task, "local|global");
  trn->add_option("--config", to.config, "key=value file (model and training keys)")
      ->check(CLI::ExistingFile);
  trn->add_option("--steps", to.steps, "Override the number of steps");
  trn->add_option("--seed", to.seed, "Initialization and data seed");
  trn->add_option("--ckpt", to.ckpt, "Checkpoint output path");
  trn->add_option("--log", to.log, "CSV log path (default stdout)");
  trn->add_option("--eval", to.eval, "Held-out samples to evaluate (0 = skip)");
  trn->add_option("--workers", to.workers, "Worker threads")->check(kAtLeastOne);

  ErfOpts eo;
  auto* erfc = app.add_subcommand("erf", "Render the effective receptive field of a checkpoint");
  erfc->add_option("--ckpt", eo.ckpt, "Checkpoint path")->required();
  erfc->add_option("--out", eo.out, "PGM output path")->required();
  erfc->add_option("--csv", eo.csv, "Optional CSV output path");
  erfc->add_option("--token", eo.token, "Output token (default: grid center)");
  erfc->add_option("--images", eo.images, "Images to average over")->check(kAtLeastOne);
  erfc->add_option("--seed", eo.seed, "Image seed");
  erfc->add_option("--workers", eo.workers, "Worker threads")->check(kAtLeastOne);

  FlopsOpts fo;
  auto* flops = app.add_subcommand("flops", "Report analytic FLOP and traffic counts");
  flops->add_option("--config", fo.config, "Model config file (default: desk config)")
      ->check(CLI::ExistingFile);
  flops->add_option("--l", fo.lengths, "Scan-kernel table for these lengths instead")
      ->delimiter(',')->check(kAtLeastOne);
  flops->add_option("--m", fo.tile_len, "Tile length for --l")->check(kAtLeastOne);
  flops->add_option("--batch", fo.batch, "Batch for --l")->check(kAtLeastOne);
  flops->add_option("--inner", fo.inner, "Inner dimension for --l")->check(kAtLeastOne);
  flops->add_option("--state", fo.state, "State dimension for --l")->check(kAtLeastOne);

  DataOpts dopt;
  auto* data = app.add_subcommand("data", "Write a synthetic dataset (LBDS format)");
  data->add_option("--task", dopt.task, "local|global");
  data->add_option("--seed", dopt.seed, "Dataset seed");
  data->add_option("--n", dopt.n, "Number of samples")->check(kAtLeastOne);
  data->add_option("--out", dopt.out, "Output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*verify) return cmd_verify(vo);
    if (*bench) return cmd_bench(bo);
    if (*trn) return cmd_train(to);
    if (*erfc) return cmd_erf(eo);
    if (*flops) return cmd_flops(fo);
    if (*data) return cmd_data(dopt);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
