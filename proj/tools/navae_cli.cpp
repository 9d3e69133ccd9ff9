// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// navae: command-line driver for dataset synthesis, training, enhancement,
// evaluation and the data-fraction sweep.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "navae/config.hpp"
#include "navae/data.hpp"
#include "navae/dnnwf.hpp"
#include "navae/error.hpp"
#include "navae/eval.hpp"
#include "navae/mcem.hpp"
#include "navae/nae.hpp"
#include "navae/pipeline.hpp"
#include "navae/vae.hpp"
#include "navae/wav.hpp"

namespace fs = std::filesystem;
using namespace navae;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

const std::vector<std::string> kSystems = {"vae", "navae", "dnnwf"};

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 0;
  bool quiet = false;

  RunConfig build() const {
    RunConfig cfg = config_path.empty() ? RunConfig() : RunConfig::load(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (const char* env = std::getenv("NAVAE_SEED")) cfg.set("seed", env);
    if (threads > 0) cfg.set("threads", std::to_string(threads));
    return cfg;
  }

  void log(const std::string& msg) const {
    if (!quiet) std::cerr << msg << '\n';
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key = value run configuration")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", c.overrides, "override a config key (key=value), repeatable");
  cmd->add_option("--threads", c.threads, "worker threads for MCEM (default from config)")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("-q,--quiet", c.quiet, "suppress progress output");
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  return os;
}

void require_checkpoint(const fs::path& path, const std::string& stage) {
  if (!fs::exists(path))
    throw UsageError("checkpoint " + path.string() + " not found; run `navae " + stage +
                     "` first");
}

fs::path or_default(const std::string& given, const RunConfig& cfg, const char* key) {
  return given.empty() ? fs::path(cfg.get(key)) : fs::path(given);
}

std::vector<PairedUtterance> load_split_pairs(const fs::path& manifest_path, Split split,
                                              const RunConfig& cfg) {
  const auto manifest = load_manifest(manifest_path);
  const auto entries = manifest.select(split);
  if (entries.empty())
    throw DataError("manifest " + manifest_path.string() + " has no " + to_string(split) +
                    " entries");
  const auto mixed = mix_entries(entries, cfg.get_u64("seed"));
  return to_pairs(mixed, cfg);
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::uint64_t seed = 1234;
  int n_train = 200;
  int n_eval = 40;
  double duration = 2.0;
  std::string out;
  bool force = false;
  bool seed_given = false;
};

int run_synth(const SynthArgs& a, const Common& c) {
  SynthDataOptions o;
  o.seed = a.seed;
  if (!a.seed_given) {
    if (const char* env = std::getenv("NAVAE_SEED")) {
      RunConfig probe;
      probe.set("seed", env);
      o.seed = probe.get_u64("seed");
    }
  }
  o.n_train = a.n_train;
  o.n_eval = a.n_eval;
  o.duration_s = a.duration;
  o.out_dir = a.out;
  o.force = a.force;
  const auto m = write_synth_dataset(o);
  c.log("wrote " + std::to_string(m.entries.size()) + " utterances to " + a.out);
  return 0;
}

struct TrainArgs {
  std::string manifest;
  std::string out_ckpt;
  std::string loss_log;
  std::string vae_ckpt;
  std::optional<double> fraction;
  bool warm_start = false;
};

fs::path loss_log_path(const TrainArgs& a, const fs::path& ckpt) {
  return a.loss_log.empty() ? fs::path(ckpt.string() + ".loss.csv") : fs::path(a.loss_log);
}

int run_train_vae(const TrainArgs& a, const Common& c) {
  const RunConfig cfg = c.build();
  const fs::path out = or_default(a.out_ckpt, cfg, "vae_checkpoint");
  const auto pairs = load_split_pairs(a.manifest, Split::kTrain, cfg);
  VaeModel model = new_vae(cfg);
  TrainOptions opt = vae_options(cfg);
  opt.on_epoch = [&](int e, double loss) {
    c.log("vae epoch " + std::to_string(e + 1) + " loss " + fmt(loss));
  };
  const auto hist = train_vae(model, stack_clean(pairs), opt);
  save_vae(out, model);
  auto log = open_out(loss_log_path(a, out));
  log << "epoch,loss\n";
  for (std::size_t e = 0; e < hist.epoch_loss.size(); ++e)
    log << e + 1 << ',' << fmt(hist.epoch_loss[e]) << '\n';
  return 0;
}

int run_train_nae(const TrainArgs& a, const Common& c) {
  RunConfig cfg = c.build();
  if (a.fraction) cfg.set("nae_fraction", fmt(*a.fraction));
  if (a.warm_start) cfg.set("nae_warm_start", "true");
  const fs::path vae_path = or_default(a.vae_ckpt, cfg, "vae_checkpoint");
  require_checkpoint(vae_path, "train-vae");
  const fs::path out = or_default(a.out_ckpt, cfg, "nae_checkpoint");
  const VaeModel vae = load_vae(vae_path);

  auto split = split_validation(load_split_pairs(a.manifest, Split::kTrain, cfg),
                                cfg.get_double("nae_validation_fraction"),
                                mix_seed(cfg.get_u64("seed"), 0x5E7));
  NaeOptions opt = nae_options(cfg);
  opt.validation = split.validation;
  opt.on_epoch = [&](int e, double tr, double va) {
    c.log("nae epoch " + std::to_string(e + 1) + " loss " + fmt(tr) + " heldout " + fmt(va));
  };
  const NaeResult res = train_nae(vae, split.train, opt);
  save_nae(out, res.encoder);
  auto log = open_out(loss_log_path(a, out));
  log << "epoch,loss,heldout_loss\n";
  for (std::size_t e = 0; e < res.train_loss.size(); ++e) {
    log << e + 1 << ',' << fmt(res.train_loss[e]) << ',';
    if (e < res.validation_loss.size()) log << fmt(res.validation_loss[e]);
    log << '\n';
  }
  c.log("trained on " + std::to_string(res.selected.size()) + " of " +
        std::to_string(split.train.size()) + " utterances");
  return 0;
}

int run_train_dnnwf(const TrainArgs& a, const Common& c) {
  const RunConfig cfg = c.build();
  const fs::path out = or_default(a.out_ckpt, cfg, "dnnwf_checkpoint");
  const auto pairs = load_split_pairs(a.manifest, Split::kTrain, cfg);
  MaskNet net = new_mask_net(cfg);
  MaskTrainOptions opt = dnnwf_options(cfg);
  opt.on_epoch = [&](int e, double loss) {
    c.log("dnnwf epoch " + std::to_string(e + 1) + " loss " + fmt(loss));
  };
  const auto losses = train_dnnwf(net, pairs, opt);
  save_dnnwf(out, net);
  auto log = open_out(loss_log_path(a, out));
  log << "epoch,loss\n";
  for (std::size_t e = 0; e < losses.size(); ++e) log << e + 1 << ',' << fmt(losses[e]) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct Checkpoints {
  std::string vae;
  std::string nae;
  std::string dnnwf;
};

void add_checkpoint_flags(CLI::App* cmd, Checkpoints& k) {
  cmd->add_option("--vae", k.vae, "VAE checkpoint (default: config vae_checkpoint)");
  cmd->add_option("--nae", k.nae, "noise-aware encoder checkpoint");
  cmd->add_option("--dnnwf", k.dnnwf, "mask network checkpoint");
}

void check_system(const std::string& name) {
  for (const auto& s : kSystems)
    if (s == name) return;
  std::string list;
  for (const auto& s : kSystems) list += (list.empty() ? "" : ", ") + s;
  throw UsageError("unknown system '" + name + "' (options: " + list + ")");
}

// Lazily loads whatever models the requested systems need.
class SystemFactory {
 public:
  SystemFactory(const RunConfig& cfg, const Checkpoints& k) : cfg_(cfg), k_(k) {}

  struct Output {
    Waveform speech;
    std::vector<McemIteration> diagnostics;
  };

  Output run(const std::string& system, const Waveform& noisy) {
    check_system(system);
    if (system == "dnnwf") {
      const MaskNet& net = mask();
      return {enhance_dnnwf(net, noisy, cfg_.get_int("frame_len"), cfg_.get_int("hop")), {}};
    }
    const McemConfig mc = mcem_config(cfg_);
    EnhanceResult r = system == "navae"
                          ? navae::enhance(noisy, vae(), &nae(), EncoderChoice::kNoiseAware, mc)
                          : navae::enhance(noisy, vae(), nullptr, EncoderChoice::kClean, mc);
    return {std::move(r.speech), std::move(r.mcem.diagnostics)};
  }

  void preload(const std::string& system) {
    check_system(system);
    if (system == "dnnwf") {
      mask();
    } else {
      vae();
      if (system == "navae") nae();
    }
  }

  const VaeModel& vae() {
    if (!vae_) {
      const fs::path p = or_default(k_.vae, cfg_, "vae_checkpoint");
      require_checkpoint(p, "train-vae");
      vae_ = load_vae(p);
    }
    return *vae_;
  }
  const NoiseAwareEncoder& nae() {
    if (!nae_) {
      const fs::path p = or_default(k_.nae, cfg_, "nae_checkpoint");
      require_checkpoint(p, "train-nae");
      nae_ = load_nae(p);
    }
    return *nae_;
  }
  const MaskNet& mask() {
    if (!mask_) {
      const fs::path p = or_default(k_.dnnwf, cfg_, "dnnwf_checkpoint");
      require_checkpoint(p, "train-dnnwf");
      mask_ = load_dnnwf(p);
    }
    return *mask_;
  }

 private:
  const RunConfig& cfg_;
  const Checkpoints& k_;
  std::optional<VaeModel> vae_;
  std::optional<NoiseAwareEncoder> nae_;
  std::optional<MaskNet> mask_;
};

struct EnhanceArgs {
  std::string in;
  std::string out;
  std::string system = "navae";
  std::string diagnostics;
  Checkpoints ckpt;
};

int run_enhance(const EnhanceArgs& a, const Common& c) {
  check_system(a.system);
  const RunConfig cfg = c.build();
  SystemFactory factory(cfg, a.ckpt);
  factory.preload(a.system);
  const Waveform noisy = load_wav(a.in);
  const auto result = factory.run(a.system, noisy);
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  save_wav(a.out, result.speech);
  const fs::path diag = a.diagnostics.empty() ? fs::path(a.out + ".diag.csv") : fs::path(a.diagnostics);
  auto os = open_out(diag);
  write_diagnostics_csv(os, result.diagnostics);
  return 0;
}

struct EvalArgs {
  std::string manifest;
  std::vector<std::string> systems = {"vae", "navae"};
  std::string report = "report.csv";
  Checkpoints ckpt;
};

int run_eval_cmd(const EvalArgs& a, const Common& c) {
  for (const auto& s : a.systems) check_system(s);
  const RunConfig cfg = c.build();
  SystemFactory factory(cfg, a.ckpt);
  for (const auto& s : a.systems) factory.preload(s);

  const auto manifest = load_manifest(a.manifest);
  const auto entries = manifest.select(Split::kEval);
  if (entries.empty()) throw DataError("manifest has no eval entries");
  const auto items = to_eval_items(mix_entries(entries, cfg.get_u64("seed")));

  std::vector<EvalSystem> systems;
  for (const auto& s : a.systems) {
    systems.push_back({s, [&factory, &c, s, count = std::size_t{0}](const Waveform& x) mutable {
                         c.log(s + ": utterance " + std::to_string(++count));
                         return factory.run(s, x).speech;
                       }});
  }
  const EvalReport report = run_eval(items, systems);
  auto os = open_out(a.report);
  write_report_csv(os, report);
  if (!c.quiet) write_report_csv(std::cerr, report);
  return 0;
}

struct SweepArgs {
  std::string manifest;
  std::string grid;
  std::string out_dir = "sweep";
  std::string vae_ckpt;
  bool kl_only = false;
};

int run_sweep(const SweepArgs& a, const Common& c) {
  RunConfig cfg = c.build();
  if (!a.grid.empty()) cfg.set("sweep_grid", a.grid);
  const std::vector<double> grid = cfg.get_list("sweep_grid");
  const fs::path vae_path = or_default(a.vae_ckpt, cfg, "vae_checkpoint");
  require_checkpoint(vae_path, "train-vae");
  const VaeModel vae = load_vae(vae_path);

  auto split = split_validation(load_split_pairs(a.manifest, Split::kTrain, cfg),
                                cfg.get_double("nae_validation_fraction"),
                                mix_seed(cfg.get_u64("seed"), 0x5E7));
  std::vector<EvalItem> items;
  if (!a.kl_only) {
    const auto entries = load_manifest(a.manifest).select(Split::kEval);
    if (entries.empty()) throw DataError("manifest has no eval entries");
    items = to_eval_items(mix_entries(entries, cfg.get_u64("seed")));
  }
  const auto heldout = split.validation.empty() ? std::span<const PairedUtterance>(split.train)
                                                : std::span<const PairedUtterance>(split.validation);
  fs::create_directories(a.out_dir);
  auto os = open_out(fs::path(a.out_dir) / "sweep.csv");
  os << "fraction,utterances,heldout_kl,mean_sisdr,ci95,n\n";

  const McemConfig mc = mcem_config(cfg);
  auto emit = [&](double fraction, std::size_t used, const NoiseAwareEncoder& enc) {
    const double kl = mean_alignment_kl(vae, enc, heldout);
    os << fmt(fraction) << ',' << used << ',' << fmt(kl) << ',';
    if (a.kl_only) {
      os << ",,\n";
    } else {
      std::vector<double> scores;
      for (const auto& it : items) {
        const Waveform y =
            navae::enhance(it.mixture, vae, &enc, EncoderChoice::kNoiseAware, mc).speech;
        scores.push_back(si_sdr(y, it.speech));
      }
      const MeanCi ci = scores.size() > 1 ? mean_ci(scores) : MeanCi{scores[0], 0.0};
      os << fmt(ci.mean) << ',' << fmt(ci.halfwidth) << ',' << scores.size() << '\n';
    }
    os.flush();
    c.log("fraction " + fmt(fraction) + ": heldout KL " + fmt(kl));
  };

  // Baseline: the warm-started encoder before any noisy-clean training.
  const NormStats base_norm =
      norm_stats_for(split.train, parse_norm_source(cfg.get("norm_source")));
  emit(0.0, 0, NoiseAwareEncoder::warm_start(vae, base_norm));

  for (double fraction : grid) {
    NaeOptions opt = nae_options(cfg);
    opt.fraction = fraction;
    opt.warm_start = true;
    opt.validation = split.validation;
    const NaeResult res = train_nae(vae, split.train, opt);
    char name[64];
    std::snprintf(name, sizeof(name), "nae_frac_%.4f.ckpt", fraction);
    save_nae(fs::path(a.out_dir) / name, res.encoder);
    emit(fraction, res.selected.size(), res.encoder);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"navae: noise-aware VAE speech enhancement"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "navae 0.1.0");

  Common common;

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth-data", "write a synthetic WAV corpus and manifest");
  c_synth->add_option("--seed", synth.seed, "corpus seed");
  c_synth->add_option("--n-train", synth.n_train, "number of training utterances");
  c_synth->add_option("--n-eval", synth.n_eval, "number of evaluation utterances");
  c_synth->add_option("--duration", synth.duration, "utterance length in seconds")
      ->check(CLI::PositiveNumber);
  c_synth->add_option("--out", synth.out, "output directory")->required();
  c_synth->add_flag("--force", synth.force, "allow writing into a non-empty directory");
  c_synth->add_flag("-q,--quiet", common.quiet, "suppress progress output");

  TrainArgs tv, tn, td;
  auto* c_tv = app.add_subcommand("train-vae", "train the clean-speech VAE");
  auto* c_tn = app.add_subcommand("train-nae", "train the noise-aware encoder");
  auto* c_td = app.add_subcommand("train-dnnwf", "train the supervised mask baseline");
  for (auto [cmd, args] : {std::pair{c_tv, &tv}, std::pair{c_tn, &tn}, std::pair{c_td, &td}}) {
    add_common(cmd, common);
    cmd->add_option("--manifest", args->manifest, "dataset manifest")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out-ckpt", args->out_ckpt, "checkpoint to write");
    cmd->add_option("--loss-log", args->loss_log, "loss CSV (default: <ckpt>.loss.csv)");
  }
  c_tn->add_option("--vae", tn.vae_ckpt, "trained VAE checkpoint");
  c_tn->add_option("--fraction", tn.fraction, "fraction of training utterances to use")
      ->check(CLI::Range(1e-9, 1.0));
  c_tn->add_flag("--warm-start", tn.warm_start, "initialise from the clean encoder");

  EnhanceArgs en;
  auto* c_en = app.add_subcommand("enhance", "enhance one WAV file");
  add_common(c_en, common);
  c_en->add_option("--in", en.in, "noisy input WAV")->required()->check(CLI::ExistingFile);
  c_en->add_option("--out", en.out, "enhanced output WAV")->required();
  c_en->add_option("--system", en.system, "vae | navae | dnnwf");
  c_en->add_option("--diagnostics", en.diagnostics, "MCEM CSV (default: <out>.diag.csv)");
  add_checkpoint_flags(c_en, en.ckpt);

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "SI-SDR evaluation over the eval split");
  add_common(c_ev, common);
  c_ev->add_option("--manifest", ev.manifest, "dataset manifest")
      ->required()
      ->check(CLI::ExistingFile);
  c_ev->add_option("--systems", ev.systems, "systems to compare")->delimiter(',');
  c_ev->add_option("--report", ev.report, "report CSV");
  add_checkpoint_flags(c_ev, ev.ckpt);

  SweepArgs sw;
  auto* c_sw = app.add_subcommand("sweep-fraction", "warm-started data-fraction study");
  add_common(c_sw, common);
  c_sw->add_option("--manifest", sw.manifest, "dataset manifest")
      ->required()
      ->check(CLI::ExistingFile);
  c_sw->add_option("--grid", sw.grid, "comma-separated fractions");
  c_sw->add_option("--out-dir", sw.out_dir, "directory for checkpoints and sweep.csv");
  c_sw->add_option("--vae", sw.vae_ckpt, "trained VAE checkpoint");
  c_sw->add_flag("--kl-only", sw.kl_only, "skip SI-SDR evaluation");

  try {
    app.parse(argc, argv);
    synth.seed_given = c_synth->count("--seed") > 0;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*c_synth) return run_synth(synth, common);
    if (*c_tv) return run_train_vae(tv, common);
    if (*c_tn) return run_train_nae(tn, common);
    if (*c_td) return run_train_dnnwf(td, common);
    if (*c_en) return run_enhance(en, common);
    if (*c_ev) return run_eval_cmd(ev, common);
    if (*c_sw) return run_sweep(sw, common);
  } catch (const UsageError& e) {
    std::cerr << "navae: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "navae: numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "navae: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "navae: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "navae: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}
