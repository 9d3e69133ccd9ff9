// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
// exits nonzero when any criterion fails. The end-to-end criteria share one
// trained toy pipeline, built once in a temporary directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "navae/config.hpp"
#include "navae/dnnwf.hpp"
#include "navae/dsp.hpp"
#include "navae/eval.hpp"
#include "navae/mcem.hpp"
#include "navae/nae.hpp"
#include "navae/pipeline.hpp"
#include "navae/vae.hpp"

namespace fs = std::filesystem;
using namespace navae;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Eigen::MatrixXd uniform_matrix(int rows, int cols, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return u(rng); });
}

Eigen::MatrixXd positive_matrix(int rows, int cols, std::mt19937_64& rng) {
  return uniform_matrix(rows, cols, rng, -3.0, 1.0).unaryExpr([](double e) {
    return std::pow(10.0, e);
  });
}

// ---------------------------------------------------------------- 1

Outcome stft_round_trip() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> len(kSampleRate, 4 * kSampleRate);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    Waveform w;
    w.samples.resize(len(rng));
    for (double& v : w.samples) v = nd(rng);
    const Waveform back = istft(stft(w));
    if (back.size() != w.size()) return {false, "length mismatch on signal " + std::to_string(i)};
    double err = 0.0, ref = 0.0;
    for (std::size_t n = 0; n < w.size(); ++n) {
      err += (back.samples[n] - w.samples[n]) * (back.samples[n] - w.samples[n]);
      ref += w.samples[n] * w.samples[n];
    }
    worst = std::max(worst, std::sqrt(err / ref));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && secs < 10.0,
          "worst relative error " + num(worst) + " over 100 signals, " + num(secs) + " s"};
}

// ---------------------------------------------------------------- 2

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  constexpr int kF = 33;
  std::mt19937_64 rng(202);
  std::vector<std::string> parts;
  bool ok = true;
  auto record = [&](const std::string& name, std::size_t params, const GradCheckReport& r) {
    ok = ok && params <= 10000 && r.max_rel_error <= 1e-4;
    parts.push_back(name + " " + num(r.max_rel_error) + " (" + std::to_string(params) + " params)");
  };

  const int hidden[] = {16};
  VaeModel vae = VaeModel::create(kF, 4, hidden, 5);
  const Eigen::MatrixXd frames = positive_matrix(kF, 6, rng);
  {
    const ElboGradient g = elbo_loss_and_grad(vae, frames, 7);
    Mlp* nets[] = {&vae.encoder, &vae.decoder};
    const GradBundle grads[] = {g.encoder, g.decoder};
    record("ELBO",
           vae.encoder.parameter_count() + vae.decoder.parameter_count(),
           grad_check(nets, grads, [&] { return elbo_loss(vae, frames, 7).loss; }));
  }
  {
    NoiseAwareEncoder enc = NoiseAwareEncoder::fresh(vae, 9);
    const Eigen::MatrixXd noisy = positive_matrix(kF, 6, rng);
    enc.norm = compute_norm_stats(std::span(&noisy, 1));
    const DiagGaussian target = encode(vae, frames);
    const NaeBatchGradient g = nae_loss_and_grad(enc, noisy, target);
    Mlp* nets[] = {&enc.net};
    record("alignment", enc.net.parameter_count(),
           grad_check(nets, std::span(&g.grads, 1),
                      [&] { return alignment_loss(target, encode_noisy(enc, noisy)); }));
  }
  {
    MaskNet net = MaskNet::create(kF, 16, 3, 11);
    const Eigen::MatrixXd x = positive_matrix(kF, 6, rng);
    net.norm = compute_norm_stats(std::span(&x, 1));
    const Eigen::MatrixXd target = uniform_matrix(kF, 6, rng, 0.0, 1.0);
    const MaskGradient g = mask_loss_and_grad(net, x, target);
    Mlp* nets[] = {&net.net};
    record("DNN-WF MSE", net.net.parameter_count(),
           grad_check(nets, std::span(&g.grads, 1), [&] { return mask_loss(net, x, target); }));
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 120.0;
  std::string detail;
  for (const auto& p : parts) detail += (detail.empty() ? "" : "; ") + p;
  return {ok, "max relative error: " + detail + ", " + num(secs) + " s"};
}

// ---------------------------------------------------------------- 3

Outcome kl_correctness() {
  std::mt19937_64 rng(303);
  std::normal_distribution<double> nd;
  constexpr int kD = 4, kSamples = 100000;
  double worst = 0.0;
  bool identical_zero = true;
  for (int pair = 0; pair < 50; ++pair) {
    const DiagGaussian a{uniform_matrix(kD, 1, rng, -2, 2),
                         uniform_matrix(kD, 1, rng, -1, 1).array().exp().matrix()};
    const DiagGaussian b{uniform_matrix(kD, 1, rng, -2, 2),
                         uniform_matrix(kD, 1, rng, -1, 1).array().exp().matrix()};
    double acc = 0.0;
    for (int s = 0; s < kSamples; ++s) {
      for (int d = 0; d < kD; ++d) {
        const double e = nd(rng);
        const double z = a.mean(d) + std::sqrt(a.var(d)) * e;
        const double zb = (z - b.mean(d)) * (z - b.mean(d)) / b.var(d);
        acc += 0.5 * (std::log(b.var(d) / a.var(d)) + zb - e * e);
      }
    }
    const double closed = alignment_loss(a, b);
    worst = std::max(worst, std::abs(acc / kSamples - closed) / closed);
    identical_zero = identical_zero && alignment_loss(a, a) == 0.0 && alignment_loss(b, b) == 0.0;
  }
  return {worst <= 0.01 && identical_zero,
          "worst relative gap to Monte-Carlo " + num(worst) + " over 50 pairs; KL(q||q) " +
              (identical_zero ? "exactly 0" : "nonzero")};
}

// ---------------------------------------------------------------- 4

Outcome mcem_core() {
  const auto t0 = Clock::now();
  constexpr int kF = 16, kT = 8, kK = 2, kD = 4;
  McemConfig cfg;
  cfg.rank = kK;
  cfg.mh_iters = 20;
  cfg.burn_in = 5;
  std::mt19937_64 rng(404);
  int msteps = 0, decreases = 0;
  bool positive = true;
  double worst_drop = 0.0;
  auto check_state = [&](const NmfState& s) {
    positive = positive && s.W.minCoeff() > 0.0 && s.H.minCoeff() > 0.0 && s.g.minCoeff() > 0.0;
  };
  for (int inst = 0; inst < 20; ++inst) {
    const int hidden[] = {8};
    const Mlp decoder = make_decoder(kF, kD, hidden, 500 + inst);
    const Eigen::MatrixXd power = positive_matrix(kF, kT, rng) * 5.0;
    cfg.seed = 600 + inst;
    NmfState state = init_nmf(kF, kT, cfg);
    std::vector<std::uint64_t> seeds;
    for (int t = 0; t < kT; ++t) seeds.push_back(mix_seed(cfg.seed, t));
    LatentChains chains(decoder, uniform_matrix(kD, kT, rng, -1, 1), seeds);
    for (int it = 0; it < 10; ++it) {
      const auto draws = chains.sample(power, noise_psd(state), state.g, cfg);
      // Several M-steps against the same frozen samples.
      double q = mc_objective(power, draws.speech_var, state);
      for (int m = 0; m < 3; ++m) {
        state = mstep_update(state, draws.speech_var, power);
        check_state(state);
        const double next = mc_objective(power, draws.speech_var, state);
        const double drop = q - next;
        if (drop > 1e-12 * std::abs(q)) ++decreases;
        worst_drop = std::max(worst_drop, drop / std::abs(q));
        ++msteps;
        q = next;
      }
    }
    // The driver's own bookkeeping must agree.
    cfg.em_iters = 10;
    const McemResult r =
        run_mcem(power, decoder, Eigen::MatrixXd::Zero(kD, kT), cfg);
    check_state(r.state);
    for (const auto& d : r.diagnostics) {
      if (d.q_after < d.q_before - 1e-12 * std::abs(d.q_before)) ++decreases;
      ++msteps;
    }
  }
  const double secs = seconds_since(t0);
  return {decreases == 0 && positive && secs < 60.0,
          std::to_string(decreases) + " decreases in " + std::to_string(msteps) +
              " M-steps (largest relative drop " + num(std::max(0.0, worst_drop)) +
              "); parameters " + (positive ? "all positive" : "hit zero") + ", " + num(secs) +
              " s"};
}

// ---------------------------------------------------------------- 5

Outcome mh_sampler() {
  constexpr int kF = 16, kD = 4, kKept = 100000;
  const int hidden[] = {8};
  Mlp decoder = make_decoder(kF, kD, hidden, 1);
  decoder.set_zero();  // the speech variance no longer depends on z
  McemConfig cfg;
  cfg.rank = 2;
  cfg.seed = 5;
  cfg.burn_in = 1000;
  cfg.mh_iters = kKept + cfg.burn_in;
  cfg.proposal_std = 1.0;
  NmfState state = init_nmf(kF, 1, cfg);
  state.g.setZero();
  std::mt19937_64 rng(505);
  const Eigen::MatrixXd power = positive_matrix(kF, 1, rng);
  const MhResult r =
      mh_estep(power.col(0), Eigen::VectorXd::Zero(kD), state, 0, decoder, cfg, 77);
  if (r.kept.cols() != kKept) return {false, "kept " + std::to_string(r.kept.cols()) + " samples"};
  const Eigen::VectorXd mean = r.kept.rowwise().mean();
  const Eigen::VectorXd var =
      (r.kept.colwise() - mean).array().square().rowwise().sum() / (kKept - 1);
  const double mean_err = mean.cwiseAbs().maxCoeff();
  const double var_err = (var.array() - 1.0).abs().maxCoeff();
  return {mean_err <= 0.05 && var_err <= 0.05,
          "max |mean| " + num(mean_err) + ", max |var - 1| " + num(var_err) + " over " +
              std::to_string(kKept) + " samples, acceptance " + num(r.acceptance_rate)};
}

// ---------------------------------------------------------------- 6

Outcome si_sdr_properties() {
  std::mt19937_64 rng(606);
  std::normal_distribution<double> nd;
  constexpr std::size_t kN = 16000;
  std::vector<double> s(kN), e(kN), n(kN);
  for (std::size_t i = 0; i < kN; ++i) {
    s[i] = nd(rng);
    e[i] = s[i] + 0.3 * nd(rng);
    n[i] = nd(rng);
  }
  const double base = si_sdr(e, s);
  // Power-of-two scales are exact in floating point, so the score must not move at all.
  bool exact = true;
  for (double a : {0.25, 2.0, 1024.0}) {
    std::vector<double> es(e), ss(s);
    for (auto& v : es) v *= a;
    for (auto& v : ss) v *= a;
    exact = exact && si_sdr(es, s) == base && si_sdr(e, ss) == base;
  }
  double general = 0.0;
  for (double a : {0.37, 3.1, -2.2}) {
    std::vector<double> es(e), ss(s);
    for (auto& v : es) v *= a;
    for (auto& v : ss) v *= std::abs(a);
    general = std::max({general, std::abs(si_sdr(es, s) - base), std::abs(si_sdr(e, ss) - base)});
  }
  // Orthogonal, equal-power interference.
  double sn = 0.0, ss2 = 0.0;
  for (std::size_t i = 0; i < kN; ++i) sn += s[i] * n[i], ss2 += s[i] * s[i];
  for (std::size_t i = 0; i < kN; ++i) n[i] -= sn / ss2 * s[i];
  double nn = 0.0;
  for (double v : n) nn += v * v;
  std::vector<double> mix(kN);
  for (std::size_t i = 0; i < kN; ++i) mix[i] = s[i] + n[i] * std::sqrt(ss2 / nn);
  const double zero = si_sdr(mix, s);
  return {exact && general <= 1e-9 && std::abs(zero) <= 1e-9,
          std::string("power-of-two scaling ") + (exact ? "bit-identical" : "changed the score") +
              ", other scales within " + num(general) + " dB, orthogonal equal-power case " +
              num(zero) + " dB"};
}

// ---------------------------------------------------------------- 7-9

struct Pipeline {
  RunConfig cfg;
  VaeModel vae;
  TrainValSplit split;
  std::vector<ManifestEntry> eval_entries;
  std::vector<PairedUtterance> heldout;  // eval utterances at their grid SNRs
  NaeResult nae;
  double build_seconds = 0.0;
};

Pipeline build_pipeline(const fs::path& dir) {
  const auto t0 = Clock::now();
  Pipeline p;
  const std::uint64_t seed = p.cfg.get_u64("seed");
  SynthDataOptions so;
  so.seed = seed;
  so.n_train = 200;
  so.n_eval = 40;
  so.duration_s = 2.0;
  so.out_dir = dir;
  so.force = true;
  write_synth_dataset(so);
  const DatasetManifest manifest = load_manifest(dir / kManifestName);

  const auto train_mixed = mix_entries(manifest.select(Split::kTrain), seed);
  const auto train_pairs = to_pairs(train_mixed, p.cfg);
  p.eval_entries = manifest.select(Split::kEval);
  const auto eval_mixed = mix_entries(p.eval_entries, seed);
  p.heldout = to_pairs(eval_mixed, p.cfg);

  p.vae = new_vae(p.cfg);
  TrainOptions vo = vae_options(p.cfg);
  std::fprintf(stderr, "training VAE for %d epochs\n", vo.epochs);
  train_vae(p.vae, stack_clean(train_pairs), vo);

  p.split = split_validation(train_pairs, p.cfg.get_double("nae_validation_fraction"),
                             mix_seed(seed, 0x5E7));
  NaeOptions no = nae_options(p.cfg);
  no.validation = p.split.validation;
  std::fprintf(stderr, "training noise-aware encoder for %d epochs\n", no.epochs);
  p.nae = train_nae(p.vae, p.split.train, no);
  p.build_seconds = seconds_since(t0);
  return p;
}

Outcome end_to_end(const Pipeline& p) {
  const auto t0 = Clock::now();
  const McemConfig mc = mcem_config(p.cfg);
  std::vector<ManifestEntry> at_zero = p.eval_entries;
  for (auto& e : at_zero) e.snr_db = 0.0;
  const auto mixed = mix_entries(at_zero, p.cfg.get_u64("seed"));
  std::vector<double> gains;
  for (const auto& m : mixed) {
    const Waveform y =
        navae::enhance(m.mix.mixture, p.vae, &p.nae.encoder, EncoderChoice::kNoiseAware, mc)
            .speech;
    gains.push_back(si_sdr(y, m.speech) - si_sdr(m.mix.mixture, m.speech));
  }
  const MeanCi gain = mean_ci(gains);
  const double nae_kl = mean_alignment_kl(p.vae, p.nae.encoder, p.heldout);
  const double clean_kl = mean_clean_encoder_kl(p.vae, p.heldout);
  const double secs = p.build_seconds + seconds_since(t0);
  const bool a = gain.mean >= 2.0;
  const bool b = nae_kl < clean_kl;
  return {a && b,
          "(a) " + std::string(a ? "pass" : "fail") + ": NA-VAE gain at 0 dB " + num(gain.mean) +
              " +/- " + num(gain.halfwidth) + " dB over " + std::to_string(gains.size()) +
              " utterances; (b) " + (b ? "pass" : "fail") + ": held-out KL noise-aware " +
              num(nae_kl) + " vs clean encoder " + num(clean_kl) + "; total " + num(secs) + " s"};
}

Outcome fraction_sweep(const Pipeline& p) {
  const NormStats norm =
      norm_stats_for(p.split.train, parse_norm_source(p.cfg.get("norm_source")));
  const double baseline =
      mean_alignment_kl(p.vae, NoiseAwareEncoder::warm_start(p.vae, norm), p.heldout);
  NaeOptions o = nae_options(p.cfg);
  o.fraction = 0.01;
  o.warm_start = true;
  o.validation = p.split.validation;
  const NaeResult r = train_nae(p.vae, p.split.train, o);
  const double trained = mean_alignment_kl(p.vae, r.encoder, p.heldout);
  return {trained < baseline, "1% (" + std::to_string(r.selected.size()) +
                                  " utterances) held-out KL " + num(trained) +
                                  " vs warm-start baseline " + num(baseline)};
}

Outcome architecture_parity(const Pipeline& p) {
  const std::size_t clean = p.vae.encoder.parameter_count();
  const std::size_t trained = p.nae.encoder.net.parameter_count();
  const std::size_t fresh = NoiseAwareEncoder::fresh(p.vae, 4).net.parameter_count();
  const std::size_t warm = NoiseAwareEncoder::warm_start(p.vae, NormStats{}).net.parameter_count();
  const VaeModel def = VaeModel::create_default(3);
  const std::size_t def_clean = def.encoder.parameter_count();
  const std::size_t def_nae = NoiseAwareEncoder::fresh(def, 4).net.parameter_count();
  const bool ok = trained == clean && fresh == clean && warm == clean && def_nae == def_clean;
  return {ok, "clean encoder " + std::to_string(clean) + ", noise-aware trained " +
                  std::to_string(trained) + " / fresh " + std::to_string(fresh) +
                  " / warm-started " + std::to_string(warm) + "; default build " +
                  std::to_string(def_clean) + " vs " + std::to_string(def_nae)};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments restrict the run to the listed criterion numbers.
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  std::optional<Pipeline> pipeline;
  const fs::path work = fs::temp_directory_path() / "navae_acceptance";
  auto shared = [&]() -> const Pipeline& {
    if (!pipeline) pipeline = build_pipeline(work);
    return *pipeline;
  };
  const std::vector<Criterion> criteria = {
      {1, "STFT round trip", stft_round_trip},
      {2, "gradient suite", gradient_suite},
      {3, "KL correctness", kl_correctness},
      {4, "MCEM core", mcem_core},
      {5, "MH sampler", mh_sampler},
      {6, "SI-SDR properties", si_sdr_properties},
      {7, "end-to-end toy pipeline", [&] { return end_to_end(shared()); }},
      {8, "fraction sweep", [&] { return fraction_sweep(shared()); }},
      {9, "architecture parity", [&] { return architecture_parity(shared()); }},
  };
  int failures = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    ++ran;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::error_code ec;
  fs::remove_all(work, ec);
  std::printf("%d of %d criteria passed\n", ran - failures, ran);
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
